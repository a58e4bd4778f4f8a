#include "fedsim/model.hpp"

#include <stdexcept>
#include <unordered_set>

#include "fedsim/errors.hpp"

namespace fedsim {

std::size_t ModelParams::scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.tensor.size();
    return n;
}

const Tensor* ModelParams::find(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return &e.tensor;
    }
    return nullptr;
}

void ModelParams::validate_names() const {
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.name).second) {
            throw std::invalid_argument("duplicate parameter name: " + e.name);
        }
    }
}

bool structure_compatible(const ModelParams& a, const ModelParams& b) {
    if (a.entries.size() != b.entries.size()) return false;
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        if (a.entries[i].name != b.entries[i].name) return false;
        if (a.entries[i].tensor.shape != b.entries[i].tensor.shape) return false;
    }
    return true;
}

void require_compatible(const ModelParams& a, const ModelParams& b, const std::string& context) {
    if (structure_compatible(a, b)) return;
    std::string detail = context + ": incompatible parameter structures";
    if (a.entries.size() != b.entries.size()) {
        detail += " (" + std::to_string(a.entries.size()) + " vs " +
                  std::to_string(b.entries.size()) + " entries)";
    } else {
        for (std::size_t i = 0; i < a.entries.size(); ++i) {
            if (a.entries[i].name != b.entries[i].name ||
                a.entries[i].tensor.shape != b.entries[i].tensor.shape) {
                detail += " (entry " + std::to_string(i) + ": " + a.entries[i].name + " " +
                          shape_to_string(a.entries[i].tensor.shape) + " vs " +
                          b.entries[i].name + " " + shape_to_string(b.entries[i].tensor.shape) + ")";
                break;
            }
        }
    }
    throw ShapeError(detail);
}

ModelParams zeros_like(const ModelParams& like) {
    ModelParams out;
    out.entries.reserve(like.entries.size());
    for (const auto& e : like.entries) {
        out.entries.push_back({e.name, Tensor::zeros(e.tensor.shape)});
    }
    return out;
}

}  // namespace fedsim
