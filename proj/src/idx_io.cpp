#include "fedsim/idx_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::ifstream& in, const std::string& path, const char* field) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) {
        throw IoError(path + ": truncated while reading " + field);
    }
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::string hex32(std::uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("cannot open " + images_path);
    const std::uint32_t img_magic = read_be32(img, images_path, "magic");
    if (img_magic != kImagesMagic) {
        throw FormatError(images_path + ": expected image magic " + hex32(kImagesMagic) +
                          ", found " + hex32(img_magic));
    }
    const std::uint32_t count = read_be32(img, images_path, "count");
    const std::uint32_t rows = read_be32(img, images_path, "rows");
    const std::uint32_t cols = read_be32(img, images_path, "cols");

    const std::size_t pixels = static_cast<std::size_t>(count) * rows * cols;
    std::vector<unsigned char> raw(pixels);
    img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels));
    if (static_cast<std::size_t>(img.gcount()) != pixels) {
        throw IoError(images_path + ": truncated pixel data (" + std::to_string(img.gcount()) +
                      " of " + std::to_string(pixels) + " bytes)");
    }

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("cannot open " + labels_path);
    const std::uint32_t lab_magic = read_be32(lab, labels_path, "magic");
    if (lab_magic != kLabelsMagic) {
        throw FormatError(labels_path + ": expected label magic " + hex32(kLabelsMagic) +
                          ", found " + hex32(lab_magic));
    }
    const std::uint32_t lab_count = read_be32(lab, labels_path, "count");
    if (lab_count != count) {
        throw ConsistencyError(images_path + " holds " + std::to_string(count) + " images but " +
                               labels_path + " holds " + std::to_string(lab_count) + " labels");
    }
    std::vector<unsigned char> raw_labels(lab_count);
    lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(lab_count));
    if (static_cast<std::size_t>(lab.gcount()) != lab_count) {
        throw IoError(labels_path + ": truncated label data");
    }

    Dataset out;
    out.inputs = Tensor({count, static_cast<std::size_t>(rows) * cols});
    for (std::size_t i = 0; i < pixels; ++i) {
        out.inputs.data[i] = static_cast<double>(raw[i]) / 255.0;
    }
    out.labels.reserve(lab_count);
    int max_label = 0;
    for (unsigned char l : raw_labels) {
        out.labels.push_back(static_cast<int>(l));
        max_label = std::max(max_label, static_cast<int>(l));
    }
    out.num_classes = std::max(max_label + 1, 2);
    out.validate();
    return out;
}

void write_idx(const Dataset& dataset, std::size_t rows, std::size_t cols,
               const std::string& images_path, const std::string& labels_path) {
    dataset.validate();
    if (rows * cols != dataset.input_dim()) {
        throw std::invalid_argument("write_idx: rows*cols does not match input_dim");
    }

    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw IoError("cannot open " + images_path + " for writing");
    write_be32(img, kImagesMagic);
    write_be32(img, static_cast<std::uint32_t>(dataset.size()));
    write_be32(img, static_cast<std::uint32_t>(rows));
    write_be32(img, static_cast<std::uint32_t>(cols));
    std::vector<unsigned char> raw(dataset.inputs.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double q = std::round(dataset.inputs.data[i] * 255.0);
        raw[i] = static_cast<unsigned char>(std::min(255.0, std::max(0.0, q)));
    }
    img.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!img) throw IoError("failed writing " + images_path);

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("cannot open " + labels_path + " for writing");
    write_be32(lab, kLabelsMagic);
    write_be32(lab, static_cast<std::uint32_t>(dataset.size()));
    std::vector<unsigned char> raw_labels(dataset.size());
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
        raw_labels[i] = static_cast<unsigned char>(dataset.labels[i]);
    }
    lab.write(reinterpret_cast<const char*>(raw_labels.data()),
              static_cast<std::streamsize>(raw_labels.size()));
    if (!lab) throw IoError("failed writing " + labels_path);
}

}  // namespace fedsim
