#include "fedsim/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

Dataset generate_synthetic(std::size_t n, int num_classes, std::size_t input_dim,
                           double cluster_spread, std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("generate_synthetic: num_classes must be >= 2");
    if (input_dim == 0) throw std::invalid_argument("generate_synthetic: input_dim must be positive");
    if (n < static_cast<std::size_t>(num_classes)) {
        throw std::invalid_argument("generate_synthetic: need at least one sample per class");
    }
    if (cluster_spread < 0.0) {
        throw std::invalid_argument("generate_synthetic: cluster_spread must be >= 0");
    }

    Rng rng(splitmix64(seed));

    // Unit-norm class centers drawn from an isotropic Gaussian.
    std::vector<std::vector<double>> centers(static_cast<std::size_t>(num_classes));
    for (auto& c : centers) {
        c.resize(input_dim);
        double norm2 = 0.0;
        for (double& v : c) {
            v = rng.normal();
            norm2 += v * v;
        }
        const double inv = 1.0 / std::sqrt(std::max(norm2, 1e-30));
        for (double& v : c) v *= inv;
    }

    Dataset out;
    out.num_classes = num_classes;
    out.inputs = Tensor({n, input_dim});
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Interleaved labels keep class counts balanced within +-1.
        const int label = static_cast<int>(i % static_cast<std::size_t>(num_classes));
        out.labels[i] = label;
        const auto& mu = centers[static_cast<std::size_t>(label)];
        double* row = &out.inputs.data[i * input_dim];
        for (std::size_t d = 0; d < input_dim; ++d) {
            row[d] = mu[d] + cluster_spread * rng.normal();
        }
    }
    out.validate();
    return out;
}

}  // namespace fedsim
