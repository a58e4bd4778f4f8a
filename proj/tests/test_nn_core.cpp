#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "fedsim/adam.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/mlp.hpp"
#include "fedsim/ref_kernels.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

ModelParams scalar_params(double w) {
    ModelParams p;
    p.entries.push_back({"w", Tensor({1}, {w})});
    return p;
}

Tensor random_batch(std::size_t rows, std::size_t cols, Rng& rng) {
    Tensor t({rows, cols});
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

std::vector<int> random_labels(std::size_t rows, int classes, Rng& rng) {
    std::vector<int> labels(rows);
    for (auto& l : labels) l = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
    return labels;
}

Tensor label_tensor(const std::vector<int>& labels) {
    Tensor t({labels.size()});
    for (std::size_t i = 0; i < labels.size(); ++i) t[i] = labels[i];
    return t;
}

// Loss evaluated through the serial reference path only; the gradient check
// below must stay independent of the implementation it validates.
double oracle_loss(const ModelParams& p, const MlpArchitecture& arch, const Tensor& x,
                   const std::vector<int>& labels) {
    return ref::mean_cross_entropy(ref::forward(p, arch, x), labels);
}

// Smallest |preactivation| of any hidden unit over the batch. Central
// differences straddle the ReLU kink when this is ~h, so such draws are
// rejected.
double min_hidden_preactivation(const ModelParams& p, const MlpArchitecture& arch,
                                const Tensor& x) {
    double min_abs = 1e300;
    Tensor acts = x;
    const auto dims = arch.layer_dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const Tensor& w = p.entries[2 * l].tensor;
        const Tensor& b = p.entries[2 * l + 1].tensor;
        Tensor next({acts.dim(0), dims[l].second});
        for (std::size_t r = 0; r < acts.dim(0); ++r) {
            for (std::size_t o = 0; o < dims[l].second; ++o) {
                double z = b[o];
                for (std::size_t i = 0; i < dims[l].first; ++i) z += acts.at(r, i) * w.at(i, o);
                min_abs = std::min(min_abs, std::abs(z));
                next.at(r, o) = std::max(0.0, z);
            }
        }
        acts = std::move(next);
    }
    return min_abs;
}

double finite_difference_max_rel_error(const MlpArchitecture& arch, std::uint64_t seed) {
    Rng rng(seed);
    ModelParams params = init_params(arch, seed);
    const Tensor x = random_batch(4, arch.input_dim, rng);
    const std::vector<int> labels = random_labels(4, static_cast<int>(arch.num_classes), rng);

    const auto lg = loss_and_grad(params, arch, x, label_tensor(labels));

    const double h = 1e-5;
    double max_rel = 0.0;
    for (std::size_t e = 0; e < params.entries.size(); ++e) {
        for (std::size_t i = 0; i < params.entries[e].tensor.size(); ++i) {
            ModelParams plus = params;
            ModelParams minus = params;
            plus.entries[e].tensor[i] += h;
            minus.entries[e].tensor[i] -= h;
            const double numeric =
                (oracle_loss(plus, arch, x, labels) - oracle_loss(minus, arch, x, labels)) /
                (2.0 * h);
            const double analytic = lg.grads.entries[e].tensor[i];
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-4});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace

TEST_CASE("tensor shape and data stay consistent") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.all_finite());
    t.at(1, 2) = 5.0;
    CHECK(t.data[5] == 5.0);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("forward with zero parameters is uniform over classes") {
    MlpArchitecture arch{4, {3}, 5};
    ModelParams zero = zeros_like(init_params(arch, 1));
    Rng rng(3);
    const Tensor x = random_batch(6, 4, rng);
    const Tensor probs = forward(zero, arch, x);
    for (std::size_t r = 0; r < 6; ++r) {
        for (std::size_t c = 0; c < 5; ++c) {
            CHECK(probs.at(r, c) == doctest::Approx(0.2).epsilon(1e-12));
        }
    }
}

TEST_CASE("saturated logits give near-one-hot probabilities") {
    MlpArchitecture arch{1, {}, 2};
    ModelParams p;
    p.entries.push_back({"fc1.weight", Tensor({1, 2}, {10.0, -10.0})});
    p.entries.push_back({"fc1.bias", Tensor({2})});
    const Tensor x({1, 1}, {1.0});
    const Tensor probs = forward(p, arch, x);
    CHECK(probs.at(0, 0) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(probs.at(0, 1) == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("forward rows sum to one across random instances") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed * 13 + 1);
        MlpArchitecture arch{2 + rng.index(6), {2 + rng.index(5)}, 2 + static_cast<std::size_t>(rng.index(6))};
        ModelParams params = init_params(arch, seed);
        const Tensor x = random_batch(3, arch.input_dim, rng);
        const Tensor probs = forward(params, arch, x);
        for (std::size_t r = 0; r < probs.dim(0); ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < probs.dim(1); ++c) {
                sum += probs.at(r, c);
                CHECK(probs.at(r, c) > 0.0);
                CHECK(probs.at(r, c) < 1.0);
            }
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("parallel forward matches the serial reference bit for bit") {
    MlpArchitecture arch{9, {7, 6}, 4};
    ModelParams params = init_params(arch, 77);
    Rng rng(5);
    const Tensor x = random_batch(11, 9, rng);
    const Tensor a = forward(params, arch, x);
    const Tensor b = ref::forward(params, arch, x);
    REQUIRE(a.data.size() == b.data.size());
    for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("forward rejects mismatched parameter structure") {
    MlpArchitecture arch{4, {3}, 5};
    ModelParams params = init_params(arch, 1);
    MlpArchitecture other{4, {2}, 5};
    Rng rng(1);
    const Tensor x = random_batch(2, 4, rng);
    CHECK_THROWS_AS(forward(params, other, x), ShapeError);
}

TEST_CASE("loss of a perfect prediction is near zero") {
    MlpArchitecture arch{1, {}, 2};
    ModelParams p;
    p.entries.push_back({"fc1.weight", Tensor({1, 2}, {20.0, -20.0})});
    p.entries.push_back({"fc1.bias", Tensor({2})});
    const Tensor x({1, 1}, {1.0});
    const Tensor y({1}, {0.0});
    const auto lg = loss_and_grad(p, arch, x, y);
    CHECK(lg.loss >= 0.0);
    CHECK(lg.loss == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("loss of a uniform prediction equals ln(C)") {
    MlpArchitecture arch{3, {}, 7};
    ModelParams zero = zeros_like(init_params(arch, 1));
    Rng rng(9);
    const Tensor x = random_batch(5, 3, rng);
    const Tensor y = label_tensor(random_labels(5, 7, rng));
    const auto lg = loss_and_grad(zero, arch, x, y);
    CHECK(std::abs(lg.loss - std::log(7.0)) <= 1e-9);
}

TEST_CASE("loss_and_grad rejects an empty batch") {
    MlpArchitecture arch{3, {}, 2};
    ModelParams params = init_params(arch, 1);
    const Tensor x({0, 3});
    const Tensor y({0});
    CHECK_THROWS_AS(loss_and_grad(params, arch, x, y), std::invalid_argument);
}

TEST_CASE("one-hot and index labels produce identical results") {
    MlpArchitecture arch{4, {3}, 3};
    ModelParams params = init_params(arch, 21);
    Rng rng(2);
    const Tensor x = random_batch(5, 4, rng);
    const std::vector<int> labels = random_labels(5, 3, rng);
    Tensor onehot({5, 3});
    for (std::size_t r = 0; r < 5; ++r) onehot.at(r, static_cast<std::size_t>(labels[r])) = 1.0;
    const auto a = loss_and_grad(params, arch, x, label_tensor(labels));
    const auto b = loss_and_grad(params, arch, x, onehot);
    CHECK(a.loss == b.loss);
    for (std::size_t e = 0; e < a.grads.entries.size(); ++e) {
        for (std::size_t i = 0; i < a.grads.entries[e].tensor.size(); ++i) {
            CHECK(a.grads.entries[e].tensor[i] == b.grads.entries[e].tensor[i]);
        }
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    // 20 accepted random instances; draws whose hidden preactivations sit on
    // the ReLU kink are skipped (the numeric quotient is invalid there).
    int accepted = 0;
    for (std::uint64_t seed = 100; accepted < 20 && seed < 400; ++seed) {
        MlpArchitecture arch{5, {4}, 3};
        Rng rng(seed);
        ModelParams params = init_params(arch, seed);
        const Tensor x = random_batch(4, 5, rng);
        if (min_hidden_preactivation(params, arch, x) < 1e-3) continue;
        ++accepted;
        CHECK(finite_difference_max_rel_error(arch, seed) <= 1e-4);
    }
    CHECK(accepted == 20);
}

TEST_CASE("adam first step from fresh state moves by -lr * sign(g)") {
    AdamConfig cfg;
    const ModelParams p = scalar_params(1.5);
    ModelParams g = scalar_params(0.5);
    const auto out = adam_step(p, g, AdamState::fresh(p), cfg);
    CHECK(out.state.step_count == 1);
    const double delta = out.params.entries[0].tensor[0] - 1.5;
    CHECK(std::abs(delta - (-0.001)) <= 1e-6);
}

TEST_CASE("adam with zero gradient leaves parameters and v untouched") {
    AdamConfig cfg;
    const ModelParams p = scalar_params(2.0);
    const auto out = adam_step(p, scalar_params(0.0), AdamState::fresh(p), cfg);
    CHECK(out.params.entries[0].tensor[0] == 2.0);
    CHECK(out.state.second_moment.entries[0].tensor[0] == 0.0);
}

TEST_CASE("ten adam steps match a straight-line scalar recurrence") {
    AdamConfig cfg;
    const double g = 0.3;
    ModelParams p = scalar_params(1.0);
    AdamState state = AdamState::fresh(p);
    for (int t = 1; t <= 10; ++t) {
        auto out = adam_step(p, scalar_params(g), state, cfg);
        p = std::move(out.params);
        state = std::move(out.state);
    }

    // Independent scalar re-implementation of the recurrence.
    double w = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 10; ++t) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        const double m_hat = m / (1.0 - std::pow(cfg.beta1, t));
        const double v_hat = v / (1.0 - std::pow(cfg.beta2, t));
        w -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
    CHECK(std::abs(p.entries[0].tensor[0] - w) <= 1e-12);
    CHECK(state.step_count == 10);
}

TEST_CASE("adam rejects non-finite gradients") {
    AdamConfig cfg;
    const ModelParams p = scalar_params(1.0);
    ModelParams g = scalar_params(std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(adam_step(p, g, AdamState::fresh(p), cfg), NumericError);
}

TEST_CASE("second moment stays non-negative over random step sequences") {
    AdamConfig cfg;
    Rng rng(31);
    MlpArchitecture arch{3, {2}, 2};
    ModelParams p = init_params(arch, 17);
    AdamState state = AdamState::fresh(p);
    for (int t = 0; t < 50; ++t) {
        ModelParams g = zeros_like(p);
        for (auto& e : g.entries) {
            for (double& x : e.tensor.data) x = rng.uniform(-3.0, 3.0);
        }
        auto out = adam_step(p, g, state, cfg);
        p = std::move(out.params);
        state = std::move(out.state);
        for (const auto& e : state.second_moment.entries) {
            for (double x : e.tensor.data) CHECK(x >= 0.0);
        }
    }
}

TEST_CASE("capture_variance averages the tail of the last epoch") {
    auto snap = [](double v) {
        ModelParams p;
        p.entries.push_back({"w", Tensor({1}, {v})});
        return p;
    };

    SUBCASE("identical snapshots pass through") {
        std::vector<ModelParams> hist{snap(0.7), snap(0.7), snap(0.7)};
        const auto est = capture_variance(hist, 3);
        CHECK(est.values.entries[0].tensor[0] == doctest::Approx(0.7).epsilon(1e-15));
    }
    SUBCASE("four steps average the last two") {
        std::vector<ModelParams> hist{snap(1.0), snap(2.0), snap(3.0), snap(5.0)};
        CHECK(capture_variance(hist, 4).values.entries[0].tensor[0] == 4.0);
    }
    SUBCASE("single-step epoch returns that snapshot exactly") {
        std::vector<ModelParams> hist{snap(0.25)};
        CHECK(capture_variance(hist, 1).values.entries[0].tensor[0] == 0.25);
    }
    SUBCASE("only the final epoch's tail is used") {
        // Two epochs of two steps; S = 2 -> mean of the last ceil(2/2)=1 step.
        std::vector<ModelParams> hist{snap(9.0), snap(9.0), snap(1.0), snap(3.0)};
        CHECK(capture_variance(hist, 2).values.entries[0].tensor[0] == 3.0);
    }
    SUBCASE("empty history is rejected") {
        std::vector<ModelParams> hist;
        CHECK_THROWS_AS(capture_variance(hist, 1), std::invalid_argument);
    }
    SUBCASE("streaming accumulator matches the list form bit for bit") {
        std::vector<ModelParams> hist{snap(0.1), snap(0.4), snap(0.9), snap(1.6), snap(2.5)};
        const auto direct = capture_variance(hist, 5);
        VarianceAccumulator acc(5, hist[0]);
        for (const auto& s : hist) acc.add(s);
        CHECK(acc.finish().values.entries[0].tensor[0] == direct.values.entries[0].tensor[0]);
    }
}

TEST_CASE("init_params is deterministic with zero biases and bounded weights") {
    MlpArchitecture arch{6, {4}, 3};
    const ModelParams a = init_params(arch, 123);
    const ModelParams b = init_params(arch, 123);
    const ModelParams c = init_params(arch, 124);

    REQUIRE(structure_compatible(a, b));
    bool any_diff = false;
    for (std::size_t e = 0; e < a.entries.size(); ++e) {
        for (std::size_t i = 0; i < a.entries[e].tensor.size(); ++i) {
            CHECK(a.entries[e].tensor[i] == b.entries[e].tensor[i]);
            if (a.entries[e].tensor[i] != c.entries[e].tensor[i]) any_diff = true;
        }
    }
    CHECK(any_diff);

    const auto dims = arch.layer_dims();
    for (std::size_t l = 0; l < dims.size(); ++l) {
        const double bound = std::sqrt(6.0 / static_cast<double>(dims[l].first + dims[l].second));
        for (double w : a.entries[2 * l].tensor.data) {
            CHECK(std::abs(w) <= bound);
        }
        for (double bias : a.entries[2 * l + 1].tensor.data) CHECK(bias == 0.0);
    }
}
