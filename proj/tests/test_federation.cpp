#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fedsim/errors.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/ref_kernels.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/synthetic.hpp"

using namespace fedsim;

namespace {

// Labels-only dataset; partitioners never look at the feature values.
Dataset label_dataset(const std::vector<std::size_t>& per_class) {
    Dataset d;
    d.num_classes = static_cast<int>(per_class.size());
    std::size_t n = 0;
    for (std::size_t c : per_class) n += c;
    d.inputs = Tensor({n, 1});
    d.labels.reserve(n);
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        for (std::size_t i = 0; i < per_class[c]; ++i) d.labels.push_back(static_cast<int>(c));
    }
    return d;
}

std::set<int> distinct_labels(const Dataset& d, const std::vector<int>& indices) {
    std::set<int> labels;
    for (int i : indices) labels.insert(d.labels[static_cast<std::size_t>(i)]);
    return labels;
}

std::vector<std::size_t> per_class_count(const Dataset& d, const std::vector<int>& indices) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(d.num_classes), 0);
    for (int i : indices) counts[static_cast<std::size_t>(d.labels[static_cast<std::size_t>(i)])]++;
    return counts;
}

void check_soundness(const Dataset& d, const DatasetPartition& part, bool full_coverage) {
    part.validate(d);  // disjoint, in-range, non-empty
    if (full_coverage) {
        std::size_t total = 0;
        for (const auto& c : part.client_indices) total += c.size();
        CHECK(total == d.size());
    }
}

ClientUpdate make_update(int id, std::size_t n_k, const std::vector<double>& w,
                         const std::vector<double>& v) {
    ClientUpdate u;
    u.client_id = id;
    u.sample_count = n_k;
    u.params.entries.push_back({"w", Tensor({w.size()}, w)});
    u.variance.values.entries.push_back({"w", Tensor({v.size()}, v)});
    return u;
}

std::vector<ClientUpdate> random_updates(int k, std::size_t scalars, Rng& rng) {
    std::vector<ClientUpdate> updates;
    for (int i = 0; i < k; ++i) {
        std::vector<double> w(scalars), v(scalars);
        for (auto& x : w) x = rng.uniform(-5.0, 5.0);
        for (auto& x : v) x = rng.uniform(0.0, 2.0);
        updates.push_back(make_update(i, 1 + rng.index(100), w, v));
    }
    return updates;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
    if (!structure_compatible(a, b)) return false;
    for (std::size_t e = 0; e < a.entries.size(); ++e) {
        for (std::size_t i = 0; i < a.entries[e].tensor.size(); ++i) {
            if (a.entries[e].tensor[i] != b.entries[e].tensor[i]) return false;
        }
    }
    return true;
}

double max_param_diff(const ModelParams& a, const ModelParams& b) {
    double m = 0.0;
    for (std::size_t e = 0; e < a.entries.size(); ++e) {
        for (std::size_t i = 0; i < a.entries[e].tensor.size(); ++i) {
            m = std::max(m, std::abs(a.entries[e].tensor[i] - b.entries[e].tensor[i]));
        }
    }
    return m;
}

}  // namespace

TEST_CASE("iid partition gives every client an equal slice of each class") {
    // MNIST geometry: 60k samples, 10 classes, 10 clients -> 600 per class.
    const Dataset d = label_dataset(std::vector<std::size_t>(10, 6000));
    const auto part = partition_iid(d, 10, 42);
    check_soundness(d, part, true);
    for (const auto& client : part.client_indices) {
        CHECK(client.size() == 6000);
        for (std::size_t c : per_class_count(d, client)) CHECK(c == 600);
    }
}

TEST_CASE("iid partition with one client keeps everything") {
    const Dataset d = label_dataset({30, 20, 10});
    const auto part = partition_iid(d, 1, 7);
    check_soundness(d, part, true);
    CHECK(part.client_indices[0].size() == 60);
}

TEST_CASE("iid partition divides 4x100 over five clients exactly") {
    const Dataset d = label_dataset(std::vector<std::size_t>(4, 100));
    const auto part = partition_iid(d, 5, 3);
    check_soundness(d, part, true);
    for (const auto& client : part.client_indices) {
        CHECK(client.size() == 80);
        for (std::size_t c : per_class_count(d, client)) CHECK(c == 20);
    }
}

TEST_CASE("iid partition rejects more clients than samples") {
    const Dataset d = label_dataset({3, 3});
    CHECK_THROWS_AS(partition_iid(d, 7, 1), std::invalid_argument);
}

TEST_CASE("noniid partition: 10 classes, 10 clients, 2 shards each") {
    const Dataset d = label_dataset(std::vector<std::size_t>(10, 600));
    const auto part = partition_noniid(d, 10, 2, 5);
    check_soundness(d, part, true);
    for (const auto& client : part.client_indices) {
        CHECK(client.size() == 600);  // 1/10 of the data
        CHECK(distinct_labels(d, client).size() == 2);
    }
}

TEST_CASE("noniid partition with classes_per_client = num_classes degenerates") {
    const Dataset d = label_dataset(std::vector<std::size_t>(4, 50));
    const auto part = partition_noniid(d, 5, 4, 11);
    check_soundness(d, part, true);
    for (const auto& client : part.client_indices) {
        CHECK(client.size() == 40);  // still balanced in counts
        CHECK(distinct_labels(d, client).size() <= 4);
    }
}

TEST_CASE("noniid partition handles the 4-class 5-client geometry") {
    const Dataset d = label_dataset(std::vector<std::size_t>(4, 100));
    const auto part = partition_noniid(d, 5, 2, 19);
    check_soundness(d, part, true);
    for (const auto& client : part.client_indices) {
        CHECK(distinct_labels(d, client).size() <= 2);
        CHECK(client.size() == 80);  // 400/5, balanced within +-1
    }
}

TEST_CASE("noniid partition rejects infeasible geometry") {
    const Dataset d = label_dataset(std::vector<std::size_t>(10, 10));
    // 3 clients x 1 class each cannot cover 10 classes.
    CHECK_THROWS_AS(partition_noniid(d, 3, 1, 2), std::invalid_argument);
}

TEST_CASE("noniid partition stays sound over random feasible configs") {
    // Exact +-1 balance needs the class count to divide K * classes_per_client
    // (otherwise some geometry forces a shard bundle away from the quota and
    // the partitioner correctly reports infeasibility).
    Rng rng(404);
    for (int t = 0; t < 25; ++t) {
        const int classes = 2 + static_cast<int>(rng.index(6));
        const int cpc = 2;
        const int clients = classes * (1 + static_cast<int>(rng.index(3)));
        const std::size_t per_class = 40 + rng.index(50);
        const Dataset d = label_dataset(std::vector<std::size_t>(static_cast<std::size_t>(classes), per_class));
        const auto part = partition_noniid(d, clients, cpc, rng.next_u64());
        check_soundness(d, part, true);
        std::size_t lo = d.size(), hi = 0;
        for (const auto& client : part.client_indices) {
            CHECK(distinct_labels(d, client).size() <= static_cast<std::size_t>(cpc));
            lo = std::min(lo, client.size());
            hi = std::max(hi, client.size());
        }
        CHECK(hi - lo <= 1);
    }
}

TEST_CASE("unbalanced partition starves one client onto few classes") {
    const Dataset d = label_dataset(std::vector<std::size_t>(10, 500));
    const auto part = partition_unbalanced(d, 4, 1, 0.02, 2, 99);
    check_soundness(d, part, true);
    const auto& starved = part.client_indices[1];
    CHECK(starved.size() == 100);  // floor(0.02 * 5000)
    CHECK(distinct_labels(d, starved).size() <= 2);
    for (int i : {0, 2, 3}) {
        CHECK(part.client_indices[static_cast<std::size_t>(i)].size() > 10 * starved.size());
    }
}

TEST_CASE("unbalanced partition approaches IID counts in the limit") {
    const Dataset d = label_dataset(std::vector<std::size_t>(5, 200));
    const double fraction = 1.0 / 4.0 - 1e-6;
    const auto part = partition_unbalanced(d, 4, 0, fraction, 5, 12);
    check_soundness(d, part, true);
    const double ideal = 1000.0 / 4.0;
    for (const auto& client : part.client_indices) {
        CHECK(std::abs(static_cast<double>(client.size()) - ideal) <= 5.0);
    }
}

TEST_CASE("unbalanced partition stays sound over random configs") {
    Rng rng(1234);
    for (int t = 0; t < 50; ++t) {
        const int classes = 2 + static_cast<int>(rng.index(8));
        const int clients = 2 + static_cast<int>(rng.index(7));
        const std::size_t per_class = 50 + rng.index(100);
        const Dataset d = label_dataset(std::vector<std::size_t>(static_cast<std::size_t>(classes), per_class));
        const int starved = static_cast<int>(rng.index(static_cast<std::size_t>(clients)));
        const int starved_classes = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
        // Keep the demanded fraction inside both 1/K and the chosen classes' capacity.
        const double cap = std::min(1.0 / clients, static_cast<double>(starved_classes) / classes);
        const double fraction = rng.uniform(4.0 / static_cast<double>(d.size()), 0.9 * cap);
        const auto part =
            partition_unbalanced(d, clients, starved, fraction, starved_classes, rng.next_u64());
        check_soundness(d, part, true);
        CHECK(distinct_labels(d, part.client_indices[static_cast<std::size_t>(starved)]).size() <=
              static_cast<std::size_t>(starved_classes));
    }
}

TEST_CASE("unbalanced partition rejects a fraction that yields no samples") {
    const Dataset d = label_dataset({50, 50});
    CHECK_THROWS_AS(partition_unbalanced(d, 4, 0, 1e-4, 1, 3), std::invalid_argument);
}

TEST_CASE("fedavg aggregation hand examples") {
    SUBCASE("equal sample counts average evenly") {
        const auto out = aggregate_fedavg({make_update(0, 10, {1.0}, {1.0}),
                                           make_update(1, 10, {3.0}, {1.0})});
        CHECK(out.entries[0].tensor[0] == doctest::Approx(2.0).epsilon(1e-15));
    }
    SUBCASE("sample counts weight the mean") {
        const auto out = aggregate_fedavg({make_update(0, 1, {0.0}, {1.0}),
                                           make_update(1, 3, {4.0}, {1.0})});
        CHECK(out.entries[0].tensor[0] == doctest::Approx(3.0).epsilon(1e-15));
    }
    SUBCASE("empty update list is rejected") {
        CHECK_THROWS_AS(aggregate_fedavg({}), std::invalid_argument);
    }
    SUBCASE("structure mismatch is a shape error") {
        auto a = make_update(0, 1, {1.0}, {1.0});
        auto b = make_update(1, 1, {1.0, 2.0}, {1.0, 1.0});
        CHECK_THROWS_AS(aggregate_fedavg({a, b}), ShapeError);
    }
}

TEST_CASE("precision-weighted aggregation hand example from the weighting formula") {
    // (1/1*2 + 1/3*6) / (1/1 + 1/3) = 3
    const auto out = aggregate_precision_weighted(
        {make_update(0, 5, {2.0}, {1.0}), make_update(1, 5, {6.0}, {3.0})}, 0.0);
    CHECK(out.entries[0].tensor[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("precision-weighted rejects negative variances") {
    auto bad = make_update(0, 5, {1.0}, {-0.5});
    CHECK_THROWS_AS(aggregate_precision_weighted({bad}, 1e-9), std::invalid_argument);
}

TEST_CASE("aggregators match the loop-based reference oracles") {
    Rng rng(2024);
    for (int t = 0; t < 30; ++t) {
        const int k = 1 + static_cast<int>(rng.index(10));
        const auto updates = random_updates(k, 1 + rng.index(200), rng);
        const auto fa = aggregate_fedavg(updates);
        const auto fa_ref = ref::aggregate_fedavg(updates);
        CHECK(max_param_diff(fa, fa_ref) <= 1e-12);
        const double eps = 1e-9;
        const auto pw = aggregate_precision_weighted(updates, eps);
        const auto pw_ref = ref::aggregate_precision_weighted(updates, eps);
        CHECK(max_param_diff(pw, pw_ref) <= 1e-12);
    }
}

TEST_CASE("equal variances reduce precision weighting to the unweighted mean") {
    Rng rng(5150);
    std::vector<ClientUpdate> updates;
    const std::size_t scalars = 64;
    std::vector<double> shared_v(scalars);
    for (auto& v : shared_v) v = rng.uniform(0.1, 1.0);
    for (int i = 0; i < 4; ++i) {
        std::vector<double> w(scalars);
        for (auto& x : w) x = rng.uniform(-2.0, 2.0);
        updates.push_back(make_update(i, 50, w, shared_v));  // equal n_k as well
    }
    const auto pw = aggregate_precision_weighted(updates, 1e-9);
    const auto fa = aggregate_fedavg(updates);
    CHECK(max_param_diff(pw, fa) <= 1e-12);
}

TEST_CASE("aggregating a single update is the identity, bit for bit") {
    Rng rng(8);
    const auto updates = random_updates(1, 37, rng);
    CHECK(params_equal(aggregate_fedavg(updates), updates[0].params));
    CHECK(params_equal(aggregate_precision_weighted(updates, 1e-9), updates[0].params));
}

TEST_CASE("aggregated scalars stay inside the client envelope") {
    Rng rng(31337);
    for (int t = 0; t < 10; ++t) {
        const auto updates = random_updates(2 + static_cast<int>(rng.index(6)), 50, rng);
        const auto fa = aggregate_fedavg(updates);
        const auto pw = aggregate_precision_weighted(updates, 1e-9);
        for (std::size_t i = 0; i < 50; ++i) {
            double lo = 1e300, hi = -1e300;
            for (const auto& u : updates) {
                lo = std::min(lo, u.params.entries[0].tensor[i]);
                hi = std::max(hi, u.params.entries[0].tensor[i]);
            }
            CHECK(fa.entries[0].tensor[i] >= lo - 1e-12);
            CHECK(fa.entries[0].tensor[i] <= hi + 1e-12);
            CHECK(pw.entries[0].tensor[i] >= lo - 1e-12);
            CHECK(pw.entries[0].tensor[i] <= hi + 1e-12);
        }
    }
}

TEST_CASE("scaling all variances by a constant leaves the weighting unchanged") {
    Rng rng(777);
    auto updates = random_updates(5, 80, rng);
    for (auto& u : updates) {
        for (auto& e : u.variance.values.entries) {
            for (double& v : e.tensor.data) v += 0.05;  // keep away from zero
        }
    }
    const auto base = aggregate_precision_weighted(updates, 0.0);
    auto scaled = updates;
    for (auto& u : scaled) {
        for (auto& e : u.variance.values.entries) {
            for (double& v : e.tensor.data) v *= 137.0;
        }
    }
    const auto after = aggregate_precision_weighted(scaled, 0.0);
    CHECK(max_param_diff(base, after) <= 1e-10);
}

TEST_CASE("client sampling honors the fraction and the seed") {
    SUBCASE("full participation") {
        const auto ids = sample_round_clients(7, 1.0, 4, 1);
        CHECK(ids.size() == 7);
        for (int i = 0; i < 7; ++i) CHECK(ids[static_cast<std::size_t>(i)] == i);
    }
    SUBCASE("C=0.1 with 100 clients selects exactly 10") {
        const auto ids = sample_round_clients(100, 0.1, 4, 3);
        CHECK(ids.size() == 10);
        CHECK(std::is_sorted(ids.begin(), ids.end()));
    }
    SUBCASE("the max(.,1) floor keeps one client") {
        CHECK(sample_round_clients(10, 0.05, 4, 1).size() == 1);
    }
    SUBCASE("same seeds give identical draws") {
        CHECK(sample_round_clients(20, 0.4, 9, 5) == sample_round_clients(20, 0.4, 9, 5));
    }
    SUBCASE("participation frequency is near the fraction") {
        std::vector<int> hits(10, 0);
        const int rounds = 1000;
        for (int r = 1; r <= rounds; ++r) {
            for (int id : sample_round_clients(10, 0.5, 123, r)) hits[static_cast<std::size_t>(id)]++;
        }
        for (int h : hits) {
            const double freq = static_cast<double>(h) / rounds;
            CHECK(freq >= 0.4);
            CHECK(freq <= 0.6);
        }
    }
}

TEST_CASE("client_train with one full batch matches a single manual step") {
    const Dataset data = generate_synthetic(24, 3, 6, 0.4, 55);
    std::vector<int> indices(24);
    for (int i = 0; i < 24; ++i) indices[static_cast<std::size_t>(i)] = i;

    MlpArchitecture arch{6, {5}, 3};
    FederationConfig cfg;
    cfg.num_clients = 1;
    cfg.batch_size = 64;  // >= n_k: exactly one step per epoch
    cfg.local_epochs = 1;
    AdamConfig adam_cfg;

    const ModelParams global = init_params(arch, 9);
    const std::uint64_t seed = 321;
    const auto update = client_train(global, data, indices, 0, cfg, arch, adam_cfg, seed);

    // Reproduce the single step by hand, including the epoch shuffle.
    std::vector<int> order = indices;
    Rng rng(seed);
    rng.shuffle(order);
    Tensor bx = gather_inputs(data, order);
    Tensor by({order.size()});
    for (std::size_t r = 0; r < order.size(); ++r) {
        by[r] = data.labels[static_cast<std::size_t>(order[r])];
    }
    const auto lg = loss_and_grad(global, arch, bx, by);
    const auto stepped = adam_step(global, lg.grads, AdamState::fresh(global), adam_cfg);

    CHECK(params_equal(update.params, stepped.params));
    CHECK(params_equal(update.variance.values, stepped.state.second_moment));
    CHECK(update.sample_count == 24);
}

TEST_CASE("client_train with zero learning rate returns the global params") {
    const Dataset data = generate_synthetic(30, 3, 4, 0.5, 5);
    std::vector<int> indices(30);
    for (int i = 0; i < 30; ++i) indices[static_cast<std::size_t>(i)] = i;
    MlpArchitecture arch{4, {4}, 3};
    FederationConfig cfg;
    cfg.batch_size = 8;
    cfg.local_epochs = 2;
    AdamConfig adam_cfg;
    adam_cfg.learning_rate = 0.0;
    const ModelParams global = init_params(arch, 2);
    const auto update = client_train(global, data, indices, 0, cfg, arch, adam_cfg, 1);
    CHECK(params_equal(update.params, global));
}

TEST_CASE("client_train is deterministic") {
    const Dataset data = generate_synthetic(50, 4, 5, 0.3, 77);
    std::vector<int> indices;
    for (int i = 0; i < 50; i += 2) indices.push_back(i);
    MlpArchitecture arch{5, {6}, 4};
    FederationConfig cfg;
    cfg.batch_size = 7;
    cfg.local_epochs = 3;
    AdamConfig adam_cfg;
    const ModelParams global = init_params(arch, 8);
    const auto a = client_train(global, data, indices, 3, cfg, arch, adam_cfg, 99);
    const auto b = client_train(global, data, indices, 3, cfg, arch, adam_cfg, 99);
    CHECK(params_equal(a.params, b.params));
    CHECK(params_equal(a.variance.values, b.variance.values));
    CHECK(a.client_id == 3);
}

TEST_CASE("run_round trains the sampled clients and aggregates") {
    const Dataset data = generate_synthetic(120, 3, 6, 0.4, 10);
    MlpArchitecture arch{6, {4}, 3};
    FederationConfig cfg;
    cfg.num_clients = 6;
    cfg.client_fraction = 0.5;
    cfg.batch_size = 10;
    cfg.rounds = 1;
    const auto part = partition_iid(data, cfg.num_clients, 3);
    const ModelParams global = init_params(arch, cfg.master_seed);
    AdamConfig adam_cfg;

    const auto rr = run_round(1, global, data, part, cfg, arch, adam_cfg);
    CHECK(rr.updates.size() == 3);
    CHECK(std::is_sorted(rr.updates.begin(), rr.updates.end(),
                         [](const auto& a, const auto& b) { return a.client_id < b.client_id; }));
    // Aggregate equals the reference applied to the same updates.
    CHECK(max_param_diff(rr.global, ref::aggregate_fedavg(rr.updates)) <= 1e-12);
}

TEST_CASE("run_experiment with zero rounds returns the initialization") {
    const Dataset train = generate_synthetic(40, 2, 4, 0.4, 1);
    const Dataset test = generate_synthetic(20, 2, 4, 0.4, 2);
    MlpArchitecture arch{4, {}, 2};
    FederationConfig cfg;
    cfg.num_clients = 2;
    cfg.rounds = 0;
    cfg.batch_size = 10;
    const auto part = partition_iid(train, 2, 5);
    const auto result = run_experiment(cfg, arch, AdamConfig{}, train, part, test);
    CHECK(result.rounds.empty());
    CHECK(params_equal(result.final_params, init_params(arch, cfg.master_seed)));
}

TEST_CASE("a single-client federation reduces to centralized training") {
    const Dataset train = generate_synthetic(60, 3, 5, 0.4, 3);
    const Dataset test = generate_synthetic(30, 3, 5, 0.4, 4);
    MlpArchitecture arch{5, {4}, 3};
    FederationConfig cfg;
    cfg.num_clients = 1;
    cfg.client_fraction = 1.0;
    cfg.batch_size = 16;
    cfg.rounds = 3;
    const auto part = partition_iid(train, 1, 6);
    AdamConfig adam_cfg;

    for (Aggregator agg : {Aggregator::FedAvg, Aggregator::PrecisionWeighted}) {
        cfg.aggregator = agg;
        const auto result = run_experiment(cfg, arch, adam_cfg, train, part, test);

        ModelParams manual = init_params(arch, cfg.master_seed);
        for (int round = 1; round <= cfg.rounds; ++round) {
            const std::uint64_t seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(round), 0);
            manual = client_train(manual, train, part.client_indices[0], 0, cfg, arch, adam_cfg, seed)
                         .params;
        }
        CHECK(params_equal(result.final_params, manual));
    }
}

TEST_CASE("run_experiment reruns are bit-identical") {
    const Dataset train = generate_synthetic(80, 4, 6, 0.35, 14);
    const Dataset test = generate_synthetic(40, 4, 6, 0.35, 15);
    MlpArchitecture arch{6, {5}, 4};
    FederationConfig cfg;
    cfg.num_clients = 4;
    cfg.client_fraction = 0.75;
    cfg.batch_size = 8;
    cfg.rounds = 4;
    cfg.aggregator = Aggregator::PrecisionWeighted;
    const auto part = partition_noniid(train, 4, 2, 44);

    const auto a = run_experiment(cfg, arch, AdamConfig{}, train, part, test);
    const auto b = run_experiment(cfg, arch, AdamConfig{}, train, part, test);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (std::size_t r = 0; r < a.rounds.size(); ++r) {
        CHECK(a.rounds[r].test_accuracy == b.rounds[r].test_accuracy);
        CHECK(a.rounds[r].test_loss == b.rounds[r].test_loss);
        CHECK(a.rounds[r].participants == b.rounds[r].participants);
        REQUIRE(a.rounds[r].per_layer_mean_inv_variance.size() ==
                b.rounds[r].per_layer_mean_inv_variance.size());
        for (std::size_t l = 0; l < a.rounds[r].per_layer_mean_inv_variance.size(); ++l) {
            CHECK(a.rounds[r].per_layer_mean_inv_variance[l].second ==
                  b.rounds[r].per_layer_mean_inv_variance[l].second);
        }
    }
    CHECK(params_equal(a.final_params, b.final_params));
}

TEST_CASE("optimizer state can persist across rounds when configured") {
    const Dataset train = generate_synthetic(40, 2, 4, 0.4, 21);
    const Dataset test = generate_synthetic(20, 2, 4, 0.4, 22);
    MlpArchitecture arch{4, {}, 2};
    FederationConfig cfg;
    cfg.num_clients = 2;
    cfg.batch_size = 10;
    cfg.rounds = 3;
    const auto part = partition_iid(train, 2, 9);

    cfg.reset_optimizer_per_round = true;
    const auto fresh = run_experiment(cfg, arch, AdamConfig{}, train, part, test);
    cfg.reset_optimizer_per_round = false;
    const auto carried = run_experiment(cfg, arch, AdamConfig{}, train, part, test);
    // Same protocol, different optimizer trajectories.
    CHECK_FALSE(params_equal(fresh.final_params, carried.final_params));
}
