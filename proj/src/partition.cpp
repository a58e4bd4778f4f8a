#include "fedsim/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>

#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

// Per-class index pools, each deterministically shuffled. Classes are
// processed in ascending label order so the RNG stream is stable.
std::vector<std::vector<int>> shuffled_class_pools(const Dataset& dataset, Rng& rng) {
    std::vector<std::vector<int>> pools(static_cast<std::size_t>(dataset.num_classes));
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        pools[static_cast<std::size_t>(dataset.labels[i])].push_back(static_cast<int>(i));
    }
    for (auto& pool : pools) rng.shuffle(pool);
    return pools;
}

// Deals `pool` over the given clients: floor(|pool|/k) each, remainders to
// the lowest-id clients. Consumes from the back of the pool.
void deal_evenly(std::vector<int>& pool, const std::vector<int>& clients,
                 std::vector<std::vector<int>>& out) {
    const std::size_t k = clients.size();
    const std::size_t base = pool.size() / k;
    const std::size_t rem = pool.size() % k;
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t take = base + (j < rem ? 1 : 0);
        auto& dst = out[static_cast<std::size_t>(clients[j])];
        for (std::size_t t = 0; t < take; ++t) {
            dst.push_back(pool.back());
            pool.pop_back();
        }
    }
}

// Max-flow (Edmonds-Karp) on the shard-sizing network. Tiny graphs: a node
// per class and per client plus source/sink.
struct FlowNet {
    struct Edge {
        int to;
        long long cap;
        std::size_t rev;
    };
    std::vector<std::vector<Edge>> adj;

    explicit FlowNet(int nodes) : adj(static_cast<std::size_t>(nodes)) {}

    std::size_t add_edge(int u, int v, long long cap) {
        adj[static_cast<std::size_t>(u)].push_back({v, cap, adj[static_cast<std::size_t>(v)].size()});
        adj[static_cast<std::size_t>(v)].push_back({u, 0, adj[static_cast<std::size_t>(u)].size() - 1});
        return adj[static_cast<std::size_t>(u)].size() - 1;
    }

    long long max_flow(int s, int t) {
        long long total = 0;
        while (true) {
            std::vector<std::pair<int, std::size_t>> parent(adj.size(), {-1, 0});
            std::queue<int> q;
            q.push(s);
            parent[static_cast<std::size_t>(s)] = {s, 0};
            while (!q.empty() && parent[static_cast<std::size_t>(t)].first < 0) {
                int u = q.front();
                q.pop();
                for (std::size_t e = 0; e < adj[static_cast<std::size_t>(u)].size(); ++e) {
                    const Edge& ed = adj[static_cast<std::size_t>(u)][e];
                    if (ed.cap > 0 && parent[static_cast<std::size_t>(ed.to)].first < 0) {
                        parent[static_cast<std::size_t>(ed.to)] = {u, e};
                        q.push(ed.to);
                    }
                }
            }
            if (parent[static_cast<std::size_t>(t)].first < 0) break;
            long long bottleneck = -1;
            for (int v = t; v != s;) {
                auto [u, e] = parent[static_cast<std::size_t>(v)];
                long long c = adj[static_cast<std::size_t>(u)][e].cap;
                bottleneck = bottleneck < 0 ? c : std::min(bottleneck, c);
                v = u;
            }
            for (int v = t; v != s;) {
                auto [u, e] = parent[static_cast<std::size_t>(v)];
                Edge& fwd = adj[static_cast<std::size_t>(u)][e];
                fwd.cap -= bottleneck;
                adj[static_cast<std::size_t>(fwd.to)][fwd.rev].cap += bottleneck;
                v = u;
            }
            total += bottleneck;
        }
        return total;
    }
};

}  // namespace

DatasetPartition partition_iid(const Dataset& dataset, int num_clients, std::uint64_t seed) {
    dataset.validate();
    if (num_clients < 1) throw std::invalid_argument("partition_iid: need at least one client");
    if (static_cast<std::size_t>(num_clients) > dataset.size()) {
        throw std::invalid_argument("partition_iid: more clients (" + std::to_string(num_clients) +
                                    ") than samples (" + std::to_string(dataset.size()) + ")");
    }

    Rng rng(splitmix64(seed));
    auto pools = shuffled_class_pools(dataset, rng);

    DatasetPartition part;
    part.client_indices.resize(static_cast<std::size_t>(num_clients));
    std::vector<int> all_clients(static_cast<std::size_t>(num_clients));
    std::iota(all_clients.begin(), all_clients.end(), 0);
    for (auto& pool : pools) {
        deal_evenly(pool, all_clients, part.client_indices);
    }

    for (std::size_t k = 0; k < part.client_indices.size(); ++k) {
        if (part.client_indices[k].empty()) {
            throw std::invalid_argument(
                "partition_iid: client " + std::to_string(k) +
                " received no samples (per-class remainders all land on lower ids)");
        }
    }
    return part;
}

DatasetPartition partition_noniid(const Dataset& dataset, int num_clients, int classes_per_client,
                                  std::uint64_t seed) {
    dataset.validate();
    const int num_classes = dataset.num_classes;
    const std::size_t n = dataset.size();
    if (num_clients < 1) throw std::invalid_argument("partition_noniid: need at least one client");
    if (classes_per_client < 1) {
        throw std::invalid_argument("partition_noniid: classes_per_client must be >= 1");
    }
    const long long total_shards = static_cast<long long>(num_clients) * classes_per_client;
    if (total_shards < num_classes) {
        throw std::invalid_argument("partition_noniid: K*classes_per_client = " +
                                    std::to_string(total_shards) + " cannot cover " +
                                    std::to_string(num_classes) + " classes");
    }

    Rng rng(splitmix64(seed));
    auto pools = shuffled_class_pools(dataset, rng);
    std::vector<long long> class_sizes(pools.size());
    for (std::size_t c = 0; c < pools.size(); ++c) {
        class_sizes[c] = static_cast<long long>(pools[c].size());
        if (class_sizes[c] == 0) {
            throw std::invalid_argument("partition_noniid: class " + std::to_string(c) +
                                        " has no samples");
        }
    }

    // Per-client quotas, balanced within +-1.
    const long long base_quota = static_cast<long long>(n) / num_clients;
    if (base_quota < classes_per_client) {
        throw std::invalid_argument(
            "partition_noniid: quota " + std::to_string(base_quota) + " per client cannot hold " +
            std::to_string(classes_per_client) + " non-empty shards");
    }
    std::vector<long long> quota(static_cast<std::size_t>(num_clients), base_quota);
    for (std::size_t i = 0; i < n % static_cast<std::size_t>(num_clients); ++i) quota[i] += 1;

    // Shard counts per class: proportional to class size (largest remainder),
    // at least one shard each, never more shards than samples.
    std::vector<long long> shards(pools.size(), 1);
    long long assigned = static_cast<long long>(pools.size());
    std::vector<double> remainder(pools.size());
    for (std::size_t c = 0; c < pools.size(); ++c) {
        const double exact =
            static_cast<double>(total_shards) * static_cast<double>(class_sizes[c]) /
            static_cast<double>(n);
        const long long extra = std::max<long long>(0, static_cast<long long>(exact) - 1);
        shards[c] += std::min(extra, class_sizes[c] - 1);
        assigned += std::min(extra, class_sizes[c] - 1);
        remainder[c] = exact - std::floor(exact);
    }
    while (assigned < total_shards) {
        // Give the next shard to the class with the largest remainder that
        // can still absorb one; ties resolved by lower class id.
        std::size_t best = pools.size();
        for (std::size_t c = 0; c < pools.size(); ++c) {
            if (shards[c] >= class_sizes[c]) continue;
            if (best == pools.size() || remainder[c] > remainder[best]) best = c;
        }
        if (best == pools.size()) {
            throw std::invalid_argument("partition_noniid: cannot cut " +
                                        std::to_string(total_shards) + " non-empty shards from " +
                                        std::to_string(n) + " samples");
        }
        shards[best] += 1;
        remainder[best] -= 1.0;
        assigned += 1;
    }

    // Deal shard slots in classes_per_client rounds. Within a round the
    // lightest-loaded client picks first and takes the heaviest remaining
    // shard of a class it does not hold yet (LPT-style, so the sizing step
    // can meet the +-1 quotas); ties follow a seeded class priority. When
    // only held classes remain, a swap with another client is attempted
    // before accepting a duplicate.
    std::vector<int> priority(pools.size());
    std::iota(priority.begin(), priority.end(), 0);
    rng.shuffle(priority);
    std::vector<long long> slots_left = shards;
    std::vector<std::vector<int>> slot_count(
        static_cast<std::size_t>(num_clients), std::vector<int>(pools.size(), 0));
    std::vector<double> client_mass(static_cast<std::size_t>(num_clients), 0.0);
    auto slot_mass = [&](std::size_t c) {
        return static_cast<double>(class_sizes[c]) / static_cast<double>(shards[c]);
    };

    // Ties between equally heavy shards rotate through the priority order so
    // the client/class graph stays connected; disconnected blocks strand the
    // +-1 remainders on the wrong side.
    auto pick_class = [&](const std::vector<int>& held, bool prefer_unheld,
                          std::size_t offset) -> int {
        double best_mass = -1.0;
        for (int pc : priority) {
            const std::size_t c = static_cast<std::size_t>(pc);
            if (slots_left[c] <= 0) continue;
            if (prefer_unheld && held[c] > 0) continue;
            best_mass = std::max(best_mass, slot_mass(c));
        }
        if (best_mass < 0.0) return -1;
        for (std::size_t step = 0; step < priority.size(); ++step) {
            const int pc = priority[(offset + step) % priority.size()];
            const std::size_t c = static_cast<std::size_t>(pc);
            if (slots_left[c] <= 0) continue;
            if (prefer_unheld && held[c] > 0) continue;
            if (slot_mass(c) == best_mass) return pc;
        }
        return -1;
    };

    std::size_t turn = 0;
    for (int round = 0; round < classes_per_client; ++round) {
        std::vector<int> visit(static_cast<std::size_t>(num_clients));
        std::iota(visit.begin(), visit.end(), 0);
        std::stable_sort(visit.begin(), visit.end(), [&](int a, int b) {
            return client_mass[static_cast<std::size_t>(a)] <
                   client_mass[static_cast<std::size_t>(b)];
        });
        for (int i : visit) {
            const std::size_t offset = turn++ % pools.size();
            auto& held = slot_count[static_cast<std::size_t>(i)];
            int c = pick_class(held, true, offset);
            if (c < 0) {
                // Forced duplicate; try to trade with another client first.
                bool swapped = false;
                const int dup = pick_class(held, false, offset);
                for (int j = 0; j < num_clients && !swapped; ++j) {
                    if (j == i) continue;
                    auto& other = slot_count[static_cast<std::size_t>(j)];
                    for (std::size_t d = 0; d < pools.size() && !swapped; ++d) {
                        if (other[d] == 0 || held[d] > 0) continue;
                        if (static_cast<int>(d) == dup) continue;
                        if (other[static_cast<std::size_t>(dup)] > 0) continue;
                        other[d] -= 1;
                        other[static_cast<std::size_t>(dup)] += 1;
                        slots_left[static_cast<std::size_t>(dup)] -= 1;
                        held[d] += 1;
                        client_mass[static_cast<std::size_t>(i)] += slot_mass(d);
                        client_mass[static_cast<std::size_t>(j)] +=
                            slot_mass(static_cast<std::size_t>(dup)) - slot_mass(d);
                        swapped = true;
                    }
                }
                if (swapped) continue;
                c = dup;
            }
            if (c < 0) {
                throw std::invalid_argument("partition_noniid: ran out of shard slots");
            }
            slots_left[static_cast<std::size_t>(c)] -= 1;
            held[static_cast<std::size_t>(c)] += 1;
            client_mass[static_cast<std::size_t>(i)] += slot_mass(static_cast<std::size_t>(c));
        }
    }

    // Shard sizes: every slot holds at least one sample; the remaining mass
    // is routed with a max-flow so class totals are fully consumed and every
    // client lands exactly on its quota. Phase one caps each slot at the even
    // per-shard size; phase two lifts the caps for whatever could not be
    // placed evenly.
    const int source = 0;
    const int sink = 1 + num_classes + num_clients;
    FlowNet net(sink + 1);
    auto class_node = [&](std::size_t c) { return 1 + static_cast<int>(c); };
    auto client_node = [&](int i) { return 1 + num_classes + i; };

    for (std::size_t c = 0; c < pools.size(); ++c) {
        net.add_edge(source, class_node(c), class_sizes[c] - shards[c]);
    }
    long long demand_total = 0;
    for (int i = 0; i < num_clients; ++i) {
        const long long d = quota[static_cast<std::size_t>(i)] - classes_per_client;
        demand_total += d;
        net.add_edge(client_node(i), sink, d);
    }
    struct SlotEdge {
        std::size_t c;
        int i;
        std::size_t edge_index;
    };
    std::vector<SlotEdge> slot_edges;
    for (int i = 0; i < num_clients; ++i) {
        for (std::size_t c = 0; c < pools.size(); ++c) {
            const int slots = slot_count[static_cast<std::size_t>(i)][c];
            if (slots == 0) continue;
            const long long even_cap =
                (class_sizes[c] + shards[c] - 1) / shards[c] - 1;  // per-slot even size minus the lower bound
            const std::size_t idx =
                net.add_edge(class_node(c), client_node(i), even_cap * slots);
            slot_edges.push_back({c, i, idx});
        }
    }

    long long placed = net.max_flow(source, sink);
    if (placed < demand_total) {
        // Lift the evenness caps and place the rest wherever structure allows.
        for (const auto& se : slot_edges) {
            net.adj[static_cast<std::size_t>(class_node(se.c))][se.edge_index].cap +=
                class_sizes[se.c];
        }
        placed += net.max_flow(source, sink);
    }
    if (placed < demand_total) {
        throw std::invalid_argument(
            "partition_noniid: no shard assignment satisfies the +-1 balance; " +
            std::to_string(demand_total - placed) + " samples cannot be placed with K=" +
            std::to_string(num_clients) + ", classes_per_client=" +
            std::to_string(classes_per_client) + ", num_classes=" + std::to_string(num_classes));
    }

    // x(i,c) = slots + routed flow; materialize from the shuffled pools.
    std::vector<std::vector<long long>> take(
        static_cast<std::size_t>(num_clients), std::vector<long long>(pools.size(), 0));
    for (int i = 0; i < num_clients; ++i) {
        for (std::size_t c = 0; c < pools.size(); ++c) {
            take[static_cast<std::size_t>(i)][c] = slot_count[static_cast<std::size_t>(i)][c];
        }
    }
    for (const auto& se : slot_edges) {
        const auto& fwd = net.adj[static_cast<std::size_t>(class_node(se.c))][se.edge_index];
        const auto& back = net.adj[static_cast<std::size_t>(fwd.to)][fwd.rev];
        take[static_cast<std::size_t>(se.i)][se.c] += back.cap;  // residual of reverse edge = flow
    }

    DatasetPartition part;
    part.client_indices.resize(static_cast<std::size_t>(num_clients));
    for (std::size_t c = 0; c < pools.size(); ++c) {
        std::size_t cursor = 0;
        for (int i = 0; i < num_clients; ++i) {
            auto& dst = part.client_indices[static_cast<std::size_t>(i)];
            for (long long t = 0; t < take[static_cast<std::size_t>(i)][c]; ++t) {
                dst.push_back(pools[c][cursor++]);
            }
        }
    }
    part.validate(dataset);
    return part;
}

DatasetPartition partition_unbalanced(const Dataset& dataset, int num_clients, int starved_client,
                                      double starved_fraction, int classes_for_starved,
                                      std::uint64_t seed) {
    dataset.validate();
    const std::size_t n = dataset.size();
    if (num_clients < 2) {
        throw std::invalid_argument("partition_unbalanced: need at least two clients");
    }
    if (starved_client < 0 || starved_client >= num_clients) {
        throw std::invalid_argument("partition_unbalanced: starved_client out of range");
    }
    if (!(starved_fraction > 0.0) ||
        starved_fraction >= 1.0 / static_cast<double>(num_clients)) {
        throw std::invalid_argument("partition_unbalanced: starved_fraction must be in (0, 1/K)");
    }
    if (classes_for_starved < 1 || classes_for_starved > dataset.num_classes) {
        throw std::invalid_argument("partition_unbalanced: classes_for_starved out of range");
    }

    Rng rng(splitmix64(seed));
    auto pools = shuffled_class_pools(dataset, rng);
    const std::vector<int> starved_classes =
        rng.sample_without_replacement(dataset.num_classes, classes_for_starved);

    const std::size_t starved_total = static_cast<std::size_t>(
        std::floor(starved_fraction * static_cast<double>(n)));
    if (starved_total < 1) {
        throw std::invalid_argument(
            "partition_unbalanced: starved_fraction too small to give one sample");
    }

    DatasetPartition part;
    part.client_indices.resize(static_cast<std::size_t>(num_clients));
    auto& starved = part.client_indices[static_cast<std::size_t>(starved_client)];

    // Spread the starved budget evenly over its chosen classes.
    const std::size_t per = starved_total / starved_classes.size();
    const std::size_t rem = starved_total % starved_classes.size();
    for (std::size_t j = 0; j < starved_classes.size(); ++j) {
        const std::size_t want = per + (j < rem ? 1 : 0);
        auto& pool = pools[static_cast<std::size_t>(starved_classes[j])];
        if (pool.size() < want) {
            throw std::invalid_argument("partition_unbalanced: class " +
                                        std::to_string(starved_classes[j]) + " holds only " +
                                        std::to_string(pool.size()) + " samples, starved client needs " +
                                        std::to_string(want));
        }
        for (std::size_t t = 0; t < want; ++t) {
            starved.push_back(pool.back());
            pool.pop_back();
        }
    }

    std::vector<int> others;
    for (int i = 0; i < num_clients; ++i) {
        if (i != starved_client) others.push_back(i);
    }
    for (auto& pool : pools) {
        deal_evenly(pool, others, part.client_indices);
    }

    part.validate(dataset);
    return part;
}

}  // namespace fedsim
