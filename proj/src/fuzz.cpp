#include "ftap/fuzz.hpp"

#include "ftap/arbitrage.hpp"
#include "ftap/closed_form.hpp"
#include "ftap/completeness.hpp"
#include "ftap/error.hpp"
#include "ftap/tolerances.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <thread>

namespace ftap {

namespace {

constexpr double kFactors[] = {0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
constexpr double kGrowth[] = {1.0, 1.05, 1.1};

template <class T, std::size_t N>
T pick(std::mt19937_64& rng, const T (&items)[N]) {
    return items[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

struct Builder {
    std::mt19937_64& rng;
    const FuzzBounds& bounds;
    int horizon;
    int d;
    std::vector<NodeSpec> nodes;

    void grow(std::size_t self, int depth) {
        if (depth == horizon) {
            return;
        }
        const int k = std::uniform_int_distribution<int>(1, bounds.max_children)(rng);
        const bool straddle = std::bernoulli_distribution(bounds.straddle_bias)(rng);
        // A single child can only be arbitrage-free when nothing moves.
        const double g = straddle && k == 1 ? 1.0 : pick(rng, kGrowth);
        std::vector<std::vector<double>> factors(static_cast<std::size_t>(k), std::vector<double>(d));
        for (int j = 0; j < d; ++j) {
            for (int c = 0; c < k; ++c) {
                factors[c][j] = straddle && k == 1 ? 1.0 : pick(rng, kFactors);
            }
            if (straddle && k >= 2) {
                std::vector<double> up, down;
                for (double f : kFactors) {
                    (f > g ? up : down).push_back(f);
                }
                const int a = std::uniform_int_distribution<int>(0, k - 1)(rng);
                const int b = (a + 1 + std::uniform_int_distribution<int>(0, k - 2)(rng)) % k;
                factors[a][j] = up[std::uniform_int_distribution<std::size_t>(0, up.size() - 1)(rng)];
                factors[b][j] = down[std::uniform_int_distribution<std::size_t>(0, down.size() - 1)(rng)];
            }
        }
        std::vector<double> weights(static_cast<std::size_t>(k));
        double total = 0.0;
        for (auto& w : weights) {
            w = static_cast<double>(std::uniform_int_distribution<int>(1, 3)(rng));
            total += w;
        }
        const std::vector<double> parent_prices = nodes[self].prices;
        const std::string parent_id = nodes[self].id;
        for (int c = 0; c < k; ++c) {
            NodeSpec spec;
            spec.id = fmt::format("n{}", nodes.size());
            spec.parent = parent_id;
            spec.prob = weights[c] / total;
            spec.prices.resize(static_cast<std::size_t>(d) + 1);
            spec.prices[0] = parent_prices[0] * g;
            for (int j = 0; j < d; ++j) {
                spec.prices[j + 1] = parent_prices[j + 1] * factors[c][j];
            }
            nodes.push_back(std::move(spec));
            grow(nodes.size() - 1, depth + 1);
        }
    }
};

}  // namespace

ScenarioTree random_tree(std::mt19937_64& rng, const FuzzBounds& bounds) {
    const int horizon = std::uniform_int_distribution<int>(1, bounds.max_horizon)(rng);
    const int d = std::uniform_int_distribution<int>(1, bounds.max_risky)(rng);
    Builder b{rng, bounds, horizon, d, {}};
    NodeSpec root;
    root.id = "n0";
    root.prices.push_back(1.0);
    for (int j = 0; j < d; ++j) {
        root.prices.push_back(std::uniform_int_distribution<int>(1, 8)(rng));
    }
    b.nodes.push_back(std::move(root));
    b.grow(0, 0);
    std::vector<std::string> names{"bond"};
    for (int j = 0; j < d; ++j) {
        names.push_back(fmt::format("s{}", j + 1));
    }
    return ScenarioTree(horizon, std::move(names), b.nodes);
}

Eigen::VectorXd random_payoff(std::mt19937_64& rng, std::size_t leaves) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(leaves));
    for (Eigen::Index l = 0; l < x.size(); ++l) {
        x[l] = std::uniform_int_distribution<int>(0, 10)(rng);
    }
    return x;
}

std::uint64_t task_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t state = master ^ (0xd1b54a32d192ed03ULL * (index + 1));
    return splitmix64(state);
}

FuzzCase fuzz_one(std::uint64_t seed, const FuzzBounds& bounds, int claims) {
    FuzzCase out;
    out.seed = seed;
    std::mt19937_64 rng(seed);
    const ScenarioTree tree = random_tree(rng, bounds);
    std::optional<Measure> emm;
    try {
        const ArbitrageCertificate cert = fftap_verdict(tree);
        if (cert.has_emm()) {
            const auto check = is_martingale_measure(tree, cert.emm(), tol::martingale);
            out.dichotomy_ok = check.is_martingale && (cert.emm().leaf_prob().array() > 0.0).all();
            emm = cert.emm();
        } else {
            out.dichotomy_ok = is_admissible(tree, cert.arbitrage()) && is_arbitrage(tree, cert.arbitrage());
        }
        if (!out.dichotomy_ok) {
            out.failure = "certificate failed its verifier";
        }
    } catch (const Error& e) {
        out.failure = e.what();
        return out;
    }
    if (!emm) {
        return out;
    }
    out.has_emm = true;
    out.sftap_checked = true;
    try {
        const EmmPolytope poly = emm_polytope(tree, *emm);
        out.dimension = poly.dimension;
        const bool unique = poly.dimension == 0;
        bool all_replicate = true;
        for (int k = 0; k < claims; ++k) {
            const Claim claim(random_payoff(rng, tree.num_leaves()));
            all_replicate = replicate(tree, claim).attainable && all_replicate;
        }
        const auto second = second_measure(tree, *emm);
        bool second_ok = true;
        if (second) {
            const double tv = 0.5 * (second->leaf_prob() - emm->leaf_prob()).cwiseAbs().sum();
            second_ok = is_martingale_measure(tree, *second, tol::martingale).is_martingale && tv >= 1e-8;
        }
        out.sftap_ok = unique == all_replicate && unique == !second && second_ok;
        if (!out.sftap_ok) {
            out.failure = fmt::format("SFTAP mismatch: dimension {}, all claims replicate {}, second measure {}",
                                      poly.dimension, all_replicate, second.has_value());
        }
        if (unique) {
            for (NodeIndex n : tree.internal_nodes()) {
                if (tree.children(n).size() > static_cast<std::size_t>(tree.num_risky()) + 1) {
                    out.branching_ok = false;
                    out.failure = fmt::format("complete tree with {} children at '{}'", tree.children(n).size(),
                                              tree.id(n));
                }
            }
        }
    } catch (const Error& e) {
        out.sftap_ok = false;
        out.failure = e.what();
    }
    return out;
}

FuzzReport run_fuzz(std::uint64_t master_seed, std::uint64_t count, const FuzzBounds& bounds, int threads,
                    int claims) {
    std::vector<FuzzCase> cases(count);
    auto work = [&](std::uint64_t begin, std::uint64_t step) {
        for (std::uint64_t i = begin; i < count; i += step) {
            cases[i] = fuzz_one(task_seed(master_seed, i), bounds, claims);
        }
    };
    const auto workers = static_cast<std::uint64_t>(std::max(1, threads));
    if (workers == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::uint64_t w = 0; w < workers; ++w) {
            pool.emplace_back(work, w, workers);
        }
        for (auto& t : pool) t.join();
    }
    FuzzReport report;
    report.master_seed = master_seed;
    report.count = count;
    for (const auto& c : cases) {
        if (!c.dichotomy_ok) ++report.dichotomy_failures;
        if (c.dichotomy_ok && !c.has_emm) ++report.arbitrage;
        if (c.has_emm && c.dimension == 0) ++report.complete;
        if (c.has_emm && c.dimension > 0) ++report.incomplete;
        if (!c.sftap_ok) ++report.sftap_failures;
        if (!c.branching_ok) ++report.branching_failures;
        if (!c.dichotomy_ok || !c.sftap_ok || !c.branching_ok) report.failures.push_back(c);
    }
    return report;
}

}  // namespace ftap
