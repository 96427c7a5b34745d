#include "ftap/cli.hpp"

#include "ftap/arbitrage.hpp"
#include "ftap/closed_form.hpp"
#include "ftap/completeness.hpp"
#include "ftap/error.hpp"
#include "ftap/fuzz.hpp"
#include "ftap/selection.hpp"
#include "ftap/tolerances.hpp"
#include "ftap/tree_io.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <fstream>
#include <optional>
#include <ostream>

namespace ftap::cli {

namespace {

using json = nlohmann::ordered_json;

struct Report {
    std::string verb;
    json inputs = json::object();
    std::string verdict;
    json artifacts = json::object();
    json residuals = json::object();
    std::optional<std::uint64_t> seed;
    int code = kOk;
};

Report named(std::string verb) {
    Report r;
    r.verb = std::move(verb);
    return r;
}

json leaf_map(const ScenarioTree& tree, const Eigen::VectorXd& values) {
    json j = json::object();
    for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
        j[tree.id(tree.leaf_node(l))] = values[static_cast<Eigen::Index>(l)];
    }
    return j;
}

json node_map(const ScenarioTree& tree, const Eigen::VectorXd& values) {
    json j = json::object();
    for (NodeIndex n = 0; n < tree.num_nodes(); ++n) {
        j[tree.id(n)] = values[static_cast<Eigen::Index>(n)];
    }
    return j;
}

json strategy_table(const ScenarioTree& tree, const Strategy& s) {
    json rows = json::array();
    for (NodeIndex n : tree.internal_nodes()) {
        json pos = json::array();
        for (int a = 0; a < tree.num_assets(); ++a) {
            pos.push_back(s.at(n, a));
        }
        rows.push_back(json{{"node", tree.id(n)}, {"depth", tree.depth(n)}, {"positions", pos}});
    }
    return rows;
}

Eigen::VectorXd leaf_values(const ScenarioTree& tree, const Eigen::VectorXd& node_values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(tree.num_leaves()));
    for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
        v[static_cast<Eigen::Index>(l)] = node_values[static_cast<Eigen::Index>(tree.leaf_node(l))];
    }
    return v;
}

std::string scalar_text(const json& v) {
    if (v.is_number_float()) {
        return fmt::format("{:.17g}", v.get<double>());
    }
    if (v.is_string()) {
        return v.get<std::string>();
    }
    return v.dump();
}

bool is_flat(const json& v) {
    if (!v.is_array()) return false;
    for (const auto& e : v) {
        if (e.is_structured()) return false;
    }
    return true;
}

void render(const json& v, int indent, std::string& out) {
    const std::string pad(static_cast<std::size_t>(indent), ' ');
    if (v.is_object()) {
        for (const auto& [key, item] : v.items()) {
            if (!item.is_structured()) {
                out += fmt::format("{}{}: {}\n", pad, key, scalar_text(item));
            } else if (is_flat(item)) {
                std::string line;
                for (const auto& e : item) {
                    line += (line.empty() ? "" : ", ") + scalar_text(e);
                }
                out += fmt::format("{}{}: [{}]\n", pad, key, line);
            } else if (item.empty()) {
                out += fmt::format("{}{}: {}\n", pad, key, item.is_array() ? "[]" : "{}");
            } else {
                out += fmt::format("{}{}:\n", pad, key);
                render(item, indent + 2, out);
            }
        }
    } else if (v.is_array()) {
        for (const auto& e : v) {
            std::string inner;
            render(e, indent + 2, inner);
            if (!e.is_structured()) {
                out += fmt::format("{}- {}\n", pad, scalar_text(e));
            } else {
                out += pad + "- " + inner.substr(static_cast<std::size_t>(indent) + 2);
            }
        }
    } else {
        out += pad + scalar_text(v) + "\n";
    }
}

std::string format_report(const Report& r, bool as_json) {
    if (as_json) {
        json doc{{"verb", r.verb}, {"inputs", r.inputs}, {"verdict", r.verdict}, {"artifacts", r.artifacts},
                 {"residuals", r.residuals}};
        doc["seed"] = r.seed ? json(*r.seed) : json(nullptr);
        return doc.dump(2) + "\n";
    }
    std::string out = fmt::format("verdict: {}\n", r.verdict);
    render(r.artifacts, 0, out);
    if (!r.residuals.empty()) {
        out += "residuals:\n";
        render(r.residuals, 2, out);
    }
    if (r.seed) {
        out += fmt::format("seed: {}\n", *r.seed);
    }
    return out;
}

void save_measure(const std::string& path, const ScenarioTree& tree, const Eigen::VectorXd& q) {
    if (path.empty()) return;
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw InputError(fmt::format("cannot write '{}'", path));
    }
    f << format_leaf_map(tree, q);
}

ScenarioTree load_tree(const std::string& path) {
    ScenarioTree tree = read_tree(path);
    tree.require_valid();
    return tree;
}

Measure require_emm(const ScenarioTree& tree) {
    auto emm = find_emm(tree);
    if (!emm) {
        throw InputError("market admits arbitrage; no equivalent martingale measure exists");
    }
    return *emm;
}

json params_json(const ClosedFormParams& p) {
    return json{{"spot", p.spot}, {"strike", p.strike}, {"rate", p.rate}, {"vol", p.volatility}, {"tau", p.maturity}};
}

// -- verbs -------------------------------------------------------------------

struct TreeArgs {
    std::string tree;
    std::string claim;
    std::string measure;
    std::string save;
};

Report check_arbitrage(const TreeArgs& a, bool exact) {
    Report r = named("check-arbitrage");
    r.inputs = {{"tree", a.tree}, {"exact", exact}};
    const ScenarioTree tree = load_tree(a.tree);
    const json assets = tree.asset_names();
    if (exact) {
        const ExactVerdict v = fftap_verdict_exact(tree);
        if (v.has_emm) {
            r.verdict = "no-arbitrage";
            json exact_map = json::object();
            Eigen::VectorXd q(static_cast<Eigen::Index>(v.leaf_prob.size()));
            for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
                exact_map[tree.id(tree.leaf_node(l))] = to_string(v.leaf_prob[l]);
                q[static_cast<Eigen::Index>(l)] = to_double(v.leaf_prob[l]);
            }
            r.artifacts["emm"] = exact_map;
            r.residuals["max_martingale_residual"] = "0";
            r.residuals["min_leaf_probability"] = to_string(v.min_prob);
            save_measure(a.save, tree, q);
        } else {
            r.verdict = "arbitrage";
            r.code = kNegative;
            json rows = json::array();
            for (NodeIndex n : tree.internal_nodes()) {
                json pos = json::array();
                for (const auto& x : v.risky[n]) pos.push_back(to_string(x));
                rows.push_back(json{{"node", tree.id(n)}, {"risky", pos}});
            }
            json gains = json::object();
            for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
                gains[tree.id(tree.leaf_node(l))] = to_string(v.terminal_gains[l]);
            }
            r.artifacts["assets"] = assets;
            r.artifacts["risky_positions"] = rows;
            r.artifacts["discounted_terminal_values"] = gains;
            if (v.arbitrage) r.artifacts["strategy"] = strategy_table(tree, *v.arbitrage);
        }
        return r;
    }
    const ArbitrageCertificate cert = fftap_verdict(tree);
    if (cert.has_emm()) {
        r.verdict = "no-arbitrage";
        const auto check = is_martingale_measure(tree, cert.emm(), tol::martingale);
        r.artifacts["emm"] = leaf_map(tree, cert.emm().leaf_prob());
        r.residuals["max_martingale_residual"] = check.worst_residual;
        r.residuals["min_leaf_probability"] = cert.emm().leaf_prob().minCoeff();
        save_measure(a.save, tree, cert.emm().leaf_prob());
    } else {
        r.verdict = "arbitrage";
        r.code = kNegative;
        const ValueProcess vp = value_process(tree, cert.arbitrage());
        r.artifacts["assets"] = assets;
        r.artifacts["strategy"] = strategy_table(tree, cert.arbitrage());
        r.artifacts["initial_value"] = vp.value[0];
        r.artifacts["terminal_values"] = leaf_map(tree, leaf_values(tree, vp.value));
        r.residuals["min_value"] = vp.value.minCoeff();
    }
    return r;
}

Report complete(const TreeArgs& a) {
    Report r = named("complete");
    r.inputs = {{"tree", a.tree}};
    const ScenarioTree tree = load_tree(a.tree);
    const CompletenessReport rep = completeness_report(tree);
    r.verdict = rep.complete ? "complete" : "incomplete";
    r.code = rep.complete ? kOk : kNegative;
    r.artifacts["dimension"] = rep.dimension;
    r.artifacts["max_children"] = rep.max_children;
    r.artifacts["num_risky"] = tree.num_risky();
    return r;
}

Report replicate_verb(const TreeArgs& a) {
    Report r = named("replicate");
    r.inputs = {{"tree", a.tree}, {"claim", a.claim}};
    const ScenarioTree tree = load_tree(a.tree);
    const Claim claim = read_claim(a.claim, tree);
    const ReplicationResult res = replicate(tree, claim);
    r.verdict = res.attainable ? "attainable" : "unattainable";
    r.code = res.attainable ? kOk : kNegative;
    r.artifacts["assets"] = tree.asset_names();
    r.artifacts["initial_price"] = res.initial_price;
    r.artifacts["strategy"] = strategy_table(tree, res.strategy);
    r.residuals["replication_residual"] = res.residual;
    return r;
}

Report price_verb(const TreeArgs& a) {
    Report r = named("price");
    r.inputs = {{"tree", a.tree}, {"claim", a.claim}, {"measure", a.measure.empty() ? json(nullptr) : json(a.measure)}};
    const ScenarioTree tree = load_tree(a.tree);
    const Claim claim = read_claim(a.claim, tree);
    const Measure m = a.measure.empty() ? require_emm(tree) : read_measure(a.measure, tree);
    const ValueProcess vp = price(tree, claim, m);
    r.verdict = "priced";
    r.artifacts["price"] = vp.value[0];
    r.artifacts["node_values"] = node_map(tree, vp.value);
    const PriceBounds bounds = price_bounds(tree, claim);
    r.artifacts["no_arbitrage_interval"] = json::array({bounds.lower, bounds.upper});
    r.residuals["max_martingale_residual"] = is_martingale_measure(tree, m, tol::martingale).worst_residual;
    return r;
}

Report second_measure_verb(const TreeArgs& a, int sign) {
    Report r = named("second-measure");
    r.inputs = {{"tree", a.tree}, {"sign", sign}};
    const ScenarioTree tree = load_tree(a.tree);
    const Measure base = require_emm(tree);
    const auto second = second_measure(tree, base, sign);
    r.artifacts["base"] = leaf_map(tree, base.leaf_prob());
    if (!second) {
        r.verdict = "complete";
        r.code = kNegative;
        return r;
    }
    r.verdict = "second-measure";
    r.artifacts["second"] = leaf_map(tree, second->leaf_prob());
    r.artifacts["total_variation"] = 0.5 * (second->leaf_prob() - base.leaf_prob()).cwiseAbs().sum();
    r.residuals["max_martingale_residual"] = is_martingale_measure(tree, *second, tol::martingale).worst_residual;
    save_measure(a.save, tree, second->leaf_prob());
    return r;
}

Report select_measure(const TreeArgs& a, const std::string& which) {
    Report r = named("select-measure");
    r.inputs = {{"tree", a.tree}, {"divergence", which}};
    const ScenarioTree tree = load_tree(a.tree);
    const DivergenceSpec spec = which == "entropy" ? DivergenceSpec::entropy() : DivergenceSpec::quadratic();
    const SelectedMeasure sel = minimal_divergence_measure(tree, spec);
    r.verdict = sel.on_boundary ? "boundary-minimizer" : "interior-minimizer";
    r.artifacts["measure"] = leaf_map(tree, sel.leaf_prob);
    r.artifacts["divergence"] = sel.divergence;
    r.artifacts["on_boundary"] = sel.on_boundary;
    if (sel.measure) {
        r.residuals["max_martingale_residual"] =
            is_martingale_measure(tree, *sel.measure, tol::martingale).worst_residual;
    }
    save_measure(a.save, tree, sel.leaf_prob);
    return r;
}

Report indifference(const TreeArgs& a, const std::string& utility, double wealth, double risk_aversion,
                    double bliss) {
    Report r = named("indifference");
    r.inputs = {{"tree", a.tree}, {"claim", a.claim}, {"utility", utility}, {"wealth", wealth}};
    if (utility == "exp") r.inputs["risk_aversion"] = risk_aversion;
    if (utility == "quadratic") r.inputs["bliss"] = bliss;
    const ScenarioTree tree = load_tree(a.tree);
    const Claim claim = read_claim(a.claim, tree);
    const UtilitySpec u = utility == "exp"   ? UtilitySpec::exponential(risk_aversion)
                          : utility == "log" ? UtilitySpec::log()
                                             : UtilitySpec::quadratic(bliss);
    const IndifferencePrice ip = marginal_indifference_price(tree, u, wealth, claim);
    const OptimalWealth opt = maximize_expected_utility(tree, u, wealth);
    r.verdict = "priced";
    r.artifacts["price"] = ip.price;
    r.artifacts["dual_price"] = ip.dual_price;
    r.artifacts["v_prime"] = ip.v_prime;
    r.artifacts["value"] = opt.value;
    r.artifacts["measure"] = leaf_map(tree, ip.measure.leaf_prob());
    r.artifacts["terminal_wealth"] = leaf_map(tree, opt.terminal_wealth);
    r.residuals["price_gap"] = std::abs(ip.price - ip.dual_price);
    r.residuals["v_prime_gap"] = std::abs(ip.v_prime - ip.v_prime_dual);
    r.residuals["first_order"] = opt.foc_residual;
    r.residuals["duality_martingale_residual"] =
        is_martingale_measure(tree, ip.measure, 1e-7).worst_residual;
    return r;
}

Report converge(const ClosedFormParams& p, const std::vector<int>& steps) {
    Report r = named("converge");
    r.inputs = params_json(p);
    r.inputs["steps"] = steps;
    const double bs = bs_call(p);
    json rows = json::array();
    double last = 0.0;
    for (int n : steps) {
        const double v = binomial_bridge(p, n).price;
        last = std::abs(v - bs);
        rows.push_back(json{{"steps", n}, {"price", v}, {"error", last}});
    }
    r.verdict = last <= 1e-2 ? "converged" : "not-converged";
    r.code = last <= 1e-2 ? kOk : kNegative;
    r.artifacts["bs_price"] = bs;
    r.artifacts["table"] = rows;
    return r;
}

Report fuzz_verb(std::uint64_t seed, std::uint64_t count, const FuzzBounds& bounds, int threads, int claims) {
    Report r = named("fuzz");
    r.inputs = {{"count", count},
                {"max_horizon", bounds.max_horizon},
                {"max_risky", bounds.max_risky},
                {"max_children", bounds.max_children},
                {"claims", claims}};
    r.seed = seed;
    const FuzzReport rep = run_fuzz(seed, count, bounds, threads, claims);
    r.verdict = rep.ok() ? "pass" : "fail";
    r.code = rep.ok() ? kOk : kNegative;
    r.artifacts["trees"] = rep.count;
    r.artifacts["arbitrage"] = rep.arbitrage;
    r.artifacts["complete"] = rep.complete;
    r.artifacts["incomplete"] = rep.incomplete;
    r.artifacts["dichotomy_failures"] = rep.dichotomy_failures;
    r.artifacts["sftap_failures"] = rep.sftap_failures;
    r.artifacts["branching_failures"] = rep.branching_failures;
    json fails = json::array();
    for (const auto& c : rep.failures) {
        fails.push_back(json{{"seed", c.seed}, {"reason", c.failure}});
    }
    r.artifacts["failures"] = fails;
    return r;
}

void add_params(CLI::App* sub, ClosedFormParams& p) {
    sub->add_option("--spot", p.spot, "Spot price S_t")->required();
    sub->add_option("--strike", p.strike, "Strike K")->required();
    sub->add_option("--rate", p.rate, "Continuously compounded rate r")->capture_default_str();
    sub->add_option("--vol", p.volatility, "Volatility sigma")->required();
    sub->add_option("--tau", p.maturity, "Time to maturity in years")->required();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Arbitrage, completeness and pricing on finite scenario trees", "ftap"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string format = "text";
    app.add_option("--format", format, "Report format")->check(CLI::IsMember({"text", "json"}));

    TreeArgs ta;
    auto tree_arg = [&](CLI::App* sub) { sub->add_option("tree", ta.tree, "Tree file")->required(); };
    auto claim_arg = [&](CLI::App* sub) { sub->add_option("claim", ta.claim, "Claim file")->required(); };

    bool exact = false;
    auto* check = app.add_subcommand("check-arbitrage", "Find an EMM or an admissible arbitrage");
    tree_arg(check);
    check->add_flag("--exact", exact, "Rational arithmetic");
    check->add_option("--save-measure", ta.save, "Write the EMM to a file");

    auto* validate = app.add_subcommand("validate", "List violated tree invariants");
    validate->add_option("tree", ta.tree, "Tree file")->required();

    auto* comp = app.add_subcommand("complete", "Check uniqueness of the EMM");
    tree_arg(comp);

    auto* repl = app.add_subcommand("replicate", "Replicate a claim by backward induction");
    tree_arg(repl);
    claim_arg(repl);

    auto* pr = app.add_subcommand("price", "Price a claim under an EMM");
    tree_arg(pr);
    claim_arg(pr);
    pr->add_option("--measure", ta.measure, "Measure file (default: max-min EMM)");

    int sign = 1;
    auto* second = app.add_subcommand("second-measure", "Construct a second EMM on an incomplete market");
    tree_arg(second);
    second->add_option("--sign", sign, "+1 or -1")->check(CLI::IsMember({1, -1}))->capture_default_str();
    second->add_option("--save-measure", ta.save, "Write the second EMM to a file");

    ClosedFormParams cf;
    auto* bs = app.add_subcommand("bs", "Black-Scholes call");
    add_params(bs, cf);

    PdeGrid grid;
    auto* pde = app.add_subcommand("pde", "Implicit finite-difference Black-Scholes call");
    add_params(pde, cf);
    pde->add_option("--space-steps", grid.space_steps)->capture_default_str();
    pde->add_option("--time-steps", grid.time_steps)->capture_default_str();
    pde->add_option("--x-max", grid.x_max, "Upper edge of the space grid");

    std::uint64_t seed = 0;
    std::uint64_t paths = 1000000;
    int substreams = 8;
    int threads = 1;
    auto* mc = app.add_subcommand("mc", "Monte Carlo call under the risk-neutral dynamics");
    add_params(mc, cf);
    mc->add_option("--seed", seed)->required();
    mc->add_option("--paths", paths)->capture_default_str();
    mc->add_option("--substreams", substreams)->capture_default_str();
    mc->add_option("--threads", threads)->capture_default_str();

    int steps = 0;
    double physical_up = 0.5;
    auto* bridge = app.add_subcommand("bridge", "Binomial tree call");
    add_params(bridge, cf);
    bridge->add_option("--steps", steps)->required();
    bridge->add_option("--phys-up", physical_up, "Physical up-probability")->capture_default_str();

    double b_spot = 0, b_strike = 0, b_sigma = 0, b_tau = 0;
    auto* bach = app.add_subcommand("bachelier", "Bachelier forward call");
    bach->add_option("--spot", b_spot)->required();
    bach->add_option("--strike", b_strike)->required();
    bach->add_option("--sigma", b_sigma, "Absolute volatility")->required();
    bach->add_option("--tau", b_tau)->required();

    std::string divergence = "entropy";
    auto* sel = app.add_subcommand("select-measure", "Divergence-minimising EMM");
    tree_arg(sel);
    sel->add_option("--divergence", divergence)->check(CLI::IsMember({"entropy", "quadratic"}))->capture_default_str();
    sel->add_option("--save-measure", ta.save, "Write the measure to a file");

    std::string utility = "exp";
    double wealth = 1.0;
    double risk_aversion = 1.0;
    double bliss = 0.0;
    auto* ind = app.add_subcommand("indifference", "Marginal utility indifference price");
    tree_arg(ind);
    claim_arg(ind);
    ind->add_option("--utility", utility)->check(CLI::IsMember({"exp", "log", "quadratic"}))->capture_default_str();
    ind->add_option("--wealth", wealth)->required();
    ind->add_option("--risk-aversion", risk_aversion)->capture_default_str();
    ind->add_option("--bliss", bliss, "Bliss point of the quadratic utility")->capture_default_str();

    std::uint64_t count = 1000;
    int claims = 20;
    FuzzBounds bounds;
    auto* fz = app.add_subcommand("fuzz", "Dichotomy and completeness checks on random trees");
    fz->add_option("--seed", seed)->required();
    fz->add_option("--count", count)->capture_default_str();
    fz->add_option("--max-horizon", bounds.max_horizon)->capture_default_str();
    fz->add_option("--max-risky", bounds.max_risky)->capture_default_str();
    fz->add_option("--max-children", bounds.max_children)->capture_default_str();
    fz->add_option("--claims", claims)->capture_default_str();
    fz->add_option("--threads", threads)->capture_default_str();

    ClosedFormParams conv{100.0, 100.0, 0.05, 0.2, 1.0};
    std::vector<int> conv_steps{10, 100, 1000};
    auto* cv = app.add_subcommand("converge", "Binomial bridge convergence table");
    cv->add_option("--spot", conv.spot)->capture_default_str();
    cv->add_option("--strike", conv.strike)->capture_default_str();
    cv->add_option("--rate", conv.rate)->capture_default_str();
    cv->add_option("--vol", conv.volatility)->capture_default_str();
    cv->add_option("--tau", conv.maturity)->capture_default_str();
    cv->add_option("--steps", conv_steps)->delimiter(',')->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kOk;
        }
        err << "error: " << e.what() << "\n";
        return kError;
    }

    try {
        Report r;
        if (check->parsed()) {
            r = check_arbitrage(ta, exact);
        } else if (validate->parsed()) {
            r.verb = "validate";
            r.inputs = {{"tree", ta.tree}};
            const ScenarioTree tree = read_tree(ta.tree);
            r.verdict = tree.valid() ? "valid" : "invalid";
            r.code = tree.valid() ? kOk : kNegative;
            r.artifacts["diagnostics"] = tree.diagnostics();
        } else if (comp->parsed()) {
            r = complete(ta);
        } else if (repl->parsed()) {
            r = replicate_verb(ta);
        } else if (pr->parsed()) {
            r = price_verb(ta);
        } else if (second->parsed()) {
            r = second_measure_verb(ta, sign);
        } else if (bs->parsed()) {
            r.verb = "bs";
            r.inputs = params_json(cf);
            r.verdict = "priced";
            r.artifacts["price"] = bs_call(cf);
        } else if (pde->parsed()) {
            r.verb = "pde";
            r.inputs = params_json(cf);
            r.inputs["space_steps"] = grid.space_steps;
            r.inputs["time_steps"] = grid.time_steps;
            const PdeSolution sol = bs_pde_solve(cf, grid);
            r.verdict = "priced";
            r.artifacts["price"] = sol.price();
            r.artifacts["x_max"] = sol.x.back();
            r.residuals["bs_gap"] = std::abs(sol.price() - bs_call(cf));
        } else if (mc->parsed()) {
            r.verb = "mc";
            r.inputs = params_json(cf);
            r.inputs["paths"] = paths;
            r.inputs["substreams"] = substreams;
            r.seed = seed;
            const MonteCarloResult res = feynman_kac_mc(cf, paths, seed, substreams, threads);
            r.verdict = "priced";
            r.artifacts["price"] = res.estimate;
            r.artifacts["stderr"] = res.standard_error;
        } else if (bridge->parsed()) {
            r.verb = "bridge";
            r.inputs = params_json(cf);
            r.inputs["steps"] = steps;
            const BridgeResult res = binomial_bridge(cf, steps, physical_up);
            r.verdict = "priced";
            r.artifacts["price"] = res.price;
            r.artifacts["up"] = res.up;
            r.artifacts["down"] = res.down;
            r.artifacts["risk_neutral_up"] = res.risk_neutral_up;
            r.residuals["bs_gap"] = std::abs(res.price - bs_call(cf));
        } else if (bach->parsed()) {
            r.verb = "bachelier";
            r.inputs = {{"spot", b_spot}, {"strike", b_strike}, {"sigma", b_sigma}, {"tau", b_tau}};
            const double closed = bachelier_call(b_spot, b_strike, b_sigma, b_tau);
            r.verdict = "priced";
            r.artifacts["price"] = closed;
            r.residuals["quadrature_gap"] =
                std::abs(closed - bachelier_call_quadrature(b_spot, b_strike, b_sigma, b_tau));
        } else if (sel->parsed()) {
            r = select_measure(ta, divergence);
        } else if (ind->parsed()) {
            r = indifference(ta, utility, wealth, risk_aversion, bliss);
        } else if (fz->parsed()) {
            r = fuzz_verb(seed, count, bounds, threads, claims);
        } else if (cv->parsed()) {
            r = converge(conv, conv_steps);
        }
        out << format_report(r, format == "json");
        return r.code;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
    } catch (const Error& e) {
        err << "internal error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return kError;
}

}  // namespace ftap::cli
