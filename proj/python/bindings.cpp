#include "ftap/arbitrage.hpp"
#include "ftap/closed_form.hpp"
#include "ftap/completeness.hpp"
#include "ftap/error.hpp"
#include "ftap/fuzz.hpp"
#include "ftap/selection.hpp"
#include "ftap/tree_io.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ftap;

namespace {

Claim to_claim(const ScenarioTree& t, const Eigen::VectorXd& payoff) {
    if (static_cast<std::size_t>(payoff.size()) != t.num_leaves()) {
        throw InputError("payoff length must equal the number of leaves");
    }
    return Claim(payoff);
}

std::vector<std::string> leaf_ids(const ScenarioTree& t) {
    std::vector<std::string> out;
    for (LeafIndex l = 0; l < t.num_leaves(); ++l) out.push_back(t.id(t.leaf_node(l)));
    return out;
}

UtilitySpec utility_named(const std::string& name, double param) {
    if (name == "exp") return UtilitySpec::exponential(param);
    if (name == "log") return UtilitySpec::log();
    if (name == "quadratic") return UtilitySpec::quadratic(param);
    throw InputError("utility must be exp, log or quadratic");
}

DivergenceSpec divergence_named(const std::string& name) {
    if (name == "entropy") return DivergenceSpec::entropy();
    if (name == "quadratic") return DivergenceSpec::quadratic();
    throw InputError("divergence must be entropy or quadratic");
}

ClosedFormParams params(double spot, double strike, double rate, double vol, double tau) {
    return {spot, strike, rate, vol, tau};
}

}  // namespace

PYBIND11_MODULE(_ftap, m) {
    m.doc() = "Discrete-time arbitrage, completeness and pricing on scenario trees";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<InputError>(m, "InputError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<InvariantViolation>(m, "InvariantViolation", base.ptr());

    py::class_<ScenarioTree>(m, "ScenarioTree")
        .def_property_readonly("horizon", &ScenarioTree::horizon)
        .def_property_readonly("num_nodes", &ScenarioTree::num_nodes)
        .def_property_readonly("num_leaves", &ScenarioTree::num_leaves)
        .def_property_readonly("num_risky", &ScenarioTree::num_risky)
        .def_property_readonly("asset_names", &ScenarioTree::asset_names)
        .def_property_readonly("leaf_ids", &leaf_ids)
        .def_property_readonly("diagnostics", &ScenarioTree::diagnostics)
        .def("physical_leaf_probs", &ScenarioTree::physical_leaf_probs)
        .def("__repr__", [](const ScenarioTree& t) {
            return "<ScenarioTree horizon=" + std::to_string(t.horizon()) +
                   " leaves=" + std::to_string(t.num_leaves()) + ">";
        });

    m.def("parse_tree", [](const std::string& text) { return parse_tree(text); }, py::arg("text"));
    m.def("read_tree", [](const std::string& path) { return read_tree(path); }, py::arg("path"));

    m.def(
        "find_emm",
        [](const ScenarioTree& t) -> std::optional<Eigen::VectorXd> {
            const auto q = find_emm(t);
            if (!q) return std::nullopt;
            return q->leaf_prob();
        },
        "Max-min equivalent martingale measure over the leaves, or None.");
    m.def(
        "find_arbitrage",
        [](const ScenarioTree& t) -> std::optional<Eigen::MatrixXd> {
            const auto a = find_arbitrage(t);
            if (!a) return std::nullopt;
            return a->positions();
        },
        "Admissible arbitrage positions (one row per node), or None.");
    m.def("is_complete", &is_complete);
    m.def("polytope_dimension", [](const ScenarioTree& t) {
        const auto q = find_emm(t);
        if (!q) throw InputError("market admits arbitrage");
        return emm_polytope(t, *q).dimension;
    });
    m.def("replicate", [](const ScenarioTree& t, const Eigen::VectorXd& payoff) {
        const ReplicationResult r = replicate(t, to_claim(t, payoff));
        py::dict d;
        d["attainable"] = r.attainable;
        d["initial_price"] = r.initial_price;
        d["residual"] = r.residual;
        d["positions"] = r.strategy.positions();
        return d;
    });
    m.def("price", [](const ScenarioTree& t, const Eigen::VectorXd& payoff, const Eigen::VectorXd& q) {
        return price(t, to_claim(t, payoff), Measure(q)).value[0];
    });
    m.def("price_bounds", [](const ScenarioTree& t, const Eigen::VectorXd& payoff) {
        const PriceBounds b = price_bounds(t, to_claim(t, payoff));
        return std::make_pair(b.lower, b.upper);
    });
    m.def(
        "second_measure",
        [](const ScenarioTree& t, int sign) -> std::optional<Eigen::VectorXd> {
            const auto q = find_emm(t);
            if (!q) throw InputError("market admits arbitrage");
            const auto s = second_measure(t, *q, sign);
            if (!s) return std::nullopt;
            return s->leaf_prob();
        },
        py::arg("tree"), py::arg("sign") = 1);

    m.def(
        "minimal_divergence_measure",
        [](const ScenarioTree& t, const std::string& name) {
            return minimal_divergence_measure(t, divergence_named(name)).leaf_prob;
        },
        py::arg("tree"), py::arg("divergence") = "entropy");
    m.def(
        "indifference_price",
        [](const ScenarioTree& t, const Eigen::VectorXd& payoff, double wealth, const std::string& utility,
           double param) {
            return marginal_indifference_price(t, utility_named(utility, param), wealth, to_claim(t, payoff)).price;
        },
        py::arg("tree"), py::arg("payoff"), py::arg("wealth"), py::arg("utility") = "exp", py::arg("param") = 1.0);

    m.def(
        "bs_call", [](double s, double k, double r, double v, double tau) { return bs_call(params(s, k, r, v, tau)); },
        py::arg("spot"), py::arg("strike"), py::arg("rate"), py::arg("vol"), py::arg("tau"));
    m.def(
        "pde_call",
        [](double s, double k, double r, double v, double tau, int space, int time) {
            return bs_pde_solve(params(s, k, r, v, tau), PdeGrid{space, time, 0.0}).price();
        },
        py::arg("spot"), py::arg("strike"), py::arg("rate"), py::arg("vol"), py::arg("tau"),
        py::arg("space_steps") = 2000, py::arg("time_steps") = 8000);
    m.def(
        "binomial_call",
        [](double s, double k, double r, double v, double tau, int steps) {
            return binomial_bridge(params(s, k, r, v, tau), steps).price;
        },
        py::arg("spot"), py::arg("strike"), py::arg("rate"), py::arg("vol"), py::arg("tau"), py::arg("steps"));
    m.def(
        "mc_call",
        [](double s, double k, double r, double v, double tau, std::uint64_t paths, std::uint64_t seed) {
            const MonteCarloResult res = feynman_kac_mc(params(s, k, r, v, tau), paths, seed);
            return std::make_pair(res.estimate, res.standard_error);
        },
        py::arg("spot"), py::arg("strike"), py::arg("rate"), py::arg("vol"), py::arg("tau"), py::arg("paths"),
        py::arg("seed"));
    m.def("bachelier_call", &bachelier_call, py::arg("spot"), py::arg("strike"), py::arg("sigma"), py::arg("tau"));

    m.def(
        "fuzz",
        [](std::uint64_t seed, std::uint64_t count) {
            const FuzzReport r = run_fuzz(seed, count);
            py::dict d;
            d["arbitrage"] = r.arbitrage;
            d["complete"] = r.complete;
            d["incomplete"] = r.incomplete;
            d["failures"] = r.failures.size();
            d["ok"] = r.ok();
            return d;
        },
        py::arg("seed"), py::arg("count") = 1000);
}
