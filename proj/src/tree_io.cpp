#include "ftap/tree_io.hpp"

#include "ftap/error.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace ftap {

namespace {

[[noreturn]] void fail(const std::string& source, const YAML::Node& node, const std::string& what) {
    const int line = node.IsDefined() ? node.Mark().line + 1 : 0;
    if (line > 0) {
        throw InputError(fmt::format("{}:{}: {}", source, line, what));
    }
    throw InputError(fmt::format("{}: {}", source, what));
}

YAML::Node load(std::string_view text, const std::string& source) {
    try {
        return YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
        throw InputError(fmt::format("{}:{}: {}", source, e.mark.line + 1, e.msg));
    }
}

double number(const YAML::Node& node, const std::string& source, const char* what) {
    if (!node.IsScalar()) {
        fail(source, node, fmt::format("{} must be a number", what));
    }
    const std::string& s = node.Scalar();
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (begin != end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        fail(source, node, fmt::format("{} '{}' is not a decimal number", what, s));
    }
    return value;
}

std::string scalar(const YAML::Node& node, const std::string& source, const char* what) {
    if (!node.IsScalar()) {
        fail(source, node, fmt::format("{} must be a scalar", what));
    }
    return node.Scalar();
}

Eigen::VectorXd leaf_map(std::string_view text, const ScenarioTree& tree, const std::string& source,
                         const char* what) {
    const YAML::Node doc = load(text, source);
    if (!doc.IsMap()) {
        fail(source, doc, fmt::format("{} file must be a map from leaf id to value", what));
    }
    Eigen::VectorXd values(static_cast<Eigen::Index>(tree.num_leaves()));
    std::vector<bool> seen(tree.num_leaves(), false);
    for (const auto& kv : doc) {
        const std::string id = scalar(kv.first, source, "leaf id");
        const auto node = tree.find(id);
        if (!node || !tree.is_leaf(*node)) {
            fail(source, kv.first, fmt::format("'{}' is not a leaf of the tree", id));
        }
        const LeafIndex l = tree.leaf_begin(*node);
        if (seen[l]) {
            fail(source, kv.first, fmt::format("leaf '{}' listed twice", id));
        }
        seen[l] = true;
        values[static_cast<Eigen::Index>(l)] = number(kv.second, source, what);
    }
    for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
        if (!seen[l]) {
            fail(source, doc, fmt::format("no {} given for leaf '{}'", what, tree.id(tree.leaf_node(l))));
        }
    }
    return values;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError(fmt::format("cannot open '{}'", path.string()));
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

ScenarioTree parse_tree(std::string_view text, const std::string& source) {
    const YAML::Node doc = load(text, source);
    if (!doc.IsMap()) {
        fail(source, doc, "tree document must be a map with horizon, assets and nodes");
    }
    for (const auto& kv : doc) {
        const std::string key = scalar(kv.first, source, "key");
        if (key != "horizon" && key != "assets" && key != "nodes") {
            fail(source, kv.first, fmt::format("unknown field '{}'", key));
        }
    }
    const YAML::Node horizon = doc["horizon"];
    const YAML::Node assets = doc["assets"];
    const YAML::Node nodes = doc["nodes"];
    if (!horizon) fail(source, doc, "missing field 'horizon'");
    if (!assets) fail(source, doc, "missing field 'assets'");
    if (!nodes) fail(source, doc, "missing field 'nodes'");

    const double h = number(horizon, source, "horizon");
    if (h != std::floor(h) || h < 0 || h > 1e6) {
        fail(source, horizon, "horizon must be a nonnegative integer");
    }
    if (!assets.IsSequence()) fail(source, assets, "assets must be a list of names");
    std::vector<std::string> names;
    for (const auto& a : assets) {
        names.push_back(scalar(a, source, "asset name"));
    }
    if (names.size() < 2) {
        fail(source, assets, "need a numeraire and at least one risky asset");
    }
    if (!nodes.IsSequence()) fail(source, nodes, "nodes must be a list");

    std::vector<NodeSpec> specs;
    for (const auto& n : nodes) {
        if (!n.IsMap()) fail(source, n, "node must be a map");
        NodeSpec spec;
        spec.line = n.Mark().line + 1;
        bool has_prob = false;
        for (const auto& kv : n) {
            const std::string key = scalar(kv.first, source, "key");
            if (key == "id") {
                spec.id = scalar(kv.second, source, "id");
            } else if (key == "parent") {
                if (!kv.second.IsNull()) spec.parent = scalar(kv.second, source, "parent");
            } else if (key == "prob") {
                spec.prob = number(kv.second, source, "prob");
                has_prob = true;
            } else if (key == "prices") {
                if (!kv.second.IsSequence()) fail(source, kv.second, "prices must be a list");
                for (const auto& v : kv.second) {
                    spec.prices.push_back(number(v, source, "price"));
                }
            } else {
                fail(source, kv.first, fmt::format("unknown node field '{}'", key));
            }
        }
        if (spec.id.empty()) fail(source, n, "node without id");
        if (spec.parent && !has_prob) fail(source, n, fmt::format("node '{}' has a parent but no prob", spec.id));
        if (spec.prices.size() != names.size()) {
            fail(source, n, fmt::format("node '{}' has {} prices, expected {}", spec.id, spec.prices.size(),
                                        names.size()));
        }
        specs.push_back(std::move(spec));
    }
    try {
        return ScenarioTree(static_cast<int>(h), std::move(names), specs);
    } catch (const InputError& e) {
        throw InputError(fmt::format("{}:{}", source, e.what()));
    }
}

ScenarioTree read_tree(const std::filesystem::path& path) { return parse_tree(read_text_file(path), path.string()); }

Claim parse_claim(std::string_view text, const ScenarioTree& tree, const std::string& source) {
    Eigen::VectorXd payoff = leaf_map(text, tree, source, "payoff");
    try {
        return Claim(std::move(payoff));
    } catch (const InputError& e) {
        throw InputError(fmt::format("{}: {}", source, e.what()));
    }
}

Claim read_claim(const std::filesystem::path& path, const ScenarioTree& tree) {
    return parse_claim(read_text_file(path), tree, path.string());
}

Measure parse_measure(std::string_view text, const ScenarioTree& tree, const std::string& source) {
    Eigen::VectorXd prob = leaf_map(text, tree, source, "probability");
    try {
        return Measure(std::move(prob));
    } catch (const InputError& e) {
        throw InputError(fmt::format("{}: {}", source, e.what()));
    }
}

Measure read_measure(const std::filesystem::path& path, const ScenarioTree& tree) {
    return parse_measure(read_text_file(path), tree, path.string());
}

std::string format_leaf_map(const ScenarioTree& tree, const Eigen::VectorXd& values) {
    std::string out;
    for (LeafIndex l = 0; l < tree.num_leaves(); ++l) {
        out += fmt::format("{}: {:.17g}\n", tree.id(tree.leaf_node(l)), values[static_cast<Eigen::Index>(l)]);
    }
    return out;
}

std::string format_tree(const ScenarioTree& tree) {
    std::string out = fmt::format("horizon: {}\nassets: [", tree.horizon());
    for (std::size_t i = 0; i < tree.asset_names().size(); ++i) {
        out += (i ? ", " : "") + tree.asset_names()[i];
    }
    out += "]\nnodes:\n";
    for (NodeIndex n = 0; n < tree.num_nodes(); ++n) {
        out += fmt::format("  - {{id: {}", tree.id(n));
        if (!tree.is_root(n)) {
            out += fmt::format(", parent: {}, prob: {:.17g}", tree.id(tree.parent(n)), tree.edge_prob(n));
        }
        out += ", prices: [";
        for (int a = 0; a < tree.num_assets(); ++a) {
            out += fmt::format("{}{:.17g}", a ? ", " : "", tree.price(n, a));
        }
        out += "]}\n";
    }
    return out;
}

}  // namespace ftap
