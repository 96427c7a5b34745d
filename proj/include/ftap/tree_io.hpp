#pragma once

#include "ftap/arbitrage.hpp"
#include "ftap/market.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace ftap {

/// Tree document (YAML, or JSON which is read by the same parser):
///
///   horizon: 1
///   assets: [bond, stock]
///   nodes:
///     - {id: r, prices: [1, 4]}
///     - {id: u, parent: r, prob: 0.5, prices: [1, 8]}
///     - {id: d, parent: r, prob: 0.5, prices: [1, 2]}
///
/// Numbers may be given as plain scalars or quoted decimal strings. Errors
/// carry the source name and line.
ScenarioTree parse_tree(std::string_view text, const std::string& source = "<input>");
ScenarioTree read_tree(const std::filesystem::path& path);

/// `{leaf_id: payoff}`; every leaf must be listed exactly once.
Claim parse_claim(std::string_view text, const ScenarioTree& tree, const std::string& source = "<input>");
Claim read_claim(const std::filesystem::path& path, const ScenarioTree& tree);

/// `{leaf_id: probability}`, same rules as claims.
Measure parse_measure(std::string_view text, const ScenarioTree& tree, const std::string& source = "<input>");
Measure read_measure(const std::filesystem::path& path, const ScenarioTree& tree);

/// YAML with 17 significant digits, leaves in tree order.
std::string format_leaf_map(const ScenarioTree& tree, const Eigen::VectorXd& values);
std::string format_tree(const ScenarioTree& tree);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace ftap
