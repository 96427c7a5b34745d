#pragma once

namespace ftap::tol {

// Values are compared after normalising by the root numeraire.
inline constexpr double value = 1e-10;
inline constexpr double probability_sum = 1e-12;
inline constexpr double martingale = 1e-9;
inline constexpr double replication = 1e-9;
inline constexpr double duality = 1e-7;

}  // namespace ftap::tol
