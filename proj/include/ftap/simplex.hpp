#pragma once

// Dense two-phase simplex for the small LPs that certify FFTAP verdicts.
// Templated on the scalar so the same pivoting runs in double precision or in
// exact rational arithmetic (pass eps = 0 for the latter). Bland's rule is
// used throughout, so the method terminates on degenerate problems.

#include <cstddef>
#include <utility>
#include <vector>

namespace ftap::lp {

enum class Status { optimal, infeasible, unbounded, iteration_limit };

enum class Sense { le, eq, ge };

/// minimize c.x  s.t.  rows, x >= 0. Inequality rows get a slack column.
template <class Scalar>
class LinearProgram {
public:
    std::size_t add_variable(Scalar cost = Scalar(0)) {
        cost_.push_back(std::move(cost));
        for (auto& row : pending_) {
            row.coeffs.push_back(Scalar(0));
        }
        return cost_.size() - 1;
    }

    void add_row(const std::vector<std::pair<std::size_t, Scalar>>& terms, Sense sense, Scalar rhs) {
        std::vector<Scalar> row(cost_.size(), Scalar(0));
        for (const auto& [j, v] : terms) {
            row[j] += v;
        }
        pending_.push_back({std::move(row), sense, std::move(rhs)});
    }

    void set_cost(std::size_t j, Scalar cost) { cost_[j] = std::move(cost); }

    std::size_t num_variables() const { return cost_.size(); }

    /// Materialise slacks; returns (A, b, c) of the equality form.
    void standard_form(std::vector<std::vector<Scalar>>& a, std::vector<Scalar>& b, std::vector<Scalar>& c) const {
        std::size_t n_slack = 0;
        for (const auto& r : pending_) {
            n_slack += r.sense == Sense::eq ? 0 : 1;
        }
        const std::size_t n = cost_.size();
        c = cost_;
        c.resize(n + n_slack, Scalar(0));
        a.clear();
        b.clear();
        std::size_t s = n;
        for (const auto& r : pending_) {
            std::vector<Scalar> row = r.coeffs;
            row.resize(n + n_slack, Scalar(0));
            if (r.sense == Sense::le) {
                row[s++] = Scalar(1);
            } else if (r.sense == Sense::ge) {
                row[s++] = Scalar(-1);
            }
            a.push_back(std::move(row));
            b.push_back(r.rhs);
        }
    }

private:
    struct Row {
        std::vector<Scalar> coeffs;
        Sense sense;
        Scalar rhs;
    };
    std::vector<Scalar> cost_;
    std::vector<Row> pending_;
};

template <class Scalar>
struct Result {
    Status status = Status::infeasible;
    std::vector<Scalar> x;  ///< original variables only (slacks dropped)
    Scalar objective = Scalar(0);
    std::size_t iterations = 0;
};

namespace detail {

template <class Scalar>
class Tableau {
public:
    Tableau(std::vector<std::vector<Scalar>> a, std::vector<Scalar> b, Scalar eps)
        : eps_(std::move(eps)), m_(a.size()), n_(a.empty() ? 0 : a.front().size()) {
        // Columns: n structural, m artificial, then rhs.
        t_.assign(m_, std::vector<Scalar>(n_ + m_ + 1, Scalar(0)));
        basis_.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) {
            const bool flip = b[i] < Scalar(0);
            for (std::size_t j = 0; j < n_; ++j) {
                t_[i][j] = flip ? Scalar(-a[i][j]) : a[i][j];
            }
            t_[i][n_ + i] = Scalar(1);
            t_[i][n_ + m_] = flip ? Scalar(-b[i]) : b[i];
            basis_[i] = n_ + i;
        }
        live_.assign(m_, true);
        banned_.assign(n_ + m_, false);
    }

    std::size_t rhs_col() const { return n_ + m_; }

    void set_costs(const std::vector<Scalar>& c) {
        z_.assign(n_ + m_ + 1, Scalar(0));
        for (std::size_t j = 0; j < c.size(); ++j) {
            z_[j] = c[j];
        }
        for (std::size_t i = 0; i < m_; ++i) {
            if (!live_[i]) {
                continue;
            }
            const Scalar cb = basis_[i] < c.size() ? c[basis_[i]] : Scalar(0);
            if (cb == Scalar(0)) {
                continue;
            }
            for (std::size_t j = 0; j <= rhs_col(); ++j) {
                z_[j] -= cb * t_[i][j];
            }
        }
    }

    /// Runs Bland pivots until optimal or unbounded. Returns status.
    Status optimise(std::size_t& iterations, std::size_t max_iterations) {
        while (iterations < max_iterations) {
            std::size_t enter = n_ + m_;
            for (std::size_t j = 0; j < n_ + m_; ++j) {
                if (!banned_[j] && z_[j] < -eps_) {
                    enter = j;
                    break;
                }
            }
            if (enter == n_ + m_) {
                return Status::optimal;
            }
            std::size_t leave = m_;
            Scalar best_ratio(0);
            for (std::size_t i = 0; i < m_; ++i) {
                if (!live_[i] || !(t_[i][enter] > eps_)) {
                    continue;
                }
                Scalar ratio = t_[i][rhs_col()] / t_[i][enter];
                if (leave == m_ || ratio < best_ratio || (ratio == best_ratio && basis_[i] < basis_[leave])) {
                    leave = i;
                    best_ratio = std::move(ratio);
                }
            }
            if (leave == m_) {
                return Status::unbounded;
            }
            pivot(leave, enter);
            ++iterations;
        }
        return Status::iteration_limit;
    }

    void pivot(std::size_t r, std::size_t c) {
        const Scalar p = t_[r][c];
        for (auto& v : t_[r]) {
            v /= p;
        }
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r || !live_[i] || t_[i][c] == Scalar(0)) {
                continue;
            }
            const Scalar f = t_[i][c];
            for (std::size_t j = 0; j <= rhs_col(); ++j) {
                if (t_[r][j] != Scalar(0)) {
                    t_[i][j] -= f * t_[r][j];
                }
            }
        }
        if (!z_.empty() && z_[c] != Scalar(0)) {
            const Scalar f = z_[c];
            for (std::size_t j = 0; j <= rhs_col(); ++j) {
                if (t_[r][j] != Scalar(0)) {
                    z_[j] -= f * t_[r][j];
                }
            }
        }
        basis_[r] = c;
    }

    /// After phase 1: pivot artificials out of the basis or drop redundant rows.
    void evict_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (!live_[i] || basis_[i] < n_) {
                continue;
            }
            std::size_t col = n_;
            Scalar best(0);
            for (std::size_t j = 0; j < n_; ++j) {
                Scalar mag = t_[i][j] < Scalar(0) ? Scalar(-t_[i][j]) : t_[i][j];
                if (mag > eps_ && mag > best) {
                    best = mag;
                    col = j;
                }
            }
            if (col == n_) {
                live_[i] = false;
            } else {
                pivot(i, col);
            }
        }
        for (std::size_t j = n_; j < n_ + m_; ++j) {
            banned_[j] = true;
        }
    }

    Scalar objective_value() const { return Scalar(-z_[rhs_col()]); }

    std::vector<Scalar> solution() const {
        std::vector<Scalar> x(n_, Scalar(0));
        for (std::size_t i = 0; i < m_; ++i) {
            if (live_[i] && basis_[i] < n_) {
                x[basis_[i]] = t_[i][rhs_col()];
            }
        }
        return x;
    }

    std::size_t structural() const { return n_; }
    std::size_t rows() const { return m_; }

private:
    Scalar eps_;
    std::size_t m_;
    std::size_t n_;
    std::vector<std::vector<Scalar>> t_;
    std::vector<Scalar> z_;
    std::vector<std::size_t> basis_;
    std::vector<bool> live_;
    std::vector<bool> banned_;
};

}  // namespace detail

/// `eps` is the pivot/reduced-cost threshold, `feasibility` the largest
/// phase-1 residual still treated as feasible. Both are 0 for exact scalars.
template <class Scalar>
Result<Scalar> solve(const LinearProgram<Scalar>& lp, Scalar eps, Scalar feasibility,
                     std::size_t max_iterations = 200000) {
    std::vector<std::vector<Scalar>> a;
    std::vector<Scalar> b;
    std::vector<Scalar> c;
    lp.standard_form(a, b, c);
    Result<Scalar> out;
    const std::size_t m = a.size();
    const std::size_t n = c.size();
    if (m == 0) {
        for (const auto& cj : c) {
            if (cj < Scalar(0)) {
                out.status = Status::unbounded;
                return out;
            }
        }
        out.status = Status::optimal;
        out.x.assign(lp.num_variables(), Scalar(0));
        return out;
    }
    detail::Tableau<Scalar> tab(std::move(a), std::move(b), eps);

    std::vector<Scalar> phase1(n + m, Scalar(0));
    for (std::size_t i = 0; i < m; ++i) {
        phase1[n + i] = Scalar(1);
    }
    tab.set_costs(phase1);
    Status st = tab.optimise(out.iterations, max_iterations);
    if (st == Status::iteration_limit) {
        out.status = st;
        return out;
    }
    if (tab.objective_value() > feasibility) {
        out.status = Status::infeasible;
        return out;
    }
    tab.evict_artificials();

    tab.set_costs(c);
    st = tab.optimise(out.iterations, max_iterations);
    out.status = st;
    if (st != Status::optimal) {
        return out;
    }
    out.objective = tab.objective_value();
    auto x = tab.solution();
    x.resize(lp.num_variables());
    out.x = std::move(x);
    return out;
}

}  // namespace ftap::lp
