#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace redlab::lp {

enum class Relation { less_equal, equal, greater_equal };
enum class Status { optimal, infeasible, unbounded };

struct Row {
    std::vector<double> coeffs;
    Relation relation;
    double rhs;
};

/// maximize objective . x  subject to rows, x >= 0
struct Problem {
    std::vector<double> objective;
    std::vector<Row> rows;
};

struct Solution {
    Status status = Status::infeasible;
    double value = 0.0;
    std::vector<double> x;
};

inline constexpr std::size_t max_variables = 2048;

namespace detail {

using Real = long double;
inline constexpr Real eps = 1e-12L;

/// Dense tableau; last column is the right-hand side, last row the objective
/// (stored as reduced costs of a minimization).
class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_((rows + 1) * (cols + 1), 0.0L) {}

    Real& at(std::size_t r, std::size_t c) { return data_[r * (cols_ + 1) + c]; }
    Real& rhs(std::size_t r) { return at(r, cols_); }
    Real& cost(std::size_t c) { return at(rows_, c); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    void pivot(std::size_t pr, std::size_t pc)
    {
        const Real p = at(pr, pc);
        for (std::size_t c = 0; c <= cols_; ++c) {
            at(pr, c) /= p;
        }
        for (std::size_t r = 0; r <= rows_; ++r) {
            if (r == pr) {
                continue;
            }
            const Real f = at(r, pc);
            if (f == 0.0L) {
                continue;
            }
            for (std::size_t c = 0; c <= cols_; ++c) {
                at(r, c) -= f * at(pr, c);
            }
        }
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<Real> data_;
};

/// Bland's rule minimization over the columns marked `allowed`.
/// Returns false when unbounded.
inline bool run_simplex(Tableau& t, std::vector<std::size_t>& basis, const std::vector<bool>& allowed)
{
    const std::size_t iteration_cap = 50'000;
    for (std::size_t iter = 0; iter < iteration_cap; ++iter) {
        std::size_t enter = t.cols();
        for (std::size_t c = 0; c < t.cols(); ++c) {
            if (allowed[c] && t.cost(c) < -eps) {
                enter = c;
                break;
            }
        }
        if (enter == t.cols()) {
            return true;
        }
        std::size_t leave = t.rows();
        Real best = std::numeric_limits<Real>::infinity();
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const Real a = t.at(r, enter);
            if (a > eps) {
                const Real ratio = t.rhs(r) / a;
                if (ratio < best - eps || (ratio <= best + eps && leave < t.rows() && basis[r] < basis[leave])) {
                    best = ratio;
                    leave = r;
                }
            }
        }
        if (leave == t.rows()) {
            return false;
        }
        t.pivot(leave, enter);
        basis[leave] = enter;
    }
    throw std::runtime_error("simplex iteration cap reached");
}

}  // namespace detail

/// Two-phase dense simplex with Bland's anti-cycling rule in long double.
inline Solution solve(const Problem& problem)
{
    using detail::Real;
    const std::size_t n = problem.objective.size();
    if (n == 0 || n > max_variables) {
        throw std::invalid_argument("linear program size out of range");
    }
    const std::size_t m = problem.rows.size();

    // normalize so every rhs is nonnegative
    std::vector<Row> rows = problem.rows;
    for (auto& row : rows) {
        if (row.coeffs.size() != n) {
            throw std::invalid_argument("constraint width differs from objective");
        }
        if (row.rhs < 0.0) {
            for (double& a : row.coeffs) {
                a = -a;
            }
            row.rhs = -row.rhs;
            if (row.relation == Relation::less_equal) {
                row.relation = Relation::greater_equal;
            } else if (row.relation == Relation::greater_equal) {
                row.relation = Relation::less_equal;
            }
        }
    }

    std::size_t slack_count = 0;
    std::size_t artificial_count = 0;
    for (const auto& row : rows) {
        if (row.relation != Relation::equal) {
            ++slack_count;
        }
        if (row.relation != Relation::less_equal) {
            ++artificial_count;
        }
    }
    const std::size_t first_slack = n;
    const std::size_t first_artificial = n + slack_count;
    const std::size_t cols = n + slack_count + artificial_count;

    detail::Tableau t(m, cols);
    std::vector<std::size_t> basis(m);
    std::size_t slack = first_slack;
    std::size_t artificial = first_artificial;
    for (std::size_t r = 0; r < m; ++r) {
        const auto& row = rows[r];
        for (std::size_t c = 0; c < n; ++c) {
            t.at(r, c) = row.coeffs[c];
        }
        t.rhs(r) = row.rhs;
        if (row.relation == Relation::less_equal) {
            t.at(r, slack) = 1.0L;
            basis[r] = slack++;
        } else if (row.relation == Relation::greater_equal) {
            t.at(r, slack++) = -1.0L;
            t.at(r, artificial) = 1.0L;
            basis[r] = artificial++;
        } else {
            t.at(r, artificial) = 1.0L;
            basis[r] = artificial++;
        }
    }

    Solution out;
    std::vector<bool> allowed(cols, true);

    if (artificial_count > 0) {
        // phase 1: minimize the sum of artificials
        for (std::size_t c = first_artificial; c < cols; ++c) {
            t.cost(c) = 1.0L;
        }
        for (std::size_t r = 0; r < m; ++r) {
            if (basis[r] >= first_artificial) {
                for (std::size_t c = 0; c <= cols; ++c) {
                    t.at(m, c) -= t.at(r, c);
                }
            }
        }
        detail::run_simplex(t, basis, allowed);
        if (-t.at(m, cols) > 1e-9L) {
            out.status = Status::infeasible;
            return out;
        }
        // drive remaining (zero-valued) artificials out of the basis
        for (std::size_t r = 0; r < m; ++r) {
            if (basis[r] < first_artificial) {
                continue;
            }
            for (std::size_t c = 0; c < first_artificial; ++c) {
                if (std::fabs(t.at(r, c)) > detail::eps) {
                    t.pivot(r, c);
                    basis[r] = c;
                    break;
                }
            }
        }
        for (std::size_t c = first_artificial; c < cols; ++c) {
            allowed[c] = false;
        }
    }

    // phase 2: objective as minimization of -c.x, expressed in the current basis
    for (std::size_t c = 0; c <= cols; ++c) {
        t.cost(c) = 0.0L;
    }
    for (std::size_t c = 0; c < n; ++c) {
        t.cost(c) = -static_cast<Real>(problem.objective[c]);
    }
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t b = basis[r];
        const Real f = t.cost(b);
        if (f != 0.0L) {
            for (std::size_t c = 0; c <= cols; ++c) {
                t.at(m, c) -= f * t.at(r, c);
            }
        }
    }
    if (!detail::run_simplex(t, basis, allowed)) {
        out.status = Status::unbounded;
        return out;
    }

    out.status = Status::optimal;
    out.x.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        if (basis[r] < n) {
            out.x[basis[r]] = static_cast<double>(t.rhs(r));
        }
    }
    double value = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        value += problem.objective[c] * out.x[c];
    }
    out.value = value;
    return out;
}

}  // namespace redlab::lp
