#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "equilib/common.hpp"

namespace equilib {

// maximize c'x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0.
struct LinearProgram {
  std::vector<double> objective;            // c, length n
  std::vector<std::vector<double>> eq_lhs;  // A_eq rows, each length n
  std::vector<double> eq_rhs;               // b_eq
  std::vector<std::vector<double>> ub_lhs;  // A_ub rows
  std::vector<double> ub_rhs;               // b_ub

  std::size_t num_vars() const { return objective.size(); }

  void validate() const {
    require_dim(eq_lhs.size() == eq_rhs.size(), "LinearProgram: eq row count mismatch");
    require_dim(ub_lhs.size() == ub_rhs.size(), "LinearProgram: ub row count mismatch");
    for (const auto& row : eq_lhs)
      require_dim(row.size() == num_vars(), "LinearProgram: eq row length mismatch");
    for (const auto& row : ub_lhs)
      require_dim(row.size() == num_vars(), "LinearProgram: ub row length mismatch");
  }
};

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded };

struct SolveResult {
  SolveStatus status = SolveStatus::kInfeasible;
  std::vector<double> solution;  // structural variables only
  double objective_value = 0.0;
};

// Dense two-phase primal simplex on the full tableau. Bland's rule for both
// the entering and leaving choices, so it terminates on degenerate problems.
// Optimal solutions are feasible within 1e-8.
class SimplexSolver {
 public:
  static constexpr double kPivotTol = 1e-9;
  static constexpr double kFeasTol = 1e-8;

  explicit SimplexSolver(const LinearProgram& lp) : lp_(lp) {
    lp.validate();
    n_struct_ = lp.num_vars();
    n_slack_ = lp.ub_lhs.size();
    rows_ = lp.eq_lhs.size() + lp.ub_lhs.size();
    n_total_ = n_struct_ + n_slack_ + rows_;  // artificials appended last
    build_tableau();
  }

  SolveResult solve() {
    SolveResult result;
    if (!phase_one()) {
      result.status = SolveStatus::kInfeasible;
      return result;
    }
    if (!phase_two()) {
      result.status = SolveStatus::kUnbounded;
      return result;
    }
    result.status = SolveStatus::kOptimal;
    result.solution.assign(n_struct_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
      if (basis_[r] < n_struct_) result.solution[basis_[r]] = rhs(r);
    result.objective_value = 0.0;
    for (std::size_t j = 0; j < n_struct_; ++j)
      result.objective_value += lp_.objective[j] * result.solution[j];
    check_feasible(result.solution);
    return result;
  }

 private:
  double& at(std::size_t r, std::size_t c) { return tab_[r * (n_total_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return tab_[r * (n_total_ + 1) + c]; }
  double rhs(std::size_t r) const { return at(r, n_total_); }

  void build_tableau() {
    tab_.assign(rows_ * (n_total_ + 1), 0.0);
    basis_.assign(rows_, 0);
    std::size_t r = 0;
    auto fill_row = [&](const std::vector<double>& lhs, double b, double slack_sign) {
      double sign = b < 0.0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < n_struct_; ++j) at(r, j) = sign * lhs[j];
      if (slack_sign != 0.0) at(r, n_struct_ + slack_idx_) = sign * slack_sign;
      at(r, n_total_) = sign * b;
      at(r, n_struct_ + n_slack_ + r) = 1.0;  // artificial
      basis_[r] = n_struct_ + n_slack_ + r;
      ++r;
    };
    for (std::size_t i = 0; i < lp_.eq_lhs.size(); ++i)
      fill_row(lp_.eq_lhs[i], lp_.eq_rhs[i], 0.0);
    for (std::size_t i = 0; i < lp_.ub_lhs.size(); ++i) {
      slack_idx_ = i;
      fill_row(lp_.ub_lhs[i], lp_.ub_rhs[i], 1.0);
    }
  }

  // obj_[j] = reduced cost of column j; positive means improving (maximize).
  bool iterate(std::size_t col_limit) {
    while (true) {
      std::size_t enter = col_limit;
      for (std::size_t j = 0; j < col_limit; ++j) {
        if (obj_[j] > kPivotTol) {
          enter = j;
          break;  // Bland: lowest improving index
        }
      }
      if (enter == col_limit) return true;  // optimal
      std::size_t leave = rows_;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t row = 0; row < rows_; ++row) {
        const double a = at(row, enter);
        if (a <= kPivotTol) continue;
        const double ratio = rhs(row) / a;
        if (ratio < best_ratio - 1e-12 ||
            (ratio < best_ratio + 1e-12 &&
             (leave == rows_ || basis_[row] < basis_[leave]))) {
          best_ratio = ratio;
          leave = row;
        }
      }
      if (leave == rows_) return false;  // unbounded direction
      pivot(leave, enter);
    }
  }

  void pivot(std::size_t prow, std::size_t pcol) {
    const double p = at(prow, pcol);
    for (std::size_t c = 0; c <= n_total_; ++c) at(prow, c) /= p;
    for (std::size_t row = 0; row < rows_; ++row) {
      if (row == prow) continue;
      const double f = at(row, pcol);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= n_total_; ++c) at(row, c) -= f * at(prow, c);
      at(row, pcol) = 0.0;
    }
    const double g = obj_[pcol];
    if (g != 0.0) {
      for (std::size_t c = 0; c <= n_total_; ++c) obj_[c] -= g * at(prow, c);
      obj_[pcol] = 0.0;
    }
    basis_[prow] = pcol;
  }

  void price_out(const std::vector<double>& cost) {
    // obj_[j] = c_j - c_B' B^{-1} A_j over the current tableau.
    obj_.assign(n_total_ + 1, 0.0);
    for (std::size_t j = 0; j <= n_total_; ++j)
      obj_[j] = j < cost.size() ? cost[j] : 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      const double cb = basis_[r] < cost.size() ? cost[basis_[r]] : 0.0;
      if (cb == 0.0) continue;
      for (std::size_t c = 0; c <= n_total_; ++c) obj_[c] -= cb * at(r, c);
    }
  }

  bool phase_one() {
    std::vector<double> cost(n_total_, 0.0);
    for (std::size_t j = n_struct_ + n_slack_; j < n_total_; ++j) cost[j] = -1.0;
    price_out(cost);
    iterate(n_total_);  // cannot be unbounded: objective bounded above by 0
    double artificial_sum = 0.0;
    for (std::size_t r = 0; r < rows_; ++r)
      if (basis_[r] >= n_struct_ + n_slack_) artificial_sum += rhs(r);
    if (artificial_sum > kFeasTol) return false;
    // Drive remaining (degenerate) artificials out of the basis.
    for (std::size_t r = 0; r < rows_; ++r) {
      if (basis_[r] < n_struct_ + n_slack_) continue;
      std::size_t pcol = n_struct_ + n_slack_;
      for (std::size_t j = 0; j < n_struct_ + n_slack_; ++j) {
        if (std::abs(at(r, j)) > kPivotTol) {
          pcol = j;
          break;
        }
      }
      if (pcol < n_struct_ + n_slack_) {
        pivot(r, pcol);
      } else {
        // Redundant row: keep the artificial basic at level ~0; it never
        // re-enters because phase two prices artificial columns at -inf.
      }
    }
    return true;
  }

  bool phase_two() {
    std::vector<double> cost(n_total_, 0.0);
    for (std::size_t j = 0; j < n_struct_; ++j) cost[j] = lp_.objective[j];
    price_out(cost);
    return iterate(n_struct_ + n_slack_);  // artificials excluded from entering
  }

  void check_feasible(const std::vector<double>& x) const {
    for (std::size_t i = 0; i < lp_.eq_lhs.size(); ++i) {
      double lhs = 0.0;
      for (std::size_t j = 0; j < n_struct_; ++j) lhs += lp_.eq_lhs[i][j] * x[j];
      if (std::abs(lhs - lp_.eq_rhs[i]) > 1e-6)
        throw NumericError("simplex: optimal solution violates an equality row");
    }
    for (std::size_t i = 0; i < lp_.ub_lhs.size(); ++i) {
      double lhs = 0.0;
      for (std::size_t j = 0; j < n_struct_; ++j) lhs += lp_.ub_lhs[i][j] * x[j];
      if (lhs - lp_.ub_rhs[i] > 1e-6)
        throw NumericError("simplex: optimal solution violates an inequality row");
    }
  }

  const LinearProgram& lp_;
  std::size_t n_struct_ = 0, n_slack_ = 0, n_total_ = 0, rows_ = 0, slack_idx_ = 0;
  std::vector<double> tab_;   // rows_ x (n_total_+1)
  std::vector<double> obj_;   // reduced-cost row, length n_total_+1
  std::vector<std::size_t> basis_;
};

inline SolveResult simplex_solve(const LinearProgram& lp) {
  if (lp.num_vars() > 10000 || lp.eq_lhs.size() + lp.ub_lhs.size() > 10000)
    throw CapacityError("simplex_solve: problem exceeds the dense-solver limit");
  for (double v : lp.objective)
    if (!std::isfinite(v)) throw NumericError("simplex_solve: non-finite objective");
  SimplexSolver solver(lp);
  return solver.solve();
}

}  // namespace equilib
