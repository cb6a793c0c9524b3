#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "equilib/common.hpp"
#include "equilib/game.hpp"
#include "equilib/lp.hpp"
#include "equilib/metrics.hpp"

namespace equilib {

// ---------------------------------------------------------------------------
// Pure Nash enumeration
// ---------------------------------------------------------------------------

// Joint actions where no player has a strictly improving pure deviation
// (tolerance 1e-12). Lexicographic order.
inline std::vector<std::vector<int>> enumerate_pure_ne(const Game& game) {
  if (game.joint_count() > 1000000)
    throw CapacityError("enumerate_pure_ne: joint action space exceeds 1e6");
  const auto& shape = game.shape();
  std::vector<std::vector<int>> result;
  std::vector<int> joint(static_cast<std::size_t>(shape.num_players));
  for (std::size_t idx = 0; idx < game.joint_count(); ++idx) {
    bool stable = true;
    for (int i = 0; i < shape.num_players && stable; ++i) {
      const double own = game.payoff(i, idx);
      for (int b = 0; b < shape.actions(i); ++b) {
        if (game.payoff(i, shape.with_action(idx, i, b)) > own + 1e-12) {
          stable = false;
          break;
        }
      }
    }
    if (stable) {
      shape.unflatten(idx, joint);
      result.push_back(joint);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Support enumeration (bimatrix)
// ---------------------------------------------------------------------------

struct SupportEnumerationResult {
  std::vector<ProductStrategy> equilibria;
  // Set when at least one indifference system was singular: the game is
  // degenerate and the returned enumeration may be incomplete.
  bool degenerate_warning = false;
};

namespace detail {

// Gaussian elimination with partial pivoting; nullopt when singular.
inline std::optional<std::vector<double>> solve_square(
    std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-12) return std::nullopt;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return b;
}

inline void next_subsets(int m, int k, std::vector<std::vector<int>>& out) {
  std::vector<int> s(static_cast<std::size_t>(k));
  std::iota(s.begin(), s.end(), 0);
  while (true) {
    out.push_back(s);
    int pos = k - 1;
    while (pos >= 0 && s[static_cast<std::size_t>(pos)] == m - k + pos) --pos;
    if (pos < 0) break;
    ++s[static_cast<std::size_t>(pos)];
    for (int q = pos + 1; q < k; ++q)
      s[static_cast<std::size_t>(q)] = s[static_cast<std::size_t>(q - 1)] + 1;
  }
}

// Mixture over `support` of the opponent making every action in `own_support`
// pay the same value v; unknowns are the support weights plus v.
// payoff_of(own_action, opp_action) supplies the deviating player's payoff.
template <typename Payoff>
inline std::optional<std::pair<std::vector<double>, double>> indifference_system(
    const std::vector<int>& own_support, const std::vector<int>& opp_support, int opp_count,
    Payoff&& payoff_of, bool& singular_seen) {
  const std::size_t k = own_support.size();
  std::vector<std::vector<double>> a(k + 1, std::vector<double>(k + 1, 0.0));
  std::vector<double> b(k + 1, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c)
      a[r][c] = payoff_of(own_support[r], opp_support[c]);
    a[r][k] = -1.0;  // minus value variable
  }
  for (std::size_t c = 0; c < k; ++c) a[k][c] = 1.0;
  b[k] = 1.0;
  auto sol = solve_square(std::move(a), std::move(b));
  if (!sol) {
    singular_seen = true;
    return std::nullopt;
  }
  std::vector<double> mix(static_cast<std::size_t>(opp_count), 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    if ((*sol)[c] < -1e-9) return std::nullopt;  // outside the simplex
    mix[static_cast<std::size_t>(opp_support[c])] = std::max((*sol)[c], 0.0);
  }
  return std::make_pair(std::move(mix), (*sol)[k]);
}

}  // namespace detail

// All Nash equilibria of a bimatrix game reachable through equal-size support
// pairs: solve both indifference systems, then check nonnegativity and the
// best-response conditions at 1e-9. Equilibria within max-player L1 distance
// 1e-7 of an earlier find are dropped. Singular (degenerate) support systems
// are skipped and flagged rather than perturbed, so enumeration can be
// incomplete for degenerate games.
inline SupportEnumerationResult support_enumeration_bimatrix(const Game& game) {
  require_arg(game.num_players() == 2, "support_enumeration_bimatrix: need n = 2");
  const int m1 = game.shape().actions(0);
  const int m2 = game.shape().actions(1);
  if (m1 > 8 || m2 > 8)
    throw CapacityError("support_enumeration_bimatrix: action counts above 8");

  auto u1 = [&](int a, int b) {
    const int joint[2] = {a, b};
    return game.payoff(0, std::span<const int>(joint, 2));
  };
  auto u2 = [&](int a, int b) {
    const int joint[2] = {a, b};
    return game.payoff(1, std::span<const int>(joint, 2));
  };

  SupportEnumerationResult result;
  auto already_found = [&](const ProductStrategy& s) {
    for (const auto& t : result.equilibria) {
      double worst = 0.0;
      for (int i = 0; i < 2; ++i) {
        double l1 = 0.0;
        for (int a = 0; a < game.shape().actions(i); ++a)
          l1 += std::abs(s.probs(i)[static_cast<std::size_t>(a)] -
                         t.probs(i)[static_cast<std::size_t>(a)]);
        worst = std::max(worst, l1);
      }
      if (worst < 1e-7) return true;
    }
    return false;
  };

  for (int k = 1; k <= std::min(m1, m2); ++k) {
    std::vector<std::vector<int>> supports1, supports2;
    detail::next_subsets(m1, k, supports1);
    detail::next_subsets(m2, k, supports2);
    for (const auto& s1 : supports1) {
      for (const auto& s2 : supports2) {
        // sigma2 makes player 1 indifferent across s1; sigma1 likewise.
        auto r2 = detail::indifference_system(s1, s2, m2, u1, result.degenerate_warning);
        if (!r2) continue;
        auto r1 = detail::indifference_system(
            s2, s1, m1, [&](int b, int a) { return u2(a, b); },
            result.degenerate_warning);
        if (!r1) continue;
        const auto& [sigma2, v1] = *r2;
        const auto& [sigma1, v2] = *r1;
        bool best_response = true;
        for (int a = 0; a < m1 && best_response; ++a) {
          double val = 0.0;
          for (int b = 0; b < m2; ++b) val += sigma2[static_cast<std::size_t>(b)] * u1(a, b);
          if (val > v1 + 1e-9) best_response = false;
        }
        for (int b = 0; b < m2 && best_response; ++b) {
          double val = 0.0;
          for (int a = 0; a < m1; ++a) val += sigma1[static_cast<std::size_t>(a)] * u2(a, b);
          if (val > v2 + 1e-9) best_response = false;
        }
        if (!best_response) continue;
        ProductStrategy eq({sigma1, sigma2});
        if (!already_found(eq)) result.equilibria.push_back(std::move(eq));
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Max-welfare CE / CCE via LP
// ---------------------------------------------------------------------------

// Distribution over joint actions maximizing social welfare subject to the
// CE or CCE incentive constraints. The returned strategy is re-checked with
// the metrics module (approximation <= 1e-8).
inline std::pair<JointStrategy, double> max_welfare_equilibrium(const Game& game,
                                                                SolutionConcept concept) {
  require_arg(concept == SolutionConcept::CE || concept == SolutionConcept::CCE,
              "max_welfare_equilibrium: concept must be CE or CCE");
  if (game.joint_count() > 10000)
    throw CapacityError("max_welfare_equilibrium: joint action space exceeds 1e4");
  const auto& shape = game.shape();
  const std::size_t cells = game.joint_count();

  LinearProgram lp;
  lp.objective.assign(cells, 0.0);
  for (std::size_t idx = 0; idx < cells; ++idx)
    for (int i = 0; i < game.num_players(); ++i) lp.objective[idx] += game.payoff(i, idx);

  lp.eq_lhs.push_back(std::vector<double>(cells, 1.0));
  lp.eq_rhs.push_back(1.0);

  if (concept == SolutionConcept::CCE) {
    // For each (i, b): sum_a pi(a) [u_i(b, a_{-i}) - u_i(a)] <= 0.
    for (int i = 0; i < game.num_players(); ++i) {
      const std::size_t stride = shape.stride(i);
      for (int b = 0; b < shape.actions(i); ++b) {
        std::vector<double> row(cells, 0.0);
        for (std::size_t idx = 0; idx < cells; ++idx) {
          const int a = shape.action_of(idx, i);
          const std::size_t swapped =
              idx + (static_cast<std::size_t>(b) - static_cast<std::size_t>(a)) * stride;
          row[idx] = game.payoff(i, swapped) - game.payoff(i, idx);
        }
        lp.ub_lhs.push_back(std::move(row));
        lp.ub_rhs.push_back(0.0);
      }
    }
  } else {
    // For each (i, a, b), a != b: sum_{a_{-i}} pi(a, a_{-i})
    //   [u_i(b, a_{-i}) - u_i(a, a_{-i})] <= 0.
    for (int i = 0; i < game.num_players(); ++i) {
      const std::size_t stride = shape.stride(i);
      for (int a = 0; a < shape.actions(i); ++a) {
        for (int b = 0; b < shape.actions(i); ++b) {
          if (a == b) continue;
          std::vector<double> row(cells, 0.0);
          for (std::size_t idx = 0; idx < cells; ++idx) {
            if (shape.action_of(idx, i) != a) continue;
            const std::size_t swapped =
                idx + (static_cast<std::size_t>(b) - static_cast<std::size_t>(a)) * stride;
            row[idx] = game.payoff(i, swapped) - game.payoff(i, idx);
          }
          lp.ub_lhs.push_back(std::move(row));
          lp.ub_rhs.push_back(0.0);
        }
      }
    }
  }

  const SolveResult sol = simplex_solve(lp);
  if (sol.status != SolveStatus::kOptimal)
    throw NumericError("max_welfare_equilibrium: LP did not reach an optimum");
  JointStrategy pi(shape, sol.solution);
  if (approximation(game, pi, concept) > 1e-8)
    throw NumericError("max_welfare_equilibrium: LP solution fails the incentive check");
  return {std::move(pi), sol.objective_value};
}

}  // namespace equilib
