#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "equilib/common.hpp"
#include "equilib/game.hpp"

namespace equilib {

enum class SolutionConcept { NE, CE, CCE };

inline std::string to_string(SolutionConcept c) {
  switch (c) {
    case SolutionConcept::NE: return "ne";
    case SolutionConcept::CE: return "ce";
    case SolutionConcept::CCE: return "cce";
  }
  return "?";
}

// phi_i: A_i -> A_i, not necessarily a bijection.
struct StrategyModification {
  int player = 0;
  std::vector<int> map;

  StrategyModification(int p, std::vector<int> m) : player(p), map(std::move(m)) {
    for (int v : map)
      require_arg(v >= 0 && v < static_cast<int>(map.size()),
                  "StrategyModification: value out of range");
  }
};

namespace detail {

// dev[b] = u_i(b, pi_{-i}): expected payoff of pure deviation b against the
// correlated profile of the other players.
inline std::vector<double> deviation_values(const Game& game, int player,
                                            const JointStrategy& pi) {
  const auto& shape = game.shape();
  const std::size_t stride = shape.stride(player);
  const int m = shape.actions(player);
  std::vector<double> dev(static_cast<std::size_t>(m), 0.0);
  for (std::size_t idx = 0; idx < pi.probs().size(); ++idx) {
    const double p = pi.prob(idx);
    if (p == 0.0) continue;
    const std::size_t base =
        idx - static_cast<std::size_t>(shape.action_of(idx, player)) * stride;
    for (int b = 0; b < m; ++b)
      dev[static_cast<std::size_t>(b)] +=
          p * game.payoff(player, base + static_cast<std::size_t>(b) * stride);
  }
  return dev;
}

inline std::vector<double> deviation_values(const Game& game, int player,
                                            const ProductStrategy& sigma) {
  const auto& shape = game.shape();
  const std::size_t stride = shape.stride(player);
  const int m = shape.actions(player);
  std::vector<double> dev(static_cast<std::size_t>(m), 0.0);
  for (std::size_t idx = 0; idx < game.joint_count(); ++idx) {
    if (shape.action_of(idx, player) != 0) continue;  // one pass per opponent cell
    double w = 1.0;
    for (int j = 0; j < shape.num_players; ++j) {
      if (j == player) continue;
      w *= sigma.probs(j)[static_cast<std::size_t>(shape.action_of(idx, j))];
    }
    if (w == 0.0) continue;
    for (int b = 0; b < m; ++b)
      dev[static_cast<std::size_t>(b)] +=
          w * game.payoff(player, idx + static_cast<std::size_t>(b) * stride);
  }
  return dev;
}

// Lowest index wins ties; needed for deterministic subgradients.
inline int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
  return best;
}

}  // namespace detail

// max_{a'_i} u_i(a'_i, pi_{-i}).
inline double best_response_value(const Game& game, int player, const JointStrategy& pi) {
  require_dim(pi.shape() == game.shape(), "best_response_value: shape mismatch");
  const auto dev = detail::deviation_values(game, player, pi);
  return *std::max_element(dev.begin(), dev.end());
}

inline double best_response_value(const Game& game, int player,
                                  const ProductStrategy& sigma) {
  require_dim(sigma.shape_matches(game.shape()),
              "best_response_value: shape mismatch");
  const auto dev = detail::deviation_values(game, player, sigma);
  return *std::max_element(dev.begin(), dev.end());
}

// E_i(sigma, u) for product strategies. Nonnegative up to rounding: the best
// pure response dominates any mixture of own actions.
inline double exploitability_ne(const Game& game, const ProductStrategy& sigma,
                                int player) {
  const double value =
      best_response_value(game, player, sigma) - expected_utility_product(game, player, sigma);
  if (value < -1e-12)
    throw NumericError("exploitability_ne: negative beyond tolerance (internal error)");
  return value;
}

// E_i(pi, u) for joint strategies. May be negative: correlation can pay more
// than the best independent deviation; the raw signed value is preserved.
inline double exploitability_cce(const Game& game, const JointStrategy& pi, int player) {
  return best_response_value(game, player, pi) - expected_utility_joint(game, player, pi);
}

// E^CE_i(pi, u) via the per-recommendation decomposition: for each
// recommended action choose the best replacement independently. Equal to the
// max over all |A_i|^{|A_i|} strategy modifications, at linear cost.
inline double exploitability_ce(const Game& game, const JointStrategy& pi, int player) {
  require_dim(pi.shape() == game.shape(), "exploitability_ce: shape mismatch");
  const auto& shape = game.shape();
  const std::size_t stride = shape.stride(player);
  const int m = shape.actions(player);
  // value[a][b] = sum over cells with recommendation a of pi * u_i(b, rest)
  std::vector<std::vector<double>> value(
      static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(m), 0.0));
  for (std::size_t idx = 0; idx < pi.probs().size(); ++idx) {
    const double p = pi.prob(idx);
    if (p == 0.0) continue;
    const int a = shape.action_of(idx, player);
    const std::size_t base = idx - static_cast<std::size_t>(a) * stride;
    for (int b = 0; b < m; ++b)
      value[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +=
          p * game.payoff(player, base + static_cast<std::size_t>(b) * stride);
  }
  double best = 0.0;
  for (int a = 0; a < m; ++a)
    best += *std::max_element(value[static_cast<std::size_t>(a)].begin(),
                              value[static_cast<std::size_t>(a)].end());
  const double result = best - expected_utility_joint(game, player, pi);
  if (result < -1e-12)
    throw NumericError("exploitability_ce: negative beyond tolerance (internal error)");
  return result;
}

// Gain of one explicit strategy modification.
inline double modification_gain(const Game& game, const JointStrategy& pi,
                                const StrategyModification& phi) {
  require_dim(pi.shape() == game.shape(), "modification_gain: shape mismatch");
  require_dim(static_cast<int>(phi.map.size()) == game.shape().actions(phi.player),
              "modification_gain: map length mismatch");
  const auto& shape = game.shape();
  const std::size_t stride = shape.stride(phi.player);
  double modified = 0.0;
  for (std::size_t idx = 0; idx < pi.probs().size(); ++idx) {
    const double p = pi.prob(idx);
    if (p == 0.0) continue;
    const int a = shape.action_of(idx, phi.player);
    const int b = phi.map[static_cast<std::size_t>(a)];
    modified += p * game.payoff(phi.player,
                                idx + (static_cast<std::size_t>(b) -
                                       static_cast<std::size_t>(a)) * stride);
  }
  return modified - expected_utility_joint(game, phi.player, pi);
}

// Test oracle: brute force over all m^m modifications. Must agree with
// exploitability_ce to 1e-12.
inline double exploitability_ce_enumerated(const Game& game, const JointStrategy& pi,
                                           int player) {
  const int m = game.shape().actions(player);
  double count = 1.0;
  for (int i = 0; i < m; ++i) count *= m;
  if (count > 1e6)
    throw CapacityError("exploitability_ce_enumerated: m^m exceeds 1e6");
  std::vector<int> map(static_cast<std::size_t>(m), 0);
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    best = std::max(best, modification_gain(game, pi, StrategyModification(player, map)));
    int pos = m - 1;
    while (pos >= 0 && map[static_cast<std::size_t>(pos)] == m - 1) {
      map[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++map[static_cast<std::size_t>(pos)];
  }
  return best;
}

// ---------------------------------------------------------------------------
// Approximation (max over players) and NashConv (clamped sum)
// ---------------------------------------------------------------------------

inline double approximation(const Game& game, const ProductStrategy& sigma,
                            SolutionConcept concept = SolutionConcept::NE) {
  require_arg(concept == SolutionConcept::NE,
              "approximation: product strategies go with the NE concept");
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < game.num_players(); ++i)
    worst = std::max(worst, exploitability_ne(game, sigma, i));
  return worst;
}

inline double approximation(const Game& game, const JointStrategy& pi,
                            SolutionConcept concept) {
  require_arg(concept == SolutionConcept::CE || concept == SolutionConcept::CCE,
              "approximation: joint strategies go with the CE/CCE concepts");
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < game.num_players(); ++i) {
    const double e = concept == SolutionConcept::CE ? exploitability_ce(game, pi, i)
                                                    : exploitability_cce(game, pi, i);
    worst = std::max(worst, e);
  }
  return worst;
}

// Sum of per-player exploitabilities clamped at zero, so exact CCEs report 0
// despite negative slacks (divergence from the raw sum noted in the docs).
inline double nashconv(const Game& game, const ProductStrategy& sigma,
                       SolutionConcept concept = SolutionConcept::NE) {
  require_arg(concept == SolutionConcept::NE,
              "nashconv: product strategies go with the NE concept");
  double total = 0.0;
  for (int i = 0; i < game.num_players(); ++i)
    total += std::max(exploitability_ne(game, sigma, i), 0.0);
  return total;
}

inline double nashconv(const Game& game, const JointStrategy& pi, SolutionConcept concept) {
  require_arg(concept == SolutionConcept::CE || concept == SolutionConcept::CCE,
              "nashconv: joint strategies go with the CE/CCE concepts");
  double total = 0.0;
  for (int i = 0; i < game.num_players(); ++i) {
    const double e = concept == SolutionConcept::CE ? exploitability_ce(game, pi, i)
                                                    : exploitability_cce(game, pi, i);
    total += std::max(e, 0.0);
  }
  return total;
}

// SW = sum_i u_i.
inline double social_welfare(const Game& game, const JointStrategy& pi) {
  double total = 0.0;
  for (int i = 0; i < game.num_players(); ++i)
    total += expected_utility_joint(game, i, pi);
  return total;
}

inline double social_welfare(const Game& game, const ProductStrategy& sigma) {
  double total = 0.0;
  for (int i = 0; i < game.num_players(); ++i)
    total += expected_utility_product(game, i, sigma);
  return total;
}

}  // namespace equilib
