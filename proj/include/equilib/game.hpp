#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "equilib/common.hpp"
#include "equilib/rng.hpp"

namespace equilib {

// Exact orbit enumeration is allowed while m! <= 720; bigger action sets go
// through the sampled-permutation path.
inline constexpr int kOrbitEnumLimit = 6;

// Simplex vectors may miss a total of 1 by this much before rejection;
// anything closer is renormalized.
inline constexpr double kSimplexTolerance = 1e-9;

// ---------------------------------------------------------------------------
// Shapes and joint-action indexing
// ---------------------------------------------------------------------------

// Player count and per-player action counts. Joint actions are flattened
// row-major with player 0 as the slowest axis.
struct GameShape {
  int num_players = 0;
  std::vector<int> action_counts;

  GameShape() = default;
  GameShape(int n, std::vector<int> counts)
      : num_players(n), action_counts(std::move(counts)) {
    require_arg(num_players >= 2, "GameShape: need at least 2 players");
    require_arg(static_cast<int>(action_counts.size()) == num_players,
                "GameShape: action_counts length must equal num_players");
    std::size_t total = 1;
    for (int m : action_counts) {
      require_arg(m >= 1, "GameShape: every action count must be >= 1");
      const std::size_t limit = std::numeric_limits<std::size_t>::max() / 2;
      if (total > limit / static_cast<std::size_t>(m))
        throw CapacityError("GameShape: joint action space overflows index space");
      total *= static_cast<std::size_t>(m);
    }
  }

  int actions(int player) const { return action_counts[static_cast<std::size_t>(player)]; }

  std::size_t joint_count() const {
    std::size_t total = 1;
    for (int m : action_counts) total *= static_cast<std::size_t>(m);
    return total;
  }

  // Elements per step along `player`'s axis.
  std::size_t stride(int player) const {
    std::size_t s = 1;
    for (int j = player + 1; j < num_players; ++j)
      s *= static_cast<std::size_t>(action_counts[static_cast<std::size_t>(j)]);
    return s;
  }

  std::size_t flat_index(std::span<const int> joint) const {
    require_dim(static_cast<int>(joint.size()) == num_players,
                "flat_index: joint action arity mismatch");
    std::size_t idx = 0;
    for (int i = 0; i < num_players; ++i) {
      const int a = joint[static_cast<std::size_t>(i)];
      require_dim(a >= 0 && a < actions(i), "flat_index: action out of range");
      idx = idx * static_cast<std::size_t>(actions(i)) + static_cast<std::size_t>(a);
    }
    return idx;
  }

  void unflatten(std::size_t idx, std::span<int> out) const {
    for (int i = num_players - 1; i >= 0; --i) {
      const auto m = static_cast<std::size_t>(actions(i));
      out[static_cast<std::size_t>(i)] = static_cast<int>(idx % m);
      idx /= m;
    }
  }

  int action_of(std::size_t flat, int player) const {
    return static_cast<int>(flat / stride(player)) % actions(player);
  }

  // flat with `player`'s coordinate replaced by `action`.
  std::size_t with_action(std::size_t flat, int player, int action) const {
    const std::size_t s = stride(player);
    const int old = action_of(flat, player);
    return flat + (static_cast<std::size_t>(action) - static_cast<std::size_t>(old)) * s;
  }

  bool operator==(const GameShape&) const = default;

  std::string to_string() const {
    std::string s;
    for (int i = 0; i < num_players; ++i) {
      if (i) s += "x";
      s += std::to_string(actions(i));
    }
    return s;
  }
};

// ---------------------------------------------------------------------------
// Game
// ---------------------------------------------------------------------------

enum class PayoffPolicy {
  kReject,     // entries outside [0,1] are an error
  kNormalize,  // rescale each player's tensor affinely into [0,1]
};

// n-player normal-form game: one dense payoff tensor per player, entries
// in [0,1].
class Game {
 public:
  Game(GameShape shape, std::vector<std::vector<double>> payoffs,
       PayoffPolicy policy = PayoffPolicy::kReject)
      : shape_(std::move(shape)), payoffs_(std::move(payoffs)) {
    require_dim(payoffs_.size() == static_cast<std::size_t>(shape_.num_players),
                "Game: need one payoff tensor per player");
    const std::size_t cells = shape_.joint_count();
    for (auto& tensor : payoffs_) {
      require_dim(tensor.size() == cells, "Game: payoff tensor extent mismatch");
      for (double v : tensor)
        if (!std::isfinite(v)) throw NumericError("Game: non-finite payoff entry");
      if (policy == PayoffPolicy::kNormalize) {
        const auto [lo, hi] = std::minmax_element(tensor.begin(), tensor.end());
        const double span = *hi - *lo;
        if (span > 0.0) {
          for (double& v : tensor) v = (v - *lo) / span;
        } else {
          std::fill(tensor.begin(), tensor.end(), 0.0);
        }
      } else {
        for (double v : tensor)
          require_arg(v >= 0.0 && v <= 1.0,
                      "Game: payoff entry outside [0,1]; pass PayoffPolicy::kNormalize "
                      "to rescale");
      }
    }
  }

  const GameShape& shape() const { return shape_; }
  int num_players() const { return shape_.num_players; }
  std::size_t joint_count() const { return shape_.joint_count(); }

  double payoff(int player, std::size_t flat) const {
    return payoffs_[static_cast<std::size_t>(player)][flat];
  }
  double payoff(int player, std::span<const int> joint) const {
    return payoff(player, shape_.flat_index(joint));
  }
  const std::vector<double>& payoff_tensor(int player) const {
    return payoffs_[static_cast<std::size_t>(player)];
  }

  bool operator==(const Game&) const = default;

 private:
  GameShape shape_;
  std::vector<std::vector<double>> payoffs_;
};

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> checked_simplex(std::vector<double> v, const char* what) {
  double sum = 0.0;
  for (double& x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + ": non-finite entry");
    require_arg(x >= -1e-12, std::string(what) + ": negative entry");
    if (x < 0.0) x = 0.0;
    sum += x;
  }
  require_arg(std::abs(sum - 1.0) <= kSimplexTolerance,
              std::string(what) + ": entries do not sum to 1");
  for (double& x : v) x /= sum;
  return v;
}

}  // namespace detail

// One simplex vector per player (sigma in product form).
class ProductStrategy {
 public:
  explicit ProductStrategy(std::vector<std::vector<double>> per_player) {
    for (auto& v : per_player)
      per_player_.push_back(detail::checked_simplex(std::move(v), "ProductStrategy"));
  }

  static ProductStrategy uniform(const GameShape& shape) {
    std::vector<std::vector<double>> v;
    for (int i = 0; i < shape.num_players; ++i)
      v.emplace_back(static_cast<std::size_t>(shape.actions(i)),
                     1.0 / shape.actions(i));
    return ProductStrategy(std::move(v));
  }

  static ProductStrategy point_mass(const GameShape& shape, std::span<const int> joint) {
    require_dim(static_cast<int>(joint.size()) == shape.num_players,
                "point_mass: arity mismatch");
    std::vector<std::vector<double>> v;
    for (int i = 0; i < shape.num_players; ++i) {
      std::vector<double> p(static_cast<std::size_t>(shape.actions(i)), 0.0);
      p[static_cast<std::size_t>(joint[static_cast<std::size_t>(i)])] = 1.0;
      v.push_back(std::move(p));
    }
    return ProductStrategy(std::move(v));
  }

  int num_players() const { return static_cast<int>(per_player_.size()); }
  const std::vector<double>& probs(int player) const {
    return per_player_[static_cast<std::size_t>(player)];
  }
  int actions(int player) const {
    return static_cast<int>(per_player_[static_cast<std::size_t>(player)].size());
  }

  bool shape_matches(const GameShape& shape) const {
    if (num_players() != shape.num_players) return false;
    for (int i = 0; i < shape.num_players; ++i)
      if (actions(i) != shape.actions(i)) return false;
    return true;
  }

 private:
  std::vector<std::vector<double>> per_player_;
};

// Dense distribution over joint actions (pi).
class JointStrategy {
 public:
  JointStrategy(GameShape shape, std::vector<double> probs)
      : shape_(std::move(shape)) {
    require_dim(probs.size() == shape_.joint_count(),
                "JointStrategy: tensor extent mismatch");
    probs_ = detail::checked_simplex(std::move(probs), "JointStrategy");
  }

  static JointStrategy uniform(const GameShape& shape) {
    const std::size_t cells = shape.joint_count();
    return JointStrategy(shape, std::vector<double>(cells, 1.0 / static_cast<double>(cells)));
  }

  static JointStrategy point_mass(const GameShape& shape, std::span<const int> joint) {
    std::vector<double> p(shape.joint_count(), 0.0);
    p[shape.flat_index(joint)] = 1.0;
    return JointStrategy(shape, std::move(p));
  }

  const GameShape& shape() const { return shape_; }
  const std::vector<double>& probs() const { return probs_; }
  double prob(std::size_t flat) const { return probs_[flat]; }

 private:
  GameShape shape_;
  std::vector<double> probs_;
};

// pi(a) = prod_i sigma_i(a_i).
inline JointStrategy outer_product(const GameShape& shape, const ProductStrategy& sigma) {
  require_dim(sigma.shape_matches(shape), "outer_product: shape mismatch");
  std::vector<double> probs(shape.joint_count());
  for (std::size_t idx = 0; idx < probs.size(); ++idx) {
    double p = 1.0;
    for (int i = 0; i < shape.num_players; ++i)
      p *= sigma.probs(i)[static_cast<std::size_t>(shape.action_of(idx, i))];
    probs[idx] = p;
  }
  return JointStrategy(shape, std::move(probs));
}

// ---------------------------------------------------------------------------
// Permutations
// ---------------------------------------------------------------------------

inline bool is_permutation_map(std::span<const int> map) {
  std::vector<bool> seen(map.size(), false);
  for (int v : map) {
    if (v < 0 || v >= static_cast<int>(map.size()) || seen[static_cast<std::size_t>(v)])
      return false;
    seen[static_cast<std::size_t>(v)] = true;
  }
  return true;
}

// Bijection on one player's action set; map[a] = rho(a).
struct PlayerPermutation {
  int player = 0;
  std::vector<int> map;

  PlayerPermutation(int p, std::vector<int> m) : player(p), map(std::move(m)) {
    require_arg(is_permutation_map(map), "PlayerPermutation: map is not a bijection");
  }

  static PlayerPermutation identity(int player, int m) {
    std::vector<int> id(static_cast<std::size_t>(m));
    std::iota(id.begin(), id.end(), 0);
    return PlayerPermutation(player, std::move(id));
  }

  bool is_identity() const {
    for (std::size_t a = 0; a < map.size(); ++a)
      if (map[a] != static_cast<int>(a)) return false;
    return true;
  }

  PlayerPermutation inverted() const {
    std::vector<int> inv(map.size());
    for (std::size_t a = 0; a < map.size(); ++a)
      inv[static_cast<std::size_t>(map[a])] = static_cast<int>(a);
    return PlayerPermutation(player, std::move(inv));
  }
};

// Product of per-player permutations (identity where unset). Per-player
// components act on distinct axes and commute; compositions are applied in
// player-index ascending order.
class GamePermutation {
 public:
  explicit GamePermutation(int num_players)
      : maps_(static_cast<std::size_t>(num_players)) {}

  static GamePermutation identity(const GameShape& shape) {
    return GamePermutation(shape.num_players);
  }

  void set(const PlayerPermutation& p) {
    require_arg(p.player >= 0 && p.player < num_players(),
                "GamePermutation: player index out of range");
    maps_[static_cast<std::size_t>(p.player)] = p.map;
  }

  int num_players() const { return static_cast<int>(maps_.size()); }

  bool has(int player) const { return !maps_[static_cast<std::size_t>(player)].empty(); }

  // Empty vector means identity.
  const std::vector<int>& map(int player) const {
    return maps_[static_cast<std::size_t>(player)];
  }

  int apply(int player, int action) const {
    const auto& m = maps_[static_cast<std::size_t>(player)];
    return m.empty() ? action : m[static_cast<std::size_t>(action)];
  }

  GamePermutation inverted() const {
    GamePermutation inv(num_players());
    for (int i = 0; i < num_players(); ++i) {
      if (!has(i)) continue;
      inv.set(PlayerPermutation(i, map(i)).inverted());
    }
    return inv;
  }

  bool is_identity() const {
    for (int i = 0; i < num_players(); ++i)
      if (has(i) && !PlayerPermutation(i, map(i)).is_identity()) return false;
    return true;
  }

 private:
  std::vector<std::vector<int>> maps_;
};

namespace detail {

inline void check_permutation_shape(const GameShape& shape, const GamePermutation& rho) {
  require_dim(rho.num_players() == shape.num_players,
              "permutation: player count mismatch");
  for (int i = 0; i < shape.num_players; ++i)
    if (rho.has(i))
      require_dim(static_cast<int>(rho.map(i).size()) == shape.actions(i),
                  "permutation: map length does not match action count");
}

// Destination index of `flat` under rho: each axis coordinate a_i moves to
// rho_i(a_i). Equivalent to out[rho a] = in[a] for tensors permuted by
// out(a) = in(rho^{-1} a).
inline std::size_t permute_flat(const GameShape& shape, const GamePermutation& rho,
                                std::size_t flat) {
  std::size_t out = 0;
  for (int i = 0; i < shape.num_players; ++i) {
    const int a = shape.action_of(flat, i);
    out = out * static_cast<std::size_t>(shape.actions(i)) +
          static_cast<std::size_t>(rho.apply(i, a));
  }
  return out;
}

}  // namespace detail

// (rho u_j)(a) = u_j(rho^{-1} a), applied to every player's tensor.
inline Game permute_game(const Game& game, const GamePermutation& rho) {
  detail::check_permutation_shape(game.shape(), rho);
  const std::size_t cells = game.joint_count();
  std::vector<std::vector<double>> out(static_cast<std::size_t>(game.num_players()),
                                       std::vector<double>(cells));
  for (std::size_t idx = 0; idx < cells; ++idx) {
    const std::size_t dst = detail::permute_flat(game.shape(), rho, idx);
    for (int j = 0; j < game.num_players(); ++j)
      out[static_cast<std::size_t>(j)][dst] = game.payoff(j, idx);
  }
  return Game(game.shape(), std::move(out));
}

// (rho pi)(a) = pi(rho^{-1} a). Pure index shuffle; total mass is preserved
// exactly.
inline JointStrategy permute_joint(const JointStrategy& pi, const GamePermutation& rho) {
  detail::check_permutation_shape(pi.shape(), rho);
  std::vector<double> out(pi.probs().size());
  for (std::size_t idx = 0; idx < out.size(); ++idx)
    out[detail::permute_flat(pi.shape(), rho, idx)] = pi.prob(idx);
  return JointStrategy(pi.shape(), std::move(out));
}

// Per-player case: (rho_i sigma_i)(a) = sigma_i(rho_i^{-1} a); players without
// a permutation are untouched.
inline ProductStrategy permute_product(const ProductStrategy& sigma,
                                       const GamePermutation& rho) {
  require_dim(rho.num_players() == sigma.num_players(),
              "permute_product: player count mismatch");
  std::vector<std::vector<double>> out;
  for (int i = 0; i < sigma.num_players(); ++i) {
    const auto& v = sigma.probs(i);
    if (!rho.has(i)) {
      out.push_back(v);
      continue;
    }
    require_dim(static_cast<int>(rho.map(i).size()) == sigma.actions(i),
                "permute_product: map length mismatch");
    std::vector<double> w(v.size());
    for (std::size_t a = 0; a < v.size(); ++a)
      w[static_cast<std::size_t>(rho.apply(i, static_cast<int>(a)))] = v[a];
    out.push_back(std::move(w));
  }
  return ProductStrategy(std::move(out));
}

// Permute a raw per-player vector the same way permute_product does; used by
// projector gradients where the vector is not a simplex.
inline std::vector<double> permute_vector(std::span<const double> v,
                                          std::span<const int> map) {
  require_dim(v.size() == map.size(), "permute_vector: length mismatch");
  std::vector<double> out(v.size());
  for (std::size_t a = 0; a < v.size(); ++a)
    out[static_cast<std::size_t>(map[a])] = v[a];
  return out;
}

// All m! permutation maps of {0,..,m-1} in lexicographic order (identity
// first).
inline std::vector<std::vector<int>> enumerate_permutations(int m) {
  require_arg(m >= 1, "enumerate_permutations: m must be >= 1");
  if (m > kOrbitEnumLimit)
    throw CapacityError(
        "enumerate_permutations: m! exceeds the exact-orbit limit (m <= " +
        std::to_string(kOrbitEnumLimit) + "); use sampled permutations instead");
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> all;
  do {
    all.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return all;
}

inline std::vector<int> random_permutation_map(int m, SplitMix64& rng) {
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  shuffle_in_place(perm, rng);
  return perm;
}

// ---------------------------------------------------------------------------
// Expected utility and marginals
// ---------------------------------------------------------------------------

// u_i(pi) = sum_a pi(a) u_i(a).
inline double expected_utility_joint(const Game& game, int player,
                                     const JointStrategy& pi) {
  require_dim(pi.shape() == game.shape(), "expected_utility_joint: shape mismatch");
  const auto& u = game.payoff_tensor(player);
  const auto& p = pi.probs();
  double total = 0.0;
  for (std::size_t idx = 0; idx < p.size(); ++idx) total += p[idx] * u[idx];
  return total;
}

// u_i(sigma) over the outer-product joint distribution, computed factored.
inline double expected_utility_product(const Game& game, int player,
                                       const ProductStrategy& sigma) {
  require_dim(sigma.shape_matches(game.shape()),
              "expected_utility_product: shape mismatch");
  const auto& shape = game.shape();
  const auto& u = game.payoff_tensor(player);
  double total = 0.0;
  for (std::size_t idx = 0; idx < u.size(); ++idx) {
    double w = 1.0;
    for (int i = 0; i < shape.num_players; ++i)
      w *= sigma.probs(i)[static_cast<std::size_t>(shape.action_of(idx, i))];
    total += w * u[idx];
  }
  return total;
}

// pi_i: marginal simplex vector of one player.
inline std::vector<double> marginal(const JointStrategy& pi, int player) {
  const auto& shape = pi.shape();
  require_dim(player >= 0 && player < shape.num_players, "marginal: bad player");
  std::vector<double> out(static_cast<std::size_t>(shape.actions(player)), 0.0);
  for (std::size_t idx = 0; idx < pi.probs().size(); ++idx)
    out[static_cast<std::size_t>(shape.action_of(idx, player))] += pi.prob(idx);
  return out;
}

}  // namespace equilib
