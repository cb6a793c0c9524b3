#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "equilib/common.hpp"
#include "equilib/game.hpp"
#include "equilib/rng.hpp"

namespace equilib {

// ---------------------------------------------------------------------------
// Named construction games
// ---------------------------------------------------------------------------

// Bimatrix game with identity utility: u_i = I for both players. Two pure
// equilibria on the diagonal plus the uniform mixed one.
inline Game identity2x2() {
  GameShape shape(2, {2, 2});
  const std::vector<double> u = {1, 0, 0, 1};
  return Game(shape, {u, u});
}

// Matching pennies: u1 = I, u2 = 1 - I. Unique (mixed) equilibrium.
inline Game matching_pennies() {
  GameShape shape(2, {2, 2});
  return Game(shape, {{1, 0, 0, 1}, {0, 1, 1, 0}});
}

// 3x3 welfare-collapse game: two high-welfare diagonal equilibria that
// symmetric approximators cannot reach, and a low-welfare one they can.
inline Game swr3x3(double epsilon) {
  require_arg(epsilon > 0.0 && epsilon < 0.5, "swr3x3: epsilon must lie in (0, 0.5)");
  GameShape shape(2, {3, 3});
  const double h = 0.5 + epsilon;
  // row-major, player 1 rows
  std::vector<double> u1 = {1, 0, 0,  //
                            0, 1, 0,  //
                            h, h, epsilon};
  std::vector<double> u2 = {1, 0, h,  //
                            0, 1, h,  //
                            0, 0, epsilon};
  return Game(shape, {std::move(u1), std::move(u2)});
}

// Reduced 2x2 game of swr3x3 after merging the first two (swap-equivalent)
// actions: a prisoner's dilemma with a unique equilibrium of welfare 2e.
inline Game pd2x2(double epsilon) {
  require_arg(epsilon > 0.0 && epsilon < 0.5, "pd2x2: epsilon must lie in (0, 0.5)");
  GameShape shape(2, {2, 2});
  const double h = 0.5 + epsilon;
  std::vector<double> u1 = {0.5, 0, h, epsilon};
  std::vector<double> u2 = {0.5, h, 0, epsilon};
  return Game(shape, {std::move(u1), std::move(u2)});
}

// n-player pure coordination: everyone gets 1 iff all actions agree.
inline Game coordination(int players, int actions) {
  require_arg(players >= 2, "coordination: need at least 2 players");
  require_arg(actions >= 1, "coordination: need at least 1 action");
  GameShape shape(players, std::vector<int>(static_cast<std::size_t>(players), actions));
  std::vector<double> u(shape.joint_count(), 0.0);
  std::vector<int> joint(static_cast<std::size_t>(players));
  for (std::size_t idx = 0; idx < u.size(); ++idx) {
    shape.unflatten(idx, joint);
    bool same = true;
    for (int i = 1; i < players; ++i)
      if (joint[static_cast<std::size_t>(i)] != joint[0]) same = false;
    u[idx] = same ? 1.0 : 0.0;
  }
  return Game(shape, std::vector<std::vector<double>>(static_cast<std::size_t>(players), u));
}

struct NamedGameParams {
  double epsilon = 0.05;
  int players = 2;
  int actions = 2;
};

inline Game named_game(const std::string& id, const NamedGameParams& params = {}) {
  if (id == "identity2x2") return identity2x2();
  if (id == "matching_pennies") return matching_pennies();
  if (id == "swr3x3") return swr3x3(params.epsilon);
  if (id == "pd2x2") return pd2x2(params.epsilon);
  if (id == "coordination") return coordination(params.players, params.actions);
  throw std::invalid_argument("named_game: unknown id '" + id + "'");
}

inline const std::vector<std::string>& named_game_ids() {
  static const std::vector<std::string> ids = {
      "identity2x2", "matching_pennies", "swr3x3", "pd2x2", "coordination"};
  return ids;
}

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

enum class DistributionKind { kUniformIid, kOrbitInvariant, kNamed };

struct DistributionSpec {
  DistributionKind kind = DistributionKind::kUniformIid;
  GameShape shape;
  std::uint64_t seed = 0;
  std::optional<Game> base;  // orbit-invariant
  std::string name;          // named
  NamedGameParams params;    // named

  static DistributionSpec uniform_iid(GameShape s, std::uint64_t seed) {
    DistributionSpec spec;
    spec.kind = DistributionKind::kUniformIid;
    spec.shape = std::move(s);
    spec.seed = seed;
    return spec;
  }

  // Pushforward of `base` under an independently uniform random permutation
  // per player; the marginal law is permutation-invariant by construction.
  static DistributionSpec orbit_invariant(Game base, std::uint64_t seed) {
    DistributionSpec spec;
    spec.kind = DistributionKind::kOrbitInvariant;
    spec.shape = base.shape();
    spec.base = std::move(base);
    spec.seed = seed;
    return spec;
  }

  static DistributionSpec named(std::string id, NamedGameParams p = {}) {
    DistributionSpec spec;
    spec.kind = DistributionKind::kNamed;
    spec.name = std::move(id);
    spec.params = p;
    spec.shape = named_game(spec.name, p).shape();
    return spec;
  }
};

// Uniform random per-player permutation applied to the base game.
inline Game random_orbit_member(const Game& base, SplitMix64& rng) {
  GamePermutation rho(base.num_players());
  for (int i = 0; i < base.num_players(); ++i)
    rho.set(PlayerPermutation(i, random_permutation_map(base.shape().actions(i), rng)));
  return permute_game(base, rho);
}

// Deterministic per (spec, count): sample k draws from its own substream, so
// parallel generation can partition by index.
inline std::vector<Game> sample(const DistributionSpec& spec, int count) {
  require_arg(count >= 1, "sample: count must be >= 1");
  std::vector<Game> games;
  games.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    SplitMix64 rng(substream_seed(spec.seed, static_cast<std::uint64_t>(k)));
    switch (spec.kind) {
      case DistributionKind::kUniformIid: {
        std::vector<std::vector<double>> payoffs;
        for (int i = 0; i < spec.shape.num_players; ++i) {
          std::vector<double> t(spec.shape.joint_count());
          for (double& v : t) v = rng.uniform();
          payoffs.push_back(std::move(t));
        }
        games.emplace_back(spec.shape, std::move(payoffs));
        break;
      }
      case DistributionKind::kOrbitInvariant:
        games.push_back(random_orbit_member(*spec.base, rng));
        break;
      case DistributionKind::kNamed:
        games.push_back(named_game(spec.name, spec.params));
        break;
    }
  }
  return games;
}

// All distinct images of `base` under the full product permutation group.
// Used by orbit-mean computations and orbit-support tests.
inline std::vector<Game> enumerate_orbit(const Game& base) {
  std::vector<Game> orbit;
  std::vector<std::vector<std::vector<int>>> perms;
  for (int i = 0; i < base.num_players(); ++i)
    perms.push_back(enumerate_permutations(base.shape().actions(i)));
  std::vector<std::size_t> pick(static_cast<std::size_t>(base.num_players()), 0);
  while (true) {
    GamePermutation rho(base.num_players());
    for (int i = 0; i < base.num_players(); ++i)
      rho.set(PlayerPermutation(i, perms[static_cast<std::size_t>(i)][pick[static_cast<std::size_t>(i)]]));
    Game image = permute_game(base, rho);
    bool seen = false;
    for (const auto& g : orbit)
      if (g == image) {
        seen = true;
        break;
      }
    if (!seen) orbit.push_back(std::move(image));
    std::size_t pos = pick.size();
    bool advanced = false;
    while (pos > 0) {
      --pos;
      if (++pick[pos] < perms[pos].size()) {
        advanced = true;
        break;
      }
      pick[pos] = 0;
    }
    if (!advanced) break;
  }
  return orbit;
}

}  // namespace equilib
