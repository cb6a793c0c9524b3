#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "equilib/common.hpp"
#include "equilib/game.hpp"
#include "equilib/metrics.hpp"
#include "equilib/mlp.hpp"
#include "equilib/rng.hpp"

namespace equilib {

enum class HeadKind { kProduct, kJoint };

enum class EquivarianceMode { kGeneral, kOpi, kPpe, kBoth, kPe };

inline std::string to_string(HeadKind h) {
  return h == HeadKind::kProduct ? "product" : "joint";
}

inline std::string to_string(EquivarianceMode m) {
  switch (m) {
    case EquivarianceMode::kGeneral: return "general";
    case EquivarianceMode::kOpi: return "opi";
    case EquivarianceMode::kPpe: return "ppe";
    case EquivarianceMode::kBoth: return "both";
    case EquivarianceMode::kPe: return "pe";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Orbit enumeration / sampling
// ---------------------------------------------------------------------------

struct OrbitOptions {
  // Permit the sampled path for action sets above kOrbitEnumLimit. Exactness
  // guarantees (idempotence, lemma-level equivariance) hold only for the
  // enumerated path.
  bool allow_sampling = false;
  int sample_count = 64;
  std::uint64_t seed = 0;
  bool* sampled = nullptr;  // out-flag, set when the sampled path was taken
};

namespace detail {

// perms[i]: player i's permutation maps, lexicographic when enumerated.
inline std::vector<std::vector<std::vector<int>>> player_permutations(
    const GameShape& shape, const OrbitOptions& opts) {
  std::vector<std::vector<std::vector<int>>> perms(
      static_cast<std::size_t>(shape.num_players));
  for (int i = 0; i < shape.num_players; ++i) {
    const int m = shape.actions(i);
    if (m <= kOrbitEnumLimit) {
      perms[static_cast<std::size_t>(i)] = enumerate_permutations(m);
    } else {
      if (!opts.allow_sampling)
        throw CapacityError(
            "orbit averaging: player " + std::to_string(i) + " has " +
            std::to_string(m) +
            " actions; enable sampled mode (OrbitOptions::allow_sampling)");
      SplitMix64 rng(substream_seed(opts.seed, static_cast<std::uint64_t>(i)));
      for (int k = 0; k < opts.sample_count; ++k)
        perms[static_cast<std::size_t>(i)].push_back(random_permutation_map(m, rng));
      if (opts.sampled) *opts.sampled = true;
    }
  }
  return perms;
}

// Iterate tuples (rho_i)_{i in players}; the last listed player varies
// fastest, so the order is deterministic and lexicographic overall.
template <typename Fn>
void for_each_tuple(const GameShape& shape,
                    const std::vector<std::vector<std::vector<int>>>& perms,
                    const std::vector<int>& players, Fn&& fn) {
  std::vector<std::size_t> pick(players.size(), 0);
  while (true) {
    GamePermutation rho(shape.num_players);
    for (std::size_t k = 0; k < players.size(); ++k) {
      const int i = players[k];
      rho.set(PlayerPermutation(i, perms[static_cast<std::size_t>(i)][pick[k]]));
    }
    fn(rho);
    std::size_t pos = players.size();
    bool advanced = false;
    while (pos > 0) {
      --pos;
      if (++pick[pos] < perms[static_cast<std::size_t>(players[pos])].size()) {
        advanced = true;
        break;
      }
      pick[pos] = 0;
    }
    if (!advanced) return;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Orbit-averaging projectors
// ---------------------------------------------------------------------------

// OPI projector (composite of the per-player operators): output component j
// averages the base's component j over all permutation tuples of the OTHER
// players. The result is opponent-permutation-invariant.
template <typename BaseFn>
ProductStrategy project_opi(BaseFn&& base, const Game& game,
                            const OrbitOptions& opts = {}) {
  const auto& shape = game.shape();
  const auto perms = detail::player_permutations(shape, opts);
  std::vector<std::vector<double>> out;
  for (int j = 0; j < shape.num_players; ++j) {
    std::vector<int> others;
    for (int i = 0; i < shape.num_players; ++i)
      if (i != j) others.push_back(i);
    std::vector<double> acc(static_cast<std::size_t>(shape.actions(j)), 0.0);
    std::size_t count = 0;
    detail::for_each_tuple(shape, perms, others, [&](const GamePermutation& rho) {
      const ProductStrategy s = base(permute_game(game, rho));
      for (std::size_t a = 0; a < acc.size(); ++a) acc[a] += s.probs(j)[a];
      ++count;
    });
    for (double& v : acc) v /= static_cast<double>(count);
    out.push_back(std::move(acc));
  }
  return ProductStrategy(std::move(out));
}

// PPE projector: output component i averages rho_i^{-1} base(rho_i u)_i over
// player i's own permutations. The result is player-permutation-equivariant.
template <typename BaseFn>
ProductStrategy project_ppe(BaseFn&& base, const Game& game,
                            const OrbitOptions& opts = {}) {
  const auto& shape = game.shape();
  const auto perms = detail::player_permutations(shape, opts);
  std::vector<std::vector<double>> out;
  for (int i = 0; i < shape.num_players; ++i) {
    std::vector<double> acc(static_cast<std::size_t>(shape.actions(i)), 0.0);
    const auto& list = perms[static_cast<std::size_t>(i)];
    for (const auto& map : list) {
      GamePermutation rho(shape.num_players);
      rho.set(PlayerPermutation(i, map));
      const ProductStrategy s = base(permute_game(game, rho));
      // (rho^{-1} v)(a) = v(rho(a))
      for (std::size_t a = 0; a < acc.size(); ++a)
        acc[a] += s.probs(i)[static_cast<std::size_t>(map[a])];
    }
    for (double& v : acc) v /= static_cast<double>(list.size());
    out.push_back(std::move(acc));
  }
  return ProductStrategy(std::move(out));
}

// PPE-after-OPI composite. Expanding the two averages gives a single pass
// over the full product group: component i accumulates rho_i^{-1} base(rho u)_i.
template <typename BaseFn>
ProductStrategy project_both(BaseFn&& base, const Game& game,
                             const OrbitOptions& opts = {}) {
  const auto& shape = game.shape();
  const auto perms = detail::player_permutations(shape, opts);
  std::vector<int> all(static_cast<std::size_t>(shape.num_players));
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::vector<double>> acc;
  for (int i = 0; i < shape.num_players; ++i)
    acc.emplace_back(static_cast<std::size_t>(shape.actions(i)), 0.0);
  std::size_t count = 0;
  detail::for_each_tuple(shape, perms, all, [&](const GamePermutation& rho) {
    const ProductStrategy s = base(permute_game(game, rho));
    for (int i = 0; i < shape.num_players; ++i)
      for (std::size_t a = 0; a < acc[static_cast<std::size_t>(i)].size(); ++a)
        acc[static_cast<std::size_t>(i)][a] +=
            s.probs(i)[static_cast<std::size_t>(rho.apply(i, static_cast<int>(a)))];
    ++count;
  });
  for (auto& v : acc)
    for (double& x : v) x /= static_cast<double>(count);
  return ProductStrategy(std::move(acc));
}

// PE projector for joint-strategy approximators: averages rho^{-1} base(rho u)
// over the full product group.
template <typename BaseFn>
JointStrategy project_pe(BaseFn&& base, const Game& game,
                         const OrbitOptions& opts = {}) {
  const auto& shape = game.shape();
  const auto perms = detail::player_permutations(shape, opts);
  std::vector<int> all(static_cast<std::size_t>(shape.num_players));
  std::iota(all.begin(), all.end(), 0);
  std::vector<double> acc(shape.joint_count(), 0.0);
  std::size_t count = 0;
  detail::for_each_tuple(shape, perms, all, [&](const GamePermutation& rho) {
    const JointStrategy pi = base(permute_game(game, rho));
    // (rho^{-1} y)(a) = y(rho a)
    for (std::size_t idx = 0; idx < acc.size(); ++idx)
      acc[idx] += pi.prob(detail::permute_flat(shape, rho, idx));
    ++count;
  });
  for (double& v : acc) v /= static_cast<double>(count);
  return JointStrategy(shape, std::move(acc));
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct ModelSpec {
  HeadKind head = HeadKind::kProduct;
  EquivarianceMode mode = EquivarianceMode::kGeneral;
  std::vector<int> hidden = {64, 64};
};

inline void validate_head_mode(HeadKind head, EquivarianceMode mode) {
  const bool product_mode = mode == EquivarianceMode::kOpi ||
                            mode == EquivarianceMode::kPpe ||
                            mode == EquivarianceMode::kBoth;
  if (product_mode)
    require_arg(head == HeadKind::kProduct,
                "ModelSpec: OPI/PPE/Both modes require the product head");
  if (mode == EquivarianceMode::kPe)
    require_arg(head == HeadKind::kJoint, "ModelSpec: PE mode requires the joint head");
}

// Flattened payoff tensors of all players, player-major.
inline std::vector<double> game_features(const Game& game) {
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(game.num_players()) * game.joint_count());
  for (int i = 0; i < game.num_players(); ++i) {
    const auto& t = game.payoff_tensor(i);
    x.insert(x.end(), t.begin(), t.end());
  }
  return x;
}

// MLP equilibrium approximator bound to one game shape. The equivariance
// mode is architectural: projected modes orbit-average the network output at
// forward time, so every parameter setting of the model satisfies the mode's
// defining equations.
class ApproximatorModel {
 public:
  ApproximatorModel(GameShape shape, ModelSpec spec)
      : shape_(std::move(shape)),
        spec_(std::move(spec)),
        net_(input_size(shape_), spec_.hidden, output_size(shape_, spec_.head)) {
    validate_head_mode(spec_.head, spec_.mode);
  }

  static ApproximatorModel random_init(GameShape shape, ModelSpec spec,
                                       std::uint64_t seed) {
    ApproximatorModel model(std::move(shape), std::move(spec));
    SplitMix64 rng(seed);
    model.net_.randomize(rng);
    return model;
  }

  static int input_size(const GameShape& shape) {
    return shape.num_players * static_cast<int>(shape.joint_count());
  }

  static int output_size(const GameShape& shape, HeadKind head) {
    if (head == HeadKind::kJoint) return static_cast<int>(shape.joint_count());
    int total = 0;
    for (int i = 0; i < shape.num_players; ++i) total += shape.actions(i);
    return total;
  }

  const GameShape& shape() const { return shape_; }
  HeadKind head() const { return spec_.head; }
  EquivarianceMode mode() const { return spec_.mode; }
  const ModelSpec& spec() const { return spec_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

 private:
  GameShape shape_;
  ModelSpec spec_;
  Mlp net_;
};

// Unprojected network output: softmax per player block (product head).
inline ProductStrategy base_forward_product(const ApproximatorModel& model,
                                            const Game& game) {
  require_dim(game.shape() == model.shape(), "forward: game shape mismatch");
  const auto logits = model.net().forward(game_features(game));
  std::vector<std::vector<double>> out;
  std::size_t offset = 0;
  for (int i = 0; i < model.shape().num_players; ++i) {
    const auto m = static_cast<std::size_t>(model.shape().actions(i));
    out.push_back(softmax(std::span<const double>(logits.data() + offset, m)));
    offset += m;
  }
  return ProductStrategy(std::move(out));
}

// Unprojected network output: one softmax over joint actions (joint head).
inline JointStrategy base_forward_joint(const ApproximatorModel& model, const Game& game) {
  require_dim(game.shape() == model.shape(), "forward: game shape mismatch");
  const auto logits = model.net().forward(game_features(game));
  return JointStrategy(model.shape(), softmax(logits));
}

inline ProductStrategy forward_product(const ApproximatorModel& model, const Game& game,
                                       const OrbitOptions& opts = {}) {
  require_arg(model.head() == HeadKind::kProduct,
              "forward_product: model has a joint head");
  auto base = [&](const Game& g) { return base_forward_product(model, g); };
  switch (model.mode()) {
    case EquivarianceMode::kGeneral: return base(game);
    case EquivarianceMode::kOpi: return project_opi(base, game, opts);
    case EquivarianceMode::kPpe: return project_ppe(base, game, opts);
    case EquivarianceMode::kBoth: return project_both(base, game, opts);
    case EquivarianceMode::kPe: break;
  }
  throw std::invalid_argument("forward_product: PE mode needs the joint head");
}

inline JointStrategy forward_joint(const ApproximatorModel& model, const Game& game,
                                   const OrbitOptions& opts = {}) {
  require_arg(model.head() == HeadKind::kJoint, "forward_joint: model has a product head");
  auto base = [&](const Game& g) { return base_forward_joint(model, g); };
  if (model.mode() == EquivarianceMode::kGeneral) return base(game);
  if (model.mode() == EquivarianceMode::kPe) return project_pe(base, game, opts);
  throw std::invalid_argument("forward_joint: product modes need the product head");
}

// ---------------------------------------------------------------------------
// Equivariance checking
// ---------------------------------------------------------------------------

namespace detail {

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    worst = std::max(worst, std::abs(a[k] - b[k]));
  return worst;
}

}  // namespace detail

// Max-norm violation of `mode`'s defining equations instantiated with each
// per-player component of rho. Zero (to rounding) for models projected into
// that mode; typically positive for general models.
inline double check_equivariance(const ApproximatorModel& model, const Game& game,
                                 const GamePermutation& rho, EquivarianceMode mode,
                                 const OrbitOptions& opts = {}) {
  require_arg(mode != EquivarianceMode::kGeneral,
              "check_equivariance: pick a concrete equivariance mode");
  detail::check_permutation_shape(game.shape(), rho);
  double worst = 0.0;
  if (mode == EquivarianceMode::kPe) {
    const JointStrategy at_u = forward_joint(model, game, opts);
    for (int i = 0; i < game.num_players(); ++i) {
      if (!rho.has(i)) continue;
      GamePermutation single(game.num_players());
      single.set(PlayerPermutation(i, rho.map(i)));
      const JointStrategy lhs = forward_joint(model, permute_game(game, single), opts);
      const JointStrategy rhs = permute_joint(at_u, single);
      worst = std::max(worst, detail::max_abs_diff(lhs.probs(), rhs.probs()));
    }
    return worst;
  }
  const ProductStrategy at_u = forward_product(model, game, opts);
  for (int i = 0; i < game.num_players(); ++i) {
    if (!rho.has(i)) continue;
    GamePermutation single(game.num_players());
    single.set(PlayerPermutation(i, rho.map(i)));
    const ProductStrategy lhs = forward_product(model, permute_game(game, single), opts);
    if (mode == EquivarianceMode::kPpe || mode == EquivarianceMode::kBoth) {
      // f(rho_i u)_i = rho_i f(u)_i
      const auto rhs = permute_vector(at_u.probs(i), rho.map(i));
      worst = std::max(worst, detail::max_abs_diff(lhs.probs(i), rhs));
    }
    if (mode == EquivarianceMode::kOpi || mode == EquivarianceMode::kBoth) {
      // f(rho_i u)_j = f(u)_j for j != i
      for (int j = 0; j < game.num_players(); ++j) {
        if (j == i) continue;
        worst = std::max(worst, detail::max_abs_diff(lhs.probs(j), at_u.probs(j)));
      }
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Loss gradient (reverse mode over the fixed graph:
//   affine/tanh stack -> softmax head(s) -> orbit average -> exploitability)
// ---------------------------------------------------------------------------

struct LossInfo {
  double loss = 0.0;
  int player = 0;   // argmax player
  int action = 0;   // argmax deviation
  double margin = 0.0;  // gap between the selected candidate and the runner-up
};

struct BackwardResult {
  LossInfo info;
  std::vector<double> grad;  // layout matches Mlp::params()
};

namespace detail {

// One orbit-average term: out_i(a) += weight * v_i(gather[i][a]) for product
// heads (empty gather = component does not contribute), or
// out(idx) += weight * y(joint_gather[idx]) for joint heads.
struct ProjectionTerm {
  Game game;
  double weight = 1.0;
  std::vector<std::vector<int>> gather;      // product heads
  std::vector<std::size_t> joint_gather;     // joint heads
};

inline std::vector<int> identity_map(int m) {
  std::vector<int> id(static_cast<std::size_t>(m));
  std::iota(id.begin(), id.end(), 0);
  return id;
}

inline std::vector<ProjectionTerm> expansion_terms(const ApproximatorModel& model,
                                                   const Game& game,
                                                   const OrbitOptions& opts) {
  const auto& shape = game.shape();
  std::vector<ProjectionTerm> terms;
  const int n = shape.num_players;

  auto empty_gather = [&] { return std::vector<std::vector<int>>(static_cast<std::size_t>(n)); };

  if (model.head() == HeadKind::kJoint) {
    if (model.mode() == EquivarianceMode::kGeneral) {
      ProjectionTerm t{game, 1.0, {}, {}};
      t.joint_gather.resize(shape.joint_count());
      std::iota(t.joint_gather.begin(), t.joint_gather.end(), std::size_t{0});
      terms.push_back(std::move(t));
      return terms;
    }
    // PE
    const auto perms = player_permutations(shape, opts);
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    std::vector<ProjectionTerm> collected;
    for_each_tuple(shape, perms, all, [&](const GamePermutation& rho) {
      ProjectionTerm t{permute_game(game, rho), 0.0, {}, {}};
      t.joint_gather.resize(shape.joint_count());
      for (std::size_t idx = 0; idx < t.joint_gather.size(); ++idx)
        t.joint_gather[idx] = permute_flat(shape, rho, idx);
      collected.push_back(std::move(t));
    });
    for (auto& t : collected) t.weight = 1.0 / static_cast<double>(collected.size());
    return collected;
  }

  switch (model.mode()) {
    case EquivarianceMode::kGeneral: {
      ProjectionTerm t{game, 1.0, empty_gather(), {}};
      for (int i = 0; i < n; ++i)
        t.gather[static_cast<std::size_t>(i)] = identity_map(shape.actions(i));
      terms.push_back(std::move(t));
      break;
    }
    case EquivarianceMode::kPpe: {
      const auto perms = player_permutations(shape, opts);
      for (int i = 0; i < n; ++i) {
        const auto& list = perms[static_cast<std::size_t>(i)];
        for (const auto& map : list) {
          GamePermutation rho(n);
          rho.set(PlayerPermutation(i, map));
          ProjectionTerm t{permute_game(game, rho),
                           1.0 / static_cast<double>(list.size()), empty_gather(), {}};
          t.gather[static_cast<std::size_t>(i)] = map;
          terms.push_back(std::move(t));
        }
      }
      break;
    }
    case EquivarianceMode::kOpi: {
      const auto perms = player_permutations(shape, opts);
      for (int j = 0; j < n; ++j) {
        std::vector<int> others;
        for (int i = 0; i < n; ++i)
          if (i != j) others.push_back(i);
        std::vector<ProjectionTerm> collected;
        for_each_tuple(shape, perms, others, [&](const GamePermutation& rho) {
          ProjectionTerm t{permute_game(game, rho), 0.0, empty_gather(), {}};
          t.gather[static_cast<std::size_t>(j)] = identity_map(shape.actions(j));
          collected.push_back(std::move(t));
        });
        for (auto& t : collected) {
          t.weight = 1.0 / static_cast<double>(collected.size());
          terms.push_back(std::move(t));
        }
      }
      break;
    }
    case EquivarianceMode::kBoth: {
      const auto perms = player_permutations(shape, opts);
      std::vector<int> all(static_cast<std::size_t>(n));
      std::iota(all.begin(), all.end(), 0);
      std::vector<ProjectionTerm> collected;
      for_each_tuple(shape, perms, all, [&](const GamePermutation& rho) {
        ProjectionTerm t{permute_game(game, rho), 0.0, empty_gather(), {}};
        for (int i = 0; i < n; ++i) {
          t.gather[static_cast<std::size_t>(i)] =
              rho.has(i) ? rho.map(i) : identity_map(shape.actions(i));
        }
        collected.push_back(std::move(t));
      });
      for (auto& t : collected) {
        t.weight = 1.0 / static_cast<double>(collected.size());
        terms.push_back(std::move(t));
      }
      break;
    }
    case EquivarianceMode::kPe:
      throw std::invalid_argument("expansion_terms: PE mode needs the joint head");
  }
  return terms;
}

// E[u_player] under sigma with some players pinned to fixed actions.
inline double pinned_expected_utility(
    const Game& game, int util_player, const ProductStrategy& sigma,
    std::span<const std::pair<int, int>> pinned) {
  const auto& shape = game.shape();
  double total = 0.0;
  for (std::size_t idx = 0; idx < game.joint_count(); ++idx) {
    bool match = true;
    for (const auto& [p, a] : pinned) {
      if (shape.action_of(idx, p) != a) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    double w = 1.0;
    for (int k = 0; k < shape.num_players; ++k) {
      bool is_pinned = false;
      for (const auto& [p, a] : pinned)
        if (p == k) {
          is_pinned = true;
          break;
        }
      if (!is_pinned) w *= sigma.probs(k)[static_cast<std::size_t>(shape.action_of(idx, k))];
    }
    total += w * game.payoff(util_player, idx);
  }
  return total;
}

// Candidate values L(i,a) = u_i(a, strategy_{-i}) - u_i(strategy); the loss
// is their max with lowest-(player, action) tie-breaking.
template <typename DevFn, typename OwnFn>
LossInfo select_candidate(const GameShape& shape, DevFn&& dev_of, OwnFn&& own_of) {
  LossInfo info;
  double best = -std::numeric_limits<double>::infinity();
  double second = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < shape.num_players; ++i) {
    const std::vector<double> dev = dev_of(i);
    const double own = own_of(i);
    for (int a = 0; a < shape.actions(i); ++a) {
      const double value = dev[static_cast<std::size_t>(a)] - own;
      if (value > best) {
        second = best;
        best = value;
        info.player = i;
        info.action = a;
      } else if (value > second) {
        second = value;
      }
    }
  }
  info.loss = best;
  info.margin = std::isfinite(second) ? best - second
                                      : std::numeric_limits<double>::infinity();
  return info;
}

}  // namespace detail

// Gradient of the per-game loss E(f_w(u), u) with respect to the network
// parameters, with the argmax player/deviation treated as locally constant
// (lowest index on ties). loss_kind NE pairs with product heads, CCE with
// joint heads; CE models are evaluated but not trained.
inline BackwardResult backward(const ApproximatorModel& model, const Game& game,
                               SolutionConcept loss_kind, const OrbitOptions& opts = {}) {
  require_arg(loss_kind == SolutionConcept::NE || loss_kind == SolutionConcept::CCE,
              "backward: loss_kind must be NE or CCE");
  require_dim(game.shape() == model.shape(), "backward: game shape mismatch");
  if (loss_kind == SolutionConcept::NE)
    require_arg(model.head() == HeadKind::kProduct, "backward: NE loss needs product head");
  else
    require_arg(model.head() == HeadKind::kJoint, "backward: CCE loss needs joint head");

  const auto& shape = game.shape();
  const auto terms = detail::expansion_terms(model, game, opts);

  // Forward every term, keeping tapes and head outputs.
  struct TermState {
    Mlp::Tape tape;
    std::vector<double> logits;
    std::vector<std::vector<double>> head_probs;  // per player, or single joint
  };
  std::vector<TermState> states(terms.size());
  for (std::size_t t = 0; t < terms.size(); ++t) {
    states[t].logits = model.net().forward(game_features(terms[t].game), &states[t].tape);
    if (model.head() == HeadKind::kProduct) {
      std::size_t offset = 0;
      for (int i = 0; i < shape.num_players; ++i) {
        const auto m = static_cast<std::size_t>(shape.actions(i));
        states[t].head_probs.push_back(
            softmax(std::span<const double>(states[t].logits.data() + offset, m)));
        offset += m;
      }
    } else {
      states[t].head_probs.push_back(softmax(states[t].logits));
    }
  }

  BackwardResult result;
  result.grad.assign(model.net().num_params(), 0.0);

  if (loss_kind == SolutionConcept::NE) {
    // Assemble sigma from the terms.
    std::vector<std::vector<double>> sig;
    for (int i = 0; i < shape.num_players; ++i)
      sig.emplace_back(static_cast<std::size_t>(shape.actions(i)), 0.0);
    for (std::size_t t = 0; t < terms.size(); ++t) {
      for (int i = 0; i < shape.num_players; ++i) {
        const auto& g = terms[t].gather[static_cast<std::size_t>(i)];
        if (g.empty()) continue;
        for (std::size_t a = 0; a < g.size(); ++a)
          sig[static_cast<std::size_t>(i)][a] +=
              terms[t].weight *
              states[t].head_probs[static_cast<std::size_t>(i)][static_cast<std::size_t>(g[a])];
      }
    }
    const ProductStrategy sigma(sig);

    result.info = detail::select_candidate(
        shape, [&](int i) { return detail::deviation_values(game, i, sigma); },
        [&](int i) { return expected_utility_product(game, i, sigma); });
    if (!std::isfinite(result.info.loss))
      throw NumericError("backward: non-finite loss");

    const int istar = result.info.player;
    const int astar = result.info.action;

    // dL/dsigma_j(b) = [j != i*] u_{i*}(a*, b, sigma_rest) - u_{i*}(b, sigma_rest)
    std::vector<std::vector<double>> gsig;
    for (int j = 0; j < shape.num_players; ++j) {
      std::vector<double> gj(static_cast<std::size_t>(shape.actions(j)), 0.0);
      for (int b = 0; b < shape.actions(j); ++b) {
        double value = 0.0;
        if (j != istar) {
          const std::pair<int, int> pins[2] = {{istar, astar}, {j, b}};
          value += detail::pinned_expected_utility(game, istar, sigma,
                                                   std::span<const std::pair<int, int>>(pins, 2));
        }
        const std::pair<int, int> pin[1] = {{j, b}};
        value -= detail::pinned_expected_utility(game, istar, sigma,
                                                 std::span<const std::pair<int, int>>(pin, 1));
        gj[static_cast<std::size_t>(b)] = value;
      }
      gsig.push_back(std::move(gj));
    }

    // Scatter into each term, through softmax and the network.
    for (std::size_t t = 0; t < terms.size(); ++t) {
      std::vector<double> glogits(states[t].logits.size(), 0.0);
      std::size_t offset = 0;
      bool touched = false;
      for (int i = 0; i < shape.num_players; ++i) {
        const auto m = static_cast<std::size_t>(shape.actions(i));
        const auto& g = terms[t].gather[static_cast<std::size_t>(i)];
        if (!g.empty()) {
          std::vector<double> gv(m, 0.0);
          for (std::size_t a = 0; a < m; ++a)
            gv[static_cast<std::size_t>(g[a])] +=
                terms[t].weight * gsig[static_cast<std::size_t>(i)][a];
          const auto gl = softmax_backward(states[t].head_probs[static_cast<std::size_t>(i)], gv);
          for (std::size_t k = 0; k < m; ++k) glogits[offset + k] = gl[k];
          touched = true;
        }
        offset += m;
      }
      if (touched) model.net().backward(states[t].tape, glogits, result.grad);
    }
  } else {
    // CCE: assemble pi from the terms.
    std::vector<double> p(shape.joint_count(), 0.0);
    for (std::size_t t = 0; t < terms.size(); ++t)
      for (std::size_t idx = 0; idx < p.size(); ++idx)
        p[idx] += terms[t].weight * states[t].head_probs[0][terms[t].joint_gather[idx]];
    const JointStrategy pi(shape, p);

    result.info = detail::select_candidate(
        shape, [&](int i) { return detail::deviation_values(game, i, pi); },
        [&](int i) { return expected_utility_joint(game, i, pi); });
    if (!std::isfinite(result.info.loss))
      throw NumericError("backward: non-finite loss");

    const int istar = result.info.player;
    const int astar = result.info.action;

    // dL/dpi(idx) = u_{i*}(a*, idx_{-i*}) - u_{i*}(idx); linear in pi.
    std::vector<double> gpi(shape.joint_count());
    for (std::size_t idx = 0; idx < gpi.size(); ++idx)
      gpi[idx] = game.payoff(istar, shape.with_action(idx, istar, astar)) -
                 game.payoff(istar, idx);

    for (std::size_t t = 0; t < terms.size(); ++t) {
      std::vector<double> gy(shape.joint_count(), 0.0);
      for (std::size_t idx = 0; idx < gpi.size(); ++idx)
        gy[terms[t].joint_gather[idx]] += terms[t].weight * gpi[idx];
      const auto glogits = softmax_backward(states[t].head_probs[0], gy);
      model.net().backward(states[t].tape, glogits, result.grad);
    }
  }

  for (double v : result.grad)
    if (!std::isfinite(v)) throw NumericError("backward: non-finite gradient");
  return result;
}

}  // namespace equilib
