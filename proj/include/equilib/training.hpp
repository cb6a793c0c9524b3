#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "equilib/approximator.hpp"
#include "equilib/common.hpp"
#include "equilib/game.hpp"
#include "equilib/metrics.hpp"
#include "equilib/rng.hpp"

namespace equilib {

struct TrainConfig {
  int iterations = 2000;       // T
  int batch_size = 32;         // B
  double learning_rate = 0.1;  // eta
  std::uint64_t seed = 0;
  SolutionConcept concept = SolutionConcept::NE;
  int eval_cadence = 0;  // held-out evaluation every k logged steps; 0 = never
  int log_cadence = 1;   // trace row every k steps
};

struct TraceRow {
  int step = 0;
  double loss = 0.0;
  std::optional<double> eval_mean;  // held-out mean approximation
  double wall_s = 0.0;  // informational; excluded from determinism guarantees
};

struct TrainTrace {
  std::vector<TraceRow> rows;
};

struct EvalSummary {
  double mean = 0.0;
  double max = 0.0;
  double stddev = 0.0;
  double mean_social_welfare = 0.0;
};

// Deterministic aggregates over `games` in input order.
inline EvalSummary evaluate(const ApproximatorModel& model, const std::vector<Game>& games,
                            SolutionConcept concept, const OrbitOptions& opts = {}) {
  require_arg(!games.empty(), "evaluate: empty game list");
  EvalSummary s;
  std::vector<double> values;
  values.reserve(games.size());
  for (const auto& g : games) {
    double approx, sw;
    if (concept == SolutionConcept::NE) {
      const ProductStrategy sigma = forward_product(model, g, opts);
      approx = approximation(g, sigma, concept);
      sw = social_welfare(g, sigma);
    } else {
      const JointStrategy pi = forward_joint(model, g, opts);
      approx = approximation(g, pi, concept);
      sw = social_welfare(g, pi);
    }
    values.push_back(approx);
    s.mean_social_welfare += sw;
  }
  s.mean_social_welfare /= static_cast<double>(games.size());
  s.max = *std::max_element(values.begin(), values.end());
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

// Mean test approximation minus mean train approximation; may be negative.
inline double generalization_gap(const ApproximatorModel& model,
                                 const std::vector<Game>& train_set,
                                 const std::vector<Game>& test_set, SolutionConcept concept,
                                 const OrbitOptions& opts = {}) {
  return evaluate(model, test_set, concept, opts).mean -
         evaluate(model, train_set, concept, opts).mean;
}

// Mean loss gradient over a batch of games at the current parameters.
inline std::pair<double, std::vector<double>> batch_gradient(
    const ApproximatorModel& model, const std::vector<Game>& games,
    std::span<const std::size_t> batch, SolutionConcept concept,
    const OrbitOptions& opts = {}) {
  std::vector<double> grad(model.net().num_params(), 0.0);
  double loss = 0.0;
  for (std::size_t idx : batch) {
    const BackwardResult r = backward(model, games[idx], concept, opts);
    loss += r.info.loss;
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += r.grad[k];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  loss *= inv;
  for (double& g : grad) g *= inv;
  return {loss, std::move(grad)};
}

struct TrainResult {
  ApproximatorModel model;
  TrainTrace trace;
};

// Minibatch SGD on the mean equilibrium approximation. Minibatches come from
// an epoch-shuffled stream (Fisher-Yates driven by the config seed), the loss
// is the batch mean of the max-over-players exploitability, and the update is
// plain SGD. Identical (seed, config, data) reproduce the trace bit-for-bit
// apart from the wall-time column.
inline TrainResult train(ApproximatorModel model, const std::vector<Game>& train_set,
                         const TrainConfig& config,
                         const std::vector<Game>* held_out = nullptr,
                         const OrbitOptions& opts = {}) {
  require_arg(!train_set.empty(), "train: empty training set");
  require_arg(config.iterations >= 0, "train: iterations must be >= 0");
  require_arg(config.batch_size >= 1, "train: batch size must be >= 1");
  require_arg(config.learning_rate >= 0.0, "train: learning rate must be >= 0");
  for (const auto& g : train_set)
    require_dim(g.shape() == model.shape(), "train: game shape mismatch");

  SplitMix64 shuffle_rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_in_place(order, shuffle_rng);
  std::size_t cursor = 0;

  TrainResult result{std::move(model), {}};
  const auto start = std::chrono::steady_clock::now();

  for (int step = 0; step < config.iterations; ++step) {
    std::vector<std::size_t> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    for (int b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        shuffle_in_place(order, shuffle_rng);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    const auto [loss, grad] = batch_gradient(result.model, train_set, batch,
                                             config.concept, opts);
    if (!std::isfinite(loss))
      throw NumericError("train: non-finite batch loss at step " + std::to_string(step));

    auto& params = result.model.net().params();
    for (std::size_t k = 0; k < params.size(); ++k)
      params[k] -= config.learning_rate * grad[k];

    if (config.log_cadence > 0 && step % config.log_cadence == 0) {
      TraceRow row;
      row.step = step;
      row.loss = loss;
      if (held_out && config.eval_cadence > 0 &&
          (step / config.log_cadence) % config.eval_cadence == 0)
        row.eval_mean = evaluate(result.model, *held_out, config.concept, opts).mean;
      row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                       .count();
      result.trace.rows.push_back(row);
    }
  }
  return result;
}

}  // namespace equilib
