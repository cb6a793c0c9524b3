#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "equilib/common.hpp"
#include "equilib/rng.hpp"

namespace equilib {

// Dense MLP with tanh hidden activations and a linear output layer. All
// parameters live in one flat vector (weights row-major, then biases, per
// layer) so serialization and finite-difference probing are direct.
class Mlp {
 public:
  Mlp(int input_size, std::vector<int> hidden_sizes, int output_size) {
    sizes_.push_back(input_size);
    for (int h : hidden_sizes) {
      require_arg(h >= 1, "Mlp: hidden width must be >= 1");
      sizes_.push_back(h);
    }
    sizes_.push_back(output_size);
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      weight_offsets_.push_back(total);
      total += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]);
      bias_offsets_.push_back(total);
      total += static_cast<std::size_t>(sizes_[l + 1]);
    }
    params_.assign(total, 0.0);
  }

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  std::vector<int> hidden_sizes() const {
    return std::vector<int>(sizes_.begin() + 1, sizes_.end() - 1);
  }

  std::size_t num_params() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  void randomize(SplitMix64& rng) {
    // Uniform in +-1/sqrt(fan_in) per layer; biases stay zero.
    for (std::size_t l = 0; l < num_layers(); ++l) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      double* w = params_.data() + weight_offsets_[l];
      const std::size_t count =
          static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]);
      for (std::size_t k = 0; k < count; ++k) w[k] = (2.0 * rng.uniform() - 1.0) * scale;
    }
  }

  // Post-activation values per layer; activations[0] is the input.
  struct Tape {
    std::vector<std::vector<double>> activations;
  };

  std::vector<double> forward(std::span<const double> x, Tape* tape = nullptr) const {
    require_dim(static_cast<int>(x.size()) == input_size(), "Mlp::forward: input size");
    std::vector<double> act(x.begin(), x.end());
    if (tape) {
      tape->activations.clear();
      tape->activations.push_back(act);
    }
    for (std::size_t l = 0; l < num_layers(); ++l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      const double* w = params_.data() + weight_offsets_[l];
      const double* b = params_.data() + bias_offsets_[l];
      std::vector<double> next(static_cast<std::size_t>(out));
      for (int r = 0; r < out; ++r) {
        double z = b[r];
        const double* row = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(in);
        for (int c = 0; c < in; ++c) z += row[c] * act[static_cast<std::size_t>(c)];
        next[static_cast<std::size_t>(r)] = l + 1 < num_layers() ? std::tanh(z) : z;
      }
      act = std::move(next);
      if (tape) tape->activations.push_back(act);
    }
    return act;
  }

  // Accumulates d(loss)/d(params) into grad, given d(loss)/d(logits).
  void backward(const Tape& tape, std::span<const double> grad_logits,
                std::span<double> grad) const {
    require_dim(grad.size() == params_.size(), "Mlp::backward: grad size");
    std::vector<double> g(grad_logits.begin(), grad_logits.end());
    for (std::size_t l = num_layers(); l-- > 0;) {
      const int in = sizes_[l], out = sizes_[l + 1];
      const double* w = params_.data() + weight_offsets_[l];
      double* gw = grad.data() + weight_offsets_[l];
      double* gb = grad.data() + bias_offsets_[l];
      const auto& a = tape.activations[l];
      for (int r = 0; r < out; ++r) {
        const double gr = g[static_cast<std::size_t>(r)];
        gb[r] += gr;
        double* grow = gw + static_cast<std::size_t>(r) * static_cast<std::size_t>(in);
        for (int c = 0; c < in; ++c) grow[c] += gr * a[static_cast<std::size_t>(c)];
      }
      if (l == 0) break;
      std::vector<double> gprev(static_cast<std::size_t>(in), 0.0);
      for (int r = 0; r < out; ++r) {
        const double gr = g[static_cast<std::size_t>(r)];
        const double* row = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(in);
        for (int c = 0; c < in; ++c) gprev[static_cast<std::size_t>(c)] += gr * row[c];
      }
      // tanh' through the activation that produced a = activations[l]
      for (int c = 0; c < in; ++c) {
        const double t = a[static_cast<std::size_t>(c)];
        gprev[static_cast<std::size_t>(c)] *= 1.0 - t * t;
      }
      g = std::move(gprev);
    }
  }

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> weight_offsets_;
  std::vector<std::size_t> bias_offsets_;
  std::vector<double> params_;
};

// softmax with the usual max-shift; output entries are strictly positive.
inline std::vector<double> softmax(std::span<const double> logits) {
  double top = logits[0];
  for (double v : logits) top = std::max(top, v);
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - top);
    sum += out[k];
  }
  for (double& v : out) v /= sum;
  return out;
}

// d(loss)/d(logits) from d(loss)/d(softmax outputs).
inline std::vector<double> softmax_backward(std::span<const double> probs,
                                            std::span<const double> grad_out) {
  double dot = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) dot += probs[k] * grad_out[k];
  std::vector<double> g(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) g[k] = probs[k] * (grad_out[k] - dot);
  return g;
}

}  // namespace equilib
