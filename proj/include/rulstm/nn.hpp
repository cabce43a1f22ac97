// Copyright 2026 The rulstm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef RULSTM_NN_HPP_
#define RULSTM_NN_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "rulstm/rng.hpp"
#include "rulstm/tensor.hpp"

namespace rulstm {

// ---------------------------------------------------------------------------
// Parameter blocks
//
// Every parameter container provides
//   template <class Self, class F> void for_each_block(Self&, const std::string& prefix, F&&)
// which calls f(name, matrix) for each weight array in a fixed order. The same
// struct type doubles as the gradient container, so gradients line up with
// parameters block by block.

template <class T>
using MatrixRef = std::conditional_t<std::is_const_v<T>, const Matrix&, Matrix&>;

template <class T>
std::vector<std::pair<std::string, Matrix*>> mutable_blocks(T& params) {
  std::vector<std::pair<std::string, Matrix*>> out;
  for_each_block(params, "", [&](const std::string& name, Matrix& m) { out.emplace_back(name, &m); });
  return out;
}

template <class T>
std::vector<std::pair<std::string, const Matrix*>> const_blocks(const T& params) {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for_each_block(params, "", [&](const std::string& name, const Matrix& m) {
    out.emplace_back(name, &m);
  });
  return out;
}

// Copy of params with every entry set to zero.
template <class T>
T zeros_like(const T& params) {
  T out = params;
  for_each_block(out, "", [](const std::string&, Matrix& m) { m.fill(0.0); });
  return out;
}

// dst += scale * src, block by block.
template <class T>
void add_scaled(T& dst, const T& src, double scale) {
  auto d = mutable_blocks(dst);
  auto s = const_blocks(src);
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto dd = d[i].second->data();
    auto sd = s[i].second->data();
    for (std::size_t k = 0; k < dd.size(); ++k) dd[k] += scale * sd[k];
  }
}

template <class T>
void scale_blocks(T& params, double scale) {
  for_each_block(params, "", [scale](const std::string&, Matrix& m) {
    for (double& v : m.data()) v *= scale;
  });
}

template <class T>
double global_norm(const T& params) {
  double total = 0.0;
  for_each_block(params, "", [&](const std::string&, const Matrix& m) {
    for (double v : m.data()) total += v * v;
  });
  return std::sqrt(total);
}

template <class T>
std::size_t parameter_count(const T& params) {
  std::size_t n = 0;
  for_each_block(params, "", [&](const std::string&, const Matrix& m) { n += m.size(); });
  return n;
}

// Rescales grads so their global L2 norm is at most max_norm. A non-positive
// max_norm disables clipping. Returns the norm before clipping.
template <class T>
double clip_global_norm(T& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) scale_blocks(grads, max_norm / norm);
  return norm;
}

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Matrix& w, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// ---------------------------------------------------------------------------
// Dropout

enum class Phase { train, eval };

struct DropoutSpec {
  double p = 0.8;  // drop probability

  // Throws ConfigError unless 0 <= p < 1.
  void validate() const;
};

// Inverted-dropout scale factors: each entry is 0 with probability p and
// 1/(1-p) otherwise.
Vector dropout_mask(const DropoutSpec& spec, std::size_t n, Rng& rng);
Vector dropout(const DropoutSpec& spec, std::span<const double> x, Phase phase, Rng& rng);

// ---------------------------------------------------------------------------
// LSTM cell

// Gate rows of the stacked weight are ordered input, forget, candidate,
// output; columns are [x, h_prev].
struct LstmCell {
  Matrix weight;  // 4H x (D + H)
  Matrix bias;    // 4H x 1

  std::size_t hidden_dim() const { return bias.rows() / 4; }
  std::size_t input_dim() const { return weight.cols() - hidden_dim(); }

  static LstmCell zeros(std::size_t input_dim, std::size_t hidden_dim);
  // Per-gate Glorot weights, zero biases except the forget gate.
  static LstmCell initialized(std::size_t input_dim, std::size_t hidden_dim, Rng& rng,
                              double forget_bias = 1.0);
};

template <class Cell, class F>
  requires std::is_same_v<std::remove_const_t<Cell>, LstmCell>
void for_each_block(Cell& cell, const std::string& prefix, F&& f) {
  f(prefix + "weight", cell.weight);
  f(prefix + "bias", cell.bias);
}

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zeros(std::size_t hidden_dim) {
    return {Vector(hidden_dim, 0.0), Vector(hidden_dim, 0.0)};
  }
};

// Everything lstm_backward needs from one forward step.
struct LstmStepTape {
  Vector input;  // [x, h_prev]
  Vector c_prev;
  Vector gates;  // activated i, f, g, o
  Vector c;
  Vector tanh_c;
};

LstmState lstm_step(const LstmCell& cell, std::span<const double> x, const LstmState& prev,
                    LstmStepTape* tape = nullptr);

// Reverse-mode step. dh and dc are gradients w.r.t. this step's outputs.
// Parameter gradients accumulate into grads; dprev receives the gradients
// w.r.t. the previous state (overwritten); dx accumulates when non-empty.
void lstm_backward(const LstmCell& cell, const LstmStepTape& tape, std::span<const double> dh,
                   std::span<const double> dc, LstmCell& grads, LstmState& dprev,
                   std::span<double> dx = {});

// ---------------------------------------------------------------------------
// Linear layer and MLP

struct Linear {
  Matrix weight;  // out x in
  Matrix bias;    // out x 1

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  static Linear zeros(std::size_t in_dim, std::size_t out_dim);
  static Linear initialized(std::size_t in_dim, std::size_t out_dim, Rng& rng);
};

template <class L, class F>
  requires std::is_same_v<std::remove_const_t<L>, Linear>
void for_each_block(L& layer, const std::string& prefix, F&& f) {
  f(prefix + "weight", layer.weight);
  f(prefix + "bias", layer.bias);
}

Vector linear_forward(const Linear& layer, std::span<const double> x);
void linear_backward(const Linear& layer, std::span<const double> x, std::span<const double> dy,
                     Linear& grads, std::span<double> dx = {});

// Fully connected network with ReLU between layers and a linear output.
struct Mlp {
  std::vector<Linear> layers;

  bool empty() const { return layers.empty(); }
  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }

  // sizes = {in, hidden..., out}
  static Mlp zeros(std::span<const std::size_t> sizes);
  static Mlp initialized(std::span<const std::size_t> sizes, Rng& rng);
};

template <class M, class F>
  requires std::is_same_v<std::remove_const_t<M>, Mlp>
void for_each_block(M& mlp, const std::string& prefix, F&& f) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    for_each_block(mlp.layers[i], prefix + "layer" + std::to_string(i) + ".", f);
  }
}

struct MlpTape {
  std::vector<Vector> inputs;  // input seen by each layer, after dropout
  std::vector<Vector> masks;   // dropout scale per layer input; empty when none
  std::vector<Vector> pre;     // pre-activation output of each layer
};

// Dropout (when rng is non-null) is applied to the input of every layer
// except the first.
Vector mlp_forward(const Mlp& mlp, std::span<const double> x, const DropoutSpec& hidden_dropout,
                   Rng* rng, MlpTape* tape = nullptr);
void mlp_backward(const Mlp& mlp, const MlpTape& tape, std::span<const double> dy, Mlp& grads,
                  std::span<double> dx = {});

// ---------------------------------------------------------------------------
// SGD with classical momentum:
//   v <- momentum * v - learning_rate * g
//   theta <- theta + v
// Velocity buffers are keyed by block name and created on first use.

struct SgdMomentum {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::map<std::string, Matrix> velocity;

  void step(std::span<const std::pair<std::string, Matrix*>> params,
            std::span<const std::pair<std::string, const Matrix*>> grads);

  template <class T>
  void step(T& params, const T& grads) {
    const auto p = mutable_blocks(params);
    const auto g = const_blocks(grads);
    step(std::span(p), std::span(g));
  }
};

}  // namespace rulstm

#endif  // RULSTM_NN_HPP_
