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


#include "rulstm/nn.hpp"

#include <algorithm>
#include <cmath>

#include "rulstm/errors.hpp"

namespace rulstm {

void glorot_uniform(Matrix& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------------------

void DropoutSpec::validate() const {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  }
}

Vector dropout_mask(const DropoutSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  const double keep_scale = 1.0 / (1.0 - spec.p);
  Vector mask(n);
  for (double& m : mask) m = rng.uniform() < spec.p ? 0.0 : keep_scale;
  return mask;
}

Vector dropout(const DropoutSpec& spec, std::span<const double> x, Phase phase, Rng& rng) {
  spec.validate();
  Vector out(x.begin(), x.end());
  if (phase == Phase::eval || spec.p == 0.0) return out;
  const Vector mask = dropout_mask(spec, x.size(), rng);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

// ---------------------------------------------------------------------------

LstmCell LstmCell::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  return {Matrix(4 * hidden_dim, input_dim + hidden_dim), Matrix(4 * hidden_dim, 1)};
}

LstmCell LstmCell::initialized(std::size_t input_dim, std::size_t hidden_dim, Rng& rng,
                               double forget_bias) {
  LstmCell cell = zeros(input_dim, hidden_dim);
  const std::size_t fan_in = input_dim + hidden_dim;
  // Each gate block is its own H x (D + H) matrix for the fan computation.
  glorot_uniform(cell.weight, fan_in, hidden_dim, rng);
  for (std::size_t r = hidden_dim; r < 2 * hidden_dim; ++r) cell.bias(r, 0) = forget_bias;
  return cell;
}

LstmState lstm_step(const LstmCell& cell, std::span<const double> x, const LstmState& prev,
                    LstmStepTape* tape) {
  const std::size_t hidden = cell.hidden_dim();
  const std::size_t in = cell.input_dim();
  if (x.size() != in || prev.h.size() != hidden || prev.c.size() != hidden) {
    throw ShapeError("lstm_step: expected input " + std::to_string(in) + " and state " +
                     std::to_string(hidden) + ", got " + std::to_string(x.size()) + " and " +
                     std::to_string(prev.h.size()) + "/" + std::to_string(prev.c.size()));
  }
  Vector input(in + hidden);
  std::copy(x.begin(), x.end(), input.begin());
  std::copy(prev.h.begin(), prev.h.end(), input.begin() + static_cast<std::ptrdiff_t>(in));

  Vector gates(4 * hidden);
  affine(cell.weight, cell.bias.data(), input, gates);
  for (std::size_t k = 0; k < hidden; ++k) {
    gates[k] = sigmoid(gates[k]);
    gates[hidden + k] = sigmoid(gates[hidden + k]);
    gates[2 * hidden + k] = std::tanh(gates[2 * hidden + k]);
    gates[3 * hidden + k] = sigmoid(gates[3 * hidden + k]);
  }

  LstmState next{Vector(hidden), Vector(hidden)};
  Vector tanh_c(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    next.c[k] = gates[hidden + k] * prev.c[k] + gates[k] * gates[2 * hidden + k];
    tanh_c[k] = std::tanh(next.c[k]);
    next.h[k] = gates[3 * hidden + k] * tanh_c[k];
  }

  if (tape != nullptr) {
    tape->input = std::move(input);
    tape->c_prev = prev.c;
    tape->gates = std::move(gates);
    tape->c = next.c;
    tape->tanh_c = std::move(tanh_c);
  }
  return next;
}

void lstm_backward(const LstmCell& cell, const LstmStepTape& tape, std::span<const double> dh,
                   std::span<const double> dc, LstmCell& grads, LstmState& dprev,
                   std::span<double> dx) {
  const std::size_t hidden = cell.hidden_dim();
  const std::size_t in = cell.input_dim();
  if (tape.input.size() != in + hidden || tape.gates.size() != 4 * hidden) {
    throw ShapeError("lstm_backward: tape does not match cell");
  }
  if (dh.size() != hidden || dc.size() != hidden) {
    throw ShapeError("lstm_backward: upstream gradient size mismatch");
  }
  if (!dx.empty() && dx.size() != in) throw ShapeError("lstm_backward: dx size mismatch");
  if (grads.weight.rows() != cell.weight.rows() || grads.weight.cols() != cell.weight.cols()) {
    throw ShapeError("lstm_backward: gradient container shape mismatch");
  }

  const double* gi = tape.gates.data();
  const double* gf = gi + hidden;
  const double* gg = gi + 2 * hidden;
  const double* go = gi + 3 * hidden;

  Vector dpre(4 * hidden);
  dprev.c.assign(hidden, 0.0);
  for (std::size_t k = 0; k < hidden; ++k) {
    const double dout = dh[k] * tape.tanh_c[k];
    const double dcell = dc[k] + dh[k] * go[k] * (1.0 - tape.tanh_c[k] * tape.tanh_c[k]);
    dpre[k] = dcell * gg[k] * gi[k] * (1.0 - gi[k]);
    dpre[hidden + k] = dcell * tape.c_prev[k] * gf[k] * (1.0 - gf[k]);
    dpre[2 * hidden + k] = dcell * gi[k] * (1.0 - gg[k] * gg[k]);
    dpre[3 * hidden + k] = dout * go[k] * (1.0 - go[k]);
    dprev.c[k] = dcell * gf[k];
  }

  accumulate_outer(grads.weight, dpre, tape.input);
  auto db = grads.bias.data();
  for (std::size_t k = 0; k < dpre.size(); ++k) db[k] += dpre[k];

  Vector dinput(in + hidden, 0.0);
  accumulate_transposed(cell.weight, dpre, dinput);
  if (!dx.empty()) {
    for (std::size_t k = 0; k < in; ++k) dx[k] += dinput[k];
  }
  dprev.h.assign(dinput.begin() + static_cast<std::ptrdiff_t>(in), dinput.end());
}

// ---------------------------------------------------------------------------

Linear Linear::zeros(std::size_t in_dim, std::size_t out_dim) {
  return {Matrix(out_dim, in_dim), Matrix(out_dim, 1)};
}

Linear Linear::initialized(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  Linear layer = zeros(in_dim, out_dim);
  glorot_uniform(layer.weight, in_dim, out_dim, rng);
  return layer;
}

Vector linear_forward(const Linear& layer, std::span<const double> x) {
  Vector y(layer.out_dim());
  affine(layer.weight, layer.bias.data(), x, y);
  return y;
}

void linear_backward(const Linear& layer, std::span<const double> x, std::span<const double> dy,
                     Linear& grads, std::span<double> dx) {
  if (dy.size() != layer.out_dim() || x.size() != layer.in_dim()) {
    throw ShapeError("linear_backward: size mismatch");
  }
  accumulate_outer(grads.weight, dy, x);
  auto db = grads.bias.data();
  for (std::size_t k = 0; k < dy.size(); ++k) db[k] += dy[k];
  if (!dx.empty()) accumulate_transposed(layer.weight, dy, dx);
}

Mlp Mlp::zeros(std::span<const std::size_t> sizes) {
  if (sizes.size() < 2) throw ShapeError("Mlp needs at least input and output sizes");
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    mlp.layers.push_back(Linear::zeros(sizes[i], sizes[i + 1]));
  }
  return mlp;
}

Mlp Mlp::initialized(std::span<const std::size_t> sizes, Rng& rng) {
  if (sizes.size() < 2) throw ShapeError("Mlp needs at least input and output sizes");
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    mlp.layers.push_back(Linear::initialized(sizes[i], sizes[i + 1], rng));
  }
  return mlp;
}

Vector mlp_forward(const Mlp& mlp, std::span<const double> x, const DropoutSpec& hidden_dropout,
                   Rng* rng, MlpTape* tape) {
  if (mlp.empty()) throw ShapeError("mlp_forward: empty network");
  if (x.size() != mlp.in_dim()) throw ShapeError("mlp_forward: input size mismatch");
  if (tape != nullptr) *tape = MlpTape{};
  Vector current(x.begin(), x.end());
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    Vector mask;
    if (i > 0 && rng != nullptr && hidden_dropout.p > 0.0) {
      mask = dropout_mask(hidden_dropout, current.size(), *rng);
      for (std::size_t k = 0; k < current.size(); ++k) current[k] *= mask[k];
    }
    Vector pre = linear_forward(mlp.layers[i], current);
    Vector next = i + 1 < mlp.layers.size() ? relu(pre) : pre;
    if (tape != nullptr) {
      tape->inputs.push_back(std::move(current));
      tape->masks.push_back(std::move(mask));
      tape->pre.push_back(std::move(pre));
    }
    current = std::move(next);
  }
  return current;
}

void mlp_backward(const Mlp& mlp, const MlpTape& tape, std::span<const double> dy, Mlp& grads,
                  std::span<double> dx) {
  if (tape.inputs.size() != mlp.layers.size()) throw ShapeError("mlp_backward: tape mismatch");
  Vector grad(dy.begin(), dy.end());
  for (std::size_t i = mlp.layers.size(); i-- > 0;) {
    if (i + 1 < mlp.layers.size()) {
      for (std::size_t k = 0; k < grad.size(); ++k) {
        if (tape.pre[i][k] <= 0.0) grad[k] = 0.0;
      }
    }
    const bool need_input_grad = i > 0 || !dx.empty();
    Vector dinput(need_input_grad ? mlp.layers[i].in_dim() : 0, 0.0);
    linear_backward(mlp.layers[i], tape.inputs[i], grad, grads.layers[i], dinput);
    if (!tape.masks[i].empty()) {
      for (std::size_t k = 0; k < dinput.size(); ++k) dinput[k] *= tape.masks[i][k];
    }
    grad = std::move(dinput);
  }
  if (!dx.empty()) {
    for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += grad[k];
  }
}

// ---------------------------------------------------------------------------

void SgdMomentum::step(std::span<const std::pair<std::string, Matrix*>> params,
                       std::span<const std::pair<std::string, const Matrix*>> grads) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step: block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    Matrix& theta = *params[b].second;
    const Matrix& g = *grads[b].second;
    if (params[b].first != grads[b].first || theta.rows() != g.rows() ||
        theta.cols() != g.cols()) {
      throw ShapeError("sgd_step: block " + params[b].first + " does not match its gradient");
    }
    auto [it, inserted] = velocity.try_emplace(params[b].first, theta.rows(), theta.cols());
    Matrix& v = it->second;
    if (v.rows() != theta.rows() || v.cols() != theta.cols()) {
      throw ShapeError("sgd_step: velocity for " + params[b].first + " has the wrong shape");
    }
    auto vd = v.data();
    auto td = theta.data();
    auto gd = g.data();
    for (std::size_t k = 0; k < td.size(); ++k) {
      vd[k] = momentum * vd[k] - learning_rate * gd[k];
      td[k] += vd[k];
    }
  }
}

}  // namespace rulstm
