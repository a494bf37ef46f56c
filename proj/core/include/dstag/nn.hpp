#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dstag/rng.hpp"
#include "dstag/tensor.hpp"

namespace dstag::nn {

using Vec = std::vector<double>;

// y += W x          (W: out x in)
void matvec_acc(const Tensor& w, std::span<const double> x,
                std::span<double> y);
// y += W^T x        (W: out x in; x has out entries, y has in entries)
void matvec_t_acc(const Tensor& w, std::span<const double> x,
                  std::span<double> y);
// W += a x^T        (a: rows entries, x: cols entries)
void outer_acc(Tensor& w, std::span<const double> a, std::span<const double> x);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

double sigmoid(double x);

// Glorot-uniform init: uniform(-r, r), r = sqrt(6 / (fan_in + fan_out)).
void glorot_init(Tensor& w, Rng& rng);

// One LSTM gate: pre-activation = wx * x + wh * h_prev + b.
struct GateParams {
  Tensor wx;  // hidden x input
  Tensor wh;  // hidden x hidden
  Tensor b;   // hidden
};

// Gate order throughout: input, forget, output, candidate.
struct LstmCellParams {
  GateParams input_gate, forget_gate, output_gate, candidate;
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;

  static LstmCellParams make(std::size_t input, std::size_t hidden);
  // Glorot weights, zero biases except forget bias = 1.
  void init(Rng& rng);
  const GateParams& gate(std::size_t g) const;
  GateParams& gate(std::size_t g);
};

template <class F>
void for_each_tensor(LstmCellParams& p, const std::string& prefix, F&& f) {
  const char* names[4] = {"input", "forget", "output", "candidate"};
  for (std::size_t g = 0; g < 4; ++g) {
    GateParams& gp = p.gate(g);
    f(prefix + "." + names[g] + ".wx", gp.wx);
    f(prefix + "." + names[g] + ".wh", gp.wh);
    f(prefix + "." + names[g] + ".b", gp.b);
  }
}

struct LstmState {
  Vec h, c;
};

// One step of the standard LSTM recurrence:
//   i,f,o = sigmoid(pre), g = tanh(pre)
//   c = f (.) c_prev + i (.) g
//   h = o (.) tanh(c)
LstmState lstm_cell_step(std::span<const double> x, const LstmState& prev,
                         const LstmCellParams& p);

// Activations cached during one directional pass, consumed by backprop.
struct LstmTrace {
  std::vector<std::array<Vec, 4>> gates;  // post-activation i, f, o, g
  std::vector<Vec> c;
  std::vector<Vec> tanh_c;
  std::vector<Vec> h;
  std::vector<Vec> inputs;
  std::size_t steps() const { return h.size(); }
};

LstmTrace lstm_run(std::span<const Vec> xs, const LstmCellParams& p);

// Backprop through a cached pass. d_h_ext[t] is dL/dh_t from above (an
// empty Vec means zero). Parameter gradients accumulate into `g`; returns
// dL/dx_t per step.
std::vector<Vec> lstm_backward(const LstmCellParams& p, LstmCellParams& g,
                               const LstmTrace& trace,
                               std::span<const Vec> d_h_ext);

// Forward and backward cells share input and hidden sizes.
struct BiEncoderParams {
  LstmCellParams fwd, bwd;
  static BiEncoderParams make(std::size_t input, std::size_t hidden);
  void init(Rng& rng);
  std::size_t hidden_size() const { return fwd.hidden_size; }
  std::size_t input_size() const { return fwd.input_size; }
};

template <class F>
void for_each_tensor(BiEncoderParams& p, const std::string& prefix, F&& f) {
  for_each_tensor(p.fwd, prefix + ".fwd", f);
  for_each_tensor(p.bwd, prefix + ".bwd", f);
}

struct BiTrace {
  LstmTrace fwd;  // ran over xs in order
  LstmTrace bwd;  // ran over xs reversed
};

BiTrace bi_encode_run(std::span<const Vec> xs, const BiEncoderParams& p);

// Position i -> [fwd_h_i ; bwd_h_{n-1-i}], dimension 2 * hidden.
std::vector<Vec> bi_outputs(const BiTrace& t);
std::vector<Vec> bi_encode(std::span<const Vec> xs, const BiEncoderParams& p);

// [fwd final state ; bwd final state]; the word-in-characters feature.
Vec bi_final_states(const BiTrace& t);

std::vector<Vec> bi_backward(const BiEncoderParams& p, BiEncoderParams& g,
                             const BiTrace& trace, std::span<const Vec> d_out);
// Backward when only the two final states carry gradient.
std::vector<Vec> bi_backward_final(const BiEncoderParams& p,
                                   BiEncoderParams& g, const BiTrace& trace,
                                   std::span<const double> d_final);

struct XentResult {
  double loss;
  Vec grad;  // softmax - onehot; sums to 0
};
XentResult softmax_xent(std::span<const double> logits, std::size_t gold);

// value -= lr * grad, then grad = 0.
void sgd_step(Tensor& value, Tensor& grad, double lr);

// Named handle on a parameter tensor and its gradient accumulator.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

// Central-difference gradient check. `loss` evaluates the objective at the
// current parameters; `accumulate_grads` zeroes all gradients and refills
// them analytically. Returns the max over all parameter components of
//   |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(std::span<const ParamRef> params,
                  const std::function<double()>& loss,
                  const std::function<void()>& accumulate_grads, double eps);

}  // namespace dstag::nn
