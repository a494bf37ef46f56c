#include "dstag/nn.hpp"

#include <cmath>

namespace dstag::nn {

void matvec_acc(const Tensor& w, std::span<const double> x,
                std::span<double> y) {
  const std::size_t rows = w.rows(), cols = w.cols();
  const double* wp = w.v.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* wr = wp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

void matvec_t_acc(const Tensor& w, std::span<const double> x,
                  std::span<double> y) {
  const std::size_t rows = w.rows(), cols = w.cols();
  const double* wp = w.v.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* wr = wp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) y[c] += wr[c] * xr;
  }
}

void outer_acc(Tensor& w, std::span<const double> a,
               std::span<const double> x) {
  const std::size_t rows = w.rows(), cols = w.cols();
  double* wp = w.v.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    double* wr = wp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) wr[c] += ar * x[c];
  }
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void glorot_init(Tensor& w, Rng& rng) {
  const std::size_t fan_out = w.rank() == 2 ? w.rows() : w.size();
  const std::size_t fan_in = w.rank() == 2 ? w.cols() : 1;
  const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : w.v) x = rng.uniform(-r, r);
}

LstmCellParams LstmCellParams::make(std::size_t input, std::size_t hidden) {
  LstmCellParams p;
  p.input_size = input;
  p.hidden_size = hidden;
  for (std::size_t g = 0; g < 4; ++g) {
    p.gate(g).wx = Tensor::mat(hidden, input);
    p.gate(g).wh = Tensor::mat(hidden, hidden);
    p.gate(g).b = Tensor::vec(hidden);
  }
  return p;
}

void LstmCellParams::init(Rng& rng) {
  for (std::size_t g = 0; g < 4; ++g) {
    glorot_init(gate(g).wx, rng);
    glorot_init(gate(g).wh, rng);
    gate(g).b.fill(0.0);
  }
  forget_gate.b.fill(1.0);
}

const GateParams& LstmCellParams::gate(std::size_t g) const {
  switch (g) {
    case 0: return input_gate;
    case 1: return forget_gate;
    case 2: return output_gate;
    default: return candidate;
  }
}

GateParams& LstmCellParams::gate(std::size_t g) {
  return const_cast<GateParams&>(
      static_cast<const LstmCellParams&>(*this).gate(g));
}

namespace {

void check_cell_dims(std::span<const double> x, const LstmState& prev,
                     const LstmCellParams& p) {
  if (x.size() != p.input_size || prev.h.size() != p.hidden_size ||
      prev.c.size() != p.hidden_size) {
    throw ConfigError("lstm_cell_step: dimension mismatch");
  }
}

// Computes the four post-activation gates for one step.
std::array<Vec, 4> cell_gates(std::span<const double> x,
                              std::span<const double> h_prev,
                              const LstmCellParams& p) {
  std::array<Vec, 4> acts;
  for (std::size_t g = 0; g < 4; ++g) {
    const GateParams& gp = p.gate(g);
    Vec a(gp.b.v);
    matvec_acc(gp.wx, x, a);
    matvec_acc(gp.wh, h_prev, a);
    if (g == 3) {
      for (double& z : a) z = std::tanh(z);
    } else {
      for (double& z : a) z = sigmoid(z);
    }
    acts[g] = std::move(a);
  }
  return acts;
}

}  // namespace

LstmState lstm_cell_step(std::span<const double> x, const LstmState& prev,
                         const LstmCellParams& p) {
  check_cell_dims(x, prev, p);
  const std::size_t h = p.hidden_size;
  std::array<Vec, 4> a = cell_gates(x, prev.h, p);
  LstmState out;
  out.c.resize(h);
  out.h.resize(h);
  for (std::size_t j = 0; j < h; ++j) {
    out.c[j] = a[1][j] * prev.c[j] + a[0][j] * a[3][j];
    out.h[j] = a[2][j] * std::tanh(out.c[j]);
  }
  return out;
}

LstmTrace lstm_run(std::span<const Vec> xs, const LstmCellParams& p) {
  const std::size_t n = xs.size(), h = p.hidden_size;
  LstmTrace t;
  t.gates.resize(n);
  t.c.resize(n);
  t.tanh_c.resize(n);
  t.h.resize(n);
  t.inputs.assign(xs.begin(), xs.end());

  Vec h_prev(h, 0.0), c_prev(h, 0.0);
  for (std::size_t step = 0; step < n; ++step) {
    if (xs[step].size() != p.input_size) {
      throw ConfigError("lstm_run: input dimension mismatch");
    }
    std::array<Vec, 4> a = cell_gates(xs[step], h_prev, p);
    Vec c(h), tc(h), hh(h);
    for (std::size_t j = 0; j < h; ++j) {
      c[j] = a[1][j] * c_prev[j] + a[0][j] * a[3][j];
      tc[j] = std::tanh(c[j]);
      hh[j] = a[2][j] * tc[j];
    }
    t.gates[step] = std::move(a);
    t.c[step] = c;
    t.tanh_c[step] = std::move(tc);
    t.h[step] = hh;
    h_prev = std::move(hh);
    c_prev = std::move(c);
  }
  return t;
}

std::vector<Vec> lstm_backward(const LstmCellParams& p, LstmCellParams& g,
                               const LstmTrace& trace,
                               std::span<const Vec> d_h_ext) {
  const std::size_t n = trace.steps(), h = p.hidden_size;
  std::vector<Vec> dx(n, Vec(p.input_size, 0.0));
  Vec dh_carry(h, 0.0), dc_carry(h, 0.0);
  const Vec zeros(h, 0.0);

  for (std::size_t step = n; step-- > 0;) {
    const auto& a = trace.gates[step];
    const Vec& c_prev = step == 0 ? zeros : trace.c[step - 1];
    const Vec& h_prev = step == 0 ? zeros : trace.h[step - 1];

    Vec dh = dh_carry;
    if (!d_h_ext.empty() && !d_h_ext[step].empty()) {
      axpy(1.0, d_h_ext[step], dh);
    }

    Vec da[4];
    for (auto& v : da) v.resize(h);
    Vec dc(h);
    for (std::size_t j = 0; j < h; ++j) {
      const double tc = trace.tanh_c[step][j];
      const double d_o = dh[j] * tc;
      dc[j] = dc_carry[j] + dh[j] * a[2][j] * (1.0 - tc * tc);
      const double d_f = dc[j] * c_prev[j];
      const double d_i = dc[j] * a[3][j];
      const double d_g = dc[j] * a[0][j];
      da[0][j] = d_i * a[0][j] * (1.0 - a[0][j]);
      da[1][j] = d_f * a[1][j] * (1.0 - a[1][j]);
      da[2][j] = d_o * a[2][j] * (1.0 - a[2][j]);
      da[3][j] = d_g * (1.0 - a[3][j] * a[3][j]);
      dc_carry[j] = dc[j] * a[1][j];
    }

    std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
    for (std::size_t gi = 0; gi < 4; ++gi) {
      const GateParams& gp = p.gate(gi);
      GateParams& gg = g.gate(gi);
      outer_acc(gg.wx, da[gi], trace.inputs[step]);
      outer_acc(gg.wh, da[gi], h_prev);
      axpy(1.0, da[gi], gg.b.v);
      matvec_t_acc(gp.wx, da[gi], dx[step]);
      matvec_t_acc(gp.wh, da[gi], dh_carry);
    }
  }
  return dx;
}

BiEncoderParams BiEncoderParams::make(std::size_t input, std::size_t hidden) {
  BiEncoderParams p;
  p.fwd = LstmCellParams::make(input, hidden);
  p.bwd = LstmCellParams::make(input, hidden);
  return p;
}

void BiEncoderParams::init(Rng& rng) {
  fwd.init(rng);
  bwd.init(rng);
}

BiTrace bi_encode_run(std::span<const Vec> xs, const BiEncoderParams& p) {
  if (xs.empty()) throw InputError("bi_encode: empty input sequence");
  BiTrace t;
  t.fwd = lstm_run(xs, p.fwd);
  std::vector<Vec> rev(xs.rbegin(), xs.rend());
  t.bwd = lstm_run(rev, p.bwd);
  return t;
}

std::vector<Vec> bi_outputs(const BiTrace& t) {
  const std::size_t n = t.fwd.steps();
  const std::size_t h = t.fwd.h.empty() ? 0 : t.fwd.h[0].size();
  std::vector<Vec> out(n, Vec(2 * h));
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(t.fwd.h[i].begin(), t.fwd.h[i].end(), out[i].begin());
    const Vec& b = t.bwd.h[n - 1 - i];
    std::copy(b.begin(), b.end(), out[i].begin() + h);
  }
  return out;
}

std::vector<Vec> bi_encode(std::span<const Vec> xs, const BiEncoderParams& p) {
  return bi_outputs(bi_encode_run(xs, p));
}

Vec bi_final_states(const BiTrace& t) {
  const Vec& f = t.fwd.h.back();
  const Vec& b = t.bwd.h.back();
  Vec out(f.size() + b.size());
  std::copy(f.begin(), f.end(), out.begin());
  std::copy(b.begin(), b.end(), out.begin() + f.size());
  return out;
}

std::vector<Vec> bi_backward(const BiEncoderParams& p, BiEncoderParams& g,
                             const BiTrace& trace, std::span<const Vec> d_out) {
  const std::size_t n = trace.fwd.steps(), h = p.hidden_size();
  std::vector<Vec> d_fwd(n), d_bwd(n);
  for (std::size_t i = 0; i < n; ++i) {
    d_fwd[i].assign(d_out[i].begin(), d_out[i].begin() + h);
    // position i's backward half came from reversed step n-1-i
    d_bwd[n - 1 - i].assign(d_out[i].begin() + h, d_out[i].end());
  }
  std::vector<Vec> dx = lstm_backward(p.fwd, g.fwd, trace.fwd, d_fwd);
  std::vector<Vec> dxr = lstm_backward(p.bwd, g.bwd, trace.bwd, d_bwd);
  for (std::size_t i = 0; i < n; ++i) {
    axpy(1.0, dxr[n - 1 - i], dx[i]);
  }
  return dx;
}

std::vector<Vec> bi_backward_final(const BiEncoderParams& p,
                                   BiEncoderParams& g, const BiTrace& trace,
                                   std::span<const double> d_final) {
  const std::size_t n = trace.fwd.steps(), h = p.hidden_size();
  std::vector<Vec> d_fwd(n), d_bwd(n);
  d_fwd[n - 1].assign(d_final.begin(), d_final.begin() + h);
  d_bwd[n - 1].assign(d_final.begin() + h, d_final.end());
  std::vector<Vec> dx = lstm_backward(p.fwd, g.fwd, trace.fwd, d_fwd);
  std::vector<Vec> dxr = lstm_backward(p.bwd, g.bwd, trace.bwd, d_bwd);
  for (std::size_t i = 0; i < n; ++i) {
    axpy(1.0, dxr[n - 1 - i], dx[i]);
  }
  return dx;
}

XentResult softmax_xent(std::span<const double> logits, std::size_t gold) {
  if (gold >= logits.size()) {
    throw ConfigError("softmax_xent: gold index out of range");
  }
  double m = logits[0];
  for (double z : logits) m = std::max(m, z);
  double sum = 0.0;
  XentResult r;
  r.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    r.grad[i] = std::exp(logits[i] - m);
    sum += r.grad[i];
  }
  for (double& z : r.grad) z /= sum;
  r.loss = -(logits[gold] - m - std::log(sum));
  r.grad[gold] -= 1.0;
  return r;
}

void sgd_step(Tensor& value, Tensor& grad, double lr) {
  if (!value.same_shape(grad)) throw ConfigError("sgd_step: shape mismatch");
  for (std::size_t i = 0; i < value.size(); ++i) {
    value.v[i] -= lr * grad.v[i];
    grad.v[i] = 0.0;
  }
}

double grad_check(std::span<const ParamRef> params,
                  const std::function<double()>& loss,
                  const std::function<void()>& accumulate_grads, double eps) {
  if (eps <= 0.0) throw ConfigError("grad_check: eps must be positive");
  accumulate_grads();
  // Snapshot analytic gradients before re-evaluating the loss.
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const ParamRef& p : params) analytic.push_back(p.grad->v);

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& value = *params[pi].value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double keep = value.v[i];
      value.v[i] = keep + eps;
      const double up = loss();
      value.v[i] = keep - eps;
      const double down = loss();
      value.v[i] = keep;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: non-finite loss at " + params[pi].name);
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace dstag::nn
