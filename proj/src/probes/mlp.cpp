#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "govprobe/kernels.hpp"
#include "govprobe/rng.hpp"
#include "internal.hpp"

namespace govprobe {

namespace {

// Activations of every layer for one sample; acts[0] is the input.
struct Trace {
  std::vector<std::vector<double>> acts;
};

void forward(const MlpParams& params, std::span<const double> x, Trace& trace) {
  trace.acts.resize(params.layers.size() + 1);
  trace.acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    auto& out = trace.acts[l + 1];
    out.resize(static_cast<std::size_t>(layer.outputs));
    const std::span<const double> in(trace.acts[l]);
    const bool last = l + 1 == params.layers.size();
    for (int j = 0; j < layer.outputs; ++j) {
      const std::span<const double> w(layer.weights.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(layer.inputs),
                                      static_cast<std::size_t>(layer.inputs));
      const double z = kernels::dot(w, in) + layer.bias[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(j)] = last ? z : std::max(0.0, z);
    }
  }
}

MlpParams zeros_like(const MlpParams& p) {
  MlpParams g = p;
  for (auto& layer : g.layers) {
    std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  return g;
}

double bce_from_logit(double z, double y) {
  const double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return sp - y * z;
}

void transpose(const std::vector<double>& src, std::size_t rows, std::size_t cols, std::vector<double>& dst) {
  dst.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

// Row-major batch buffers reused across mini-batches; acts[0] holds the inputs.
struct Workspace {
  std::vector<std::vector<double>> acts;
  std::vector<double> delta, prev, delta_t, act_t, w_t;
};

// Mean loss and gradient over the rows listed in `batch`.
double batch_loss_and_gradient(const MlpParams& params, const FeatureMatrix& X, std::span<const double> y,
                               std::span<const std::size_t> batch, double alpha, MlpParams& grad, Workspace& ws) {
  const std::size_t B = batch.size();
  const std::size_t L = params.layers.size();
  const std::size_t d = X.cols();
  ws.acts.resize(L + 1);
  ws.acts[0].resize(B * d);
  for (std::size_t i = 0; i < B; ++i) {
    const auto row = X.row(batch[i]);
    std::copy(row.begin(), row.end(), ws.acts[0].begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = params.layers[l];
    const auto in_n = static_cast<std::size_t>(layer.inputs);
    const auto out_n = static_cast<std::size_t>(layer.outputs);
    auto& out = ws.acts[l + 1];
    out.resize(B * out_n);
    kernels::gemm_nt(ws.acts[l], layer.weights, out, B, out_n, in_n);
    const bool last = l + 1 == L;
    for (std::size_t i = 0; i < B; ++i) {
      for (std::size_t j = 0; j < out_n; ++j) {
        const double z = out[i * out_n + j] + layer.bias[j];
        out[i * out_n + j] = last ? z : std::max(0.0, z);
      }
    }
  }

  double loss = 0.0;
  ws.delta.resize(B);
  for (std::size_t i = 0; i < B; ++i) {
    const double logit = ws.acts[L][i];
    const double yi = y[batch[i]];
    loss += bce_from_logit(logit, yi);
    ws.delta[i] = probes_impl::sigmoid(logit) - yi;
  }

  if (grad.layers.size() != L) grad = zeros_like(params);
  for (std::size_t l = L; l-- > 0;) {
    const auto& layer = params.layers[l];
    const auto in_n = static_cast<std::size_t>(layer.inputs);
    const auto out_n = static_cast<std::size_t>(layer.outputs);
    auto& g = grad.layers[l];
    g.weights.resize(out_n * in_n);
    g.bias.assign(out_n, 0.0);
    transpose(ws.delta, B, out_n, ws.delta_t);
    transpose(ws.acts[l], B, in_n, ws.act_t);
    kernels::gemm_nt(ws.delta_t, ws.act_t, g.weights, out_n, in_n, B);
    for (std::size_t j = 0; j < out_n; ++j) {
      for (std::size_t i = 0; i < B; ++i) g.bias[j] += ws.delta_t[j * B + i];
    }
    if (l == 0) break;
    transpose(layer.weights, out_n, in_n, ws.w_t);
    ws.prev.resize(B * in_n);
    kernels::gemm_nt(ws.delta, ws.w_t, ws.prev, B, in_n, out_n);
    // ReLU derivative of the previous layer's output.
    const auto& act = ws.acts[l];
    for (std::size_t k = 0; k < ws.prev.size(); ++k) {
      if (act[k] <= 0.0) ws.prev[k] = 0.0;
    }
    std::swap(ws.delta, ws.prev);
  }

  const double inv_n = 1.0 / static_cast<double>(B);
  double penalty = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& w = params.layers[l].weights;
    auto& g = grad.layers[l];
    for (std::size_t k = 0; k < w.size(); ++k) {
      penalty += w[k] * w[k];
      g.weights[k] = g.weights[k] * inv_n + alpha * w[k] * inv_n;
    }
    for (auto& b : g.bias) b *= inv_n;
  }
  return loss * inv_n + 0.5 * alpha * penalty * inv_n;
}

}  // namespace

namespace detail {

MlpParams init_mlp(int inputs, std::span<const int> hidden, std::uint64_t seed) {
  Rng rng(seed);
  MlpParams p;
  int fan_in = inputs;
  std::vector<int> sizes(hidden.begin(), hidden.end());
  sizes.push_back(1);
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    DenseLayer layer;
    layer.inputs = fan_in;
    layer.outputs = sizes[l];
    const bool last = l + 1 == sizes.size();
    // Glorot uniform; the sigmoid output layer uses the smaller factor 2.
    const double bound = std::sqrt((last ? 2.0 : 6.0) / static_cast<double>(fan_in + sizes[l]));
    layer.weights.resize(static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(sizes[l]));
    for (auto& w : layer.weights) w = rng.uniform(-bound, bound);
    layer.bias.resize(static_cast<std::size_t>(sizes[l]));
    for (auto& b : layer.bias) b = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(layer));
    fan_in = sizes[l];
  }
  return p;
}

double mlp_forward(const MlpParams& params, std::span<const double> x) {
  Trace trace;
  forward(params, x, trace);
  return probes_impl::sigmoid(trace.acts.back()[0]);
}

double mlp_loss_and_gradient(const MlpParams& params, const FeatureMatrix& X, std::span<const double> y, double alpha,
                             MlpParams& grad) {
  std::vector<std::size_t> all(X.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  Workspace ws;
  return batch_loss_and_gradient(params, X, y, all, alpha, grad, ws);
}

}  // namespace detail

namespace probes_impl {

// Mini-batch Adam. Stops after max_iter epochs or when the epoch loss has not
// improved on the best loss by more than tol for n_iter_no_change epochs.
MlpParams fit_mlp(const ProbeConfig& cfg, const FeatureMatrix& X, std::span<const double> y, FitReport& report) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  auto params = detail::init_mlp(static_cast<int>(X.cols()), cfg.hidden_sizes, derive_seed(cfg.seed, {1}));
  auto m = zeros_like(params);
  auto v = zeros_like(params);
  MlpParams grad;
  Workspace ws;

  Rng rng(derive_seed(cfg.seed, {2}));
  const std::size_t n = X.rows();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  long step = 0;
  int epoch = 0;
  double epoch_loss = 0.0;
  bool converged = false;
  for (; epoch < cfg.max_iter; ++epoch) {
    rng.shuffle(order);
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      const double loss = batch_loss_and_gradient(params, X, y, rows, cfg.mlp_alpha, grad, ws);
      epoch_loss += loss * static_cast<double>(rows.size());

      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      const double lr = cfg.learning_rate * std::sqrt(c2) / c1;
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto update = [&](std::vector<double>& p, std::vector<double>& mm, std::vector<double>& vv, const std::vector<double>& g) {
          for (std::size_t k = 0; k < p.size(); ++k) {
            mm[k] = kBeta1 * mm[k] + (1.0 - kBeta1) * g[k];
            vv[k] = kBeta2 * vv[k] + (1.0 - kBeta2) * g[k] * g[k];
            p[k] -= lr * mm[k] / (std::sqrt(vv[k]) + kEps);
          }
        };
        update(params.layers[l].weights, m.layers[l].weights, v.layers[l].weights, grad.layers[l].weights);
        update(params.layers[l].bias, m.layers[l].bias, v.layers[l].bias, grad.layers[l].bias);
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (epoch_loss > best - cfg.tol) {
      ++stale;
    } else {
      stale = 0;
    }
    best = std::min(best, epoch_loss);
    if (stale > cfg.n_iter_no_change) {
      converged = true;
      ++epoch;
      break;
    }
  }
  report.iterations = epoch;
  report.converged = converged;
  report.final_loss = epoch_loss;
  return params;
}

}  // namespace probes_impl

}  // namespace govprobe
