#include <algorithm>
#include <cmath>
#include <deque>

#include "govprobe/kernels.hpp"
#include "internal.hpp"

namespace govprobe {

namespace probes_impl {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(z)) without overflow
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

double logreg_score(const LogRegParams& p, std::span<const double> x) { return sigmoid(kernels::dot(p.weights, x) + p.bias); }

// L-BFGS (history 10) with backtracking Armijo line search on the mean
// log-loss plus ||w||^2 / (2 C n). Stops when the largest gradient entry
// drops below tol, or after max_iter iterations.
LogRegParams fit_logreg(const ProbeConfig& cfg, const FeatureMatrix& X, std::span<const double> y, FitReport& report) {
  const std::size_t d = X.cols();
  const std::size_t dim = d + 1;
  constexpr std::size_t kHistory = 10;

  std::vector<double> theta(dim, 0.0), grad(dim), next(dim), next_grad(dim), dir(dim);
  double f = detail::logreg_objective(X, y, theta, cfg.l2_strength, grad);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> history;
  const auto dotv = [](std::span<const double> a, std::span<const double> b) { return kernels::dot(a, b); };

  int iter = 0;
  bool converged = max_abs(grad) <= cfg.tol;
  while (!converged && iter < cfg.max_iter) {
    // Two-loop recursion for dir = -H * grad.
    std::vector<double> q = grad;
    std::vector<double> alpha(history.size());
    for (std::size_t k = history.size(); k-- > 0;) {
      alpha[k] = history[k].rho * dotv(history[k].s, q);
      kernels::axpy(-alpha[k], history[k].y, q);
    }
    double gamma = 1.0;
    if (!history.empty()) gamma = dotv(history.back().s, history.back().y) / dotv(history.back().y, history.back().y);
    for (auto& v : q) v *= gamma;
    for (std::size_t k = 0; k < history.size(); ++k) {
      const double beta = history[k].rho * dotv(history[k].y, q);
      kernels::axpy(alpha[k] - beta, history[k].s, q);
    }
    for (std::size_t i = 0; i < dim; ++i) dir[i] = -q[i];

    double slope = dotv(grad, dir);
    if (slope >= 0) {
      // Not a descent direction; restart from steepest descent.
      history.clear();
      for (std::size_t i = 0; i < dim; ++i) dir[i] = -grad[i];
      slope = dotv(grad, dir);
    }
    double step = history.empty() ? std::min(1.0, 1.0 / std::max(1e-12, std::sqrt(dotv(grad, grad)))) : 1.0;

    double f_next = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < dim; ++i) next[i] = theta[i] + step * dir[i];
      f_next = detail::logreg_objective(X, y, next, cfg.l2_strength, next_grad);
      if (f_next <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++iter;
    if (!accepted) break;

    Pair pair{std::vector<double>(dim), std::vector<double>(dim), 0.0};
    for (std::size_t i = 0; i < dim; ++i) {
      pair.s[i] = next[i] - theta[i];
      pair.y[i] = next_grad[i] - grad[i];
    }
    const double sy = dotv(pair.s, pair.y);
    if (sy > 1e-12) {
      pair.rho = 1.0 / sy;
      history.push_back(std::move(pair));
      if (history.size() > kHistory) history.pop_front();
    }
    theta.swap(next);
    grad.swap(next_grad);
    f = f_next;
    converged = max_abs(grad) <= cfg.tol;
  }

  report.iterations = iter;
  report.converged = converged;
  report.final_loss = f;
  LogRegParams p;
  p.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(d));
  p.bias = theta[d];
  return p;
}

}  // namespace probes_impl

namespace detail {

double logreg_objective(const FeatureMatrix& X, std::span<const double> y, std::span<const double> theta, double inverse_reg,
                        std::span<double> grad) {
  const std::size_t n = X.rows();
  const std::size_t d = X.cols();
  const auto w = theta.first(d);
  const double b = theta[d];
  std::fill(grad.begin(), grad.end(), 0.0);
  auto gw = grad.first(d);

  double loss = 0.0;
  double gb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = X.row(i);
    const double z = kernels::dot(w, x) + b;
    loss += probes_impl::softplus(z) - y[i] * z;
    const double r = probes_impl::sigmoid(z) - y[i];
    kernels::axpy(r, x, gw);
    gb += r;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const double reg = 1.0 / (inverse_reg * static_cast<double>(n));
  double wnorm = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    wnorm += w[j] * w[j];
    gw[j] = gw[j] * inv_n + reg * w[j];
  }
  grad[d] = gb * inv_n;
  return loss * inv_n + 0.5 * reg * wnorm;
}

}  // namespace detail

}  // namespace govprobe
