#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace oracle {

using govprobe::Label;

std::vector<double> brute_force_pool(const govprobe::AttentionRecord& rec, govprobe::PoolMode mode, const govprobe::HeadMask& mask) {
  std::vector<double> out;
  const int tg = rec.gov_tokens, td = rec.dep_tokens;
  for (const auto& c : mask.cells()) {
    const std::size_t base = static_cast<std::size_t>(c.layer * rec.heads + c.head) * static_cast<std::size_t>(tg * td);
    double best = -1.0;
    for (int g = 0; g < tg; ++g) {
      for (int d = 0; d < td; ++d) {
        const double forward = rec.gov_to_dep[base + static_cast<std::size_t>(g * td + d)];
        const double backward = rec.dep_to_gov[base + static_cast<std::size_t>(d * tg + g)];
        if (mode != govprobe::PoolMode::DepToGov) best = std::max(best, forward);
        if (mode != govprobe::PoolMode::GovToDep) best = std::max(best, backward);
      }
    }
    out.push_back(best);
  }
  return out;
}

namespace {

std::vector<double*> parameters(govprobe::MlpParams& p) {
  std::vector<double*> out;
  for (auto& layer : p.layers) {
    for (auto& w : layer.weights) out.push_back(&w);
    for (auto& b : layer.bias) out.push_back(&b);
  }
  return out;
}

}  // namespace

GradientCheck mlp_gradient_check(govprobe::Rng& rng) {
  const int inputs = 2 + static_cast<int>(rng.uniform_index(5));
  std::vector<int> hidden(1 + rng.uniform_index(2));
  for (auto& h : hidden) h = 2 + static_cast<int>(rng.uniform_index(5));
  auto params = govprobe::detail::init_mlp(inputs, hidden, rng.next());
  for (auto* w : parameters(params)) *w = rng.normal(0.0, 0.7);

  const std::size_t n = 3 + rng.uniform_index(6);
  govprobe::FeatureMatrix X(n, static_cast<std::size_t>(inputs));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < inputs; ++j) X(i, static_cast<std::size_t>(j)) = rng.normal();
    y[i] = static_cast<double>(rng.uniform_index(2));
  }
  const double alpha = rng.uniform(0.0, 0.1);

  govprobe::MlpParams grad;
  govprobe::detail::mlp_loss_and_gradient(params, X, y, alpha, grad);
  const auto analytic = parameters(grad);
  auto probe = params;
  const auto theta = parameters(probe);

  govprobe::MlpParams scratch;
  const double h = 1e-6;
  double diff = 0.0, norm_a = 0.0, norm_n = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double saved = *theta[k];
    *theta[k] = saved + h;
    const double up = govprobe::detail::mlp_loss_and_gradient(probe, X, y, alpha, scratch);
    *theta[k] = saved - h;
    const double down = govprobe::detail::mlp_loss_and_gradient(probe, X, y, alpha, scratch);
    *theta[k] = saved;
    const double numeric = (up - down) / (2 * h);
    diff += (numeric - *analytic[k]) * (numeric - *analytic[k]);
    norm_a += *analytic[k] * *analytic[k];
    norm_n += numeric * numeric;
  }
  GradientCheck out;
  out.parameters = theta.size();
  const double denom = std::sqrt(norm_a) + std::sqrt(norm_n);
  out.relative_error = denom > 0 ? std::sqrt(diff) / denom : 0.0;
  return out;
}

namespace {

double gini(double pos, double total) {
  if (total == 0) return 0.0;
  const double p = pos / total;
  return 1.0 - p * p - (1 - p) * (1 - p);
}

}  // namespace

double split_impurity(const govprobe::FeatureMatrix& X, const std::vector<Label>& y, int feature, double threshold) {
  double left = 0, left_pos = 0, right = 0, right_pos = 0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const bool pos = y[i] == Label::Positive;
    if (X(i, static_cast<std::size_t>(feature)) <= threshold) {
      ++left;
      left_pos += pos;
    } else {
      ++right;
      right_pos += pos;
    }
  }
  const double n = left + right;
  return left / n * gini(left_pos, left) + right / n * gini(right_pos, right);
}

Split best_gini_split(const govprobe::FeatureMatrix& X, const std::vector<Label>& y) {
  Split best;
  best.impurity = 2.0;
  for (std::size_t f = 0; f < X.cols(); ++f) {
    std::set<double> values;
    for (std::size_t i = 0; i < X.rows(); ++i) values.insert(X(i, f));
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
      const double t = (*it + *std::next(it)) / 2;
      const double imp = split_impurity(X, y, static_cast<int>(f), t);
      if (imp < best.impurity) best = {static_cast<int>(f), t, imp};
    }
  }
  return best;
}

Blobs separable_blobs(govprobe::Rng& rng, std::size_t per_class, double gap) {
  Blobs b;
  b.X = govprobe::FeatureMatrix(2 * per_class, 2);
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const bool pos = i % 2 == 0;
    const double cx = pos ? gap / 2 : -gap / 2;
    double x = 0;
    do x = rng.normal(cx, 1.0);
    while (std::fabs(x - cx) > 2.0);
    b.X(i, 0) = x;
    b.X(i, 1) = rng.normal(0.0, 1.0);
    b.y.push_back(pos ? Label::Positive : Label::Negative);
  }
  return b;
}

govprobe::Metrics metrics_by_hand(const std::vector<Label>& truth, const std::vector<Label>& predicted) {
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == Label::Positive, p = predicted[i] == Label::Positive;
    tp += t && p;
    fp += !t && p;
    fn += t && !p;
    tn += !t && !p;
  }
  govprobe::Metrics m;
  m.tp = static_cast<std::size_t>(tp);
  m.fp = static_cast<std::size_t>(fp);
  m.fn = static_cast<std::size_t>(fn);
  m.tn = static_cast<std::size_t>(tn);
  const double n = tp + fp + fn + tn;
  m.accuracy = n > 0 ? (tp + tn) / n : 0.0;
  m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

}  // namespace oracle
