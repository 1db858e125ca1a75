#include <algorithm>
#include <cmath>
#include <numeric>

#include "govprobe/error.hpp"
#include "internal.hpp"

namespace govprobe {

std::string_view to_string(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::LogReg: return "logreg";
    case ProbeKind::Mlp1: return "mlp1";
    case ProbeKind::Mlp2: return "mlp2";
    case ProbeKind::RandomForest: return "rf";
  }
  return "?";
}

ProbeKind parse_probe_kind(std::string_view text) {
  for (auto k : kAllProbeKinds) {
    if (to_string(k) == text) return k;
  }
  throw ValidationError("unknown probe kind '" + std::string(text) + "' (expected logreg, mlp1, mlp2 or rf)");
}

ProbeConfig ProbeConfig::defaults(ProbeKind kind, std::uint64_t seed) {
  ProbeConfig c;
  c.kind = kind;
  c.seed = seed;
  switch (kind) {
    case ProbeKind::LogReg: c.max_iter = 10000; break;
    case ProbeKind::Mlp1:
      c.max_iter = 200;
      c.hidden_sizes = {144};
      break;
    case ProbeKind::Mlp2:
      c.max_iter = 200;
      c.hidden_sizes = {144, 72};
      break;
    case ProbeKind::RandomForest: c.trees = 300; break;
  }
  return c;
}

void ProbeConfig::validate() const {
  if (max_iter < 1) throw ValidationError("max_iter must be positive");
  if (kind == ProbeKind::Mlp1 || kind == ProbeKind::Mlp2) {
    const std::size_t want = kind == ProbeKind::Mlp1 ? 1 : 2;
    if (hidden_sizes.size() != want) {
      throw ValidationError(std::string(to_string(kind)) + " needs " + std::to_string(want) + " hidden layer size(s)");
    }
    for (int h : hidden_sizes) {
      if (h < 1) throw ValidationError("hidden layer sizes must be positive");
    }
    if (!(learning_rate > 0)) throw ValidationError("learning_rate must be positive");
    if (batch_size < 1) throw ValidationError("batch_size must be positive");
    if (mlp_alpha < 0) throw ValidationError("mlp_alpha must be non-negative");
  }
  if (kind == ProbeKind::RandomForest) {
    if (trees < 1) throw ValidationError("trees must be positive");
    if (max_features < 0) throw ValidationError("max_features must be non-negative");
    if (max_depth < 0) throw ValidationError("max_depth must be non-negative");
  }
  if (kind == ProbeKind::LogReg && !(l2_strength > 0)) throw ValidationError("l2_strength must be positive");
  if (tol < 0) throw ValidationError("tol must be non-negative");
  if (threads < 1) throw ValidationError("threads must be positive");
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw ValidationError("feature matrix data does not match its shape");
}

FeatureMatrix FeatureMatrix::from_vectors(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) return {};
  const auto cols = vectors.front().values.size();
  FeatureMatrix m(vectors.size(), cols);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].values.size() != cols) {
      throw ValidationError("feature vector " + vectors[i].instance_id + " has " + std::to_string(vectors[i].values.size()) +
                            " values, expected " + std::to_string(cols));
    }
    std::copy(vectors[i].values.begin(), vectors[i].values.end(), m.row(i).begin());
  }
  return m;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  FeatureMatrix m(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = row(rows[i]);
    std::copy(src.begin(), src.end(), m.row(i).begin());
  }
  return m;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::size_t> cols) const {
  FeatureMatrix m(rows_, cols.size());
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) m(i, j) = (*this)(i, cols[j]);
  }
  return m;
}

namespace {

Standardizer fit_standardizer(const FeatureMatrix& X) {
  Standardizer s;
  s.mean.assign(X.cols(), 0.0);
  s.scale.assign(X.cols(), 0.0);
  const auto n = static_cast<double>(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t j = 0; j < X.cols(); ++j) s.mean[j] += X(i, j);
  }
  for (auto& m : s.mean) m /= n;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t j = 0; j < X.cols(); ++j) {
      const double d = X(i, j) - s.mean[j];
      s.scale[j] += d * d;
    }
  }
  for (auto& v : s.scale) {
    v = std::sqrt(v / n);
    if (v == 0.0) v = 1.0;
  }
  return s;
}

FeatureMatrix apply(const Standardizer& s, const FeatureMatrix& X) {
  FeatureMatrix out = X;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) = (X(i, j) - s.mean[j]) / s.scale[j];
  }
  return out;
}

}  // namespace

TrainedProbe fit(const ProbeConfig& cfg, const FeatureMatrix& X, std::span<const Label> y,
                 std::span<const HeadCell> head_index_map) {
  cfg.validate();
  if (X.rows() != y.size()) {
    throw ValidationError("feature matrix has " + std::to_string(X.rows()) + " rows but " + std::to_string(y.size()) + " labels");
  }
  if (X.rows() < 2) throw ValidationError("need at least 2 training samples");
  if (X.cols() == 0) throw ValidationError("feature matrix has no columns");
  if (!head_index_map.empty() && head_index_map.size() != X.cols()) {
    throw ValidationError("head_index_map length does not match the feature dimension");
  }
  const auto positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), Label::Positive));
  if (positives == 0 || positives == y.size()) throw ValidationError("training labels contain a single class");

  TrainedProbe probe;
  probe.kind = cfg.kind;
  probe.feature_dim = X.cols();
  probe.head_index_map.assign(head_index_map.begin(), head_index_map.end());

  const FeatureMatrix* data = &X;
  FeatureMatrix scaled;
  if (cfg.standardize) {
    probe.standardizer = fit_standardizer(X);
    scaled = apply(*probe.standardizer, X);
    data = &scaled;
  }

  std::vector<double> yd(y.size());
  std::transform(y.begin(), y.end(), yd.begin(), [](Label l) { return l == Label::Positive ? 1.0 : 0.0; });

  switch (cfg.kind) {
    case ProbeKind::LogReg: probe.params = probes_impl::fit_logreg(cfg, *data, yd, probe.report); break;
    case ProbeKind::Mlp1:
    case ProbeKind::Mlp2: probe.params = probes_impl::fit_mlp(cfg, *data, yd, probe.report); break;
    case ProbeKind::RandomForest: probe.params = probes_impl::fit_forest(cfg, *data, y, probe.report); break;
  }
  return probe;
}

TrainedProbe fit(const ProbeConfig& cfg, std::span<const FeatureVector> X, std::span<const Label> y) {
  const auto m = FeatureMatrix::from_vectors(X);
  std::span<const HeadCell> heads;
  if (!X.empty()) heads = X.front().head_index_map;
  return fit(cfg, m, y, heads);
}

std::vector<double> predict_score(const TrainedProbe& probe, const FeatureMatrix& X) {
  if (X.rows() > 0 && X.cols() != probe.feature_dim) {
    throw ValidationError("probe expects " + std::to_string(probe.feature_dim) + " features, got " + std::to_string(X.cols()));
  }
  const FeatureMatrix* data = &X;
  FeatureMatrix scaled;
  if (probe.standardizer) {
    scaled = apply(*probe.standardizer, X);
    data = &scaled;
  }
  std::vector<double> scores(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto x = data->row(i);
    scores[i] = std::visit(
        [&](const auto& p) -> double {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, LogRegParams>) {
            return probes_impl::logreg_score(p, x);
          } else if constexpr (std::is_same_v<P, MlpParams>) {
            return detail::mlp_forward(p, x);
          } else {
            return probes_impl::forest_score(p, x);
          }
        },
        probe.params);
  }
  return scores;
}

std::vector<Label> predict(const TrainedProbe& probe, const FeatureMatrix& X) {
  const auto scores = predict_score(probe, X);
  std::vector<Label> out(scores.size());
  std::transform(scores.begin(), scores.end(), out.begin(), [](double s) { return s >= 0.5 ? Label::Positive : Label::Negative; });
  return out;
}

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  const auto total = m.total();
  m.accuracy = total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

Metrics confusion_metrics(std::span<const Label> truth, std::span<const Label> predicted) {
  if (truth.size() != predicted.size()) throw ValidationError("truth and prediction lengths differ");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == Label::Positive;
    const bool p = predicted[i] == Label::Positive;
    if (t && p) ++tp;
    else if (!t && p) ++fp;
    else if (t) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

Metrics micro_average(std::span<const Metrics> runs) {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& r : runs) {
    tp += r.tp;
    fp += r.fp;
    fn += r.fn;
    tn += r.tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

Metrics evaluate(const TrainedProbe& probe, const FeatureMatrix& X, std::span<const Label> y) {
  if (X.rows() == 0) throw ValidationError("empty test set");
  if (X.rows() != y.size()) throw ValidationError("test matrix and labels differ in length");
  if (X.cols() != probe.feature_dim) {
    throw ValidationError("probe expects " + std::to_string(probe.feature_dim) + " features, got " + std::to_string(X.cols()));
  }
  return confusion_metrics(y, predict(probe, X));
}

std::vector<HeadCell> head_ranking(const TrainedProbe& probe) {
  const auto* p = std::get_if<LogRegParams>(&probe.params);
  if (!p) throw ValidationError("head ranking needs a logreg probe");
  if (probe.head_index_map.size() != p->weights.size()) throw ValidationError("probe has no head index map");
  std::vector<std::size_t> order(p->weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double wa = std::abs(p->weights[a]), wb = std::abs(p->weights[b]);
    if (wa != wb) return wa > wb;
    return probe.head_index_map[a] < probe.head_index_map[b];
  });
  std::vector<HeadCell> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(probe.head_index_map[i]);
  return out;
}

}  // namespace govprobe
