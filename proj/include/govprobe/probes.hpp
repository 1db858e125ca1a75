#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "govprobe/attnio.hpp"
#include "govprobe/types.hpp"

namespace govprobe {

enum class ProbeKind : std::uint8_t { LogReg, Mlp1, Mlp2, RandomForest };

/// Short CLI/report name: logreg, mlp1, mlp2, rf.
std::string_view to_string(ProbeKind kind);
ProbeKind parse_probe_kind(std::string_view text);
inline constexpr ProbeKind kAllProbeKinds[] = {ProbeKind::LogReg, ProbeKind::Mlp1, ProbeKind::Mlp2, ProbeKind::RandomForest};

struct ProbeConfig {
  ProbeKind kind = ProbeKind::LogReg;
  int max_iter = 10000;            // LOGREG iterations or MLP epochs
  std::vector<int> hidden_sizes;   // MLP only
  int trees = 300;                 // RF only
  double l2_strength = 1.0;        // LOGREG inverse regularization (larger = weaker)
  double mlp_alpha = 1e-4;         // MLP L2 penalty
  double learning_rate = 1e-3;     // MLP Adam step
  int batch_size = 200;            // MLP; clipped to the sample count
  double tol = 1e-4;
  int n_iter_no_change = 10;       // MLP plateau patience
  int max_features = 0;            // RF candidates per split; 0 = floor(sqrt(dim))
  bool bootstrap = true;           // RF
  int max_depth = 0;               // RF; 0 = grow until pure
  bool standardize = false;        // z-score features before fitting
  int threads = 1;                 // RF tree parallelism; results do not depend on it
  std::uint64_t seed = 0;

  /// Defaults per kind: LOGREG 10000 iterations; MLP1 [144], MLP2 [144, 72],
  /// 200 epochs; RF 300 trees.
  static ProbeConfig defaults(ProbeKind kind, std::uint64_t seed = 0);
  void validate() const;
};

/// Dense row-major sample matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  /// Throws ValidationError if the vectors do not share one length.
  static FeatureMatrix from_vectors(std::span<const FeatureVector> vectors);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t i) const { return std::span<const double>(data_).subspan(i * cols_, cols_); }
  std::span<double> row(std::size_t i) { return std::span<double>(data_).subspan(i * cols_, cols_); }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  std::span<const double> data() const noexcept { return data_; }

  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
  FeatureMatrix select_columns(std::span<const std::size_t> cols) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct LogRegParams {
  std::vector<double> weights;
  double bias = 0.0;
};

struct DenseLayer {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weights;  // outputs x inputs, row-major
  std::vector<double> bias;
};

/// Hidden layers use ReLU; the last layer has one sigmoid output.
struct MlpParams {
  std::vector<DenseLayer> layers;
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double positive_fraction = 0.0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct ForestParams {
  std::vector<DecisionTree> trees;
};

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
};

struct FitReport {
  int iterations = 0;
  bool converged = false;
  double final_loss = 0.0;
};

/// Immutable after fit.
struct TrainedProbe {
  ProbeKind kind = ProbeKind::LogReg;
  std::size_t feature_dim = 0;
  std::vector<HeadCell> head_index_map;
  std::optional<Standardizer> standardizer;
  std::variant<LogRegParams, MlpParams, ForestParams> params;
  FitReport report;
};

/// Throws ValidationError on fewer than 2 samples, one class only, or a
/// size mismatch. head_index_map may be empty when features are not heads.
TrainedProbe fit(const ProbeConfig& cfg, const FeatureMatrix& X, std::span<const Label> y,
                 std::span<const HeadCell> head_index_map = {});
TrainedProbe fit(const ProbeConfig& cfg, std::span<const FeatureVector> X, std::span<const Label> y);

/// Probability-like score in [0, 1]; for RF the share of trees voting positive.
std::vector<double> predict_score(const TrainedProbe& probe, const FeatureMatrix& X);
/// score >= 0.5 is POSITIVE (ties included).
std::vector<Label> predict(const TrainedProbe& probe, const FeatureMatrix& X);

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
};

/// Positive class is POSITIVE. Precision/recall are 0 when undefined; F1 is 0 when P + R = 0.
Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);
Metrics confusion_metrics(std::span<const Label> truth, std::span<const Label> predicted);
/// Metrics of the summed confusion counts.
Metrics micro_average(std::span<const Metrics> runs);

/// Throws ValidationError on an empty test set or dimension mismatch.
Metrics evaluate(const TrainedProbe& probe, const FeatureMatrix& X, std::span<const Label> y);

/// LOGREG heads by |coefficient| descending, ties by (layer, head) ascending.
std::vector<HeadCell> head_ranking(const TrainedProbe& probe);

std::string probe_to_json(const TrainedProbe& probe);
TrainedProbe probe_from_json(std::string_view text);
void save_probe(const std::string& path, const TrainedProbe& probe);
TrainedProbe load_probe(const std::string& path);

namespace detail {

/// Regularized mean log-loss of a logistic model and its gradient (weights then bias).
double logreg_objective(const FeatureMatrix& X, std::span<const double> y, std::span<const double> theta, double inverse_reg,
                        std::span<double> grad);

/// Mean cross-entropy plus alpha/(2n)*sum(W^2) over all rows of X, and its gradient.
double mlp_loss_and_gradient(const MlpParams& params, const FeatureMatrix& X, std::span<const double> y, double alpha,
                             MlpParams& grad);

MlpParams init_mlp(int inputs, std::span<const int> hidden, std::uint64_t seed);
double mlp_forward(const MlpParams& params, std::span<const double> x);

double tree_positive_fraction(const DecisionTree& tree, std::span<const double> x);

}  // namespace detail

}  // namespace govprobe
