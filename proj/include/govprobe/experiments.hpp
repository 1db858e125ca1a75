#pragma once

#include <cstdint>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "govprobe/attnio.hpp"
#include "govprobe/dataset.hpp"
#include "govprobe/language.hpp"
#include "govprobe/matcher.hpp"
#include "govprobe/probes.hpp"

namespace govprobe {

enum class AblationCondition : std::uint8_t { TopNOnly, AllButTopN, RandomN };

/// Condition prefix used in result rows: top_n_only, top_n_excluded, random_n.
std::string_view to_string(AblationCondition c);
AblationCondition parse_ablation_condition(std::string_view text);

/// One holdout run: either explicit selectors / lemmas, or `random_lemmas`
/// governor lemmas drawn fresh for the run.
struct HoldoutRun {
  std::vector<std::string> patterns;
  std::vector<std::string> lemmas;
  std::size_t random_lemmas = 0;
};

/// Per-kind hyperparameter overrides applied on top of ProbeConfig::defaults.
struct ProbeOverrides {
  std::optional<int> max_iter;
  std::optional<int> trees;
  std::optional<std::vector<int>> hidden_sizes;
  std::optional<double> l2_strength;
  std::optional<bool> standardize;
};

struct ExperimentPlan {
  std::vector<std::string> languages;
  std::vector<int> dist_thresholds{3};
  std::vector<ProbeKind> probes{std::begin(kAllProbeKinds), std::end(kAllProbeKinds)};
  int repetitions = 5;
  std::uint64_t seed = 0;
  PoolMode pool_mode = PoolMode::GovToDep;
  double test_fraction = 0.2;
  double tolerance = 0.10;
  double max_feature_share = 0.30;
  /// Layer sweep N range, 1-based inclusive; 0 for sweep_to means all layers.
  int sweep_from = 1;
  int sweep_to = 0;
  /// Head counts for ablation; empty means 1..L*A.
  std::vector<int> ablation_ns;
  std::vector<AblationCondition> ablation_conditions{AblationCondition::TopNOnly, AblationCondition::AllButTopN,
                                                    AblationCondition::RandomN};
  std::vector<HoldoutRun> holdout_runs;
  std::map<ProbeKind, ProbeOverrides> overrides;
  /// Parallel experiment cells; results do not depend on it.
  int jobs = 1;
  /// RF tree parallelism inside one cell.
  int probe_threads = 1;

  void validate() const;
  ProbeConfig probe_config(ProbeKind kind, std::uint64_t seed) const;
  SplitConfig split_config(int dist_threshold, std::uint64_t seed) const;

  /// Strict: unknown keys are a ValidationError.
  static ExperimentPlan from_json(std::string_view text);
  static ExperimentPlan load(const std::string& path);
  std::string to_json() const;
};

/// Instances of one language joined to their full-mask pooled features.
class ExperimentData {
 public:
  /// Pools every record over all heads. Throws ValidationError listing instance
  /// ids without an attention record, or on records of differing dimensions.
  ExperimentData(std::string language, LanguageProfile profile, std::vector<Instance> instances,
                 std::span<const AttentionRecord> records, PoolMode mode);
  /// Features given directly; rows align with `instances`.
  ExperimentData(std::string language, LanguageProfile profile, std::vector<Instance> instances, FeatureMatrix features,
                 int layers, int heads);

  const std::string& language() const noexcept { return language_; }
  const LanguageProfile& profile() const noexcept { return profile_; }
  std::span<const Instance> instances() const noexcept { return instances_; }
  const FeatureMatrix& features() const noexcept { return features_; }
  int layers() const noexcept { return layers_; }
  int heads() const noexcept { return heads_; }
  std::vector<HeadCell> full_head_map() const;

  /// Feature rows of `subset` restricted to the mask's cells, in mask order.
  FeatureMatrix matrix(std::span<const Instance> subset, const HeadMask& mask) const;

 private:
  void index_rows();

  std::string language_;
  LanguageProfile profile_;
  std::vector<Instance> instances_;
  FeatureMatrix features_;
  int layers_ = 0;
  int heads_ = 0;
  std::map<std::string, std::size_t, std::less<>> row_of_;
};

struct ResultRow {
  std::string experiment;
  std::string language;
  int dist_threshold = 0;
  ProbeKind probe = ProbeKind::LogReg;
  std::string condition;
  /// Head or layer count behind the condition; 0 when not applicable.
  int n = 0;
  int repetition = 0;
  Metrics metrics;
};

/// Aggregate over the repetitions of one (experiment, language, threshold, probe, condition).
struct SummaryRow {
  std::string experiment;
  std::string language;
  int dist_threshold = 0;
  ProbeKind probe = ProbeKind::LogReg;
  std::string condition;
  int n = 0;
  std::string aggregation;  // "mean" (std alongside) or "micro"
  int runs = 0;
  Metrics mean;    // rates averaged (micro: pooled); counts summed over runs
  Metrics stddev;  // rates only; zero for "micro"
};

std::vector<ResultRow> run_overall(const ExperimentPlan& plan, const ExperimentData& data);
/// Evaluates the probe with the best mean overall F1 per threshold on the NEAR
/// and FAR parts of each test split. `overall` is computed when empty.
std::vector<ResultRow> run_near_far(const ExperimentPlan& plan, const ExperimentData& data,
                                    std::span<const ResultRow> overall = {});
std::vector<ResultRow> run_layer_sweep(const ExperimentPlan& plan, const ExperimentData& data);
std::vector<ResultRow> run_head_ablation(const ExperimentPlan& plan, const ExperimentData& data);
/// One repetition per holdout run; summaries of this experiment are micro-averaged.
std::vector<ResultRow> run_holdout(const ExperimentPlan& plan, const ExperimentData& data);

/// Arithmetic mean and population standard deviation per group; holdout rows
/// are micro-averaged instead. Groups keep first-appearance order.
std::vector<SummaryRow> summarize(std::span<const ResultRow> rows);

std::string results_csv(std::span<const ResultRow> rows);
std::string summary_csv(std::span<const SummaryRow> rows);
std::string summary_json(std::span<const SummaryRow> rows);
/// Plot-ready "language,dist_threshold,probe,condition,n,f1_mean,f1_std" for summaries with n > 0.
std::string curve_csv(std::span<const SummaryRow> rows);

struct Projection {
  std::vector<double> components;  // 2 x dim, row-major, unit length
  std::vector<double> coords;      // n x 2
  std::vector<double> explained_variance;  // 2 values
};

/// Top two principal axes of the centred rows. Each axis is signed so that its
/// largest-magnitude entry is positive.
Projection principal_components(const FeatureMatrix& X);

/// CSV "instance_id,label,L1H1,...[,pc1,pc2]"; header only for empty input.
std::string projection_csv(const ExperimentData& data, std::span<const Instance> subset, bool with_pca);

struct PermutationResult {
  double observed = 0.0;  // mean(a) - mean(b)
  double p_value = 1.0;
  int permutations = 0;
};

/// Two-sided two-sample permutation test on the difference of means.
PermutationResult permutation_test(std::span<const double> a, std::span<const double> b, int permutations, std::uint64_t seed);

}  // namespace govprobe
