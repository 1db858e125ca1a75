#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "govprobe/rng.hpp"
#include "internal.hpp"

namespace govprobe {

namespace {

struct Sample {
  double value;
  bool positive;
};

// Unsigned key with the same order as the double it encodes (no NaNs here).
std::uint64_t order_key(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  return (bits >> 63) != 0 ? ~bits : bits | (std::uint64_t{1} << 63);
}

// Sorts by value; comparison sort for small inputs, LSD radix on 11-bit digits
// otherwise. Passes whose digit is constant across the input are skipped.
void sort_samples(std::vector<Sample>& xs, std::vector<Sample>& scratch, std::vector<std::uint64_t>& keys,
                  std::vector<std::uint64_t>& key_scratch) {
  const std::size_t n = xs.size();
  if (n < 256) {
    std::sort(xs.begin(), xs.end(), [](const Sample& a, const Sample& b) { return a.value < b.value; });
    return;
  }
  constexpr int kBits = 11;
  constexpr std::size_t kBuckets = std::size_t{1} << kBits;
  keys.resize(n);
  key_scratch.resize(n);
  scratch.resize(n);
  std::uint64_t all_or = 0, all_and = ~std::uint64_t{0};
  for (std::size_t i = 0; i < n; ++i) {
    keys[i] = order_key(xs[i].value);
    all_or |= keys[i];
    all_and &= keys[i];
  }
  const std::uint64_t varying = all_or ^ all_and;
  std::array<std::size_t, kBuckets> count{};
  for (int shift = 0; shift < 64; shift += kBits) {
    if (((varying >> shift) & (kBuckets - 1)) == 0) continue;
    count.fill(0);
    for (std::size_t i = 0; i < n; ++i) ++count[(keys[i] >> shift) & (kBuckets - 1)];
    std::size_t offset = 0;
    for (auto& c : count) {
      const auto here = c;
      c = offset;
      offset += here;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto slot = count[(keys[i] >> shift) & (kBuckets - 1)]++;
      scratch[slot] = xs[i];
      key_scratch[slot] = keys[i];
    }
    xs.swap(scratch);
    keys.swap(key_scratch);
  }
}

class TreeBuilder {
 public:
  // `columns` is the sample matrix transposed: one row per feature.
  TreeBuilder(const ProbeConfig& cfg, const FeatureMatrix& columns, std::span<const Label> y, std::uint64_t seed)
      : cfg_(cfg), columns_(columns), y_(y), rng_(seed) {
    const auto d = columns.rows();
    max_features_ = cfg.max_features > 0 ? std::min<std::size_t>(static_cast<std::size_t>(cfg.max_features), d)
                                         : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d)))));
    features_.resize(d);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    DecisionTree tree;
    grow(tree, rows, 0);
    return tree;
  }

 private:
  int grow(DecisionTree& tree, std::span<std::size_t> rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    std::size_t pos = 0;
    for (auto r : rows) pos += y_[r] == Label::Positive ? 1 : 0;
    tree.nodes[static_cast<std::size_t>(id)].positive_fraction = static_cast<double>(pos) / static_cast<double>(rows.size());

    const bool pure = pos == 0 || pos == rows.size();
    if (pure || rows.size() < 2 || (cfg_.max_depth > 0 && depth >= cfg_.max_depth)) return id;

    const auto split = best_split(rows, pos);
    if (split.feature < 0) return id;

    const auto mid = std::partition(rows.begin(), rows.end(), [&](std::size_t r) {
      return columns_(static_cast<std::size_t>(split.feature), r) <= split.threshold;
    });
    const auto n_left = static_cast<std::size_t>(mid - rows.begin());
    const int left = grow(tree, rows.subspan(0, n_left), depth + 1);
    const int right = grow(tree, rows.subspan(n_left), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  // Weighted Gini of the two children; candidate features are drawn without
  // replacement until max_features non-constant ones have been scored.
  Split best_split(std::span<const std::size_t> rows, std::size_t pos_total) {
    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    const std::size_t n = rows.size();
    std::size_t scored = 0;
    buffer_.resize(n);
    for (std::size_t k = 0; k < features_.size() && scored < max_features_; ++k) {
      const auto pick = k + static_cast<std::size_t>(rng_.uniform_index(features_.size() - k));
      std::swap(features_[k], features_[pick]);
      const auto f = features_[k];

      const auto column = columns_.row(f);
      for (std::size_t i = 0; i < n; ++i) buffer_[i] = {column[rows[i]], y_[rows[i]] == Label::Positive};
      sort_samples(buffer_, scratch_, keys_, key_scratch_);
      if (buffer_.front().value == buffer_.back().value) continue;
      ++scored;

      std::size_t left_pos = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_pos += buffer_[i].positive ? 1 : 0;
        if (buffer_[i].value == buffer_[i + 1].value) continue;
        const auto nl = static_cast<double>(i + 1);
        const auto nr = static_cast<double>(n - i - 1);
        const double pl = static_cast<double>(left_pos) / nl;
        const double pr = static_cast<double>(pos_total - left_pos) / nr;
        const double impurity = (nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr)) / static_cast<double>(n);
        if (impurity < best.impurity) {
          best.feature = static_cast<int>(f);
          best.impurity = impurity;
          best.threshold = buffer_[i].value + (buffer_[i + 1].value - buffer_[i].value) / 2.0;
          // Guard against the midpoint rounding up to the right value.
          if (best.threshold >= buffer_[i + 1].value) best.threshold = buffer_[i].value;
        }
      }
    }
    return best;
  }

  const ProbeConfig& cfg_;
  const FeatureMatrix& columns_;
  std::span<const Label> y_;
  Rng rng_;
  std::size_t max_features_ = 1;
  std::vector<std::size_t> features_;
  std::vector<Sample> buffer_, scratch_;
  std::vector<std::uint64_t> keys_, key_scratch_;
};

DecisionTree build_tree(const ProbeConfig& cfg, const FeatureMatrix& columns, std::span<const Label> y, std::size_t index) {
  const auto seed = derive_seed(cfg.seed, {3, index});
  Rng sampler(derive_seed(seed, {0}));
  const auto n = columns.cols();
  std::vector<std::size_t> rows(n);
  if (cfg.bootstrap) {
    for (auto& r : rows) r = static_cast<std::size_t>(sampler.uniform_index(n));
  } else {
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  TreeBuilder builder(cfg, columns, y, derive_seed(seed, {1}));
  return builder.build(std::move(rows));
}

}  // namespace

namespace detail {

double tree_positive_fraction(const DecisionTree& tree, std::span<const double> x) {
  std::size_t i = 0;
  while (tree.nodes[i].feature >= 0) {
    const auto& node = tree.nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right);
  }
  return tree.nodes[i].positive_fraction;
}

}  // namespace detail

namespace probes_impl {

// Each tree votes with its leaf majority; a tied leaf votes positive.
double forest_score(const ForestParams& p, std::span<const double> x) {
  std::size_t votes = 0;
  for (const auto& tree : p.trees) votes += detail::tree_positive_fraction(tree, x) >= 0.5 ? 1 : 0;
  return static_cast<double>(votes) / static_cast<double>(p.trees.size());
}

ForestParams fit_forest(const ProbeConfig& cfg, const FeatureMatrix& X, std::span<const Label> y, FitReport& report) {
  FeatureMatrix columns(X.cols(), X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t j = 0; j < X.cols(); ++j) columns(j, i) = X(i, j);
  }
  ForestParams params;
  params.trees.resize(static_cast<std::size_t>(cfg.trees));
  const auto workers = static_cast<std::size_t>(std::clamp(cfg.threads, 1, cfg.trees));
  if (workers == 1) {
    for (std::size_t t = 0; t < params.trees.size(); ++t) params.trees[t] = build_tree(cfg, columns, y, t);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < params.trees.size(); t += workers) params.trees[t] = build_tree(cfg, columns, y, t);
      });
    }
  }
  report.iterations = cfg.trees;
  report.converged = true;
  report.final_loss = 0.0;
  return params;
}

}  // namespace probes_impl

}  // namespace govprobe
