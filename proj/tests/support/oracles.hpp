#pragma once

// Independent reference computations the library is checked against.

#include <cstdint>
#include <vector>

#include "govprobe/attnio.hpp"
#include "govprobe/probes.hpp"
#include "govprobe/rng.hpp"

namespace oracle {

/// Max over every enumerated (g, d) pair of the selected directions, per mask cell.
std::vector<double> brute_force_pool(const govprobe::AttentionRecord& rec, govprobe::PoolMode mode, const govprobe::HeadMask& mask);

struct GradientCheck {
  double relative_error = 0.0;  // ||analytic - numeric|| / (||analytic|| + ||numeric||)
  std::size_t parameters = 0;
};

/// Random small MLP and data; analytic gradient against central differences.
GradientCheck mlp_gradient_check(govprobe::Rng& rng);

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // size-weighted Gini of the children
};

/// Best axis-aligned split by weighted Gini over every feature and every midpoint.
Split best_gini_split(const govprobe::FeatureMatrix& X, const std::vector<govprobe::Label>& y);

/// Weighted child Gini of splitting at x[feature] <= threshold.
double split_impurity(const govprobe::FeatureMatrix& X, const std::vector<govprobe::Label>& y, int feature, double threshold);

struct Blobs {
  govprobe::FeatureMatrix X;
  std::vector<govprobe::Label> y;
};

/// Two Gaussian blobs in 2-D with sigma 1 and centres `gap` apart; samples
/// beyond 2 sigma from their centre along the separating axis are redrawn.
Blobs separable_blobs(govprobe::Rng& rng, std::size_t per_class, double gap);

/// Metrics computed by enumerating the confusion table.
govprobe::Metrics metrics_by_hand(const std::vector<govprobe::Label>& truth, const std::vector<govprobe::Label>& predicted);

}  // namespace oracle
