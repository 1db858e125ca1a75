#pragma once

#include <span>
#include <vector>

#include "govprobe/probes.hpp"

namespace govprobe::probes_impl {

LogRegParams fit_logreg(const ProbeConfig& cfg, const FeatureMatrix& X, std::span<const double> y, FitReport& report);
MlpParams fit_mlp(const ProbeConfig& cfg, const FeatureMatrix& X, std::span<const double> y, FitReport& report);
ForestParams fit_forest(const ProbeConfig& cfg, const FeatureMatrix& X, std::span<const Label> y, FitReport& report);

double logreg_score(const LogRegParams& p, std::span<const double> x);
double forest_score(const ForestParams& p, std::span<const double> x);

double sigmoid(double z);

}  // namespace govprobe::probes_impl
