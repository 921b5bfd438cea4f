#pragma once

#include "bmsvm/dataset.hpp"
#include "bmsvm/map_estimator.hpp"
#include "bmsvm/prediction.hpp"
#include "bmsvm/sampler.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace bmsvm {

struct BmsvmConfig {
    Hyperparams hyper;
    SamplerOptions options;
    /// Unset with options.sample_theta means "start at the midpoint of the bounds".
    std::optional<double> theta;
    /// Start beta at the MAP fit with lambda = tau / sigma^2.
    bool warm_start = false;
    MapConfig warm_start_map;
};

/// Runs one chain on `ts` from seed `seed`.
FittedModel fit_bmsvm(const TrainingSet& ts, const BmsvmConfig& cfg, std::uint64_t seed);

/// MAP fit stored as a single record with sigma2 = 1 and tau = lambda.
FittedModel fit_map(const TrainingSet& ts, double theta, const MapConfig& cfg);

/// Theta-parameterized trainer.
using ThetaTrainer = std::function<FittedModel(const TrainingSet& ts, double theta, std::uint64_t seed)>;

struct ThetaSelection {
    double theta = 0.0;
    /// Cross-validated error rate per grid entry.
    std::vector<double> errors;
};

/// k-fold cross-validation on `ts` over `grid`; error-rate criterion, ties to the
/// smallest theta. Folds are a seeded permutation cut into near-equal parts.
ThetaSelection select_theta_by_cv(const TrainingSet& ts, const std::vector<double>& grid,
                                  const ThetaTrainer& trainer, std::uint64_t seed, int folds = 5);

} // namespace bmsvm
