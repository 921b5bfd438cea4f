#pragma once

#include "bmsvm/model.hpp"

#include <vector>

namespace bmsvm {

struct MapConfig {
    /// Regularization weight, the gamma of the primal problem.
    double lambda = 1.0;
    int max_iters = 3000;
    double step0 = 1.0;
    /// Stop once the best objective improves by less than tol (relative) over
    /// a window of `window` iterations.
    double tol = 1e-6;
    int window = 50;

    void validate() const;
};

/// sum_i sum_{j != y_i} (f_j(x_i) + 1/(c-1))_+ + (lambda/2) tr(K W W').
double primal_objective(const Coefficients& coef, const KernelMatrix& k, const TrainingSet& ts,
                        double lambda);

/// A subgradient of primal_objective with respect to (b0, B). Hinges exactly
/// at zero contribute 0.
struct PrimalSubgradient {
    Vector b0;
    Matrix b;
};

PrimalSubgradient primal_subgradient(const Coefficients& coef, const KernelMatrix& k,
                                     const TrainingSet& ts, double lambda);

struct MapFit {
    Coefficients coef;
    double objective = 0.0;
    int iterations = 0;
    /// Best-so-far objective after each iteration (index 0 = initialization).
    std::vector<double> best_objective;
};

/// Subgradient descent from zero coefficients with step0 / sqrt(t) steps,
/// taken in the kernel metric (B moves along K^-1 times the subgradient, scaled
/// by 1 / lambda_max(K); b0 by 1 / n). Returns the best iterate seen. Throws DivergenceError on a non-finite
/// objective.
MapFit map_fit(const TrainingSet& ts, const KernelMatrix& k, const MapConfig& cfg);

} // namespace bmsvm
