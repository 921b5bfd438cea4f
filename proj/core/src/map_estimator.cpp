#include "bmsvm/map_estimator.hpp"

#include "bmsvm/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bmsvm {

void MapConfig::validate() const {
    if (!(lambda > 0.0) || !(step0 > 0.0) || !(tol > 0.0) || max_iters < 0 || window < 1) {
        throw ParameterError("MapConfig: lambda, step0, tol must be positive, window >= 1, max_iters >= 0");
    }
}

double primal_objective(const Coefficients& coef, const KernelMatrix& k, const TrainingSet& ts,
                        double lambda) {
    const Matrix w = coef.w();
    const Matrix f = decision_matrix(coef, k.entries());
    const double quad = (w.transpose() * k.entries() * w).trace();
    return neg_log_likelihood(f, ts) + 0.5 * lambda * quad;
}

PrimalSubgradient primal_subgradient(const Coefficients& coef, const KernelMatrix& k,
                                     const TrainingSet& ts, double lambda) {
    const Matrix& kk = k.entries();
    const Matrix w = coef.w();
    const Matrix f = decision_matrix(coef, kk);
    const double off = margin_offset(ts.num_classes());

    // d loss / d f: indicator of active wrong-class hinges.
    Matrix active = Matrix::Zero(f.rows(), f.cols());
    for (int j = 0; j < ts.num_classes(); ++j) {
        for (int i : ts.complement(j)) {
            if (f(i, j) + off > 0.0) {
                active(i, j) = 1.0;
            }
        }
    }
    const Matrix grad_w = kk * (active + lambda * w);
    const Vector grad_w0 = active.colwise().sum().transpose();

    // w0 = H b0, W = B H with H symmetric.
    PrimalSubgradient g;
    g.b0 = grad_w0.array() - grad_w0.mean();
    g.b = grad_w.colwise() - grad_w.rowwise().mean();
    return g;
}

MapFit map_fit(const TrainingSet& ts, const KernelMatrix& k, const MapConfig& cfg) {
    cfg.validate();
    if (k.size() != ts.n()) {
        throw ShapeError("map_fit: kernel size differs from training set size");
    }
    Coefficients current = Coefficients::zeros(ts.n(), ts.num_classes());
    MapFit fit;
    fit.coef = current;
    fit.objective = primal_objective(current, k, ts, cfg.lambda);
    fit.best_objective.push_back(fit.objective);

    // Steps follow the kernel metric: the B direction is K^-1 times the
    // subgradient, i.e. (D + lambda W) H, scaled by the top eigenvalue of K.
    // The intercept step is scaled by n.
    const double off = margin_offset(ts.num_classes());
    const double b_scale = std::max(1.0, k.eigvals().size() ? k.eigvals()(0) : 1.0);
    const double b0_scale = static_cast<double>(ts.n());
    for (int t = 1; t <= cfg.max_iters; ++t) {
        const Matrix f = decision_matrix(current, k.entries());
        Matrix dir = cfg.lambda * current.w();
        Vector dir0 = Vector::Zero(ts.num_classes());
        for (int j = 0; j < ts.num_classes(); ++j) {
            for (int i : ts.complement(j)) {
                if (f(i, j) + off > 0.0) {
                    dir(i, j) += 1.0;
                    dir0(j) += 1.0;
                }
            }
        }
        const double step = cfg.step0 / std::sqrt(static_cast<double>(t));
        current.b0() -= (step / b0_scale) * (dir0.array() - dir0.mean()).matrix();
        current.b() -= (step / b_scale) * (dir.colwise() - dir.rowwise().mean());

        const double obj = primal_objective(current, k, ts, cfg.lambda);
        if (!std::isfinite(obj)) {
            std::ostringstream os;
            os << "map_fit: objective became non-finite at iteration " << t;
            throw DivergenceError(os.str(), t);
        }
        if (obj < fit.objective) {
            fit.objective = obj;
            fit.coef = current;
        }
        fit.best_objective.push_back(fit.objective);
        fit.iterations = t;

        if (t >= cfg.window) {
            const double before = fit.best_objective[static_cast<std::size_t>(t - cfg.window)];
            const double rel = (before - fit.objective) / std::max(std::abs(before), 1e-300);
            if (rel < cfg.tol) {
                break;
            }
        }
    }
    return fit;
}

} // namespace bmsvm
