#include "bmsvm/sampler.hpp"

#include "bmsvm/error.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace bmsvm {

void SamplerSchedule::validate() const {
    if (m2 < 0 || m2 >= m1 || thin < 1 || (m1 - m2) % thin != 0) {
        std::ostringstream os;
        os << "invalid schedule M1=" << m1 << " M2=" << m2 << " M=" << thin
           << " (need 0 <= M2 < M1 and M dividing M1 - M2)";
        throw ParameterError(os.str());
    }
}

KernelWorkspace::KernelWorkspace(const TrainingSet& ts, double theta, LinalgRoute route)
    : KernelWorkspace(ts, build_kernel_matrix(ts.inputs(), theta), route) {}

KernelWorkspace::KernelWorkspace(const TrainingSet& ts, KernelMatrix kernel, LinalgRoute route)
    : kernel_(std::move(kernel)), route_(route) {
    if (kernel_.size() != ts.n()) {
        throw ShapeError("KernelWorkspace: kernel size differs from training set size");
    }
    build(ts);
}

void KernelWorkspace::build(const TrainingSet& ts) {
    log_pdet_ = log_pseudo_det(kernel_);
    const Eigen::Index r = kernel_.rank();
    range_basis_ = kernel_.eigvecs().leftCols(r);
    const Vector sqrt_eigs = kernel_.eigvals().head(r).cwiseSqrt();
    inv_sqrt_eigs_ = sqrt_eigs.cwiseInverse();

    const int c = ts.num_classes();
    blocks_.assign(static_cast<std::size_t>(c), {});
    const Matrix phi = range_basis_ * sqrt_eigs.asDiagonal();
    const AugmentedKernel aug(kernel_.entries());
    const Vector inv_eigs = kernel_.eigvals().head(r).cwiseInverse();
    for (int j = 0; j < c; ++j) {
        ClassBlock& blk = blocks_[static_cast<std::size_t>(j)];
        blk.rows = ts.complement(j);
        if (route_ == LinalgRoute::spectral) {
            blk.phi = phi(blk.rows, Eigen::all);
            blk.phi_sum = blk.phi.colwise().sum().transpose();
            Eigen::SelfAdjointEigenSolver<Matrix> eig(blk.phi.transpose() * blk.phi);
            blk.gram_vecs = eig.eigenvectors();
            blk.gram_vals = eig.eigenvalues().cwiseMax(0.0);
        } else {
            blk.aug_rows = aug.rows()(blk.rows, Eigen::all);
            blk.aug_gram = blk.aug_rows.transpose() * blk.aug_rows;
            const Matrix kv = kernel_.entries()(blk.rows, Eigen::all) * range_basis_;
            blk.proj_kernel = kv * inv_eigs.asDiagonal() * kv.transpose();
        }
    }
}

double z_log_accept_ratio(double z, double z_star, double mean, double sigma2, int num_classes) {
    const double off = margin_offset(num_classes);
    const double d = z - mean;
    const double d_star = z_star - mean;
    return hinge(z + off) - hinge(z_star + off) + (d * d - d_star * d_star) / (2.0 * sigma2);
}

long mh_update_z(ChainState& state, const TrainingSet& ts, const Hyperparams& hyper, Rng& rng) {
    const int c = ts.num_classes();
    // Regression means k~_i' beta_j for every row and class.
    Matrix means = state.kernel->kernel().entries() * state.coef.b();
    means.rowwise() += state.coef.b0().transpose();

    std::normal_distribution<double> step(0.0, hyper.z_proposal_sd);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    long accepted = 0;
    for (int j = 0; j < c; ++j) {
        Vector& s = state.latent.s[static_cast<std::size_t>(j)];
        const auto& rows = ts.complement(j);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const auto idx = static_cast<Eigen::Index>(k);
            const double z = s(idx);
            const double z_star = z + step(rng);
            const double log_ratio = z_log_accept_ratio(z, z_star, means(rows[k], j), state.sigma2, c);
            if (log_ratio >= 0.0 || std::log(unif(rng)) < log_ratio) {
                s(idx) = z_star;
                ++accepted;
            }
        }
    }
    return accepted;
}

namespace {

/// Psi_j in the whitened basis is [[n_j + eta, a'], [a, G + tau I]] with
/// G = U diag(g) U'. Everything below is O(r^2) given that decomposition.
struct SpectralBlockSolver {
    const KernelWorkspace::ClassBlock& blk;
    double tau;
    Vector denom;   // g + tau
    Vector minv_a;  // M^{-1} a
    double schur;   // n_j + eta - a' M^{-1} a

    SpectralBlockSolver(const KernelWorkspace::ClassBlock& b, double tau_, double eta)
        : blk(b), tau(tau_) {
        denom = blk.gram_vals.array() + tau;
        minv_a = apply_minv(blk.phi_sum);
        schur = static_cast<double>(blk.rows.size()) + eta - blk.phi_sum.dot(minv_a);
    }

    Vector apply_minv(const Vector& v) const {
        const Vector t = (blk.gram_vecs.transpose() * v).cwiseQuotient(denom);
        return blk.gram_vecs * t;
    }

    /// Solves Psi x = (u0, ub); returns x0 and writes xb.
    double solve(double u0, const Vector& ub, Vector& xb) const {
        const Vector minv_ub = apply_minv(ub);
        const double x0 = (u0 - blk.phi_sum.dot(minv_ub)) / schur;
        xb = minv_ub - minv_a * x0;
        return x0;
    }
};

double dense_quadratic_form(const KernelWorkspace::ClassBlock& blk, const Vector& s, double tau,
                            double eta) {
    const auto nj = static_cast<Eigen::Index>(blk.rows.size());
    Matrix q = Matrix::Identity(nj, nj);
    q.array() += 1.0 / eta;
    q += blk.proj_kernel / tau;
    const CholSolveResult sol = chol_solve_spd(q, s);
    return s.dot(sol.solution.col(0));
}

} // namespace

double latent_quadratic_form(const LatentState& latent, const KernelWorkspace& ws, double tau,
                             double eta) {
    double total = 0.0;
    for (int j = 0; j < ws.num_classes(); ++j) {
        const auto& blk = ws.block(j);
        const Vector& s = latent.s[static_cast<std::size_t>(j)];
        if (ws.route() == LinalgRoute::dense) {
            total += dense_quadratic_form(blk, s, tau, eta);
            continue;
        }
        // Woodbury: Q^-1 = I - X Psi^-1 X' with X = [1, phi].
        SpectralBlockSolver solver(blk, tau, eta);
        const double u0 = s.sum();
        const Vector ub = blk.phi.transpose() * s;
        Vector xb;
        const double x0 = solver.solve(u0, ub, xb);
        total += s.squaredNorm() - (u0 * x0 + ub.dot(xb));
    }
    return total;
}

GammaParams sigma_precision_posterior(const LatentState& latent, const KernelWorkspace& ws,
                                      const Hyperparams& hyper, double tau, const TrainingSet& ts) {
    const double n = static_cast<double>(ts.n());
    const double c = static_cast<double>(ts.num_classes());
    const double count = hyper.shape_mode == ShapeMode::paper ? n * c : (c - 1.0) * n;
    return {(hyper.a_sigma + count) / 2.0,
            (hyper.b_sigma + latent_quadratic_form(latent, ws, tau, hyper.eta)) / 2.0};
}

double draw_sigma2(const LatentState& latent, const KernelWorkspace& ws, const Hyperparams& hyper,
                   double tau, const TrainingSet& ts, Rng& rng) {
    const GammaParams g = sigma_precision_posterior(latent, ws, hyper, tau, ts);
    return 1.0 / draw_gamma(rng, g.shape, g.rate);
}

Coefficients draw_betas(const LatentState& latent, const KernelWorkspace& ws, double sigma2,
                        double tau, double eta, Rng& rng) {
    const int c = ws.num_classes();
    const Eigen::Index n = ws.kernel().size();
    const double sd = std::sqrt(sigma2);
    const std::uint64_t key = rng();
    Coefficients coef = Coefficients::zeros(n, c);

    for (int j = 0; j < c; ++j) {
        Rng sub = make_rng(key, static_cast<std::uint64_t>(j));
        const auto& blk = ws.block(j);
        const Vector& s = latent.s[static_cast<std::size_t>(j)];

        if (ws.route() == LinalgRoute::dense) {
            Matrix psi = blk.aug_gram;
            psi(0, 0) += eta;
            psi.bottomRightCorner(n, n) += tau * ws.kernel().entries();
            const SpdFactor factor(psi);
            Vector xi(n + 1);
            for (Eigen::Index k = 0; k < n + 1; ++k) {
                xi(k) = draw_normal(sub);
            }
            const Vector mean = factor.solve(blk.aug_rows.transpose() * s);
            const Vector beta = mean + sd * factor.inverse_sqrt_transpose_apply(xi);
            coef.b0()(j) = beta(0);
            coef.b().col(j) = beta.tail(n);
            continue;
        }

        const Eigen::Index r = blk.gram_vals.size();
        SpectralBlockSolver solver(blk, tau, eta);
        Vector mean_b;
        const double mean0 = solver.solve(s.sum(), blk.phi.transpose() * s, mean_b);

        // Psi = L' D L with L = [[1, 0], [M^-1 a, I]]: draw y ~ N(0, D^-1), map by L^-1.
        const double y0 = draw_normal(sub) / std::sqrt(solver.schur);
        Vector xi(r);
        for (Eigen::Index k = 0; k < r; ++k) {
            xi(k) = draw_normal(sub);
        }
        const Vector yb = blk.gram_vecs * xi.cwiseQuotient(solver.denom.cwiseSqrt());
        const Vector delta = mean_b + sd * (yb - solver.minv_a * y0);

        coef.b0()(j) = mean0 + sd * y0;
        coef.b().col(j) = ws.range_basis() * delta.cwiseProduct(ws.inv_sqrt_eigs());
    }
    return coef;
}

double kernel_trace_form(const Coefficients& coef, const Matrix& kernel) {
    double total = 0.0;
    for (int j = 0; j < coef.num_classes(); ++j) {
        const auto b = coef.b().col(j);
        total += b.dot(kernel * b);
    }
    return total;
}

GammaParams tau_posterior(const Coefficients& coef, const KernelWorkspace& ws, double sigma2,
                          const Hyperparams& hyper) {
    const double c = static_cast<double>(coef.num_classes());
    const double dim = hyper.shape_mode == ShapeMode::paper
                           ? static_cast<double>(ws.kernel().size())
                           : static_cast<double>(ws.kernel().rank());
    return {(hyper.a_tau + dim * c) / 2.0,
            (hyper.b_tau + kernel_trace_form(coef, ws.kernel().entries()) / sigma2) / 2.0};
}

double draw_tau(const Coefficients& coef, const KernelWorkspace& ws, double sigma2,
                const Hyperparams& hyper, Rng& rng) {
    const GammaParams g = tau_posterior(coef, ws, sigma2, hyper);
    return draw_gamma(rng, g.shape, g.rate);
}

double theta_log_ratio(const Coefficients& coef, const LatentState& latent, const TrainingSet& ts,
                       const KernelMatrix& current, const KernelMatrix& proposed,
                       const Hyperparams& hyper, double tau) {
    const double n = static_cast<double>(ts.n());
    const double half_log_det_ratio = 0.5 * (log_pseudo_det(proposed) - log_pseudo_det(current));
    const Matrix kb = current.entries() * coef.b();
    const Matrix kb_star = proposed.entries() * coef.b();

    double total = 0.0;
    for (int j = 0; j < ts.num_classes(); ++j) {
        const double b0 = coef.b0()(j);
        const auto b = coef.b().col(j);
        const double quad = hyper.eta * b0 * b0 + tau * b.dot(kb.col(j));
        const double quad_star = hyper.eta * b0 * b0 + tau * b.dot(kb_star.col(j));
        total += half_log_det_ratio + 0.5 * (hyper.a_sigma + n + 1.0) *
                                          (std::log(hyper.b_sigma + quad) - std::log(hyper.b_sigma + quad_star));

        const auto& rows = ts.complement(j);
        const Vector& s = latent.s[static_cast<std::size_t>(j)];
        double rss = 0.0;
        double rss_star = 0.0;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const double sk = s(static_cast<Eigen::Index>(k));
            const double e = sk - b0 - kb(rows[k], j);
            const double e_star = sk - b0 - kb_star(rows[k], j);
            rss += e * e;
            rss_star += e_star * e_star;
        }
        const double nj = static_cast<double>(rows.size());
        total += 0.5 * (hyper.a_sigma + nj) *
                 (std::log(hyper.b_sigma + rss) - std::log(hyper.b_sigma + rss_star));
    }
    return total;
}

double reflect_into(double x, double lo, double hi) {
    const double width = hi - lo;
    if (!(width > 0.0)) {
        throw ParameterError("reflect_into: empty interval");
    }
    // Fold onto a period of 2 * width, then mirror the upper half.
    double t = std::fmod(x - lo, 2.0 * width);
    if (t < 0.0) {
        t += 2.0 * width;
    }
    if (t > width) {
        t = 2.0 * width - t;
    }
    return lo + t;
}

bool mh_update_theta(ChainState& state, const TrainingSet& ts, const Hyperparams& hyper, Rng& rng) {
    const double log_lo = std::log(hyper.theta_lo);
    const double log_hi = std::log(hyper.theta_hi);
    const double log_theta = std::log(state.theta);
    const double log_star = reflect_into(log_theta + hyper.theta_proposal_sd * draw_normal(rng), log_lo, log_hi);
    const double theta_star = std::exp(log_star);
    if (!(theta_star >= hyper.theta_lo * (1 - 1e-12) && theta_star <= hyper.theta_hi * (1 + 1e-12))) {
        throw Error(ErrorCategory::internal, "mh_update_theta: reflected proposal left the prior bounds");
    }

    KernelMatrix k_star = build_kernel_matrix(ts.inputs(), theta_star);
    // The walk is symmetric in log(theta); under a uniform prior on theta the
    // Hastings correction is theta*/theta.
    const double log_accept = theta_log_ratio(state.coef, state.latent, ts, state.kernel->kernel(),
                                              k_star, hyper, state.tau) +
                              (log_star - log_theta);
    const double u = draw_uniform(rng);
    if (log_accept >= 0.0 || std::log(u) < log_accept) {
        state.theta = theta_star;
        state.kernel = std::make_shared<const KernelWorkspace>(ts, std::move(k_star), state.kernel->route());
        return true;
    }
    return false;
}

void parameter_step(ChainState& state, const TrainingSet& ts, const Hyperparams& hyper,
                    const SamplerOptions& options, Rng& rng, PosteriorSamples* stats) {
    if (options.sample_theta) {
        const bool accepted = mh_update_theta(state, ts, hyper, rng);
        if (stats) {
            ++stats->theta_proposed;
            stats->theta_accepted += accepted ? 1 : 0;
        }
    }
    state.sigma2 = draw_sigma2(state.latent, *state.kernel, hyper, state.tau, ts, rng);
    state.coef = draw_betas(state.latent, *state.kernel, state.sigma2, state.tau, hyper.eta, rng);
    state.tau = draw_tau(state.coef, *state.kernel, state.sigma2, hyper, rng);
}

double initial_theta(const Hyperparams& hyper, const double* fixed_theta) {
    return fixed_theta ? *fixed_theta : 0.5 * (hyper.theta_lo + hyper.theta_hi);
}

ChainState init_state(const TrainingSet& ts, const Hyperparams& hyper, double theta,
                      LinalgRoute route, Rng& rng, const MapConfig* warm_start) {
    hyper.validate();
    ChainState state;
    const int c = ts.num_classes();
    state.latent.s.resize(static_cast<std::size_t>(c));
    for (int j = 0; j < c; ++j) {
        state.latent.s[static_cast<std::size_t>(j)] =
            Vector::Constant(ts.complement_size(j), -margin_offset(c));
    }
    state.sigma2 = 1.0 / draw_gamma(rng, hyper.a_sigma / 2.0, hyper.b_sigma / 2.0);
    state.tau = draw_gamma(rng, hyper.a_tau / 2.0, hyper.b_tau / 2.0);
    state.theta = theta;
    state.kernel = std::make_shared<const KernelWorkspace>(ts, theta, route);
    if (warm_start) {
        MapConfig cfg = *warm_start;
        cfg.lambda = state.tau / state.sigma2;
        state.coef = map_fit(ts, state.kernel->kernel(), cfg).coef;
    } else {
        state.coef = Coefficients::zeros(ts.n(), c);
    }
    return state;
}

PosteriorSamples run_chain(const TrainingSet& ts, const Hyperparams& hyper,
                           const SamplerOptions& options, ChainState state, Rng& rng) {
    hyper.validate();
    options.schedule.validate();
    const SamplerSchedule& sched = options.schedule;

    PosteriorSamples out;
    out.records.reserve(static_cast<std::size_t>(sched.retained()));
    const long z_per_sweep = static_cast<long>(ts.num_classes() - 1) * static_cast<long>(ts.n());

    for (long sweep = 1; sweep <= sched.m1; ++sweep) {
        try {
            out.z_accepted += mh_update_z(state, ts, hyper, rng);
            out.z_proposed += z_per_sweep;
            parameter_step(state, ts, hyper, options, rng, &out);
        } catch (const ConditioningError& e) {
            std::ostringstream os;
            os << "sweep " << sweep << ": " << e.what();
            throw ConditioningError(os.str(), e.smallest_eigenvalue());
        }

        if (sweep > sched.m2 && (sweep - sched.m2) % sched.thin == 0) {
            SampleRecord rec;
            rec.sweep = sweep;
            rec.w0 = state.coef.w0();
            rec.w = state.coef.w();
            rec.sigma2 = state.sigma2;
            rec.tau = state.tau;
            rec.theta = state.theta;
            rec.log_likelihood =
                -neg_log_likelihood(decision_matrix(state.coef, state.kernel->kernel().entries()), ts);
            out.records.push_back(std::move(rec));
        }
    }
    return out;
}

void write_trace_csv(std::ostream& out, const PosteriorSamples& samples) {
    out << "sweep,sigma2,tau,theta,log_likelihood\n";
    out << std::setprecision(17);
    for (const auto& r : samples.records) {
        out << r.sweep << ',' << r.sigma2 << ',' << r.tau << ',' << r.theta << ',' << r.log_likelihood
            << '\n';
    }
}

} // namespace bmsvm
