#pragma once

#include "bmsvm/kernel.hpp"
#include "bmsvm/map_estimator.hpp"
#include "bmsvm/model.hpp"
#include "bmsvm/random.hpp"

#include <iosfwd>
#include <memory>
#include <vector>

namespace bmsvm {

/// m1 sweeps in total, the first m2 discarded, then every `thin`-th kept.
struct SamplerSchedule {
    int m1 = 10000;
    int m2 = 5000;
    int thin = 10;

    /// T = (m1 - m2) / thin.
    int retained() const noexcept { return (m1 - m2) / thin; }
    /// Requires 0 <= m2 < m1, thin >= 1 dividing (m1 - m2).
    void validate() const;
};

/// How the normal-gamma block is computed.
enum class LinalgRoute {
    /// Whitened range-space basis of K: per-theta eigendecompositions make each
    /// sweep O(c r^2). Sigma^-2 uses the Woodbury form of s' Q^-1 s.
    spectral,
    /// Literal Q_j and Psi_j matrices with Cholesky (and lazy jitter) every sweep.
    dense
};

struct SamplerOptions {
    SamplerSchedule schedule;
    bool sample_theta = false;
    LinalgRoute route = LinalgRoute::spectral;
};

/// Kernel quantities the sampler needs at one value of theta. Immutable.
class KernelWorkspace {
public:
    struct ClassBlock {
        std::vector<int> rows; ///< complement(j)
        // spectral route
        Matrix phi;            ///< rows of V_r diag(sqrt(lambda_r)), n_j x r
        Vector phi_sum;        ///< phi' 1
        Matrix gram_vecs;      ///< eigenvectors of phi' phi
        Vector gram_vals;      ///< eigenvalues of phi' phi
        // dense route
        Matrix aug_rows;       ///< K~_j, n_j x (n+1)
        Matrix aug_gram;       ///< K~_j' K~_j
        Matrix proj_kernel;    ///< K_j K^+ K_j'
    };

    KernelWorkspace(const TrainingSet& ts, double theta, LinalgRoute route);
    KernelWorkspace(const TrainingSet& ts, KernelMatrix kernel, LinalgRoute route);

    double theta() const noexcept { return kernel_.theta(); }
    const KernelMatrix& kernel() const noexcept { return kernel_; }
    double log_pdet() const noexcept { return log_pdet_; }
    LinalgRoute route() const noexcept { return route_; }
    const ClassBlock& block(int j) const { return blocks_[static_cast<std::size_t>(j)]; }
    int num_classes() const noexcept { return static_cast<int>(blocks_.size()); }
    /// V_r, the eigenvectors of K above the rank tolerance.
    const Matrix& range_basis() const noexcept { return range_basis_; }
    /// lambda_r^{-1/2}.
    const Vector& inv_sqrt_eigs() const noexcept { return inv_sqrt_eigs_; }

private:
    void build(const TrainingSet& ts);

    KernelMatrix kernel_;
    LinalgRoute route_;
    double log_pdet_ = 0.0;
    Matrix range_basis_;
    Vector inv_sqrt_eigs_;
    std::vector<ClassBlock> blocks_;
};

/// One point of the chain.
struct ChainState {
    LatentState latent;
    Coefficients coef;
    double sigma2 = 1.0;
    double tau = 1.0;
    double theta = 1.0;
    std::shared_ptr<const KernelWorkspace> kernel;
};

struct SampleRecord {
    long sweep = 0;
    Vector w0;
    Matrix w;
    double sigma2 = 0.0;
    double tau = 0.0;
    double theta = 0.0;
    /// log p(y | f) of the training labels, up to the usual constant.
    double log_likelihood = 0.0;
};

struct PosteriorSamples {
    std::vector<SampleRecord> records;
    long z_proposed = 0;
    long z_accepted = 0;
    long theta_proposed = 0;
    long theta_accepted = 0;

    double z_acceptance_rate() const noexcept {
        return z_proposed ? static_cast<double>(z_accepted) / static_cast<double>(z_proposed) : 0.0;
    }
    double theta_acceptance_rate() const noexcept {
        return theta_proposed ? static_cast<double>(theta_accepted) / static_cast<double>(theta_proposed)
                              : 0.0;
    }
};

struct GammaParams {
    double shape = 0.0;
    double rate = 0.0;
};

/// log of the z -> z* acceptance ratio for a free latent whose regression mean
/// is `mean` (the proposal is symmetric, so no q-ratio appears).
double z_log_accept_ratio(double z, double z_star, double mean, double sigma2, int num_classes);

/// One Metropolis-Hastings pass over every free latent, classes in order and
/// rows ascending within a class. Returns the number of accepted moves.
long mh_update_z(ChainState& state, const TrainingSet& ts, const Hyperparams& hyper, Rng& rng);

/// sum_j s_j' Q_j^{-1} s_j with Q_j = I + K~_j Sigma^+ K~_j'.
double latent_quadratic_form(const LatentState& latent, const KernelWorkspace& ws, double tau,
                             double eta);

/// Gamma posterior of sigma^-2 given the latents, theta and tau (beta integrated out).
GammaParams sigma_precision_posterior(const LatentState& latent, const KernelWorkspace& ws,
                                      const Hyperparams& hyper, double tau, const TrainingSet& ts);

/// Draws sigma^-2 from sigma_precision_posterior and returns sigma^2.
double draw_sigma2(const LatentState& latent, const KernelWorkspace& ws, const Hyperparams& hyper,
                   double tau, const TrainingSet& ts, Rng& rng);

/// beta_j ~ N(Psi_j^{-1} K~_j' s_j, sigma2 Psi_j^{-1}) independently per class,
/// each class on its own substream keyed by one draw from `rng`.
Coefficients draw_betas(const LatentState& latent, const KernelWorkspace& ws, double sigma2,
                        double tau, double eta, Rng& rng);

/// tr(B' K B) as a sum of per-column quadratic forms.
double kernel_trace_form(const Coefficients& coef, const Matrix& kernel);

GammaParams tau_posterior(const Coefficients& coef, const KernelWorkspace& ws, double sigma2,
                          const Hyperparams& hyper);

double draw_tau(const Coefficients& coef, const KernelWorkspace& ws, double sigma2,
                const Hyperparams& hyper, Rng& rng);

/// log prod_j [p(beta_j | theta*) p(s_j | beta_j, theta*)] / [... at theta], using
/// the generalized multivariate t forms with sigma^2 integrated out.
double theta_log_ratio(const Coefficients& coef, const LatentState& latent, const TrainingSet& ts,
                       const KernelMatrix& current, const KernelMatrix& proposed,
                       const Hyperparams& hyper, double tau);

/// Reflects x into [lo, hi].
double reflect_into(double x, double lo, double hi);

/// Reflected random walk on log(theta) within the prior bounds. Rebuilds the
/// workspace on acceptance. Returns whether the move was accepted.
bool mh_update_theta(ChainState& state, const TrainingSet& ts, const Hyperparams& hyper, Rng& rng);

/// Steps (b) and (c) of a sweep: optional theta move, (sigma^2, beta) block, tau.
void parameter_step(ChainState& state, const TrainingSet& ts, const Hyperparams& hyper,
                    const SamplerOptions& options, Rng& rng, PosteriorSamples* stats = nullptr);

/// Free latents at the label encoding (-1/(c-1)), sigma^2 and tau from their
/// priors, beta at zero or at the MAP fit with lambda = tau / sigma^2.
ChainState init_state(const TrainingSet& ts, const Hyperparams& hyper, double theta,
                      LinalgRoute route, Rng& rng, const MapConfig* warm_start = nullptr);

/// Fixed theta if given, otherwise the midpoint of the prior bounds.
double initial_theta(const Hyperparams& hyper, const double* fixed_theta);

/// Runs the full schedule. Deterministic given the generator state.
PosteriorSamples run_chain(const TrainingSet& ts, const Hyperparams& hyper,
                           const SamplerOptions& options, ChainState state, Rng& rng);

/// One row per retained sample: sweep,sigma2,tau,theta,log_likelihood.
void write_trace_csv(std::ostream& out, const PosteriorSamples& samples);

} // namespace bmsvm
