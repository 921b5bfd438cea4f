#pragma once

#include <Eigen/Dense>

#include <vector>

namespace bmsvm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Gaussian kernel denominator is kKernelWidthFactor * theta^2. Set to 2.0 for
/// the exp(-d^2 / (2 theta^2)) convention.
inline constexpr double kKernelWidthFactor = 1.0;

/// exp(-||x - x2||^2 / theta^2). Throws ParameterError for theta <= 0.
double gaussian_kernel(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x2,
                       double theta);

/// Symmetric PSD matrix together with its spectral decomposition.
///
/// Eigenvalues are stored in descending order. Anything at or below
/// rank_tol() = n * eps * max(eigvals) counts as zero for the pseudo-inverse,
/// the pseudo-determinant and the numerical rank.
class KernelMatrix {
public:
    /// Takes ownership of a symmetric matrix and decomposes it. theta is
    /// bookkeeping only (0 for matrices not produced by a kernel).
    explicit KernelMatrix(Matrix entries, double theta = 0.0);

    const Matrix& entries() const noexcept { return entries_; }
    double theta() const noexcept { return theta_; }
    const Vector& eigvals() const noexcept { return eigvals_; }
    const Matrix& eigvecs() const noexcept { return eigvecs_; }
    double rank_tol() const noexcept { return rank_tol_; }
    /// Number of eigenvalues strictly above rank_tol().
    Eigen::Index rank() const noexcept { return rank_; }
    Eigen::Index size() const noexcept { return entries_.rows(); }

private:
    Matrix entries_;
    double theta_;
    Vector eigvals_;
    Matrix eigvecs_;
    double rank_tol_;
    Eigen::Index rank_;
};

/// K[i][j] = gaussian_kernel(x_i, x_j, theta) for the rows of `inputs`.
KernelMatrix build_kernel_matrix(const Matrix& inputs, double theta);
/// Same, for a ragged list; mismatched dimensions raise ShapeError.
KernelMatrix build_kernel_matrix(const std::vector<Vector>& inputs, double theta);

/// m x n matrix of kernel values between the rows of `a` and the rows of `b`.
Matrix cross_kernel(const Matrix& a, const Matrix& b, double theta);

Matrix pseudo_inverse(const KernelMatrix& k);

/// Sum of log eigenvalues above rank_tol. Throws DegenerateMatrixError if none are.
double log_pseudo_det(const KernelMatrix& k);

/// K~ = [1_n, K].
class AugmentedKernel {
public:
    explicit AugmentedKernel(const Matrix& kernel);

    const Matrix& rows() const noexcept { return rows_; }
    /// k~_i, the i-th row as an (n+1)-vector.
    Vector row_view(Eigen::Index i) const { return rows_.row(i).transpose(); }

private:
    Matrix rows_;
};

/// H = I_c - (1/c) 1 1'.
class CenteringMatrix {
public:
    explicit CenteringMatrix(int num_classes);

    int num_classes() const noexcept { return c_; }
    const Matrix& entries() const noexcept { return entries_; }

    /// H v, computed as v minus its mean.
    Vector apply(const Vector& v) const;
    /// B H, computed by subtracting each row's mean.
    Matrix apply_right(const Matrix& b) const;

private:
    int c_;
    Matrix entries_;
};

/// Cholesky factor of m + jitter * I, where the jitter is only added when the
/// plain factorization fails.
class SpdFactor {
public:
    /// jitter = jitter_scale * trace(m) / dim. Throws ConditioningError if the
    /// jittered matrix is still not positive definite.
    SpdFactor(const Matrix& m, double jitter_scale = 1e-10);

    Matrix solve(const Matrix& rhs) const { return llt_.solve(rhs); }
    /// L^{-T} v, which maps N(0, I) draws to N(0, (m + jitter)^{-1}).
    Vector inverse_sqrt_transpose_apply(const Vector& v) const;
    double jitter() const noexcept { return jitter_; }
    double log_det() const;

private:
    Eigen::LLT<Matrix> llt_;
    double jitter_ = 0.0;
};

struct CholSolveResult {
    Matrix solution;
    double jitter = 0.0;
};

/// Solves (m + jitter I) x = rhs; see SpdFactor for the jitter rule.
CholSolveResult chol_solve_spd(const Matrix& m, const Matrix& rhs, double jitter_scale = 1e-10);

} // namespace bmsvm
