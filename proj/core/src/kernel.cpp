#include "bmsvm/kernel.hpp"

#include "bmsvm/error.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace bmsvm {

namespace {

void require_positive_theta(double theta) {
    if (!(theta > 0.0) || !std::isfinite(theta)) {
        std::ostringstream os;
        os << "kernel width theta must be positive and finite, got " << theta;
        throw ParameterError(os.str());
    }
}

double kernel_value(double sq_dist, double theta) {
    return std::exp(-sq_dist / (kKernelWidthFactor * theta * theta));
}

} // namespace

double gaussian_kernel(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x2,
                       double theta) {
    require_positive_theta(theta);
    if (x.size() != x2.size()) {
        throw ShapeError("gaussian_kernel: argument dimensions differ");
    }
    return kernel_value((x - x2).squaredNorm(), theta);
}

KernelMatrix::KernelMatrix(Matrix entries, double theta)
    : entries_(std::move(entries)), theta_(theta), rank_tol_(0.0), rank_(0) {
    if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
        throw ShapeError("KernelMatrix: expected a nonempty square matrix");
    }
    const Eigen::Index n = entries_.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(entries_);
    if (solver.info() != Eigen::Success) {
        throw ConditioningError("KernelMatrix: eigendecomposition did not converge",
                                std::numeric_limits<double>::quiet_NaN());
    }
    // Eigen returns ascending order.
    eigvals_ = solver.eigenvalues().reverse();
    eigvecs_ = solver.eigenvectors().rowwise().reverse();
    const double lmax = std::max(eigvals_(0), 0.0);
    rank_tol_ = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * lmax;
    rank_ = (eigvals_.array() > rank_tol_).count();
}

KernelMatrix build_kernel_matrix(const Matrix& inputs, double theta) {
    require_positive_theta(theta);
    const Eigen::Index n = inputs.rows();
    if (n == 0) {
        throw ShapeError("build_kernel_matrix: no input vectors");
    }
    Matrix k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        k(j, j) = 1.0;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double v = kernel_value((inputs.row(i) - inputs.row(j)).squaredNorm(), theta);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return KernelMatrix(std::move(k), theta);
}

KernelMatrix build_kernel_matrix(const std::vector<Vector>& inputs, double theta) {
    if (inputs.empty()) {
        throw ShapeError("build_kernel_matrix: no input vectors");
    }
    const Eigen::Index p = inputs.front().size();
    Matrix x(static_cast<Eigen::Index>(inputs.size()), p);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].size() != p) {
            std::ostringstream os;
            os << "build_kernel_matrix: input " << i << " has dimension " << inputs[i].size()
               << ", expected " << p;
            throw ShapeError(os.str());
        }
        x.row(static_cast<Eigen::Index>(i)) = inputs[i].transpose();
    }
    return build_kernel_matrix(x, theta);
}

Matrix cross_kernel(const Matrix& a, const Matrix& b, double theta) {
    require_positive_theta(theta);
    if (a.cols() != b.cols()) {
        std::ostringstream os;
        os << "cross_kernel: feature dimension " << a.cols() << " vs " << b.cols();
        throw ShapeError(os.str());
    }
    Matrix out(a.rows(), b.rows());
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            out(i, j) = kernel_value((a.row(i) - b.row(j)).squaredNorm(), theta);
        }
    }
    return out;
}

Matrix pseudo_inverse(const KernelMatrix& k) {
    const Eigen::Index r = k.rank();
    const auto v = k.eigvecs().leftCols(r);
    const Vector inv = k.eigvals().head(r).cwiseInverse();
    return v * inv.asDiagonal() * v.transpose();
}

double log_pseudo_det(const KernelMatrix& k) {
    if (k.rank() == 0) {
        throw DegenerateMatrixError("log_pseudo_det: no eigenvalue above the rank tolerance");
    }
    return k.eigvals().head(k.rank()).array().log().sum();
}

AugmentedKernel::AugmentedKernel(const Matrix& kernel) : rows_(kernel.rows(), kernel.cols() + 1) {
    rows_.col(0).setOnes();
    rows_.rightCols(kernel.cols()) = kernel;
}

CenteringMatrix::CenteringMatrix(int num_classes) : c_(num_classes) {
    if (num_classes < 2) {
        throw ParameterError("CenteringMatrix: need at least two classes");
    }
    entries_ = Matrix::Identity(c_, c_) - Matrix::Constant(c_, c_, 1.0 / c_);
}

Vector CenteringMatrix::apply(const Vector& v) const {
    return v.array() - v.mean();
}

Matrix CenteringMatrix::apply_right(const Matrix& b) const {
    return b.colwise() - b.rowwise().mean();
}

SpdFactor::SpdFactor(const Matrix& m, double jitter_scale) {
    llt_.compute(m);
    if (llt_.info() == Eigen::Success) {
        return;
    }
    const double dim = static_cast<double>(m.rows());
    jitter_ = jitter_scale * m.trace() / dim;
    if (jitter_ > 0.0) {
        llt_.compute(m + jitter_ * Matrix::Identity(m.rows(), m.cols()));
        if (llt_.info() == Eigen::Success) {
            return;
        }
    }
    const double smallest = Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly)
                                .eigenvalues()(0);
    std::ostringstream os;
    os << "Cholesky factorization failed after jitter " << jitter_
       << "; smallest eigenvalue " << smallest;
    throw ConditioningError(os.str(), smallest);
}

Vector SpdFactor::inverse_sqrt_transpose_apply(const Vector& v) const {
    return llt_.matrixU().solve(v);
}

double SpdFactor::log_det() const {
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

CholSolveResult chol_solve_spd(const Matrix& m, const Matrix& rhs, double jitter_scale) {
    if (m.rows() != m.cols() || m.rows() != rhs.rows()) {
        throw ShapeError("chol_solve_spd: dimension mismatch");
    }
    SpdFactor factor(m, jitter_scale);
    return {factor.solve(rhs), factor.jitter()};
}

} // namespace bmsvm
