#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace sentinel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/**
 * Dynamic linear regression model x = H theta + n with i.i.d. Gaussian noise
 * of variance sigma2 per observation.
 *
 * H must be tall (M > N) and have full column rank. Numerical rank counts the
 * singular values above max_sv * M * eps.
 */
class LinearModel {
public:
    LinearModel(Matrix H, double sigma2);

    const Matrix& H() const noexcept { return H_; }
    double sigma2() const noexcept { return sigma2_; }
    double sigma() const noexcept;
    std::size_t M() const noexcept { return static_cast<std::size_t>(H_.rows()); }
    std::size_t N() const noexcept { return static_cast<std::size_t>(H_.cols()); }

    LinearModel with_sigma2(double sigma2) const { return LinearModel(H_, sigma2); }

private:
    Matrix H_;
    double sigma2_;
};

// Numerical rank with the max_sv * rows * eps convention used by LinearModel.
std::size_t numerical_rank(const Matrix& A);

LinearModel build_model(Matrix H, double sigma2);

/**
 * Orthogonal projector onto the complement of col(H).
 *
 * Built as I - Q Q^T from a thin Householder QR of H rather than through
 * (H^T H)^{-1}. Row norms ||p_m|| may be zero for measurements that are fully
 * explained by col(H).
 */
class Projector {
public:
    explicit Projector(const LinearModel& model);

    const Matrix& P() const noexcept { return P_; }
    const Vector& row_norms() const noexcept { return row_norms_; }
    std::size_t M() const noexcept { return static_cast<std::size_t>(P_.rows()); }

    // Orthonormal basis (M x (M - N)) of the residual space.
    const Matrix& complement_basis() const noexcept { return complement_; }

private:
    Matrix P_;
    Vector row_norms_;
    Matrix complement_;
};

Projector projector(const LinearModel& model);

/// Residual-space component x~ = P x of an observation.
struct Residual {
    Vector x_tilde;

    std::size_t size() const noexcept { return static_cast<std::size_t>(x_tilde.size()); }
    double operator[](std::size_t m) const { return x_tilde[static_cast<Eigen::Index>(m)]; }
};

Residual residual(const Projector& proj, const Vector& x);

// Largest absolute entry-wise violations of the projector identities; used by
// diagnostics and tests.
struct ProjectorDiagnostics {
    double symmetry = 0.0;      // max |P - P^T|
    double idempotence = 0.0;   // max |P^2 - P|
    double annihilation = 0.0;  // max |P H|
    double min_diagonal = 0.0;
    double max_diagonal = 0.0;
};

ProjectorDiagnostics diagnose(const Projector& proj, const LinearModel& model);

}  // namespace sentinel
