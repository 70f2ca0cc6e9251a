#include "sentinel/model.hpp"

#include "sentinel/error.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace sentinel {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::BadDimensions: return "BadDimensions";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::SteppedAfterAlarm: return "SteppedAfterAlarm";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::SemanticError: return "SemanticError";
        case ErrorCode::PlacementError: return "PlacementError";
        case ErrorCode::SingularSystem: return "SingularSystem";
    }
    return "Unknown";
}

std::size_t numerical_rank(const Matrix& A) {
    if (A.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(A);
    const Vector& s = svd.singularValues();
    const double tol = s.maxCoeff() * static_cast<double>(A.rows()) *
                       std::numeric_limits<double>::epsilon();
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s[i] > tol) ++rank;
    }
    return rank;
}

LinearModel::LinearModel(Matrix H, double sigma2) : H_(std::move(H)), sigma2_(sigma2) {
    if (H_.cols() < 1 || H_.rows() <= H_.cols()) {
        std::ostringstream os;
        os << "model matrix must satisfy M > N >= 1, got " << H_.rows() << "x" << H_.cols();
        throw Error(ErrorCode::BadDimensions, os.str());
    }
    if (!H_.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, "model matrix has non-finite entries");
    }
    if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_)) {
        throw Error(ErrorCode::NonPositiveVariance, "noise variance must be positive and finite");
    }
    const std::size_t rank = numerical_rank(H_);
    if (rank < N()) {
        std::ostringstream os;
        os << "model matrix has numerical rank " << rank << " < " << N() << " columns";
        throw Error(ErrorCode::RankDeficient, os.str());
    }
}

double LinearModel::sigma() const noexcept { return std::sqrt(sigma2_); }

LinearModel build_model(Matrix H, double sigma2) { return LinearModel(std::move(H), sigma2); }

Projector::Projector(const LinearModel& model) {
    const Eigen::Index M = model.H().rows();
    const Eigen::Index N = model.H().cols();
    Eigen::HouseholderQR<Matrix> qr(model.H());
    const Matrix Qfull = qr.householderQ() * Matrix::Identity(M, M);
    const Matrix Q = Qfull.leftCols(N);
    complement_ = Qfull.rightCols(M - N);

    P_ = Matrix::Identity(M, M) - Q * Q.transpose();
    // Symmetrize away the last-bit asymmetry of the product.
    P_ = 0.5 * (P_ + P_.transpose()).eval();
    row_norms_ = P_.rowwise().norm();
}

Projector projector(const LinearModel& model) { return Projector(model); }

Residual residual(const Projector& proj, const Vector& x) {
    if (static_cast<std::size_t>(x.size()) != proj.M()) {
        std::ostringstream os;
        os << "observation has " << x.size() << " entries, model expects " << proj.M();
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
    return Residual{proj.P() * x};
}

ProjectorDiagnostics diagnose(const Projector& proj, const LinearModel& model) {
    const Matrix& P = proj.P();
    ProjectorDiagnostics d;
    d.symmetry = (P - P.transpose()).cwiseAbs().maxCoeff();
    d.idempotence = (P * P - P).cwiseAbs().maxCoeff();
    d.annihilation = (P * model.H()).cwiseAbs().maxCoeff();
    d.min_diagonal = P.diagonal().minCoeff();
    d.max_diagonal = P.diagonal().maxCoeff();
    return d;
}

}  // namespace sentinel
