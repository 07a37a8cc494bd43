#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "ipf/errors.hpp"

namespace ipf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;

/// Information quantity in natural units.
using Nats = double;

inline constexpr double kLn2 = 0.69314718055994530942;

inline double nats_to_bits(Nats v) { return v / kLn2; }
inline Nats bits_to_nats(double v) { return v * kLn2; }

namespace linalg {

inline bool is_symmetric(const Matrix& m, double tol = 1e-12) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// 2-norm condition number via singular values; infinity for a singular matrix.
inline double condition_number(const Matrix& m) {
    if (m.size() == 0) return 1.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (smin == 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

/// Eigenvalues of a symmetric matrix in ascending order.
inline Vector sym_eigenvalues(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

/// Eigenvalues of a general real matrix, sorted by real part descending, then imaginary part descending.
inline std::vector<Complex> eigenvalues(const Matrix& m) {
    Eigen::EigenSolver<Matrix> es(m, false);
    std::vector<Complex> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(out.begin(), out.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    return out;
}

/// Throws DomainError unless m is symmetric positive definite.
inline void require_spd(const Matrix& m, const std::string& what) {
    if (m.rows() != m.cols() || m.rows() == 0) throw DomainError(what + ": matrix must be square and non-empty");
    if (!is_symmetric(m, 1e-9)) throw DomainError(what + ": matrix is not symmetric");
    Eigen::LLT<Matrix> llt(symmetrize(m));
    if (llt.info() != Eigen::Success) throw DomainError(what + ": matrix is not positive definite");
}

/// Matrix exponential. Symmetric input goes through the eigendecomposition,
/// everything else through Padé scaling-and-squaring.
inline Matrix expm(const Matrix& a) {
    if (is_symmetric(a, 1e-14)) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
        const Vector e = es.eigenvalues().array().exp();
        return es.eigenvectors() * e.asDiagonal() * es.eigenvectors().transpose();
    }
    return a.exp();
}

/// Principal square root of a symmetric PSD matrix.
inline Matrix sqrt_psd(const Matrix& r) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(r));
    const Vector s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

/// Logarithm of a symmetric PD matrix.
inline Matrix log_spd(const Matrix& r) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(r));
    const Vector l = es.eigenvalues().array().log();
    return es.eigenvectors() * l.asDiagonal() * es.eigenvectors().transpose();
}

/// Random orthogonal matrix from the QR factor of a matrix of the given entries.
inline Matrix orthogonal_from(const Matrix& seed) {
    Eigen::HouseholderQR<Matrix> qr(seed);
    return qr.householderQ();
}

}  // namespace linalg
}  // namespace ipf
