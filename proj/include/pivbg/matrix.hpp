#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>
#include <string>

namespace pivbg {

/// Dense double-precision matrix, (row, col) indexed.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class FactorizationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalDivergenceError : public std::runtime_error {
public:
    NumericalDivergenceError(const std::string& what, int iteration)
        : std::runtime_error(what), iteration_(iteration) {}
    int iteration() const { return iteration_; }

private:
    int iteration_;
};

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

/// Thin SVD of A: u is m x r, v is n x r, r = min(m, n),
/// sigma descending with near-zero values clamped to exactly 0.
struct SvdFactors {
    Matrix u;
    Vector sigma;
    Matrix v;

    int rank(double rel_tol = 1e-12) const {
        if (sigma.size() == 0) return 0;
        const double cut = rel_tol * sigma[0];
        int r = 0;
        for (Eigen::Index i = 0; i < sigma.size(); ++i)
            if (sigma[i] > cut) ++r;
        return r;
    }
};

inline SvdFactors svd(const Matrix& a) {
    Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success) {
        throw FactorizationError("SVD failed to converge for " +
                                 std::to_string(a.rows()) + "x" +
                                 std::to_string(a.cols()) + " matrix");
    }
    SvdFactors f{dec.matrixU(), dec.singularValues(), dec.matrixV()};
    if (f.sigma.size() > 0) {
        const double cut = 1e-12 * f.sigma[0];
        for (Eigen::Index i = 0; i < f.sigma.size(); ++i)
            if (f.sigma[i] < cut) f.sigma[i] = 0.0;
    }
    return f;
}

inline double frobenius_norm(const Matrix& a) { return a.norm(); }

inline double l1_norm(const Matrix& a) { return a.cwiseAbs().sum(); }

inline double nuclear_norm(const Matrix& a) { return svd(a).sigma.sum(); }

inline double spectral_norm(const Matrix& a) {
    const SvdFactors f = svd(a);
    return f.sigma.size() > 0 ? f.sigma[0] : 0.0;
}

}  // namespace pivbg
