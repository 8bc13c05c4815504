#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pivbg/matrix.hpp"

namespace pivbg {

/// Elementwise shrinkage: sign(x) * max(|x| - eps, 0).
inline Matrix soft_threshold(const Matrix& x, double eps) {
    if (eps < 0.0) throw std::invalid_argument("soft_threshold: eps must be nonnegative");
    return x.unaryExpr([eps](double v) {
        const double mag = std::abs(v) - eps;
        return mag > 0.0 ? (v > 0.0 ? mag : -mag) : 0.0;
    });
}

/// Applies soft_threshold to the singular values of a.
inline Matrix singular_value_threshold(const Matrix& a, double tau) {
    if (tau < 0.0) throw std::invalid_argument("singular_value_threshold: tau must be nonnegative");
    SvdFactors f = svd(a);
    Vector shrunk = f.sigma;
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < shrunk.size(); ++i) {
        shrunk[i] = std::max(shrunk[i] - tau, 0.0);
        if (shrunk[i] > 0.0) r = i + 1;
    }
    if (r == 0) return Matrix::Zero(a.rows(), a.cols());
    return f.u.leftCols(r) * shrunk.head(r).asDiagonal() * f.v.leftCols(r).transpose();
}

/// Rebalances (bg, fg) entrywise so that bg + fg reproduces d bit-for-bit.
/// A resweep of the subtraction fixes almost every entry. Where |fg| exceeds
/// the binade of d no nearby pair can sum to d exactly (the sum grid is
/// coarser than d's mantissa), so those entries collapse to (d, 0); the
/// perturbation is bounded by the entry's own split magnitude.
inline void enforce_exact_additivity(const Matrix& d, Matrix& bg, Matrix& fg) {
    fg = d - bg;
    for (Eigen::Index c = 0; c < d.cols(); ++c) {
        for (Eigen::Index r = 0; r < d.rows(); ++r) {
            if (bg(r, c) + fg(r, c) == d(r, c)) continue;
            bg(r, c) = d(r, c) - fg(r, c);
            fg(r, c) = d(r, c) - bg(r, c);
            if (bg(r, c) + fg(r, c) != d(r, c)) {
                bg(r, c) = d(r, c);
                fg(r, c) = 0.0;
            }
        }
    }
}

struct RpcaConfig {
    std::optional<double> lambda;  // empty = 1/sqrt(rows)
    std::optional<double> mu0;     // empty = 1.25/spectral_norm(D)
    double rho = 1.5;
    double tol = 1e-7;
    int max_iters = 500;
    std::optional<double> mu_cap;  // empty = 1e10 * mu0
    // The penalty grows only once the S-step has stabilized at the current mu
    // (mu * |S_{k+1} - S_k|_F / |D|_F below this gate). Growing uncondition-
    // ally can freeze the iterates at a feasible but suboptimal split.
    double growth_gate = 1e-5;

    void validate() const {
        if (lambda && *lambda <= 0.0) throw std::invalid_argument("rpca: lambda must be positive");
        if (mu0 && *mu0 <= 0.0) throw std::invalid_argument("rpca: mu0 must be positive");
        if (rho <= 1.0) throw std::invalid_argument("rpca: rho must exceed 1");
        if (tol <= 0.0) throw std::invalid_argument("rpca: tol must be positive");
        if (max_iters < 1) throw std::invalid_argument("rpca: max_iters must be at least 1");
        if (mu_cap && *mu_cap <= 0.0) throw std::invalid_argument("rpca: mu_cap must be positive");
        if (mu_cap && mu0 && *mu_cap < *mu0) throw std::invalid_argument("rpca: mu_cap below mu0");
        if (growth_gate <= 0.0) throw std::invalid_argument("rpca: growth_gate must be positive");
    }
};

struct RpcaResult {
    Matrix low_rank;
    Matrix sparse;
    int iterations = 0;
    bool converged = false;
    std::vector<double> residual_trace;
    int rank_of_l = 0;
    double sparsity_of_s = 0.0;  // fraction of nonzero entries before additivity correction
    double lambda_used = 0.0;
};

inline double resolve_lambda(const RpcaConfig& cfg, const Matrix& d) {
    return cfg.lambda ? *cfg.lambda : 1.0 / std::sqrt(static_cast<double>(d.rows()));
}

/// Low-rank + sparse split of d by inexact augmented Lagrange multipliers.
/// Each outer iteration does one singular-value-threshold step for L and one
/// soft-threshold step for S, then the multiplier and penalty updates.
/// On return sparse is reassigned d - low_rank so additivity is exact.
inline RpcaResult rpca_alm(const Matrix& d, const RpcaConfig& cfg = {}) {
    cfg.validate();
    if (!all_finite(d)) throw std::invalid_argument("rpca: input has non-finite entries");

    const double lambda = resolve_lambda(cfg, d);
    const double d_norm = frobenius_norm(d);
    const double denom = std::max(d_norm, 1e-12);

    RpcaResult res;
    res.lambda_used = lambda;

    if (d_norm == 0.0) {
        res.low_rank = Matrix::Zero(d.rows(), d.cols());
        res.sparse = Matrix::Zero(d.rows(), d.cols());
        res.iterations = 1;
        res.converged = true;
        res.residual_trace = {0.0};
        return res;
    }

    const double spec = spectral_norm(d);
    const double scale = std::max(spec, d.cwiseAbs().maxCoeff() / lambda);
    Matrix y = d / scale;
    Matrix s = Matrix::Zero(d.rows(), d.cols());
    Matrix l = Matrix::Zero(d.rows(), d.cols());

    double mu = cfg.mu0 ? *cfg.mu0 : 1.25 / spec;
    const double mu_cap = cfg.mu_cap ? *cfg.mu_cap : 1e10 * mu;

    for (int k = 1; k <= cfg.max_iters; ++k) {
        l = singular_value_threshold(d - s + y / mu, 1.0 / mu);
        Matrix s_next = soft_threshold(d - l + y / mu, lambda / mu);

        const Matrix gap = d - l - s_next;
        y += mu * gap;
        const double s_step = mu * (s_next - s).norm() / denom;
        s = std::move(s_next);
        if (s_step < cfg.growth_gate) mu = std::min(mu * cfg.rho, mu_cap);

        const double rel = frobenius_norm(gap) / denom;
        if (!std::isfinite(rel) || !all_finite(l) || !all_finite(s))
            throw NumericalDivergenceError("rpca: non-finite iterate at iteration " +
                                           std::to_string(k), k);
        res.residual_trace.push_back(rel);
        res.iterations = k;
        if (rel <= cfg.tol) {
            res.converged = true;
            break;
        }
    }

    res.rank_of_l = svd(l).rank();
    res.sparsity_of_s =
        static_cast<double>((s.array() != 0.0).count()) / static_cast<double>(s.size());
    res.low_rank = std::move(l);
    enforce_exact_additivity(d, res.low_rank, res.sparse);
    return res;
}

struct PodConfig {
    std::optional<int> rank;                // dominant-mode count
    std::optional<double> energy_threshold; // smallest k capturing this fraction of sum(sigma^2)

    int resolve_rank(const Vector& sigma) const {
        if (rank) {
            if (*rank < 1 || *rank > sigma.size())
                throw std::invalid_argument("pod: rank out of range for input shape");
            return *rank;
        }
        if (energy_threshold) {
            if (*energy_threshold <= 0.0 || *energy_threshold > 1.0)
                throw std::invalid_argument("pod: energy threshold must lie in (0, 1]");
            const double total = sigma.squaredNorm();
            if (total == 0.0) return 1;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < sigma.size(); ++i) {
                acc += sigma[i] * sigma[i];
                if (acc >= *energy_threshold * total) return static_cast<int>(i) + 1;
            }
            return static_cast<int>(sigma.size());
        }
        return 1;
    }
};

/// Leading-k SVD reconstruction as background, remainder as foreground.
inline std::pair<Matrix, Matrix> pod_decompose(const Matrix& d, const PodConfig& cfg = {}) {
    SvdFactors f = svd(d);
    const int k = cfg.resolve_rank(f.sigma);
    Matrix background =
        f.u.leftCols(k) * f.sigma.head(k).asDiagonal() * f.v.leftCols(k).transpose();
    Matrix foreground;
    enforce_exact_additivity(d, background, foreground);
    return {std::move(background), std::move(foreground)};
}

/// Per-pixel temporal minimum as background (columns of d are frames).
inline std::pair<Matrix, Matrix> min_removal(const Matrix& d) {
    if (!all_finite(d)) throw std::invalid_argument("min_removal: input has non-finite entries");
    Vector mins = d.rowwise().minCoeff();
    Matrix background = mins.replicate(1, d.cols());
    Matrix foreground;
    // The resweep may move individual background entries by one ulp off the
    // row minimum; bit-exact additivity wins over bit-exact constancy.
    enforce_exact_additivity(d, background, foreground);
    return {std::move(background), std::move(foreground)};
}

}  // namespace pivbg
