#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pivbg/matrix.hpp"

namespace pivbg {

inline void check_shapes(const Matrix& truth, const Matrix& estimate, const char* op) {
    if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

inline double mse(const Matrix& truth, const Matrix& estimate) {
    check_shapes(truth, estimate, "mse");
    return (truth - estimate).squaredNorm() / static_cast<double>(truth.size());
}

/// 10 log10(L^2 / MSE); +inf when the images agree exactly.
inline double psnr(const Matrix& truth, const Matrix& estimate, double dynamic_range) {
    check_shapes(truth, estimate, "psnr");
    if (dynamic_range <= 0.0) throw std::invalid_argument("psnr: dynamic range must be positive");
    const double err = mse(truth, estimate);
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(dynamic_range * dynamic_range / err);
}

/// Single-window SSIM over the whole image, population statistics,
/// C1 = (0.01 L)^2 and C2 = (0.03 L)^2.
inline double ssim_global(const Matrix& truth, const Matrix& estimate, double dynamic_range) {
    check_shapes(truth, estimate, "ssim");
    if (dynamic_range <= 0.0) throw std::invalid_argument("ssim: dynamic range must be positive");
    const double n = static_cast<double>(truth.size());
    const double mu_f = truth.mean();
    const double mu_g = estimate.mean();
    const double var_f = (truth.array() - mu_f).square().sum() / n;
    const double var_g = (estimate.array() - mu_g).square().sum() / n;
    const double cov = ((truth.array() - mu_f) * (estimate.array() - mu_g)).sum() / n;
    const double c1 = 0.01 * dynamic_range * 0.01 * dynamic_range;
    const double c2 = 0.03 * dynamic_range * 0.03 * dynamic_range;
    return (2.0 * mu_f * mu_g + c1) * (2.0 * cov + c2) /
           ((mu_f * mu_f + mu_g * mu_g + c1) * (var_f + var_g + c2));
}

struct FrameQuality {
    int frame_index = 0;
    double mse = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct QualityReport {
    std::vector<FrameQuality> per_frame;
    double mean_mse = 0.0;
    double mean_psnr = 0.0;  // mean over finite entries only
    int psnr_inf_count = 0;
    double mean_ssim = 0.0;
    double dynamic_range = 1.0;
};

inline QualityReport evaluate_frames(const std::vector<Matrix>& truth,
                                     const std::vector<Matrix>& estimate,
                                     double dynamic_range) {
    if (truth.size() != estimate.size())
        throw std::invalid_argument("evaluate: frame-count mismatch");
    QualityReport rep;
    rep.dynamic_range = dynamic_range;
    double psnr_sum = 0.0;
    int psnr_finite = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        FrameQuality q;
        q.frame_index = static_cast<int>(i);
        q.mse = mse(truth[i], estimate[i]);
        q.psnr = psnr(truth[i], estimate[i], dynamic_range);
        q.ssim = ssim_global(truth[i], estimate[i], dynamic_range);
        rep.mean_mse += q.mse;
        rep.mean_ssim += q.ssim;
        if (std::isinf(q.psnr)) {
            ++rep.psnr_inf_count;
        } else {
            psnr_sum += q.psnr;
            ++psnr_finite;
        }
        rep.per_frame.push_back(q);
    }
    const double n = static_cast<double>(truth.size());
    if (!truth.empty()) {
        rep.mean_mse /= n;
        rep.mean_ssim /= n;
    }
    rep.mean_psnr = psnr_finite > 0 ? psnr_sum / psnr_finite
                                    : std::numeric_limits<double>::infinity();
    return rep;
}

}  // namespace pivbg
