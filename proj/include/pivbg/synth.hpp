#pragma once

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "pivbg/matrix.hpp"
#include "pivbg/seqio.hpp"

namespace pivbg {

/// Pseudo-random source for all generators. The algorithm identity is part
/// of the reproducibility contract and is echoed into run reports.
inline constexpr const char* kRngAlgorithm = "mt19937_64";

namespace detail {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return (gen_() >> 11) * 0x1.0p-53; }

    double normal() {
        // Box-Muller, pairs cached.
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t next_index(std::uint64_t bound) { return gen_() % bound; }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline std::uint64_t frame_seed(std::uint64_t seed, int frame) {
    return seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(frame + 1));
}

}  // namespace detail

struct PlantedSpec {
    int m = 0;
    int n = 0;
    int rank = 1;
    double sparse_fraction = 0.0;
    double sparse_magnitude = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (m < 1 || n < 1) throw std::invalid_argument("planted: m, n must be positive");
        if (rank < 1 || rank > std::min(m, n))
            throw std::invalid_argument("planted: rank must lie in [1, min(m, n)]");
        if (sparse_fraction < 0.0 || sparse_fraction >= 1.0)
            throw std::invalid_argument("planted: sparse_fraction must lie in [0, 1)");
        if (sparse_magnitude <= 0.0)
            throw std::invalid_argument("planted: sparse_magnitude must be positive");
    }
};

struct Planted {
    Matrix d;
    Matrix l0;
    Matrix s0;
};

/// Low-rank l0 = A B^T with scaled standard-normal factors plus a sparse s0
/// with exactly round(fraction * m * n) entries of +-magnitude.
inline Planted make_planted(const PlantedSpec& spec) {
    spec.validate();
    detail::Rng rng(spec.seed);

    Matrix a(spec.m, spec.rank), b(spec.n, spec.rank);
    const double sa = 1.0 / std::sqrt(static_cast<double>(spec.m));
    const double sb = 1.0 / std::sqrt(static_cast<double>(spec.n));
    for (int r = 0; r < spec.m; ++r)
        for (int c = 0; c < spec.rank; ++c) a(r, c) = sa * rng.normal();
    for (int r = 0; r < spec.n; ++r)
        for (int c = 0; c < spec.rank; ++c) b(r, c) = sb * rng.normal();

    Planted out;
    out.l0 = a * b.transpose();
    out.s0 = Matrix::Zero(spec.m, spec.n);

    const std::uint64_t total = static_cast<std::uint64_t>(spec.m) * spec.n;
    const auto k = static_cast<std::uint64_t>(
        std::llround(spec.sparse_fraction * static_cast<double>(total)));
    std::vector<std::uint64_t> cells(total);
    std::iota(cells.begin(), cells.end(), 0);
    for (std::uint64_t i = 0; i < k; ++i) {
        // Partial Fisher-Yates: position i drawn from [i, total).
        const std::uint64_t j = i + rng.next_index(total - i);
        std::swap(cells[i], cells[j]);
        const auto cell = cells[i];
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        out.s0(static_cast<Eigen::Index>(cell / spec.n),
               static_cast<Eigen::Index>(cell % spec.n)) = sign * spec.sparse_magnitude;
    }
    out.d = out.l0 + out.s0;
    return out;
}

struct ReflectionBlob {
    double center_x = 0.0;
    double center_y = 0.0;
    double sigma = 1.0;
    double amplitude = 0.0;
};

struct PivSceneSpec {
    int width = 64;
    int height = 64;
    int n_frames = 2;
    int particle_count = 0;
    double particle_sigma = 1.5;
    double particle_peak = 0.5;

    enum class Flow { Uniform, Vortex };
    Flow flow = Flow::Uniform;
    double flow_u = 0.0;          // uniform: pixels/frame
    double flow_v = 0.0;
    double vortex_center_x = 0.0; // vortex: solid rotation
    double vortex_center_y = 0.0;
    double vortex_rate = 0.0;     // radians/frame

    double gradient_amplitude = 0.0;
    std::vector<ReflectionBlob> reflections;
    double modulation_amplitude = 0.0;
    double modulation_period = 30.0;  // frames
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (width < 1 || height < 1) throw std::invalid_argument("piv: bad frame size");
        if (n_frames < 2) throw std::invalid_argument("piv: need at least 2 frames");
        if (particle_count < 0) throw std::invalid_argument("piv: negative particle count");
        if (particle_sigma <= 0.0) throw std::invalid_argument("piv: particle_sigma must be positive");
        if (particle_peak <= 0.0 || particle_peak > 1.0)
            throw std::invalid_argument("piv: particle_peak must lie in (0, 1]");
        if (gradient_amplitude < 0.0 || gradient_amplitude >= 1.0)
            throw std::invalid_argument("piv: gradient amplitude must lie in [0, 1)");
        if (modulation_amplitude < 0.0 || modulation_amplitude >= 1.0)
            throw std::invalid_argument("piv: modulation amplitude must lie in [0, 1)");
        if (modulation_period <= 0.0) throw std::invalid_argument("piv: bad modulation period");
        if (noise_sigma < 0.0) throw std::invalid_argument("piv: negative noise sigma");
        for (const auto& blob : reflections)
            if (blob.sigma <= 0.0 || blob.amplitude < 0.0)
                throw std::invalid_argument("piv: bad reflection blob");
    }
};

struct PivScene {
    FrameSequence frames;
    FrameSequence truth_background;
    FrameSequence truth_particles;
};

namespace detail {

// Gaussian blob at (cx, cy), truncated at 4 sigma, toroidal wrap.
inline void splat_blob(Matrix& frame, double cx, double cy, double sigma, double peak) {
    const int w = static_cast<int>(frame.cols());
    const int h = static_cast<int>(frame.rows());
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const int c0 = static_cast<int>(std::floor(cx));
    const int r0 = static_cast<int>(std::floor(cy));
    for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
            const double dy = (r0 + dr) - cy;
            const double dx = (c0 + dc) - cx;
            const double d2 = dx * dx + dy * dy;
            if (d2 > 16.0 * sigma * sigma) continue;
            const int r = ((r0 + dr) % h + h) % h;
            const int c = ((c0 + dc) % w + w) % w;
            frame(r, c) += peak * std::exp(-d2 * inv2s2);
        }
    }
}

}  // namespace detail

/// Renders advected Gaussian particles over a modulated static background
/// with additive white noise; frames are clamped to [0, 1].
inline PivScene make_piv_sequence(const PivSceneSpec& spec) {
    spec.validate();
    const int w = spec.width, h = spec.height;

    Matrix static_bg = Matrix::Zero(h, w);
    if (spec.gradient_amplitude > 0.0) {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                static_bg(r, c) = spec.gradient_amplitude * 0.5 *
                                  (static_cast<double>(r) / std::max(h - 1, 1) +
                                   static_cast<double>(c) / std::max(w - 1, 1));
    }
    for (const auto& blob : spec.reflections)
        detail::splat_blob(static_bg, blob.center_x, blob.center_y, blob.sigma, blob.amplitude);

    detail::Rng rng(spec.seed);
    std::vector<std::pair<double, double>> origins(spec.particle_count);
    for (auto& [x, y] : origins) {
        x = rng.uniform() * w;
        y = rng.uniform() * h;
    }

    PivScene scene;
    for (FrameSequence* s : {&scene.frames, &scene.truth_background, &scene.truth_particles}) {
        s->width = w;
        s->height = h;
        s->source_range = 65535.0;
    }

    for (int t = 0; t < spec.n_frames; ++t) {
        const double modulation =
            1.0 + spec.modulation_amplitude *
                      std::sin(2.0 * std::numbers::pi * t / spec.modulation_period);
        Matrix bg = modulation * static_bg;

        Matrix particles = Matrix::Zero(h, w);
        for (const auto& [x0, y0] : origins) {
            double x = x0, y = y0;
            if (spec.flow == PivSceneSpec::Flow::Uniform) {
                x += spec.flow_u * t;
                y += spec.flow_v * t;
            } else {
                const double angle = spec.vortex_rate * t;
                const double rx = x0 - spec.vortex_center_x;
                const double ry = y0 - spec.vortex_center_y;
                x = spec.vortex_center_x + rx * std::cos(angle) - ry * std::sin(angle);
                y = spec.vortex_center_y + rx * std::sin(angle) + ry * std::cos(angle);
            }
            x = std::fmod(std::fmod(x, w) + w, w);
            y = std::fmod(std::fmod(y, h) + h, h);
            detail::splat_blob(particles, x, y, spec.particle_sigma, spec.particle_peak);
        }

        Matrix frame = bg + particles;
        if (spec.noise_sigma > 0.0) {
            detail::Rng noise(detail::frame_seed(spec.seed, t));
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c)
                    frame(r, c) += spec.noise_sigma * noise.normal();
        }
        frame = frame.cwiseMax(0.0).cwiseMin(1.0);

        scene.frames.frames.push_back(std::move(frame));
        scene.truth_background.frames.push_back(std::move(bg));
        scene.truth_particles.frames.push_back(std::move(particles));
    }
    return scene;
}

}  // namespace pivbg
