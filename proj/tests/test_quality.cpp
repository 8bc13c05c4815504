#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "pivbg/quality.hpp"

using namespace pivbg;

namespace {

Matrix random_image(int rows, int cols, double range, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(0.0, range);
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = dist(gen);
    return m;
}

}  // namespace

TEST_CASE("mse examples") {
    Matrix a = random_image(5, 5, 1.0, 1);
    REQUIRE(mse(a, a) == 0.0);
    REQUIRE(mse(Matrix::Zero(3, 7), Matrix::Ones(3, 7)) == Catch::Approx(1.0));
    Matrix truth(1, 2), est(1, 2);
    truth << 0.0, 0.0;
    est << 3.0, 4.0;
    REQUIRE(mse(truth, est) == Catch::Approx(12.5));
    REQUIRE_THROWS_AS(mse(Matrix::Zero(2, 2), Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("psnr examples") {
    Matrix a = random_image(4, 4, 255.0, 2);
    REQUIRE(std::isinf(psnr(a, a, 255.0)));

    // MSE = L^2 gives exactly 0 dB.
    Matrix zero = Matrix::Zero(2, 2);
    REQUIRE(psnr(zero, Matrix::Constant(2, 2, 255.0), 255.0) == Catch::Approx(0.0).margin(1e-12));

    // L = 255, MSE = 1.
    Matrix one = Matrix::Ones(2, 2);
    REQUIRE(psnr(zero, one, 255.0) == Catch::Approx(20.0 * std::log10(255.0)).epsilon(1e-9));
    REQUIRE_THROWS_AS(psnr(zero, zero, 0.0), std::invalid_argument);
}

TEST_CASE("global ssim examples") {
    Matrix a = random_image(6, 6, 1.0, 3);
    REQUIRE(ssim_global(a, a, 1.0) == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(ssim_global(Matrix::Constant(3, 3, 0.4), Matrix::Constant(3, 3, 0.4), 1.0) ==
            Catch::Approx(1.0));
    // Constant 0 vs constant L at L = 1: only the C1 luminance term survives.
    REQUIRE(ssim_global(Matrix::Zero(4, 4), Matrix::Ones(4, 4), 1.0) ==
            Catch::Approx(1e-4 / 1.0001).epsilon(1e-12));
}

TEST_CASE("metric properties on random pairs") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Matrix a = random_image(8, 8, 1.0, seed * 2 + 1);
        Matrix b = random_image(8, 8, 1.0, seed * 2 + 2);
        REQUIRE(mse(a, b) == Catch::Approx(mse(b, a)));
        REQUIRE(ssim_global(a, b, 1.0) == Catch::Approx(ssim_global(b, a, 1.0)));
        const double s = ssim_global(a, b, 1.0);
        REQUIRE(s >= -1.0);
        REQUIRE(s <= 1.0);
    }
}

TEST_CASE("psnr decreases as mse increases") {
    Matrix truth = Matrix::Zero(4, 4);
    double prev = std::numeric_limits<double>::infinity();
    for (double err : {0.1, 0.5, 1.0, 10.0}) {
        const double p = psnr(truth, Matrix::Constant(4, 4, err), 1.0);
        REQUIRE(p < prev);
        prev = p;
    }
}

TEST_CASE("report aggregates are per-frame means with psnr infinities excluded") {
    Matrix truth = random_image(5, 5, 1.0, 9);
    Matrix off = truth + Matrix::Constant(5, 5, 0.1);
    QualityReport rep = evaluate_frames({truth, truth}, {truth, off}, 1.0);

    REQUIRE(rep.per_frame.size() == 2);
    REQUIRE(rep.per_frame[0].mse == 0.0);
    REQUIRE(std::isinf(rep.per_frame[0].psnr));
    REQUIRE(rep.psnr_inf_count == 1);
    REQUIRE(rep.mean_mse == Catch::Approx((rep.per_frame[0].mse + rep.per_frame[1].mse) / 2));
    REQUIRE(rep.mean_psnr == Catch::Approx(rep.per_frame[1].psnr));
    REQUIRE(rep.mean_ssim ==
            Catch::Approx((rep.per_frame[0].ssim + rep.per_frame[1].ssim) / 2));
}
