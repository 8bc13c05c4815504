// Acceptance suite: prints one [PASS]/[FAIL] line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pivbg/decompose.hpp"
#include "pivbg/quality.hpp"
#include "pivbg/seqio.hpp"
#include "pivbg/synth.hpp"

using namespace pivbg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << name;
    if (!detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << std::endl;
    if (!ok) ++g_failures;
}

Matrix random_matrix(int rows, int cols, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = dist(gen);
    return m;
}

PlantedSpec recovery_spec(std::uint64_t seed) {
    PlantedSpec spec;
    spec.m = 400;  // 20x20 frames
    spec.n = 50;
    spec.rank = 2;
    spec.sparse_fraction = 0.05;
    spec.sparse_magnitude = 1.0;
    spec.seed = seed;
    return spec;
}

// Criterion 1: planted exact recovery across 10 seeds.
void criterion_1() {
    bool ok = true;
    std::ostringstream detail;
    double worst_l = 0.0, worst_s = 0.0, worst_ms = 0.0;
    for (std::uint64_t seed = 1; seed <= 10 && ok; ++seed) {
        Planted p = make_planted(recovery_spec(seed));
        const auto t0 = std::chrono::steady_clock::now();
        RpcaResult res = rpca_alm(p.d);
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0).count();
        const double err_l = (res.low_rank - p.l0).norm() / p.l0.norm();
        const double err_s = (res.sparse - p.s0).norm() / p.s0.norm();
        worst_l = std::max(worst_l, err_l);
        worst_s = std::max(worst_s, err_s);
        worst_ms = std::max(worst_ms, ms);
        if (err_l > 1e-4 || err_s > 1e-3 || ms > 10000.0) ok = false;
    }
    detail << "max rel err L " << worst_l << ", S " << worst_s << ", max " << worst_ms << " ms";
    report(1, "planted exact recovery (400x50, rank 2, 5% sparse, 10 seeds)", ok, detail.str());
}

PivSceneSpec ordering_scene(std::uint64_t seed) {
    PivSceneSpec spec;
    spec.width = 64;
    spec.height = 64;
    spec.n_frames = 60;
    spec.particle_count = 80;
    spec.particle_sigma = 0.6;
    spec.particle_peak = 0.35;
    spec.flow = PivSceneSpec::Flow::Uniform;
    spec.flow_u = 1.2;
    spec.flow_v = 0.7;
    spec.gradient_amplitude = 0.4;
    spec.reflections = {{18.0, 20.0, 6.0, 0.25}, {46.0, 40.0, 8.0, 0.2}};
    spec.modulation_amplitude = 0.1;
    spec.modulation_period = 30.0;
    spec.noise_sigma = 0.005;
    spec.seed = seed;
    return spec;
}

double sequence_mse(const Matrix& estimate, const FrameSequence& truth, int width, int height) {
    DataMatrix dm{estimate, width, height};
    FrameSequence est = scatter(dm);
    return evaluate_frames(truth.frames, est.frames, 1.0).mean_mse;
}

// Criterion 2: method ordering on the synthetic PIV scene, 5 seeds.
void criterion_2() {
    bool ok = true;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        PivScene scene = make_piv_sequence(ordering_scene(seed));
        DataMatrix d = aggregate(scene.frames);

        RpcaResult rpca = rpca_alm(d.values);
        auto [pod_bg, pod_fg] = pod_decompose(d.values, PodConfig{.rank = 1});
        auto [min_bg, min_fg] = min_removal(d.values);

        const int w = d.width, h = d.height;
        const double bg_rpca = sequence_mse(rpca.low_rank, scene.truth_background, w, h);
        const double bg_pod = sequence_mse(pod_bg, scene.truth_background, w, h);
        const double bg_min = sequence_mse(min_bg, scene.truth_background, w, h);
        const double fg_rpca = sequence_mse(rpca.sparse, scene.truth_particles, w, h);
        const double fg_pod = sequence_mse(pod_fg, scene.truth_particles, w, h);
        const double fg_min = sequence_mse(min_fg, scene.truth_particles, w, h);

        const bool bg_order = bg_rpca < bg_pod && bg_pod < bg_min;
        const bool fg_order = fg_rpca < fg_pod && fg_pod < fg_min;
        if (!(bg_order && fg_order)) {
            ok = false;
            detail << "seed " << seed << ": bg " << bg_rpca << "/" << bg_pod << "/" << bg_min
                   << ", fg " << fg_rpca << "/" << fg_pod << "/" << fg_min;
            break;
        }
        if (seed == 1)
            detail << "seed 1 bg mse rpca/pod/min " << bg_rpca << "/" << bg_pod << "/" << bg_min;
    }
    report(2, "MSE ordering rpca < pod < minsub for background and foreground (5 seeds)", ok,
           detail.str());
}

template <typename Penalty>
bool prox_optimal(const Matrix& x, const Matrix& y, double weight, Penalty penalty,
                  std::uint64_t seed) {
    const double obj = weight * penalty(y) + 0.5 * (y - x).squaredNorm();
    for (int trial = 0; trial < 100; ++trial) {
        Matrix p = random_matrix(static_cast<int>(x.rows()), static_cast<int>(x.cols()),
                                 seed * 131 + trial);
        p *= 1e-3 / p.norm();
        const Matrix cand = y + p;
        if (weight * penalty(cand) + 0.5 * (cand - x).squaredNorm() < obj - 1e-12) return false;
    }
    return true;
}

// Criterion 3: proximal-operator optimality, 20 matrices each, 100 perturbations.
void criterion_3() {
    bool ok = true;
    for (std::uint64_t seed = 1; seed <= 20 && ok; ++seed) {
        Matrix x = 2.0 * random_matrix(4, 4, seed);
        if (!prox_optimal(x, soft_threshold(x, 0.3), 0.3,
                          [](const Matrix& m) { return l1_norm(m); }, seed))
            ok = false;
        Matrix z = 2.0 * random_matrix(5, 5, seed + 300);
        if (!prox_optimal(z, singular_value_threshold(z, 0.4), 0.4,
                          [](const Matrix& m) { return nuclear_norm(m); }, seed + 300))
            ok = false;
    }
    report(3, "shrinkage and SVT pass the 100-perturbation proximal oracles", ok);
}

// Criterion 4: convergence contract on criterion-1 instances.
void criterion_4() {
    bool ok = true;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 10 && ok; ++seed) {
        Planted p = make_planted(recovery_spec(seed));
        RpcaResult res = rpca_alm(p.d);
        const auto& trace = res.residual_trace;
        if (!res.converged || trace.back() > 1e-7 || res.iterations > 500) ok = false;
        if (trace.size() >= 3) {
            const double tail_min = std::min({trace[trace.size() - 1], trace[trace.size() - 2],
                                              trace[trace.size() - 3]});
            if (trace.back() != tail_min) ok = false;
        }
        if (seed == 1) detail << "iterations " << res.iterations;
    }
    report(4, "residual <= 1e-7 within 500 iterations, monotone tail", ok, detail.str());
}

// Criterion 5: metric ground truths and properties.
void criterion_5() {
    bool ok = true;
    Matrix zero = Matrix::Zero(3, 3);
    if (std::abs(psnr(zero, Matrix::Ones(3, 3), 255.0) - 48.1308) > 1e-3) ok = false;

    Matrix img = random_matrix(7, 7, 99, 0.0, 1.0);
    if (ssim_global(img, img, 1.0) != 1.0) ok = false;
    if (std::abs(ssim_global(Matrix::Zero(4, 4), Matrix::Ones(4, 4), 1.0) - 1e-4 / 1.0001) >
        1e-9)
        ok = false;

    for (std::uint64_t seed = 0; seed < 100 && ok; ++seed) {
        Matrix a = random_matrix(6, 6, 1000 + seed * 2, 0.0, 1.0);
        Matrix b = random_matrix(6, 6, 1001 + seed * 2, 0.0, 1.0);
        if (std::abs(mse(a, b) - mse(b, a)) > 1e-15) ok = false;
        const double s = ssim_global(a, b, 1.0);
        if (std::abs(s - ssim_global(b, a, 1.0)) > 1e-15) ok = false;
        if (s < -1.0 || s > 1.0) ok = false;
        // doubling the error must strictly lower PSNR
        if (psnr(a, b, 1.0) <= psnr(a, Matrix(b + (b - a)), 1.0)) ok = false;
    }
    report(5, "PSNR/SSIM ground truths and symmetry/range properties", ok);
}

// Criterion 6: additivity and round trips.
void criterion_6() {
    bool ok = true;
    std::ostringstream detail;
    PivScene scene = make_piv_sequence(ordering_scene(3));
    DataMatrix d = aggregate(scene.frames);

    RpcaResult rpca = rpca_alm(d.values);
    if ((rpca.low_rank + rpca.sparse - d.values).norm() != 0.0) {
        ok = false;
        detail << "rpca additivity; ";
    }
    auto [pod_bg, pod_fg] = pod_decompose(d.values, PodConfig{.rank = 1});
    if ((pod_bg + pod_fg - d.values).norm() != 0.0) {
        ok = false;
        detail << "pod additivity; ";
    }
    auto [min_bg, min_fg] = min_removal(d.values);
    if ((min_bg + min_fg - d.values).norm() != 0.0) {
        ok = false;
        detail << "minsub additivity; ";
    }

    // aggregate/scatter exact round trip
    FrameSequence back = scatter(d, scene.frames.source_range);
    for (std::size_t t = 0; t < back.frames.size(); ++t)
        if ((back.frames[t] - scene.frames.frames[t]).norm() != 0.0) {
            ok = false;
            detail << "aggregate/scatter; ";
            break;
        }

    // store/load within half a quantization step
    const fs::path dir = fs::temp_directory_path() / "pivbg_acceptance_roundtrip";
    fs::remove_all(dir);
    for (double range : {255.0, 65535.0}) {
        FrameSequence seq = scene.frames;
        seq.source_range = range;
        store_sequence(seq, dir, true);
        FrameSequence loaded = load_sequence(dir);
        for (std::size_t t = 0; t < seq.frames.size(); ++t)
            if ((loaded.frames[t] - seq.frames[t]).cwiseAbs().maxCoeff() > 0.5 / range + 1e-12) {
                ok = false;
                detail << "store/load at depth " << range << "; ";
                break;
            }
        fs::remove_all(dir);
    }
    report(6, "bit-exact additivity for all methods; aggregate/scatter and store/load bounds",
           ok, detail.str());
}

std::string cli_path() { return PIVBG_CLI_PATH; }

int run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>/dev/null";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

// Criterion 7: the lambda rule lands exactly on 0.01 for 100x100-pixel frames.
void criterion_7() {
    bool ok = true;
    const fs::path dir = fs::temp_directory_path() / "pivbg_acceptance_lambda";
    fs::remove_all(dir);
    fs::create_directories(dir);

    ok = run_cli("generate --preset piv --width 100 --height 100 --frames 5 --particles 20"
                 " --gradient 0.3 --seed 2 --out-frames " + (dir / "f").string() +
                 " --out-bg " + (dir / "b").string() + " --out-fg " + (dir / "p").string()) == 0;
    if (ok)
        ok = run_cli("decompose --method rpca --input " + (dir / "f").string() + " --out-bg " +
                     (dir / "bg").string() + " --out-fg " + (dir / "fg").string() +
                     " --report " + (dir / "run.json").string()) == 0;
    double lambda = 0.0;
    if (ok) {
        json rep;
        std::ifstream(dir / "run.json") >> rep;
        lambda = rep["lambda"].get<double>();
        ok = lambda == 0.01;
    }
    fs::remove_all(dir);
    report(7, "run report records lambda = 0.01 exactly for 100x100-pixel frames", ok,
           "lambda = " + std::to_string(lambda));
}

// Criterion 8: equivariances on a criterion-1 instance.
void criterion_8() {
    bool ok = true;
    Planted p = make_planted(recovery_spec(1));

    RpcaConfig cfg;
    cfg.tol = 1e-9;
    RpcaResult base = rpca_alm(p.d, cfg);

    std::vector<int> perm(50);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
    Matrix dp(400, 50);
    for (int j = 0; j < 50; ++j) dp.col(j) = p.d.col(perm[j]);
    RpcaResult permuted = rpca_alm(dp, cfg);
    Matrix expect_l(400, 50);
    for (int j = 0; j < 50; ++j) expect_l.col(j) = base.low_rank.col(perm[j]);
    if ((permuted.low_rank - expect_l).norm() / expect_l.norm() > 1e-6) ok = false;

    RpcaResult scaled = rpca_alm(Matrix(2.0 * p.d));
    RpcaResult plain = rpca_alm(p.d);
    if ((scaled.low_rank - 2.0 * plain.low_rank).norm() / (2.0 * plain.low_rank.norm()) > 1e-3)
        ok = false;
    if ((scaled.sparse - 2.0 * plain.sparse).norm() / (2.0 * plain.sparse.norm()) > 1e-3)
        ok = false;
    report(8, "frame-permutation and positive-scaling equivariance", ok);
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// Criterion 9: generate -> decompose -> evaluate re-run from the JSON report
// yields byte-identical CSV.
void criterion_9() {
    bool ok = true;
    const fs::path dir = fs::temp_directory_path() / "pivbg_acceptance_repro";
    fs::remove_all(dir);
    fs::create_directories(dir);

    ok = run_cli("generate --preset piv --width 32 --height 32 --frames 20 --particles 30"
                 " --gradient 0.3 --mod-amp 0.1 --noise-sigma 0.005 --seed 8 --out-frames " +
                 (dir / "f").string() + " --out-bg " + (dir / "truth_bg").string() +
                 " --out-fg " + (dir / "truth_fg").string()) == 0;
    if (ok)
        ok = run_cli("decompose --method rpca --input " + (dir / "f").string() + " --out-bg " +
                     (dir / "bg1").string() + " --out-fg " + (dir / "fg1").string() +
                     " --report " + (dir / "run.json").string()) == 0;
    if (ok)
        ok = run_cli("evaluate " + (dir / "bg1").string() + " " + (dir / "truth_bg").string() +
                     " --csv " + (dir / "q1.csv").string()) == 0;

    if (ok) {
        json rep;
        std::ifstream(dir / "run.json") >> rep;
        const auto& cfg = rep["config"];
        std::ostringstream cmd;
        cmd << "decompose --method " << cfg["method"].get<std::string>() << " --lambda "
            << cfg["lambda"].get<std::string>() << " --tol " << cfg["tol"].get<double>()
            << " --max-iters " << cfg["max_iters"].get<int>() << " --input "
            << cfg["input"].get<std::string>() << " --out-bg " << (dir / "bg2").string()
            << " --out-fg " << (dir / "fg2").string();
        ok = run_cli(cmd.str()) == 0;
    }
    if (ok)
        ok = run_cli("evaluate " + (dir / "bg2").string() + " " + (dir / "truth_bg").string() +
                     " --csv " + (dir / "q2.csv").string()) == 0;
    if (ok) ok = file_bytes(dir / "q1.csv") == file_bytes(dir / "q2.csv") &&
                 !file_bytes(dir / "q1.csv").empty();
    fs::remove_all(dir);
    report(9, "pipeline re-run from the JSON report yields byte-identical CSV", ok);
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed" << std::endl;
        return 1;
    }
    std::cout << "all acceptance criteria passed" << std::endl;
    return 0;
}
