// pivbg: background/foreground decomposition of grayscale image sequences.
//
// Subcommands:
//   generate   synthesize planted low-rank+sparse fixtures or PIV scenes
//   decompose  split a sequence into background and foreground (rpca|pod|minsub)
//   evaluate   MSE/PSNR/SSIM of an estimated sequence against ground truth

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pivbg/decompose.hpp"
#include "pivbg/quality.hpp"
#include "pivbg/seqio.hpp"
#include "pivbg/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitBadArgs = 2;
constexpr int kExitIo = 3;
constexpr int kExitDivergence = 4;

std::uint64_t fnv1a_directory(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const auto& file : files) {
        std::ifstream in(file, std::ios::binary);
        char buf[4096];
        while (in.read(buf, sizeof buf) || in.gcount() > 0) {
            for (std::streamsize i = 0; i < in.gcount(); ++i) {
                hash ^= static_cast<unsigned char>(buf[i]);
                hash *= 0x100000001b3ULL;
            }
        }
    }
    return hash;
}

void mark_failed(const std::vector<fs::path>& dirs) {
    for (const auto& dir : dirs) {
        if (fs::is_directory(dir)) std::ofstream(dir / "FAILED") << "run failed\n";
    }
}

struct DecomposeArgs {
    std::string input, out_bg, out_fg, report;
    std::string method = "rpca";
    std::string lambda = "auto";
    double tol = 1e-7;
    int max_iters = 500;
    int rank = 1;
    std::optional<double> energy;
};

int run_decompose(const DecomposeArgs& args) {
    std::optional<double> lambda_value;
    if (args.lambda != "auto") {
        try {
            lambda_value = std::stod(args.lambda);
        } catch (const std::exception&) {
            std::cerr << "pivbg: --lambda must be 'auto' or a number\n";
            return kExitBadArgs;
        }
        if (*lambda_value <= 0.0) {
            std::cerr << "pivbg: --lambda must be positive\n";
            return kExitBadArgs;
        }
    }
    if (args.tol <= 0.0 || args.max_iters < 1 || args.rank < 1) {
        std::cerr << "pivbg: invalid solver parameters\n";
        return kExitBadArgs;
    }
    if (args.energy && (*args.energy <= 0.0 || *args.energy > 1.0)) {
        std::cerr << "pivbg: --energy must lie in (0, 1]\n";
        return kExitBadArgs;
    }

    pivbg::FrameSequence seq;
    std::uint64_t checksum = 0;
    try {
        seq = pivbg::load_sequence(args.input);
        checksum = fnv1a_directory(args.input);
    } catch (const std::exception& e) {
        std::cerr << "pivbg: " << e.what() << "\n";
        return kExitIo;
    }

    const pivbg::DataMatrix d = pivbg::aggregate(seq);
    const auto t0 = std::chrono::steady_clock::now();

    pivbg::Matrix background, foreground;
    json report;
    report["method"] = args.method;
    report["lambda"] = nullptr;
    report["iterations"] = 1;
    report["converged"] = true;
    report["residuals"] = json::array();
    report["warnings"] = seq.warnings;
    report["rng"] = pivbg::kRngAlgorithm;
    report["input_checksum"] = checksum;
    report["config"] = {{"input", args.input},       {"out_bg", args.out_bg},
                        {"out_fg", args.out_fg},     {"method", args.method},
                        {"lambda", args.lambda},     {"tol", args.tol},
                        {"max_iters", args.max_iters}, {"rank", args.rank}};
    if (args.energy) report["config"]["energy"] = *args.energy;

    std::vector<fs::path> out_dirs{args.out_bg, args.out_fg};
    try {
        if (args.method == "rpca") {
            pivbg::RpcaConfig cfg;
            cfg.lambda = lambda_value;
            cfg.tol = args.tol;
            cfg.max_iters = args.max_iters;
            pivbg::RpcaResult res = pivbg::rpca_alm(d.values, cfg);
            report["lambda"] = res.lambda_used;
            report["iterations"] = res.iterations;
            report["converged"] = res.converged;
            report["residuals"] = res.residual_trace;
            report["rank_of_l"] = res.rank_of_l;
            report["sparsity_of_s"] = res.sparsity_of_s;
            if (!res.converged) {
                std::cerr << "pivbg: warning: solver did not converge in " << res.iterations
                          << " iterations (residual " << res.residual_trace.back() << ")\n";
                report["warnings"].push_back("solver did not converge");
            }
            background = std::move(res.low_rank);
            foreground = std::move(res.sparse);
        } else if (args.method == "pod") {
            pivbg::PodConfig cfg;
            if (args.energy)
                cfg.energy_threshold = *args.energy;
            else
                cfg.rank = args.rank;
            std::tie(background, foreground) = pivbg::pod_decompose(d.values, cfg);
        } else if (args.method == "minsub") {
            std::tie(background, foreground) = pivbg::min_removal(d.values);
        } else {
            std::cerr << "pivbg: unknown method '" << args.method << "'\n";
            return kExitBadArgs;
        }

        pivbg::DataMatrix bg{std::move(background), d.width, d.height};
        pivbg::DataMatrix fg{std::move(foreground), d.width, d.height};
        pivbg::store_sequence(pivbg::scatter(bg, seq.source_range), args.out_bg, true);
        pivbg::store_sequence(pivbg::scatter(fg, seq.source_range), args.out_fg, true);
    } catch (const pivbg::NumericalDivergenceError& e) {
        std::cerr << "pivbg: " << e.what() << "\n";
        mark_failed(out_dirs);
        return kExitDivergence;
    } catch (const pivbg::IoError& e) {
        std::cerr << "pivbg: " << e.what() << "\n";
        mark_failed(out_dirs);
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "pivbg: " << e.what() << "\n";
        mark_failed(out_dirs);
        return kExitBadArgs;
    }

    const auto t1 = std::chrono::steady_clock::now();
    report["wall_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();

    if (!args.report.empty()) {
        std::ofstream out(args.report);
        out << report.dump(2) << "\n";
        if (!out) {
            std::cerr << "pivbg: cannot write report " << args.report << "\n";
            return kExitIo;
        }
    }
    return 0;
}

struct EvaluateArgs {
    std::string estimate_dir, truth_dir, csv;
    double range = 1.0;
};

int run_evaluate(const EvaluateArgs& args) {
    if (args.range <= 0.0) {
        std::cerr << "pivbg: --range must be positive\n";
        return kExitBadArgs;
    }
    pivbg::FrameSequence estimate, truth;
    try {
        estimate = pivbg::load_sequence(args.estimate_dir);
        truth = pivbg::load_sequence(args.truth_dir);
    } catch (const std::exception& e) {
        std::cerr << "pivbg: " << e.what() << "\n";
        return kExitIo;
    }
    if (estimate.frames.size() != truth.frames.size() || estimate.width != truth.width ||
        estimate.height != truth.height) {
        std::cerr << "pivbg: estimate and truth sequences do not match in shape\n";
        return kExitBadArgs;
    }
    pivbg::QualityReport rep =
        pivbg::evaluate_frames(truth.frames, estimate.frames, args.range);
    if (!args.csv.empty()) {
        try {
            pivbg::write_quality_csv(rep, args.csv);
        } catch (const pivbg::IoError& e) {
            std::cerr << "pivbg: " << e.what() << "\n";
            return kExitIo;
        }
    }
    std::cout << "aggregate mse=" << pivbg::detail::format_sig6(rep.mean_mse)
              << " psnr=" << pivbg::detail::format_sig6(rep.mean_psnr)
              << " ssim=" << pivbg::detail::format_sig6(rep.mean_ssim) << "\n";
    return 0;
}

struct GenerateArgs {
    std::string preset;
    std::string out_frames, out_bg, out_fg, report;
    std::uint64_t seed = 0;
    int width = 64, height = 64, n_frames = 30;
    // planted
    int rank = 1;
    double sparse_fraction = 0.0;
    double sparse_magnitude = 1.0;
    // piv
    int particles = 0;
    double particle_sigma = 1.5;
    double particle_peak = 0.5;
    std::string flow = "uniform";
    double flow_u = 1.0, flow_v = 0.0;
    double vortex_cx = 32.0, vortex_cy = 32.0, vortex_rate = 0.05;
    double gradient = 0.0;
    std::vector<std::string> reflections;
    double mod_amp = 0.0, mod_period = 30.0;
    double noise_sigma = 0.0;
};

int run_generate(const GenerateArgs& args) {
    json echo;
    echo["preset"] = args.preset;
    echo["seed"] = args.seed;
    echo["rng"] = pivbg::kRngAlgorithm;
    try {
        if (args.preset == "planted") {
            pivbg::PlantedSpec spec;
            spec.m = args.width * args.height;
            spec.n = args.n_frames;
            spec.rank = args.rank;
            spec.sparse_fraction = args.sparse_fraction;
            spec.sparse_magnitude = args.sparse_magnitude;
            spec.seed = args.seed;
            pivbg::Planted planted = pivbg::make_planted(spec);

            // Affine encode into [0, 1]: stored = 0.5 + value / (2 * amplitude).
            const double amplitude =
                std::max({planted.d.cwiseAbs().maxCoeff(), planted.s0.cwiseAbs().maxCoeff(),
                          planted.l0.cwiseAbs().maxCoeff(), 1e-12});
            auto emit = [&](const pivbg::Matrix& m, const std::string& dir) {
                pivbg::Matrix coded = (m.array() / (2.0 * amplitude) + 0.5).matrix();
                pivbg::DataMatrix dm{std::move(coded), args.width, args.height};
                pivbg::store_sequence(pivbg::scatter(dm, 65535.0), dir, true);
            };
            emit(planted.d, args.out_frames);
            emit(planted.l0, args.out_bg);
            emit(planted.s0, args.out_fg);
            echo["spec"] = {{"width", args.width},
                            {"height", args.height},
                            {"n_frames", args.n_frames},
                            {"rank", args.rank},
                            {"sparse_fraction", args.sparse_fraction},
                            {"sparse_magnitude", args.sparse_magnitude}};
            echo["encoding"] = {{"offset", 0.5}, {"amplitude", amplitude}, {"depth", 65535}};
        } else if (args.preset == "piv") {
            pivbg::PivSceneSpec spec;
            spec.width = args.width;
            spec.height = args.height;
            spec.n_frames = args.n_frames;
            spec.particle_count = args.particles;
            spec.particle_sigma = args.particle_sigma;
            spec.particle_peak = args.particle_peak;
            if (args.flow == "uniform") {
                spec.flow = pivbg::PivSceneSpec::Flow::Uniform;
            } else if (args.flow == "vortex") {
                spec.flow = pivbg::PivSceneSpec::Flow::Vortex;
            } else {
                std::cerr << "pivbg: --flow must be uniform or vortex\n";
                return kExitBadArgs;
            }
            spec.flow_u = args.flow_u;
            spec.flow_v = args.flow_v;
            spec.vortex_center_x = args.vortex_cx;
            spec.vortex_center_y = args.vortex_cy;
            spec.vortex_rate = args.vortex_rate;
            spec.gradient_amplitude = args.gradient;
            for (const auto& text : args.reflections) {
                pivbg::ReflectionBlob blob;
                if (std::sscanf(text.c_str(), "%lf,%lf,%lf,%lf", &blob.center_x,
                                &blob.center_y, &blob.sigma, &blob.amplitude) != 4) {
                    std::cerr << "pivbg: --reflection expects cx,cy,sigma,amplitude\n";
                    return kExitBadArgs;
                }
                spec.reflections.push_back(blob);
            }
            spec.modulation_amplitude = args.mod_amp;
            spec.modulation_period = args.mod_period;
            spec.noise_sigma = args.noise_sigma;
            spec.seed = args.seed;
            pivbg::PivScene scene = pivbg::make_piv_sequence(spec);
            pivbg::store_sequence(scene.frames, args.out_frames, true);
            pivbg::store_sequence(scene.truth_background, args.out_bg, true);
            pivbg::store_sequence(scene.truth_particles, args.out_fg, true);
            echo["spec"] = {{"width", spec.width},
                            {"height", spec.height},
                            {"n_frames", spec.n_frames},
                            {"particles", spec.particle_count},
                            {"particle_sigma", spec.particle_sigma},
                            {"particle_peak", spec.particle_peak},
                            {"flow", args.flow},
                            {"flow_u", spec.flow_u},
                            {"flow_v", spec.flow_v},
                            {"vortex_cx", spec.vortex_center_x},
                            {"vortex_cy", spec.vortex_center_y},
                            {"vortex_rate", spec.vortex_rate},
                            {"gradient", spec.gradient_amplitude},
                            {"reflections", args.reflections},
                            {"mod_amp", spec.modulation_amplitude},
                            {"mod_period", spec.modulation_period},
                            {"noise_sigma", spec.noise_sigma}};
        } else {
            std::cerr << "pivbg: --preset must be planted or piv\n";
            return kExitBadArgs;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "pivbg: " << e.what() << "\n";
        mark_failed({args.out_frames, args.out_bg, args.out_fg});
        return kExitBadArgs;
    } catch (const pivbg::IoError& e) {
        std::cerr << "pivbg: " << e.what() << "\n";
        mark_failed({args.out_frames, args.out_bg, args.out_fg});
        return kExitIo;
    }

    if (!args.report.empty()) {
        std::ofstream out(args.report);
        out << echo.dump(2) << "\n";
        if (!out) {
            std::cerr << "pivbg: cannot write report " << args.report << "\n";
            return kExitIo;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank + sparse background removal for image sequences"};
    app.require_subcommand(1);

    DecomposeArgs dec;
    auto* cmd_dec = app.add_subcommand("decompose", "Split a sequence into background/foreground");
    cmd_dec->add_option("--input", dec.input, "Input frame directory")->required();
    cmd_dec->add_option("--out-bg", dec.out_bg, "Background output directory")->required();
    cmd_dec->add_option("--out-fg", dec.out_fg, "Foreground output directory")->required();
    cmd_dec->add_option("--method", dec.method, "rpca|pod|minsub");
    cmd_dec->add_option("--lambda", dec.lambda, "Sparsity weight, 'auto' = 1/sqrt(pixels)");
    cmd_dec->add_option("--tol", dec.tol, "Relative residual tolerance");
    cmd_dec->add_option("--max-iters", dec.max_iters, "Iteration cap");
    cmd_dec->add_option("--rank", dec.rank, "POD background rank");
    double energy_flag = 0.0;
    auto* energy_opt = cmd_dec->add_option("--energy", energy_flag, "POD energy threshold");
    cmd_dec->add_option("--report", dec.report, "JSON run report path");

    EvaluateArgs ev;
    auto* cmd_ev = app.add_subcommand("evaluate", "Score an estimate against ground truth");
    cmd_ev->add_option("estimate_dir", ev.estimate_dir, "Estimated sequence")->required();
    cmd_ev->add_option("truth_dir", ev.truth_dir, "Ground-truth sequence")->required();
    cmd_ev->add_option("--range", ev.range, "Dynamic range L");
    cmd_ev->add_option("--csv", ev.csv, "Quality CSV output path");

    GenerateArgs gen;
    auto* cmd_gen = app.add_subcommand("generate", "Synthesize test sequences");
    cmd_gen->add_option("--preset", gen.preset, "planted|piv")->required();
    cmd_gen->add_option("--out-frames", gen.out_frames, "Frames output directory")->required();
    cmd_gen->add_option("--out-bg", gen.out_bg, "Truth background directory")->required();
    cmd_gen->add_option("--out-fg", gen.out_fg, "Truth foreground directory")->required();
    cmd_gen->add_option("--report", gen.report, "JSON spec echo path");
    cmd_gen->add_option("--seed", gen.seed, "RNG seed");
    cmd_gen->add_option("--width", gen.width, "Frame width");
    cmd_gen->add_option("--height", gen.height, "Frame height");
    cmd_gen->add_option("--frames", gen.n_frames, "Frame count");
    cmd_gen->add_option("--rank", gen.rank, "Planted rank");
    cmd_gen->add_option("--sparse-fraction", gen.sparse_fraction, "Planted sparse fraction");
    cmd_gen->add_option("--sparse-magnitude", gen.sparse_magnitude, "Planted sparse magnitude");
    cmd_gen->add_option("--particles", gen.particles, "Particle count");
    cmd_gen->add_option("--particle-sigma", gen.particle_sigma, "Blob sigma, pixels");
    cmd_gen->add_option("--particle-peak", gen.particle_peak, "Blob peak intensity");
    cmd_gen->add_option("--flow", gen.flow, "uniform|vortex");
    cmd_gen->add_option("--flow-u", gen.flow_u, "Uniform flow u, pixels/frame");
    cmd_gen->add_option("--flow-v", gen.flow_v, "Uniform flow v, pixels/frame");
    cmd_gen->add_option("--vortex-cx", gen.vortex_cx, "Vortex center x");
    cmd_gen->add_option("--vortex-cy", gen.vortex_cy, "Vortex center y");
    cmd_gen->add_option("--vortex-rate", gen.vortex_rate, "Vortex rate, radians/frame");
    cmd_gen->add_option("--gradient", gen.gradient, "Background gradient amplitude");
    cmd_gen->add_option("--reflection", gen.reflections, "Blob cx,cy,sigma,amplitude");
    cmd_gen->add_option("--mod-amp", gen.mod_amp, "Illumination modulation amplitude");
    cmd_gen->add_option("--mod-period", gen.mod_period, "Modulation period, frames");
    cmd_gen->add_option("--noise-sigma", gen.noise_sigma, "Additive noise sigma");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitBadArgs;
    }

    if (cmd_dec->parsed()) {
        if (*energy_opt) dec.energy = energy_flag;
        return run_decompose(dec);
    }
    if (cmd_ev->parsed()) return run_evaluate(ev);
    return run_generate(gen);
}
