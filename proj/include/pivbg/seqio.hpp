#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pivbg/matrix.hpp"
#include "pivbg/quality.hpp"

namespace pivbg {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Ordered stack of equally-sized single-channel frames.
/// In-memory intensities are always in [0, 1]; source_range records the
/// storage depth (1.0, 255 or 65535).
struct FrameSequence {
    int width = 0;
    int height = 0;
    std::vector<Matrix> frames;
    double source_range = 255.0;
    std::vector<std::string> warnings;
};

/// (width*height) x n_frames matrix, column j = frame j vectorized row-major.
struct DataMatrix {
    Matrix values;
    int width = 0;
    int height = 0;
};

inline DataMatrix aggregate(const FrameSequence& seq) {
    if (seq.frames.empty()) throw std::invalid_argument("aggregate: empty sequence");
    DataMatrix d;
    d.width = seq.width;
    d.height = seq.height;
    const Eigen::Index pixels = static_cast<Eigen::Index>(seq.width) * seq.height;
    d.values.resize(pixels, static_cast<Eigen::Index>(seq.frames.size()));
    for (std::size_t j = 0; j < seq.frames.size(); ++j) {
        const Matrix& f = seq.frames[j];
        if (f.rows() != seq.height || f.cols() != seq.width)
            throw std::invalid_argument("aggregate: frame dimension mismatch");
        for (int r = 0; r < seq.height; ++r)
            for (int c = 0; c < seq.width; ++c)
                d.values(static_cast<Eigen::Index>(r) * seq.width + c,
                         static_cast<Eigen::Index>(j)) = f(r, c);
    }
    return d;
}

inline FrameSequence scatter(const DataMatrix& d, double source_range = 255.0) {
    if (static_cast<Eigen::Index>(d.width) * d.height != d.values.rows())
        throw std::invalid_argument("scatter: width*height does not match matrix rows");
    FrameSequence seq;
    seq.width = d.width;
    seq.height = d.height;
    seq.source_range = source_range;
    for (Eigen::Index j = 0; j < d.values.cols(); ++j) {
        Matrix f(d.height, d.width);
        for (int r = 0; r < d.height; ++r)
            for (int c = 0; c < d.width; ++c)
                f(r, c) = d.values(static_cast<Eigen::Index>(r) * d.width + c, j);
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

namespace detail {

inline int pnm_token(std::istream& in) {
    // Skips whitespace and # comments.
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (c != EOF && std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = -1;
    in >> value;
    return value;
}

inline Matrix read_pnm(const fs::path& path, bool& was_color) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char p = 0, kind = 0;
    in.get(p).get(kind);
    if (p != 'P' || (kind != '5' && kind != '6'))
        throw IoError("unsupported image format (need binary PGM/PPM): " + path.string());
    was_color = (kind == '6');
    const int width = pnm_token(in);
    const int height = pnm_token(in);
    const int maxval = pnm_token(in);
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535)
        throw IoError("malformed PNM header: " + path.string());
    in.get();  // single whitespace before raster
    const int channels = was_color ? 3 : 1;
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * channels * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw IoError("truncated raster in " + path.string());

    Matrix frame(height, width);
    const double scale = 1.0 / maxval;
    std::size_t idx = 0;
    auto next = [&]() {
        double v = raw[idx];
        if (bytes == 2) v = v * 256.0 + raw[idx + 1];  // big-endian per PNM
        idx += bytes;
        return v;
    };
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            if (was_color) {
                const double red = next(), green = next(), blue = next();
                frame(r, c) = (0.299 * red + 0.587 * green + 0.114 * blue) * scale;
            } else {
                frame(r, c) = next() * scale;
            }
        }
    }
    return frame;
}

}  // namespace detail

/// Loads all PGM/PPM files in path, lexicographic filename order.
inline FrameSequence load_sequence(const fs::path& path) {
    if (!fs::is_directory(path)) throw IoError("not a directory: " + path.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")
            files.push_back(entry.path());
    }
    if (files.empty()) throw IoError("no image files in " + path.string());
    std::sort(files.begin(), files.end());

    FrameSequence seq;
    for (const auto& file : files) {
        bool was_color = false;
        Matrix frame = detail::read_pnm(file, was_color);
        if (was_color)
            seq.warnings.push_back("color input reduced to luma: " + file.filename().string());
        if (seq.frames.empty()) {
            seq.height = static_cast<int>(frame.rows());
            seq.width = static_cast<int>(frame.cols());
        } else if (frame.rows() != seq.height || frame.cols() != seq.width) {
            throw IoError("frame dimension mismatch in " + file.filename().string());
        }
        seq.frames.push_back(std::move(frame));
    }
    // Depth sniffed from the first file's header.
    std::ifstream probe(files.front(), std::ios::binary);
    char p, kind;
    probe.get(p).get(kind);
    detail::pnm_token(probe);
    detail::pnm_token(probe);
    seq.source_range = static_cast<double>(detail::pnm_token(probe));
    return seq;
}

/// Writes frames as frame_000000.pgm ... at source_range depth.
/// With clamp, intensities are clipped to [0, 1] before quantization.
inline void store_sequence(const FrameSequence& seq, const fs::path& path, bool clamp = true) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory " + path.string() + ": " + ec.message());
    const int maxval = seq.source_range >= 65535.0 ? 65535
                     : seq.source_range >= 255.0   ? 255
                                                   : 255;
    const int bytes = maxval > 255 ? 2 : 1;
    for (std::size_t j = 0; j < seq.frames.size(); ++j) {
        std::ostringstream name;
        name << "frame_" << std::setw(6) << std::setfill('0') << j << ".pgm";
        const fs::path file = path / name.str();
        std::ofstream out(file, std::ios::binary);
        if (!out) throw IoError("cannot write " + file.string());
        out << "P5\n" << seq.width << " " << seq.height << "\n" << maxval << "\n";
        const Matrix& f = seq.frames[j];
        std::vector<unsigned char> raw;
        raw.reserve(static_cast<std::size_t>(seq.width) * seq.height * bytes);
        for (int r = 0; r < seq.height; ++r) {
            for (int c = 0; c < seq.width; ++c) {
                double v = f(r, c);
                if (clamp) v = std::clamp(v, 0.0, 1.0);
                long code = std::lround(v * maxval);
                code = std::clamp(code, 0L, static_cast<long>(maxval));
                if (bytes == 2) raw.push_back(static_cast<unsigned char>(code >> 8));
                raw.push_back(static_cast<unsigned char>(code & 0xff));
            }
        }
        out.write(reinterpret_cast<const char*>(raw.data()),
                  static_cast<std::streamsize>(raw.size()));
        if (!out) throw IoError("write failure on " + file.string());
    }
}

namespace detail {

inline std::string format_sig6(double v) {
    if (std::isinf(v)) return "inf";
    std::ostringstream out;
    out << std::setprecision(6) << v;
    return out.str();
}

}  // namespace detail

/// CSV with header frame,mse,psnr,ssim; one row per frame then an aggregate
/// row. PSNR infinities serialize as "inf". Empty report writes header only.
inline void write_quality_csv(const QualityReport& report, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "frame,mse,psnr,ssim\n";
    for (const auto& q : report.per_frame) {
        out << q.frame_index << "," << detail::format_sig6(q.mse) << ","
            << detail::format_sig6(q.psnr) << "," << detail::format_sig6(q.ssim) << "\n";
    }
    if (!report.per_frame.empty()) {
        out << "aggregate," << detail::format_sig6(report.mean_mse) << ","
            << detail::format_sig6(report.mean_psnr) << ","
            << detail::format_sig6(report.mean_ssim) << "\n";
    }
    if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace pivbg
