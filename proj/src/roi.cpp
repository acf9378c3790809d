#include "drnet/roi.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "drnet/io_util.hpp"

namespace drnet {

// --------------------------------------------------------------------------
// Landmarks CSV
// --------------------------------------------------------------------------

LandmarkTrack load_landmarks_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    LandmarkTrack track;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto parts = split(t, ',');
        if (parts.size() != 2 * LandmarkTrack::kPoints) {
            throw IoError(path + ":" + std::to_string(lineno) + ": expected 136 values, got " +
                          std::to_string(parts.size()));
        }
        std::array<double, 2 * LandmarkTrack::kPoints> pts{};
        for (size_t i = 0; i < parts.size(); ++i) pts[i] = parse_double(parts[i], "landmark");
        track.frames.push_back(pts);
    }
    if (track.frames.empty()) throw IoError(path + ": no landmark frames");
    return track;
}

void save_landmarks_csv(const std::string& path, const LandmarkTrack& t) {
    std::ostringstream os;
    for (const auto& f : t.frames) {
        for (size_t i = 0; i < f.size(); ++i) {
            if (i) os << ',';
            os << fmt_double(f[i]);
        }
        os << "\n";
    }
    write_text_file(path, os.str());
}

// --------------------------------------------------------------------------
// ROI geometry
// --------------------------------------------------------------------------

namespace {

Rect bounding_box(const LandmarkTrack& t, int frame, int first, int last, double pad_frac) {
    double x0 = t.x(frame, first), x1 = x0, y0 = t.y(frame, first), y1 = y0;
    for (int p = first; p <= last; ++p) {
        x0 = std::min(x0, t.x(frame, p));
        x1 = std::max(x1, t.x(frame, p));
        y0 = std::min(y0, t.y(frame, p));
        y1 = std::max(y1, t.y(frame, p));
    }
    const double px = (x1 - x0) * pad_frac;
    const double py = (y1 - y0) * pad_frac;
    return Rect{x0 - px, y0 - py, x1 + px, y1 + py};
}

}  // namespace

RoiDefinition build_roi_definition(const LandmarkTrack& landmarks, int n, int gamma) {
    if (gamma < 1) throw std::invalid_argument("build_roi_definition: gamma must be >= 1");
    if (n <= 0) throw std::invalid_argument("build_roi_definition: n must be positive");
    // 2:1 aspect lattice (rows = 2*cols), n = rows*cols.
    const int cols = static_cast<int>(std::lround(std::sqrt(n / 2.0)));
    const int rows = 2 * cols;
    if (cols < 1 || rows * cols != n) {
        throw std::invalid_argument("build_roi_definition: n=" + std::to_string(n) +
                                    " does not fit the 2:1 grid layout");
    }

    RoiDefinition roi;
    roi.n = n;
    roi.gamma = gamma;
    roi.grid_rows = rows;
    roi.grid_cols = cols;
    roi.frames.reserve(static_cast<size_t>(landmarks.frame_count()));

    for (int f = 0; f < landmarks.frame_count(); ++f) {
        const Rect face = bounding_box(landmarks, f, 0, LandmarkTrack::kPoints - 1, 0.0);
        if (face.width() <= 0.0 || face.height() <= 0.0) {
            throw std::invalid_argument("build_roi_definition: degenerate landmark bounding box at frame " +
                                        std::to_string(f));
        }
        RoiFrame rf;
        rf.cells.reserve(static_cast<size_t>(n));
        rf.sub_cells.reserve(static_cast<size_t>(n) * gamma * gamma);
        for (int gr = 0; gr < rows; ++gr) {
            for (int gc = 0; gc < cols; ++gc) {
                const Rect cell{face.x0 + face.width() * gc / cols,
                                face.y0 + face.height() * gr / rows,
                                face.x0 + face.width() * (gc + 1) / cols,
                                face.y0 + face.height() * (gr + 1) / rows};
                rf.cells.push_back(cell);
                for (int dr = 0; dr < gamma; ++dr) {
                    for (int dc = 0; dc < gamma; ++dc) {
                        rf.sub_cells.push_back(Rect{cell.x0 + cell.width() * dc / gamma,
                                                    cell.y0 + cell.height() * dr / gamma,
                                                    cell.x0 + cell.width() * (dc + 1) / gamma,
                                                    cell.y0 + cell.height() * (dr + 1) / gamma});
                    }
                }
            }
        }
        // standard 68-point regions: eyes 36-41 / 42-47, mouth 48-67
        rf.exclusions.push_back(bounding_box(landmarks, f, 36, 41, 0.15));
        rf.exclusions.push_back(bounding_box(landmarks, f, 42, 47, 0.15));
        rf.exclusions.push_back(bounding_box(landmarks, f, 48, 67, 0.10));
        roi.frames.push_back(std::move(rf));
    }
    return roi;
}

// --------------------------------------------------------------------------
// RVF1 frames
// --------------------------------------------------------------------------

void FrameSequence::validate() const {
    if (width <= 0 || height <= 0 || frames <= 0) {
        throw std::invalid_argument("FrameSequence: dims must be positive");
    }
    if (fps <= 0.0) throw std::invalid_argument("FrameSequence: fps must be positive");
    if (rgb.size() != static_cast<size_t>(frames) * height * width * 3) {
        throw std::invalid_argument("FrameSequence: pixel buffer size mismatch");
    }
}

namespace {

template <typename T>
void write_le(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError(path + ": truncated RVF1 file");
    return v;
}

}  // namespace

void save_rvf(const std::string& path, const FrameSequence& fs) {
    fs.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write("RVF1", 4);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(fs.width));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(fs.height));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(fs.frames));
    write_le<float>(out, static_cast<float>(fs.fps));
    out.write(reinterpret_cast<const char*>(fs.rgb.data()), static_cast<std::streamsize>(fs.rgb.size()));
    if (!out) throw IoError("write failed for " + path);
}

FrameSequence load_rvf(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "RVF1", 4) != 0) throw IoError(path + ": not an RVF1 file");
    FrameSequence fs;
    fs.width = static_cast<int>(read_le<std::uint32_t>(in, path));
    fs.height = static_cast<int>(read_le<std::uint32_t>(in, path));
    fs.frames = static_cast<int>(read_le<std::uint32_t>(in, path));
    fs.fps = static_cast<double>(read_le<float>(in, path));
    if (fs.width <= 0 || fs.height <= 0 || fs.frames <= 0 || fs.fps <= 0.0f) {
        throw IoError(path + ": bad RVF1 header");
    }
    fs.rgb.resize(static_cast<size_t>(fs.frames) * fs.height * fs.width * 3);
    in.read(reinterpret_cast<char*>(fs.rgb.data()), static_cast<std::streamsize>(fs.rgb.size()));
    if (!in) throw IoError(path + ": truncated pixel data");
    return fs;
}

// --------------------------------------------------------------------------
// PixelMap computation
// --------------------------------------------------------------------------

PixelMap compute_pixelmap(const FrameSequence& frames, const RoiDefinition& roi, bool enlarged) {
    frames.validate();
    if (static_cast<int>(roi.frames.size()) != frames.frames) {
        throw std::invalid_argument("compute_pixelmap: landmark frames (" +
                                    std::to_string(roi.frames.size()) + ") != video frames (" +
                                    std::to_string(frames.frames) + ")");
    }
    const int n_rows = enlarged ? roi.n_enlarged() : roi.n;
    PixelMap pm = PixelMap::zeros(3, n_rows, frames.frames, frames.fps);

    for (int t = 0; t < frames.frames; ++t) {
        const RoiFrame& rf = roi.frames[static_cast<size_t>(t)];
        const auto& cells = enlarged ? rf.sub_cells : rf.cells;
        for (int i = 0; i < n_rows; ++i) {
            const Rect& cell = cells[static_cast<size_t>(i)];
            const int xa = std::max(0, static_cast<int>(std::floor(cell.x0)));
            const int xb = std::min(frames.width, static_cast<int>(std::ceil(cell.x1)));
            const int ya = std::max(0, static_cast<int>(std::floor(cell.y0)));
            const int yb = std::min(frames.height, static_cast<int>(std::ceil(cell.y1)));
            double acc[3] = {0.0, 0.0, 0.0};
            long count = 0;
            for (int y = ya; y < yb; ++y) {
                for (int x = xa; x < xb; ++x) {
                    const double cx = x + 0.5, cy = y + 0.5;
                    if (!cell.contains(cx, cy)) continue;
                    bool excluded = false;
                    for (const Rect& ex : rf.exclusions) {
                        if (ex.contains(cx, cy)) {
                            excluded = true;
                            break;
                        }
                    }
                    if (excluded) continue;
                    for (int c = 0; c < 3; ++c) acc[c] += frames.pixel(t, x, y, c);
                    ++count;
                }
            }
            if (count == 0) {
                throw std::invalid_argument("compute_pixelmap: cell " + std::to_string(i) +
                                            " empty after exclusion masks at frame " +
                                            std::to_string(t));
            }
            for (int c = 0; c < 3; ++c) pm.at(c, i, t) = acc[c] / static_cast<double>(count);
        }
    }
    return pm;
}

}  // namespace drnet
