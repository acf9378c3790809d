#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "drnet/pixelmap.hpp"

namespace drnet {

// 68-point facial landmark track, one set per frame, (x,y) interleaved.
struct LandmarkTrack {
    static constexpr int kPoints = 68;
    std::vector<std::array<double, 2 * kPoints>> frames;
    double fs = 30.0;

    int frame_count() const { return static_cast<int>(frames.size()); }
    double x(int frame, int point) const { return frames[static_cast<size_t>(frame)][static_cast<size_t>(2 * point)]; }
    double y(int frame, int point) const { return frames[static_cast<size_t>(frame)][static_cast<size_t>(2 * point + 1)]; }
};

// Landmarks CSV: one line per frame, 136 comma-separated reals, interleaved
// x0,y0,...,x67,y67.
LandmarkTrack load_landmarks_csv(const std::string& path);
void save_landmarks_csv(const std::string& path, const LandmarkTrack& t);

// Axis-aligned box; pixel membership tests the pixel center against the
// half-open extent [x0,x1) x [y0,y1).
struct Rect {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    bool contains(double px, double py) const { return px >= x0 && px < x1 && py >= y0 && py < y1; }
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
};

struct RoiFrame {
    std::vector<Rect> cells;       // n parent cells, row-major over the grid
    std::vector<Rect> sub_cells;   // n*gamma^2, parent-major then row-major
    std::vector<Rect> exclusions;  // eye / mouth boxes
};

// Grid geometry: the landmark bounding box is split into an 8x4 (rows x
// cols) lattice for n=32; other n use the same 2:1 aspect rule. Sub-cell
// index = parent * gamma^2 + (dr * gamma + dc).
struct RoiDefinition {
    int n = 32;
    int gamma = 1;
    int grid_rows = 8;
    int grid_cols = 4;
    std::vector<RoiFrame> frames;

    int n_enlarged() const { return n * gamma * gamma; }
};

// Builds per-frame ROI cells from the landmark bounding box, removing the
// eye and mouth regions derived from the standard 68-point indices.
RoiDefinition build_roi_definition(const LandmarkTrack& landmarks, int n = 32, int gamma = 1);

// Raw RGB frame container, backed by the RVF1 file format (magic "RVF1",
// u32 width/height/frames LE, f32 fps LE, frames*H*W*3 bytes RGB).
struct FrameSequence {
    int width = 0;
    int height = 0;
    int frames = 0;
    double fps = 30.0;
    std::vector<std::uint8_t> rgb;  // frame-major, row-major, RGB interleaved

    std::uint8_t pixel(int frame, int x, int y, int c) const {
        return rgb[((static_cast<size_t>(frame) * height + y) * width + x) * 3 + static_cast<size_t>(c)];
    }
    void validate() const;
};

FrameSequence load_rvf(const std::string& path);
void save_rvf(const std::string& path, const FrameSequence& fs);

// Per-cell channel means over the masked pixels of every frame. With
// `enlarged` the sub-cell grid is used, giving an n*gamma^2-row map.
PixelMap compute_pixelmap(const FrameSequence& frames, const RoiDefinition& roi,
                          bool enlarged = false);

}  // namespace drnet
