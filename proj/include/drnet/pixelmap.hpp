#pragma once

#include <string>
#include <vector>

namespace drnet {

enum class ChannelOrder { Rgb, Yuv };

// Per-ROI, per-channel mean intensity traces of a clip: shape C x rows x T,
// stored row-major (c, r, t). Values stay in [0,255] when sourced from 8-bit
// frames.
struct PixelMap {
    int channels = 3;
    int rows = 0;
    int frames = 0;
    double fs = 30.0;
    ChannelOrder order = ChannelOrder::Rgb;
    std::vector<double> data;

    double& at(int c, int r, int t) {
        return data[(static_cast<size_t>(c) * rows + r) * frames + t];
    }
    double at(int c, int r, int t) const {
        return data[(static_cast<size_t>(c) * rows + r) * frames + t];
    }
    double* row(int c, int r) { return data.data() + (static_cast<size_t>(c) * rows + r) * frames; }
    const double* row(int c, int r) const {
        return data.data() + (static_cast<size_t>(c) * rows + r) * frames;
    }

    void validate() const;
    static PixelMap zeros(int channels, int rows, int frames, double fs);
};

// A PixelMap after the per-row min-max magnification onto [0,255]. Values are
// kept real (no 8-bit quantization).
struct STMap {
    int channels = 3;
    int rows = 0;
    int frames = 0;
    double fs = 30.0;
    std::vector<double> data;

    double& at(int c, int r, int t) {
        return data[(static_cast<size_t>(c) * rows + r) * frames + t];
    }
    double at(int c, int r, int t) const {
        return data[(static_cast<size_t>(c) * rows + r) * frames + t];
    }
    const double* row(int c, int r) const {
        return data.data() + (static_cast<size_t>(c) * rows + r) * frames;
    }
};

// Magnifying Operation: per (row, channel) map min->0 and max->255. Rows
// whose range is below `flat_eps` map to all zeros.
STMap magnify(const PixelMap& pm, double flat_eps = 1e-9);

// BT.601 RGB -> YUV conversion of the traces. The transform is affine per
// sample, so converting averaged traces equals averaging converted pixels.
PixelMap to_yuv(const PixelMap& pm);

// Trace CSV: "# pixmap v1, channels=3, rows=<n>, frames=<T>, fs=<hz>,
// order=RGB" followed by one "c,r,v0,...,v{T-1}" line per (channel,row).
PixelMap load_trace_csv(const std::string& path);
void save_trace_csv(const std::string& path, const PixelMap& pm);

// STMaps serialize with the same trace layout.
void save_stmap_csv(const std::string& path, const STMap& m);
STMap load_stmap_csv(const std::string& path);

}  // namespace drnet
