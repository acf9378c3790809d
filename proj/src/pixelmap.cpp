#include "drnet/pixelmap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "drnet/io_util.hpp"

namespace drnet {

void PixelMap::validate() const {
    if (channels <= 0 || rows <= 0 || frames <= 0) {
        throw std::invalid_argument("PixelMap: dims must be positive");
    }
    if (fs <= 0.0) throw std::invalid_argument("PixelMap: fs must be positive");
    if (data.size() != static_cast<size_t>(channels) * rows * frames) {
        throw std::invalid_argument("PixelMap: data size does not match dims");
    }
}

PixelMap PixelMap::zeros(int channels, int rows, int frames, double fs) {
    PixelMap pm;
    pm.channels = channels;
    pm.rows = rows;
    pm.frames = frames;
    pm.fs = fs;
    pm.data.assign(static_cast<size_t>(channels) * rows * frames, 0.0);
    return pm;
}

STMap magnify(const PixelMap& pm, double flat_eps) {
    pm.validate();
    STMap m;
    m.channels = pm.channels;
    m.rows = pm.rows;
    m.frames = pm.frames;
    m.fs = pm.fs;
    m.data.resize(pm.data.size());
    const int T = pm.frames;
    for (int c = 0; c < pm.channels; ++c) {
        for (int r = 0; r < pm.rows; ++r) {
            const double* src = pm.row(c, r);
            double* dst = &m.at(c, r, 0);
            double mn = src[0], mx = src[0];
            for (int t = 1; t < T; ++t) {
                mn = std::min(mn, src[t]);
                mx = std::max(mx, src[t]);
            }
            const double range = mx - mn;
            if (range < flat_eps) {
                std::fill_n(dst, T, 0.0);  // constant rows carry no signal
            } else {
                const double s = 255.0 / range;
                for (int t = 0; t < T; ++t) dst[t] = (src[t] - mn) * s;
            }
        }
    }
    return m;
}

PixelMap to_yuv(const PixelMap& pm) {
    pm.validate();
    if (pm.order != ChannelOrder::Rgb || pm.channels != 3) {
        throw std::invalid_argument("to_yuv: input must be 3-channel RGB");
    }
    PixelMap out = pm;
    out.order = ChannelOrder::Yuv;
    const size_t plane = static_cast<size_t>(pm.rows) * pm.frames;
    for (size_t i = 0; i < plane; ++i) {
        const double r = pm.data[i];
        const double g = pm.data[plane + i];
        const double b = pm.data[2 * plane + i];
        const double y = 0.299 * r + 0.587 * g + 0.114 * b;
        out.data[i] = y;
        out.data[plane + i] = 0.492 * (b - y);
        out.data[2 * plane + i] = 0.877 * (r - y);
    }
    return out;
}

// --------------------------------------------------------------------------
// Trace CSV
// --------------------------------------------------------------------------

namespace {

std::string order_name(ChannelOrder o) { return o == ChannelOrder::Rgb ? "RGB" : "YUV"; }

ChannelOrder parse_order(const std::string& s) {
    if (s == "RGB") return ChannelOrder::Rgb;
    if (s == "YUV") return ChannelOrder::Yuv;
    throw std::invalid_argument("unknown channel order '" + s + "'");
}

// Header fields are "key=value" tokens separated by ", ".
std::string header_field(const std::string& header, const std::string& key, const std::string& path) {
    const std::string needle = key + "=";
    const size_t pos = header.find(needle);
    if (pos == std::string::npos) throw IoError(path + ": trace header missing " + key + "=");
    size_t end = header.find(',', pos);
    if (end == std::string::npos) end = header.size();
    return trim(header.substr(pos + needle.size(), end - pos - needle.size()));
}

}  // namespace

void save_trace_csv(const std::string& path, const PixelMap& pm) {
    pm.validate();
    std::ostringstream os;
    os << "# pixmap v1, channels=" << pm.channels << ", rows=" << pm.rows
       << ", frames=" << pm.frames << ", fs=" << fmt_double(pm.fs)
       << ", order=" << order_name(pm.order) << "\n";
    for (int c = 0; c < pm.channels; ++c) {
        for (int r = 0; r < pm.rows; ++r) {
            os << c << ',' << r;
            const double* row = pm.row(c, r);
            for (int t = 0; t < pm.frames; ++t) os << ',' << fmt_double(row[t]);
            os << "\n";
        }
    }
    write_text_file(path, os.str());
}

PixelMap load_trace_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# pixmap v1", 0) != 0) {
        throw IoError(path + ": missing '# pixmap v1' header");
    }
    PixelMap pm;
    pm.channels = static_cast<int>(parse_long(header_field(line, "channels", path), "channels"));
    pm.rows = static_cast<int>(parse_long(header_field(line, "rows", path), "rows"));
    pm.frames = static_cast<int>(parse_long(header_field(line, "frames", path), "frames"));
    pm.fs = parse_double(header_field(line, "fs", path), "fs");
    pm.order = parse_order(header_field(line, "order", path));
    if (pm.channels <= 0 || pm.rows <= 0 || pm.frames <= 0) {
        throw IoError(path + ": non-positive dims in header");
    }
    pm.data.assign(static_cast<size_t>(pm.channels) * pm.rows * pm.frames, 0.0);

    std::vector<bool> seen(static_cast<size_t>(pm.channels) * pm.rows, false);
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto parts = split(line, ',');
        if (static_cast<int>(parts.size()) != 2 + pm.frames) {
            throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(2 + pm.frames) + " fields, got " +
                          std::to_string(parts.size()));
        }
        const int c = static_cast<int>(parse_long(parts[0], "channel index"));
        const int r = static_cast<int>(parse_long(parts[1], "row index"));
        if (c < 0 || c >= pm.channels || r < 0 || r >= pm.rows) {
            throw IoError(path + ":" + std::to_string(lineno) + ": (c,r) out of range");
        }
        const size_t key = static_cast<size_t>(c) * pm.rows + r;
        if (seen[key]) throw IoError(path + ":" + std::to_string(lineno) + ": duplicate row");
        seen[key] = true;
        for (int t = 0; t < pm.frames; ++t) {
            pm.at(c, r, t) = parse_double(parts[static_cast<size_t>(2 + t)], "trace value");
        }
    }
    for (size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) {
            throw IoError(path + ": missing trace line for (c,r)=(" +
                          std::to_string(i / static_cast<size_t>(pm.rows)) + "," +
                          std::to_string(i % static_cast<size_t>(pm.rows)) + ")");
        }
    }
    return pm;
}

void save_stmap_csv(const std::string& path, const STMap& m) {
    PixelMap pm;
    pm.channels = m.channels;
    pm.rows = m.rows;
    pm.frames = m.frames;
    pm.fs = m.fs;
    pm.data = m.data;
    save_trace_csv(path, pm);
}

STMap load_stmap_csv(const std::string& path) {
    const PixelMap pm = load_trace_csv(path);
    STMap m;
    m.channels = pm.channels;
    m.rows = pm.rows;
    m.frames = pm.frames;
    m.fs = pm.fs;
    m.data = pm.data;
    return m;
}

}  // namespace drnet
