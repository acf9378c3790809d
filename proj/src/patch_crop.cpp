#include "drnet/patch_crop.hpp"

#include <cstring>
#include <stdexcept>

namespace drnet {

void PcConfig::validate() const {
    if (gamma < 1) throw std::invalid_argument("PcConfig: gamma must be >= 1");
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("PcConfig: rho must lie in [0,1]");
}

STMap patch_crop(const STMap& m, const STMap& m_enlarged, double rho, Rng& rng) {
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("patch_crop: rho must lie in [0,1]");
    if (m_enlarged.channels != m.channels || m_enlarged.frames != m.frames) {
        throw std::invalid_argument("patch_crop: enlarged map must share channels and frames");
    }
    if (m_enlarged.rows < m.rows) {
        throw std::invalid_argument("patch_crop: enlarged map has fewer rows (" +
                                    std::to_string(m_enlarged.rows) + ") than the original (" +
                                    std::to_string(m.rows) + ")");
    }
    const double rho1 = rng.uniform();
    if (rho1 >= rho) return m;

    const int n = m.rows;
    const int y = static_cast<int>(rng.uniform_int(0, m_enlarged.rows - n));
    STMap out;
    out.channels = m.channels;
    out.rows = n;
    out.frames = m.frames;
    out.fs = m.fs;
    out.data.resize(static_cast<size_t>(out.channels) * n * out.frames);
    const size_t row_bytes = static_cast<size_t>(out.frames) * sizeof(double);
    for (int c = 0; c < out.channels; ++c) {
        for (int r = 0; r < n; ++r) {
            std::memcpy(&out.at(c, r, 0), m_enlarged.row(c, y + r), row_bytes);
        }
    }
    return out;
}

}  // namespace drnet
