#pragma once

#include "drnet/pixelmap.hpp"
#include "drnet/rng.hpp"

namespace drnet {

struct PcConfig {
    int gamma = 2;
    double rho = 0.5;

    void validate() const;
};

// Patch Cropping augmentation. Draws rho1 ~ U[0,1); if rho1 >= rho the
// original map is returned unchanged, otherwise a contiguous n-row band of
// the enlarged map starting at y ~ U{0,...,n_e-n} (inclusive). Rows are
// copied verbatim, never interpolated. Consumes exactly one uniform draw,
// plus one integer draw when the crop branch fires.
STMap patch_crop(const STMap& m, const STMap& m_enlarged, double rho, Rng& rng);

}  // namespace drnet
