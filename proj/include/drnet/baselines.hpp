#pragma once

#include "drnet/dsp.hpp"
#include "drnet/pixelmap.hpp"

namespace drnet {

// Classical rPPG extractors. All three consume the spatially averaged RGB
// traces of a PixelMap (mean over rows per channel) and return a pulse
// waveform at the map's frame rate. Deterministic; invariant to positive
// rescaling of the input map.

// Mean green trace, normalized by its temporal mean, moving-average
// detrended (1 s window) and zero-phase bandpassed to [0.6, 3] Hz.
BvpSignal baseline_green(const PixelMap& pm);

// Chrominance method: per 1.6 s Hann window, channels normalized by their
// window mean, X = 3R-2G, Y = 1.5R+G-1.5B, S = X - (sd(X)/sd(Y))*Y,
// mean-removed and overlap-added at 50% hop.
BvpSignal baseline_chrom(const PixelMap& pm);

// Plane-orthogonal-to-skin: per window, normalized channels projected on
// [0,1,-1] and [-2,1,1], h = S1 + (sd(S1)/sd(S2))*S2, overlap-added.
BvpSignal baseline_pos(const PixelMap& pm);

enum class BaselineMethod { Green, Chrom, Pos };
BaselineMethod parse_baseline_method(const std::string& name);
BvpSignal run_baseline(BaselineMethod method, const PixelMap& pm);

}  // namespace drnet
