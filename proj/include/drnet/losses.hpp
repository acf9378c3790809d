#pragma once

#include <vector>

#include "drnet/rng.hpp"
#include "drnet/tensor.hpp"

namespace drnet {

// Negative-Pearson prediction loss: 1 - r(pred, gt), in [0,2]. Accepts [T]
// vectors or [B,T] batches (row-wise loss, averaged). With var_eps == 0 a
// (near-)constant row raises; training passes a small var_eps instead, which
// is added to both variance terms before the square root.
Tensor loss_phy(const Tensor& pred, const Tensor& gt, double var_eps = 0.0);

struct CycleLossConfig {
    double band_lo = 0.6;   // Hz
    double band_hi = 3.0;   // Hz
    int nfft = 2048;

    void validate(double fs) const;
};

// Periodicity loss on a generated map pm_p [C,n,T]: averages n_c ~ U{1..n}
// randomly selected distinct rows per channel, takes a differentiable
// band-restricted periodogram (explicit cos/sin DFT projections, mean
// removal, no window, one-sided density scaling like dsp::psd), treats the
// band bins as logits and cross-entropies them against the bin nearest to
// hr_gt/60, averaged over channels.
class CycleLoss {
public:
    CycleLoss(const CycleLossConfig& cfg, double fs, int frames);

    Tensor operator()(const Tensor& pm_p, double hr_gt_bpm, Rng& rng) const;

    int band_bins() const { return bins_; }
    int target_bin(double hr_gt_bpm) const;  // index into the band bins
    double bin_freq(int band_bin) const;     // Hz

private:
    CycleLossConfig cfg_;
    double fs_;
    int frames_;
    int k_lo_ = 0;
    int bins_ = 0;
    Tensor cos_proj_;  // [T, bins], constant
    Tensor sin_proj_;  // [T, bins], constant
};

// One-shot convenience wrapper around CycleLoss.
Tensor loss_cycle(const Tensor& pm_p, double hr_gt_bpm, double fs, const CycleLossConfig& cfg,
                  Rng& rng);

// Total objective: mean of the phy terms plus mean of the cycle terms.
Tensor loss_total(const std::vector<Tensor>& phy_terms, const std::vector<Tensor>& cyc_terms);

}  // namespace drnet
