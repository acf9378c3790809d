#include "drnet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace drnet {

namespace {

constexpr double kPi = std::numbers::pi;
// Sum-of-squares below this is treated as a constant row.
constexpr double kConstantVarFloor = 1e-20;

}  // namespace

Tensor loss_phy(const Tensor& pred, const Tensor& gt, double var_eps) {
    if (pred.shape() != gt.shape()) {
        throw std::invalid_argument("loss_phy: pred shape " + shape_str(pred.shape()) +
                                    " != gt shape " + shape_str(gt.shape()));
    }
    Tensor x = pred, y = gt;
    if (pred.ndim() == 1) {
        x = reshape(pred, {1, pred.dim(0)});
        y = reshape(gt, {1, gt.dim(0)});
    } else if (pred.ndim() != 2) {
        throw std::invalid_argument("loss_phy: expects [T] or [B,T]");
    }
    const int T = x.dim(1);
    if (T < 2) throw std::invalid_argument("loss_phy: need at least 2 samples");

    auto center = [T](const Tensor& v) {
        return sub(v, expand_last(reduce(Reduce::Mean, v, 1), T));
    };
    const Tensor xc = center(x);
    const Tensor yc = center(y);
    const Tensor num = reduce(Reduce::Sum, mul(xc, yc), 1);   // [B]
    Tensor vx = reduce(Reduce::Sum, mul(xc, xc), 1);
    Tensor vy = reduce(Reduce::Sum, mul(yc, yc), 1);
    if (var_eps == 0.0) {
        for (double v : vx.data()) {
            if (v < kConstantVarFloor) throw std::invalid_argument("loss_phy: constant prediction");
        }
        for (double v : vy.data()) {
            if (v < kConstantVarFloor) throw std::invalid_argument("loss_phy: constant ground truth");
        }
    } else {
        vx = add_scalar(vx, var_eps);
        vy = add_scalar(vy, var_eps);
    }
    const Tensor r = div(num, drnet::sqrt(mul(vx, vy)));
    return mean_all(add_scalar(neg(r), 1.0));
}

// --------------------------------------------------------------------------
// Cycle loss
// --------------------------------------------------------------------------

void CycleLossConfig::validate(double fs) const {
    if (!(0.0 < band_lo && band_lo < band_hi && band_hi < fs / 2.0)) {
        throw std::invalid_argument("CycleLossConfig: band outside (0, fs/2)");
    }
    if (nfft <= 0 || (nfft & (nfft - 1)) != 0) {
        throw std::invalid_argument("CycleLossConfig: nfft must be a power of two");
    }
}

CycleLoss::CycleLoss(const CycleLossConfig& cfg, double fs, int frames)
    : cfg_(cfg), fs_(fs), frames_(frames) {
    cfg.validate(fs);
    if (frames < 2) throw std::invalid_argument("CycleLoss: need at least 2 frames");
    if (cfg.nfft < frames) throw std::invalid_argument("CycleLoss: nfft must be >= frames");
    k_lo_ = static_cast<int>(std::ceil(cfg.band_lo * cfg.nfft / fs - 1e-12));
    const int k_hi = static_cast<int>(std::floor(cfg.band_hi * cfg.nfft / fs + 1e-12));
    bins_ = k_hi - k_lo_ + 1;
    if (bins_ < 2) throw std::invalid_argument("CycleLoss: band too narrow for nfft");

    // Fixed DFT projections so the periodogram lives on the tape. The
    // one-sided density scaling mirrors dsp::psd with a rectangular window:
    // P_k = 2*|X_k|^2/(fs*T), folded into the projection matrices.
    const double scale = std::sqrt(2.0 / (fs * frames));
    std::vector<double> cosd(static_cast<size_t>(frames) * bins_);
    std::vector<double> sind(static_cast<size_t>(frames) * bins_);
    for (int t = 0; t < frames; ++t) {
        for (int j = 0; j < bins_; ++j) {
            const double w = 2.0 * kPi * static_cast<double>(k_lo_ + j) * t / cfg.nfft;
            cosd[static_cast<size_t>(t) * bins_ + j] = std::cos(w) * scale;
            sind[static_cast<size_t>(t) * bins_ + j] = std::sin(w) * scale;
        }
    }
    cos_proj_ = Tensor::from_data({frames, bins_}, std::move(cosd));
    sin_proj_ = Tensor::from_data({frames, bins_}, std::move(sind));
}

int CycleLoss::target_bin(double hr_gt_bpm) const {
    const double f = hr_gt_bpm / 60.0;
    if (f < cfg_.band_lo || f > cfg_.band_hi) {
        throw std::invalid_argument("CycleLoss: hr_gt " + std::to_string(hr_gt_bpm) +
                                    " bpm outside the band");
    }
    const int k = static_cast<int>(std::lround(f * cfg_.nfft / fs_));
    return std::clamp(k - k_lo_, 0, bins_ - 1);
}

double CycleLoss::bin_freq(int band_bin) const {
    return static_cast<double>(k_lo_ + band_bin) * fs_ / cfg_.nfft;
}

Tensor CycleLoss::operator()(const Tensor& pm_p, double hr_gt_bpm, Rng& rng) const {
    if (pm_p.ndim() != 3) throw std::invalid_argument("CycleLoss: pm_p must be [C,n,T]");
    if (pm_p.dim(2) != frames_) {
        throw std::invalid_argument("CycleLoss: pm_p has T=" + std::to_string(pm_p.dim(2)) +
                                    ", planned for T=" + std::to_string(frames_));
    }
    const int C = pm_p.dim(0), n = pm_p.dim(1);
    const int target = target_bin(hr_gt_bpm);

    // n_c ~ U{1..n}, then n_c distinct rows via partial Fisher-Yates.
    const int n_c = static_cast<int>(rng.uniform_int(1, n));
    std::vector<int> perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    for (int i = 0; i < n_c; ++i) {
        const int j = static_cast<int>(rng.uniform_int(i, n - 1));
        std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
    }
    perm.resize(static_cast<size_t>(n_c));

    const Tensor pm_avg = mean_rows(pm_p, perm);                               // [C,T]
    const Tensor centered = sub(pm_avg, expand_last(reduce(Reduce::Mean, pm_avg, 1), frames_));
    const Tensor yc = matmul(centered, cos_proj_);                             // [C,bins]
    const Tensor ys = matmul(centered, sin_proj_);
    const Tensor power = add(mul(yc, yc), mul(ys, ys));                        // logits
    const Tensor ce = cross_entropy_rows(power, std::vector<int>(static_cast<size_t>(C), target));
    return mean_all(ce);  // 1/C prefactor
}

Tensor loss_cycle(const Tensor& pm_p, double hr_gt_bpm, double fs, const CycleLossConfig& cfg,
                  Rng& rng) {
    const CycleLoss plan(cfg, fs, pm_p.dim(2));
    return plan(pm_p, hr_gt_bpm, rng);
}

Tensor loss_total(const std::vector<Tensor>& phy_terms, const std::vector<Tensor>& cyc_terms) {
    if (phy_terms.empty() || cyc_terms.empty()) {
        throw std::invalid_argument("loss_total: need at least one term of each kind");
    }
    auto mean_of = [](const std::vector<Tensor>& terms) {
        Tensor acc = terms[0];
        for (size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
        return mul_scalar(acc, 1.0 / static_cast<double>(terms.size()));
    };
    return add(mean_of(phy_terms), mean_of(cyc_terms));
}

}  // namespace drnet
