#pragma once

#include <optional>
#include <string>
#include <vector>

namespace drnet {

// 1-D physiological waveform on a uniform grid.
struct BvpSignal {
    std::vector<double> samples;
    double fs = 30.0;                  // Hz
    std::optional<double> hr_gt;       // bpm, must lie in [36,180] when present

    int length() const { return static_cast<int>(samples.size()); }
    void validate() const;
};

BvpSignal load_bvp_csv(const std::string& path);
void save_bvp_csv(const std::string& path, const BvpSignal& sig);

// One second-order section, direct form II transposed, a0 normalized to 1.
struct Biquad {
    double b0, b1, b2;
    double a1, a2;
};

// Cascade of biquads realizing a Butterworth bandpass.
struct BandpassFilter {
    std::vector<Biquad> sections;
    double fs = 0.0;
    double low = 0.0, high = 0.0;

    // |H(e^{j 2 pi f / fs})| of the whole cascade.
    double magnitude(double f) const;
    // All poles strictly inside the unit circle.
    bool stable() const;
};

// Butterworth bandpass of total order `order` (order/2 second-order
// sections), designed from the analog prototype by the bandpass transform
// and the bilinear transform with frequency pre-warping. `order` must be a
// positive multiple of 2; the default 4 gives two sections.
BandpassFilter butter_bandpass(int order, double low, double high, double fs);

// Forward-backward (zero phase) application with odd-reflection padding of
// 3*order samples and steady-state section initial conditions. Requires
// length > 6*order. Effective magnitude response is |H|^2.
BvpSignal filter_zero_phase(const BvpSignal& sig, const BandpassFilter& f);

// Single forward pass, exposed for frequency-response tests.
std::vector<double> filter_forward(const std::vector<double>& x, const BandpassFilter& f);

// Natural cubic spline through (t_i, y_i); t strictly increasing.
class CubicSpline {
public:
    CubicSpline(std::vector<double> t, std::vector<double> y);
    double operator()(double x) const;  // clamped evaluation at the ends

private:
    std::vector<double> t_, y_, m_;  // m_ = second derivatives at knots
};

// Natural-cubic-spline resampling onto the uniform target grid spanning the
// same time range. hr_gt is carried over unchanged.
BvpSignal resample_cubic(const BvpSignal& sig, double target_fs = 30.0);

struct PsdResult {
    std::vector<double> freqs;  // Hz, k*fs/nfft for k = 0..nfft/2
    std::vector<double> power;  // one-sided density
};

// Periodogram: mean removal, Hann window, zero-pad to nfft (power of two,
// nfft >= length), |DFT|^2 / (fs * window energy), one-sided.
PsdResult psd(const BvpSignal& sig, int nfft);

// 60 * argmax frequency of the PSD restricted to `band` (Hz).
double estimate_hr(const BvpSignal& sig, double band_lo = 0.6, double band_hi = 3.0,
                   int nfft = 2048);

// Sample Pearson correlation; lengths must match and be >= 2, inputs
// non-constant.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// In-place radix-2 FFT helpers (re/im are modified). n must be a power of two.
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

}  // namespace drnet
