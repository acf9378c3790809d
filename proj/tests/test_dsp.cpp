#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <vector>

#include "drnet/dsp.hpp"
#include "drnet/io_util.hpp"
#include "drnet/rng.hpp"

using namespace drnet;

namespace {

constexpr double kPi = std::numbers::pi;

BvpSignal sine(double freq_hz, double fs, int n, double amp = 1.0, double phase = 0.0) {
    BvpSignal s;
    s.fs = fs;
    s.samples.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        s.samples[static_cast<size_t>(i)] = amp * std::sin(2.0 * kPi * freq_hz * i / fs + phase);
    }
    return s;
}

std::filesystem::path temp_file(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / "drnet_dsp_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

// Design reference: scipy.signal.butter(2, [0.6, 3.0], btype='band', fs=30),
// i.e. the same 4-pole bandpass, evaluated with freqz at fixed frequencies.
TEST_CASE("butter_bandpass matches the reference design oracle") {
    const auto f = butter_bandpass(4, 0.6, 3.0, 30.0);
    REQUIRE(f.sections.size() == 2);
    CHECK(f.stable());
    const std::vector<std::pair<double, double>> oracle{
        {0.05, 0.0045157491969160368},
        {0.2, 0.075063233710420382},
        {0.4, 0.32645400680105119},
        {0.6, 0.70710678118655235},
        {0.9, 0.977486929407547},
        {1.342, 0.99999999098841885},
        {2.0, 0.9810836873059321},
        {2.5, 0.88170584805230168},
        {3.0, 0.70710678118654835},
        {4.0, 0.39542717707155639},
        {6.0, 0.13936193542831013},
        {8.0, 0.057450265915593615},
        {10.0, 0.023191031507376433},
        {12.0, 0.0072784079196491994},
        {14.0, 0.00075867492881870671},
    };
    for (const auto& [freq, mag] : oracle) {
        CHECK(f.magnitude(freq) == doctest::Approx(mag).epsilon(1e-9));
    }
}

TEST_CASE("butter_bandpass rejects bad bands") {
    CHECK_THROWS_AS(butter_bandpass(4, 0.6, 16.0, 30.0), std::invalid_argument);
    CHECK_THROWS_AS(butter_bandpass(4, 3.0, 0.6, 30.0), std::invalid_argument);
    CHECK_THROWS_AS(butter_bandpass(3, 0.6, 3.0, 30.0), std::invalid_argument);
}

TEST_CASE("bandpass rejects DC") {
    const auto f = butter_bandpass(4, 0.6, 3.0, 30.0);
    std::vector<double> dc(400, 1.0);
    const auto y = filter_forward(dc, f);
    // steady state: last quarter
    double peak = 0.0;
    for (size_t i = 300; i < y.size(); ++i) peak = std::max(peak, std::fabs(y[i]));
    CHECK(peak < 1e-3);
}

TEST_CASE("passband gain at 1.3 Hz within [0.7,1.0] after transient") {
    const auto f = butter_bandpass(4, 0.6, 3.0, 30.0);
    const auto sig = sine(1.3, 30.0, 900);
    const auto y = filter_forward(sig.samples, f);
    double peak = 0.0;
    for (size_t i = 600; i < y.size(); ++i) peak = std::max(peak, std::fabs(y[i]));
    CHECK(peak >= 0.7);
    CHECK(peak <= 1.0 + 1e-6);
}

TEST_CASE("stopband attenuation at 10 Hz is at least 20 dB") {
    const auto f = butter_bandpass(4, 0.6, 3.0, 30.0);
    const auto sig = sine(10.0, 30.0, 900);
    const auto y = filter_forward(sig.samples, f);
    double peak = 0.0;
    for (size_t i = 600; i < y.size(); ++i) peak = std::max(peak, std::fabs(y[i]));
    CHECK(20.0 * std::log10(1.0 / peak) >= 20.0);
}

TEST_CASE("filter_zero_phase maps zeros to zeros and validates length") {
    const auto f = butter_bandpass(4, 0.6, 3.0, 30.0);
    BvpSignal z;
    z.fs = 30.0;
    z.samples.assign(100, 0.0);
    const auto y = filter_zero_phase(z, f);
    for (double v : y.samples) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
    BvpSignal tiny;
    tiny.fs = 30.0;
    tiny.samples.assign(24, 1.0);
    CHECK_THROWS_AS(filter_zero_phase(tiny, f), std::invalid_argument);
}

TEST_CASE("filter_zero_phase keeps the peak PSD frequency of an in-band tone") {
    const auto f = butter_bandpass(4, 0.6, 3.0, 30.0);
    const auto sig = sine(1.7, 30.0, 256);
    const auto y = filter_zero_phase(sig, f);
    const double hr_in = estimate_hr(sig);
    const double hr_out = estimate_hr(y);
    CHECK(hr_out == doctest::Approx(hr_in).epsilon(1e-12));
}

TEST_CASE("zero-phase impulse response is symmetric about the impulse") {
    const auto f = butter_bandpass(4, 0.6, 3.0, 30.0);
    BvpSignal imp;
    imp.fs = 30.0;
    imp.samples.assign(801, 0.0);
    imp.samples[400] = 1.0;
    const auto y = filter_zero_phase(imp, f);
    for (int d = 1; d <= 350; ++d) {
        CHECK(std::fabs(y.samples[static_cast<size_t>(400 + d)] -
                        y.samples[static_cast<size_t>(400 - d)]) < 1e-9);
    }
}

TEST_CASE("double zero-phase pass approximates squared magnitude on a tone") {
    const auto f = butter_bandpass(4, 0.6, 3.0, 30.0);
    const auto sig = sine(2.5, 30.0, 2048);
    const auto once = filter_zero_phase(sig, f);
    const auto twice = filter_zero_phase(once, f);
    auto mid_amp = [](const BvpSignal& s) {
        double peak = 0.0;
        for (int i = s.length() / 4; i < 3 * s.length() / 4; ++i) {
            peak = std::max(peak, std::fabs(s.samples[static_cast<size_t>(i)]));
        }
        return peak;
    };
    const double g1 = mid_amp(once);        // |H|^2 at 2.5 Hz
    const double g2 = mid_amp(twice);       // |H|^4
    CHECK(g2 == doctest::Approx(g1 * g1).epsilon(0.01));
}

TEST_CASE("resample_cubic reproduces a linear ramp exactly") {
    BvpSignal s;
    s.fs = 25.0;
    for (int i = 0; i < 100; ++i) s.samples.push_back(0.3 * i - 2.0);
    const auto r = resample_cubic(s, 30.0);
    CHECK(r.fs == 30.0);
    for (int j = 0; j < r.length(); ++j) {
        const double t = j / 30.0;
        CHECK(r.samples[static_cast<size_t>(j)] == doctest::Approx(0.3 * (t * 25.0) - 2.0).epsilon(1e-9));
    }
}

TEST_CASE("resample_cubic at identity fs preserves samples") {
    Rng rng(4);
    BvpSignal s;
    s.fs = 30.0;
    for (int i = 0; i < 64; ++i) s.samples.push_back(rng.normal());
    const auto r = resample_cubic(s, 30.0);
    REQUIRE(r.length() == s.length());
    for (int i = 0; i < s.length(); ++i) {
        CHECK(r.samples[static_cast<size_t>(i)] == doctest::Approx(s.samples[static_cast<size_t>(i)]).epsilon(1e-12));
    }
}

TEST_CASE("resample_cubic 1 Hz sinusoid 25->30 Hz within 1e-3 of analytic") {
    const auto s = sine(1.0, 25.0, 250);
    const auto r = resample_cubic(s, 30.0);
    double worst = 0.0;
    for (int j = 0; j < r.length(); ++j) {
        const double t = j / 30.0;
        worst = std::max(worst, std::fabs(r.samples[static_cast<size_t>(j)] - std::sin(2.0 * kPi * t)));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("resample then inverse-resample returns original for band-limited input") {
    const auto s = sine(1.2, 25.0, 250);
    const auto up = resample_cubic(s, 30.0);
    const auto back = resample_cubic(up, 25.0);
    double worst = 0.0;
    const int n = std::min(back.length(), s.length());
    for (int i = 0; i < n; ++i) {
        worst = std::max(worst, std::fabs(back.samples[static_cast<size_t>(i)] - s.samples[static_cast<size_t>(i)]));
    }
    CHECK(worst < 1e-2);
}

TEST_CASE("CubicSpline validates input") {
    CHECK_THROWS_AS(CubicSpline({0, 1, 2}, {0, 1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(CubicSpline({0, 2, 1, 3}, {0, 1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(CubicSpline({0, 1, 2, 3}, {0, 1, 2}), std::invalid_argument);
}

TEST_CASE("psd of a constant signal is zero") {
    BvpSignal s;
    s.fs = 30.0;
    s.samples.assign(128, 3.7);
    const auto r = psd(s, 256);
    for (double p : r.power) CHECK(p == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("psd peak of 1.5 Hz tone lands within one bin") {
    const auto s = sine(1.5, 30.0, 256);
    const auto r = psd(s, 2048);
    size_t best = 0;
    for (size_t k = 1; k < r.power.size(); ++k) {
        if (r.power[k] > r.power[best]) best = k;
    }
    CHECK(std::fabs(r.freqs[best] - 1.5) <= 30.0 / 2048.0 + 1e-12);
}

TEST_CASE("psd satisfies Parseval within 1%") {
    Rng rng(11);
    BvpSignal s;
    s.fs = 30.0;
    for (int i = 0; i < 256; ++i) s.samples.push_back(rng.normal() + 0.4 * std::sin(2.0 * kPi * 1.1 * i / 30.0));
    const auto r = psd(s, 2048);
    double mean = 0.0;
    for (double v : s.samples) mean += v;
    mean /= s.length();
    // time-domain energy of the windowed, mean-removed signal over window energy
    double num = 0.0, den = 0.0;
    for (int i = 0; i < s.length(); ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (s.length() - 1));
        const double xw = (s.samples[static_cast<size_t>(i)] - mean) * w;
        num += xw * xw;
        den += w * w;
    }
    const double time_side = num / den;
    double freq_side = 0.0;
    const double df = 30.0 / 2048.0;
    for (double p : r.power) freq_side += p * df;
    CHECK(freq_side == doctest::Approx(time_side).epsilon(0.01));
}

TEST_CASE("psd validates nfft") {
    const auto s = sine(1.0, 30.0, 100);
    CHECK_THROWS_AS(psd(s, 64), std::invalid_argument);
    CHECK_THROWS_AS(psd(s, 100), std::invalid_argument);
}

TEST_CASE("estimate_hr on pure tones") {
    const auto s90 = sine(1.5, 30.0, 256);
    CHECK(std::fabs(estimate_hr(s90) - 90.0) <= 0.9);
    const auto s36 = sine(0.6, 30.0, 256);
    CHECK(std::fabs(estimate_hr(s36) - 36.0) <= 0.9);
}

TEST_CASE("estimate_hr with white noise at 10 dB SNR stays within one bin of noise-free") {
    const double f0 = 1.23;
    const auto clean = sine(f0, 30.0, 256);
    const double clean_hr = estimate_hr(clean);
    const double sig_pow = 0.5;                      // unit-amplitude sine
    const double noise_std = std::sqrt(sig_pow / 10.0);  // SNR 10 dB
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        BvpSignal noisy = clean;
        for (auto& v : noisy.samples) v += rng.normal(0.0, noise_std);
        CHECK(std::fabs(estimate_hr(noisy) - clean_hr) <= 60.0 * 30.0 / 2048.0 + 1e-9);
    }
}

TEST_CASE("estimate_hr invariant to positive scaling and sign flip") {
    const auto s = sine(2.1, 30.0, 256);
    const double base = estimate_hr(s);
    BvpSignal scaled = s;
    for (auto& v : scaled.samples) v *= 4.2;
    BvpSignal flipped = s;
    for (auto& v : flipped.samples) v = -v;
    CHECK(estimate_hr(scaled) == doctest::Approx(base));
    CHECK(estimate_hr(flipped) == doctest::Approx(base));
}

TEST_CASE("estimate_hr rejects an empty band") {
    const auto s = sine(1.0, 30.0, 256);
    CHECK_THROWS_AS(estimate_hr(s, 3.0, 3.001, 2048), std::invalid_argument);
}

TEST_CASE("pearson basics") {
    std::vector<double> x{1, 2, 4, 3, 7};
    std::vector<double> nx;
    std::vector<double> ax;
    for (double v : x) {
        nx.push_back(-v);
        ax.push_back(2.0 * v + 3.0);
    }
    CHECK(pearson(x, x) == doctest::Approx(1.0));
    CHECK(pearson(x, nx) == doctest::Approx(-1.0));
    CHECK(pearson(x, ax) == doctest::Approx(1.0));
    std::vector<double> c{2, 2, 2, 2, 2};
    CHECK_THROWS_AS(pearson(x, c), std::invalid_argument);
    std::vector<double> shorter{1, 2};
    CHECK_THROWS_AS(pearson(x, shorter), std::invalid_argument);
}

TEST_CASE("bvp csv round trip") {
    BvpSignal s = sine(1.4, 30.0, 64);
    s.hr_gt = 84.0;
    const auto path = temp_file("roundtrip.bvp.csv");
    save_bvp_csv(path.string(), s);
    const auto r = load_bvp_csv(path.string());
    REQUIRE(r.length() == s.length());
    CHECK(r.fs == s.fs);
    REQUIRE(r.hr_gt.has_value());
    CHECK(*r.hr_gt == 84.0);
    for (int i = 0; i < s.length(); ++i) {
        CHECK(r.samples[static_cast<size_t>(i)] == s.samples[static_cast<size_t>(i)]);
    }
    CHECK_THROWS_AS(load_bvp_csv("/nonexistent/missing.bvp.csv"), IoError);
}
