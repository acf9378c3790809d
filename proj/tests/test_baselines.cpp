#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "drnet/baselines.hpp"
#include "drnet/synth.hpp"

using namespace drnet;

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

TEST_CASE("green recovers a pulse confined to the green channel") {
    PixelMap pm = PixelMap::zeros(3, 8, 256, 30.0);
    for (int r = 0; r < 8; ++r) {
        for (int t = 0; t < 256; ++t) {
            pm.at(0, r, t) = 90.0;
            pm.at(1, r, t) = 100.0 + std::sin(2.0 * kPi * 1.5 * t / 30.0);
            pm.at(2, r, t) = 80.0;
        }
    }
    const auto pulse = baseline_green(pm);
    CHECK(std::fabs(estimate_hr(pulse) - 90.0) <= 0.9);
}

TEST_CASE("green on a constant map is near zero after detrending") {
    PixelMap pm = PixelMap::zeros(3, 4, 128, 30.0);
    for (auto& v : pm.data) v = 123.0;
    const auto pulse = baseline_green(pm);
    for (double v : pulse.samples) CHECK(std::fabs(v) < 1e-9);
}

TEST_CASE("green is invariant to row permutation") {
    SynthSpec spec;
    spec.frames = 128;
    Rng rng(1);
    const SynthClip clip = gen_clip(spec, 90.0, rng);
    PixelMap permuted = clip.pm;
    for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < spec.n; ++r) {
            const int src = (r * 7 + 3) % spec.n;  // a fixed permutation
            std::copy(clip.pm.row(c, src), clip.pm.row(c, src) + spec.frames, permuted.row(c, r));
        }
    }
    const auto a = baseline_green(clip.pm);
    const auto b = baseline_green(permuted);
    for (int t = 0; t < a.length(); ++t) {
        CHECK(a.samples[static_cast<size_t>(t)] ==
              doctest::Approx(b.samples[static_cast<size_t>(t)]).epsilon(1e-9));
    }
}

TEST_CASE("chrom and pos recover HR on noise-free single-tone clips") {
    SynthSpec spec = SynthSpec::noise_free();
    spec.frames = 256;
    for (double hr : {66.0, 96.0, 132.0}) {
        Rng rng(static_cast<std::uint64_t>(hr));
        const SynthClip clip = gen_clip(spec, hr, rng);
        CHECK(std::fabs(estimate_hr(baseline_chrom(clip.pm)) - hr) <= 0.9);
        CHECK(std::fabs(estimate_hr(baseline_pos(clip.pm)) - hr) <= 0.9);
    }
}

TEST_CASE("chrom and pos reject common-mode distortion that defeats green") {
    SynthSpec spec = SynthSpec::common_mode();
    spec.frames = 256;
    int green_wrong = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed + 100);
        const double hr = 60.0 + 14.0 * static_cast<double>(seed);
        const SynthClip clip = gen_clip(spec, hr, rng);
        CHECK(std::fabs(estimate_hr(baseline_chrom(clip.pm)) - hr) <= 0.9);
        CHECK(std::fabs(estimate_hr(baseline_pos(clip.pm)) - hr) <= 0.9);
        if (std::fabs(estimate_hr(baseline_green(clip.pm)) - hr) > 5.0) ++green_wrong;
    }
    CHECK(green_wrong == 5);  // green locks onto the distortion tone
}

TEST_CASE("pos output power collapses for intensity-only modulation") {
    // equal relative change in all channels, no pulse
    PixelMap intensity = PixelMap::zeros(3, 8, 256, 30.0);
    const double dc[3] = {90.0, 120.0, 70.0};
    for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < 8; ++r) {
            for (int t = 0; t < 256; ++t) {
                intensity.at(c, r, t) = dc[c] * (1.0 + 0.02 * std::sin(2.0 * kPi * 1.3 * t / 30.0));
            }
        }
    }
    SynthSpec spec = SynthSpec::noise_free();
    spec.frames = 256;
    Rng rng(5);
    const SynthClip pulse_clip = gen_clip(spec, 78.0, rng);

    auto power_of = [](const BvpSignal& s) {
        double acc = 0.0;
        for (double v : s.samples) acc += v * v;
        return acc / s.length();
    };
    const double p_intensity = power_of(baseline_pos(intensity));
    const double p_pulse = power_of(baseline_pos(pulse_clip.pm));
    CHECK(p_intensity < 0.01 * p_pulse);
}

TEST_CASE("chrom and pos are invariant to positive rescaling") {
    SynthSpec spec;
    spec.frames = 128;
    Rng rng(6);
    const SynthClip clip = gen_clip(spec, 84.0, rng);
    PixelMap scaled = clip.pm;
    for (auto& v : scaled.data) v *= 3.7;
    for (auto method : {BaselineMethod::Chrom, BaselineMethod::Pos, BaselineMethod::Green}) {
        const auto a = run_baseline(method, clip.pm);
        const auto b = run_baseline(method, scaled);
        for (int t = 0; t < a.length(); ++t) {
            CHECK(a.samples[static_cast<size_t>(t)] ==
                  doctest::Approx(b.samples[static_cast<size_t>(t)]).epsilon(1e-9).scale(1.0));
        }
    }
}

TEST_CASE("baselines validate their inputs") {
    PixelMap pm = PixelMap::zeros(3, 4, 16, 30.0);  // shorter than one 1.6 s window
    for (auto& v : pm.data) v = 100.0;
    CHECK_THROWS_AS(baseline_chrom(pm), std::invalid_argument);
    PixelMap yuv = PixelMap::zeros(3, 4, 128, 30.0);
    for (auto& v : yuv.data) v = 100.0;
    yuv.order = ChannelOrder::Yuv;
    CHECK_THROWS_AS(baseline_green(yuv), std::invalid_argument);
    CHECK_THROWS_AS(parse_baseline_method("ica"), std::invalid_argument);
}
