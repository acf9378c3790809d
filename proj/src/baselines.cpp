#include "drnet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace drnet {

namespace {

constexpr double kPi = std::numbers::pi;

// Spatial averaging: one trace per channel.
std::array<std::vector<double>, 3> channel_traces(const PixelMap& pm) {
    pm.validate();
    if (pm.order != ChannelOrder::Rgb || pm.channels != 3) {
        throw std::invalid_argument("baseline: PixelMap must be 3-channel RGB");
    }
    std::array<std::vector<double>, 3> traces;
    for (int c = 0; c < 3; ++c) {
        traces[static_cast<size_t>(c)].assign(static_cast<size_t>(pm.frames), 0.0);
        for (int r = 0; r < pm.rows; ++r) {
            const double* row = pm.row(c, r);
            for (int t = 0; t < pm.frames; ++t) traces[static_cast<size_t>(c)][static_cast<size_t>(t)] += row[t];
        }
        for (auto& v : traces[static_cast<size_t>(c)]) v /= pm.rows;
    }
    return traces;
}

double window_mean(const std::vector<double>& x, size_t a, size_t b) {
    double acc = 0.0;
    for (size_t i = a; i < b; ++i) acc += x[i];
    return acc / static_cast<double>(b - a);
}

double window_sd(const std::vector<double>& x, size_t a, size_t b) {
    const double m = window_mean(x, a, b);
    double acc = 0.0;
    for (size_t i = a; i < b; ++i) acc += (x[i] - m) * (x[i] - m);
    return std::sqrt(acc / static_cast<double>(b - a));
}

// Shared windowed overlap-add scaffold for chrom/pos. `combine` maps the
// three normalized channel windows onto one pulse window.
template <typename Combine>
BvpSignal windowed_method(const PixelMap& pm, Combine combine) {
    const auto traces = channel_traces(pm);
    const int T = pm.frames;
    const int win = std::max(4, static_cast<int>(std::lround(1.6 * pm.fs)));
    if (T < win) {
        throw std::invalid_argument("baseline: clip shorter than one 1.6 s window (" +
                                    std::to_string(win) + " frames)");
    }
    const int hop = win / 2;

    std::vector<double> out(static_cast<size_t>(T), 0.0);
    std::vector<double> hann(static_cast<size_t>(win));
    for (int i = 0; i < win; ++i) hann[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (win - 1));

    std::vector<size_t> starts;
    for (size_t s = 0; s + static_cast<size_t>(win) <= static_cast<size_t>(T); s += static_cast<size_t>(hop)) {
        starts.push_back(s);
    }
    if (starts.back() + static_cast<size_t>(win) < static_cast<size_t>(T)) {
        starts.push_back(static_cast<size_t>(T - win));  // cover the tail
    }

    std::array<std::vector<double>, 3> norm;
    for (auto& n : norm) n.assign(static_cast<size_t>(win), 0.0);
    std::vector<double> pulse(static_cast<size_t>(win));

    for (const size_t s : starts) {
        for (int c = 0; c < 3; ++c) {
            const double mu = window_mean(traces[static_cast<size_t>(c)], s, s + static_cast<size_t>(win));
            if (mu == 0.0) throw std::invalid_argument("baseline: zero channel mean in a window");
            for (int i = 0; i < win; ++i) {
                norm[static_cast<size_t>(c)][static_cast<size_t>(i)] =
                    traces[static_cast<size_t>(c)][s + static_cast<size_t>(i)] / mu;
            }
        }
        combine(norm, pulse);
        const double pm_mean = window_mean(pulse, 0, static_cast<size_t>(win));
        for (int i = 0; i < win; ++i) {
            out[s + static_cast<size_t>(i)] +=
                (pulse[static_cast<size_t>(i)] - pm_mean) * hann[static_cast<size_t>(i)];
        }
    }

    BvpSignal sig;
    sig.fs = pm.fs;
    sig.samples = std::move(out);
    return sig;
}

}  // namespace

BvpSignal baseline_green(const PixelMap& pm) {
    const auto traces = channel_traces(pm);
    const auto& g = traces[1];
    const int T = pm.frames;
    const double mu = window_mean(g, 0, static_cast<size_t>(T));
    if (mu == 0.0) throw std::invalid_argument("baseline_green: zero mean green trace");

    // moving-average detrend, 1 s centered window with edge truncation
    const int half = std::max(1, static_cast<int>(std::lround(pm.fs))) / 2;
    std::vector<double> detrended(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
        const int a = std::max(0, t - half);
        const int b = std::min(T - 1, t + half);
        double acc = 0.0;
        for (int i = a; i <= b; ++i) acc += g[static_cast<size_t>(i)];
        detrended[static_cast<size_t>(t)] = (g[static_cast<size_t>(t)] - acc / (b - a + 1)) / mu;
    }

    BvpSignal sig;
    sig.fs = pm.fs;
    sig.samples = std::move(detrended);
    const auto filt = butter_bandpass(4, 0.6, 3.0, pm.fs);
    return filter_zero_phase(sig, filt);
}

BvpSignal baseline_chrom(const PixelMap& pm) {
    return windowed_method(pm, [](const std::array<std::vector<double>, 3>& n, std::vector<double>& pulse) {
        const size_t win = pulse.size();
        std::vector<double> xs(win), ys(win);
        for (size_t i = 0; i < win; ++i) {
            xs[i] = 3.0 * n[0][i] - 2.0 * n[1][i];
            ys[i] = 1.5 * n[0][i] + n[1][i] - 1.5 * n[2][i];
        }
        const double sx = window_sd(xs, 0, win);
        const double sy = window_sd(ys, 0, win);
        const double alpha = sy > 1e-12 ? sx / sy : 0.0;
        for (size_t i = 0; i < win; ++i) pulse[i] = xs[i] - alpha * ys[i];
    });
}

BvpSignal baseline_pos(const PixelMap& pm) {
    return windowed_method(pm, [](const std::array<std::vector<double>, 3>& n, std::vector<double>& pulse) {
        const size_t win = pulse.size();
        std::vector<double> s1(win), s2(win);
        for (size_t i = 0; i < win; ++i) {
            s1[i] = n[1][i] - n[2][i];
            s2[i] = n[1][i] + n[2][i] - 2.0 * n[0][i];
        }
        const double sd1 = window_sd(s1, 0, win);
        const double sd2 = window_sd(s2, 0, win);
        const double alpha = sd2 > 1e-12 ? sd1 / sd2 : 0.0;
        for (size_t i = 0; i < win; ++i) pulse[i] = s1[i] + alpha * s2[i];
    });
}

BaselineMethod parse_baseline_method(const std::string& name) {
    if (name == "green") return BaselineMethod::Green;
    if (name == "chrom") return BaselineMethod::Chrom;
    if (name == "pos") return BaselineMethod::Pos;
    throw std::invalid_argument("unknown baseline method '" + name + "' (green|chrom|pos)");
}

BvpSignal run_baseline(BaselineMethod method, const PixelMap& pm) {
    switch (method) {
        case BaselineMethod::Green: return baseline_green(pm);
        case BaselineMethod::Chrom: return baseline_chrom(pm);
        case BaselineMethod::Pos: return baseline_pos(pm);
    }
    throw std::invalid_argument("unknown baseline method");
}

}  // namespace drnet
