#include "drnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "drnet/io_util.hpp"

namespace drnet {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

void SynthSpec::validate() const {
    if (!(36.0 <= hr_lo && hr_lo < hr_hi && hr_hi <= 180.0)) {
        throw std::invalid_argument("SynthSpec: hr range must lie within [36,180]");
    }
    if (!(0.0 < amp_lo && amp_lo <= amp_hi)) throw std::invalid_argument("SynthSpec: bad amp range");
    if (!(0.0 < dc_lo && dc_lo <= dc_hi)) throw std::invalid_argument("SynthSpec: bad dc range");
    if (drift_amp < 0 || spike_amp < 0 || noise_sigma < 0 || common_mode_amp < 0) {
        throw std::invalid_argument("SynthSpec: noise amplitudes must be non-negative");
    }
    if (n <= 0 || gamma < 1 || frames <= 0 || fs <= 0) {
        throw std::invalid_argument("SynthSpec: bad geometry");
    }
}

BvpSignal gen_bvp(double hr_bpm, double fs, int frames, Rng& rng) {
    const double f0 = hr_bpm / 60.0;
    if (f0 < 0.6 || f0 > 3.0) {
        throw std::invalid_argument("gen_bvp: hr " + std::to_string(hr_bpm) + " bpm outside the band");
    }
    // smooth frequency jitter through a few spline knots, max ~0.3% deviation
    const int knots = 5;
    std::vector<double> kt(knots), kv(knots);
    for (int i = 0; i < knots; ++i) {
        kt[static_cast<size_t>(i)] = static_cast<double>(i) * (frames - 1) / (knots - 1);
        kv[static_cast<size_t>(i)] = rng.uniform(-0.003, 0.003);
    }
    const CubicSpline jitter(kt, kv);
    const double phi2 = rng.uniform(0.0, 2.0 * kPi);

    BvpSignal s;
    s.fs = fs;
    s.hr_gt = hr_bpm;
    s.samples.resize(static_cast<size_t>(frames));
    double phase = rng.uniform(0.0, 2.0 * kPi);
    for (int t = 0; t < frames; ++t) {
        s.samples[static_cast<size_t>(t)] = std::sin(phase) + 0.3 * std::sin(2.0 * phase + phi2);
        phase += 2.0 * kPi * f0 * (1.0 + jitter(t)) / fs;
    }
    // z-score (unit-normalized)
    double mean = 0.0;
    for (double v : s.samples) mean += v;
    mean /= frames;
    double var = 0.0;
    for (double v : s.samples) var += (v - mean) * (v - mean);
    var /= frames;
    const double inv = 1.0 / std::sqrt(var + 1e-12);
    for (auto& v : s.samples) v = (v - mean) * inv;
    return s;
}

SynthClip gen_clip(const SynthSpec& spec, double hr_bpm, Rng& rng) {
    spec.validate();
    const int T = spec.frames;
    const int n_e = spec.n * spec.gamma * spec.gamma;
    const int g2 = spec.gamma * spec.gamma;

    SynthClip clip;
    clip.hr_gt = hr_bpm;
    clip.bvp = gen_bvp(hr_bpm, spec.fs, T, rng);
    const auto& s = clip.bvp.samples;

    // per-sub-row pulse amplitudes and DC levels; channel ratios mimic the
    // relative pulsatile strength of R, G, B
    const double ratio[3] = {0.5, 1.0, 0.4};
    std::vector<double> amp(static_cast<size_t>(3) * n_e), dc(static_cast<size_t>(3) * n_e);
    for (int ie = 0; ie < n_e; ++ie) {
        const double base = rng.uniform(spec.amp_lo, spec.amp_hi);
        for (int c = 0; c < 3; ++c) {
            amp[static_cast<size_t>(c) * n_e + ie] = ratio[c] * base * (1.0 + 0.15 * rng.uniform(-1.0, 1.0));
            dc[static_cast<size_t>(c) * n_e + ie] = rng.uniform(spec.dc_lo, spec.dc_hi);
        }
    }

    // slow drift shared in time, scaled per (channel, sub-row)
    std::vector<double> drift_t(static_cast<size_t>(T), 0.0);
    if (spec.drift_amp > 0.0) {
        const int knots = 4;
        std::vector<double> kt(knots), kv(knots);
        for (int i = 0; i < knots; ++i) {
            kt[static_cast<size_t>(i)] = static_cast<double>(i) * (T - 1) / (knots - 1);
            kv[static_cast<size_t>(i)] = rng.normal();
        }
        const CubicSpline d(kt, kv);
        for (int t = 0; t < T; ++t) drift_t[static_cast<size_t>(t)] = d(t);
    }
    std::vector<double> drift_gain(static_cast<size_t>(3) * n_e, 0.0);
    if (spec.drift_amp > 0.0) {
        for (auto& g : drift_gain) g = spec.drift_amp * rng.uniform(0.5, 1.5);
    }

    // sparse sustained steps over contiguous sub-row bands
    struct Spike {
        int t0, r0, r1;
        double level;
    };
    std::vector<Spike> spikes;
    if (spec.spike_amp > 0.0) {
        const int count = static_cast<int>(rng.uniform_int(0, 3));
        for (int i = 0; i < count; ++i) {
            Spike sp;
            sp.t0 = static_cast<int>(rng.uniform_int(T / 8, T - T / 8));
            sp.r0 = static_cast<int>(rng.uniform_int(0, n_e - 1));
            sp.r1 = std::min(n_e, sp.r0 + 1 + static_cast<int>(rng.uniform_int(0, n_e / 4)));
            sp.level = spec.spike_amp * rng.uniform(-1.0, 1.0);
            spikes.push_back(sp);
        }
    }

    // in-band common-mode intensity tone, kept away from the pulse rate
    std::vector<double> cm(static_cast<size_t>(T), 0.0);
    if (spec.common_mode_amp > 0.0) {
        const double f_hr = hr_bpm / 60.0;
        double f_cm = 0.0;
        do {
            f_cm = rng.uniform(0.7, 2.9);
        } while (std::fabs(f_cm - f_hr) < 0.3);
        const double phase = rng.uniform(0.0, 2.0 * kPi);
        for (int t = 0; t < T; ++t) {
            cm[static_cast<size_t>(t)] = spec.common_mode_amp * std::sin(2.0 * kPi * f_cm * t / spec.fs + phase);
        }
    }

    // assemble the enlarged components
    PixelMap pm_e_p = PixelMap::zeros(3, n_e, T, spec.fs);
    PixelMap pm_e_np = PixelMap::zeros(3, n_e, T, spec.fs);
    for (int c = 0; c < 3; ++c) {
        for (int ie = 0; ie < n_e; ++ie) {
            const double a = amp[static_cast<size_t>(c) * n_e + ie];
            const double d0 = dc[static_cast<size_t>(c) * n_e + ie];
            const double dg = drift_gain[static_cast<size_t>(c) * n_e + ie];
            double* p = pm_e_p.row(c, ie);
            double* np = pm_e_np.row(c, ie);
            for (int t = 0; t < T; ++t) {
                p[t] = a * s[static_cast<size_t>(t)];
                double v = d0 + dg * drift_t[static_cast<size_t>(t)] + d0 * cm[static_cast<size_t>(t)];
                if (spec.noise_sigma > 0.0) v += rng.normal(0.0, spec.noise_sigma);
                np[t] = v;
            }
        }
    }
    for (const auto& sp : spikes) {
        for (int c = 0; c < 3; ++c) {
            for (int ie = sp.r0; ie < sp.r1; ++ie) {
                double* np = pm_e_np.row(c, ie);
                for (int t = sp.t0; t < T; ++t) np[t] += sp.level;
            }
        }
    }

    // parent components are the gamma^2-block means; pm is their exact sum
    clip.pm_p = PixelMap::zeros(3, spec.n, T, spec.fs);
    clip.pm_np = PixelMap::zeros(3, spec.n, T, spec.fs);
    clip.pm = PixelMap::zeros(3, spec.n, T, spec.fs);
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < spec.n; ++i) {
            double* pp = clip.pm_p.row(c, i);
            double* pn = clip.pm_np.row(c, i);
            double* pa = clip.pm.row(c, i);
            for (int t = 0; t < T; ++t) {
                double accp = 0.0, accn = 0.0;
                for (int j = 0; j < g2; ++j) {
                    accp += pm_e_p.at(c, i * g2 + j, t);
                    accn += pm_e_np.at(c, i * g2 + j, t);
                }
                pp[t] = accp / g2;
                pa[t] = pp[t] + accn / g2;
                // store the noise as pm - pm_p so the decomposition is exact
                // down to the last bit
                pn[t] = pa[t] - pp[t];
            }
        }
    }
    clip.pm_e = PixelMap::zeros(3, n_e, T, spec.fs);
    for (size_t i = 0; i < clip.pm_e.data.size(); ++i) {
        clip.pm_e.data[i] = pm_e_p.data[i] + pm_e_np.data[i];
    }
    return clip;
}

// --------------------------------------------------------------------------
// Dataset directory
// --------------------------------------------------------------------------

void gen_dataset(const std::string& dir, int n_clips, const SynthSpec& spec, std::uint64_t seed) {
    if (n_clips < 2) throw std::invalid_argument("gen_dataset: need at least 2 clips");
    spec.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "clips", ec);
    if (ec) throw IoError("cannot create dataset dir " + dir + ": " + ec.message());

    Rng rng(seed);
    std::ostringstream manifest;
    for (int i = 0; i < n_clips; ++i) {
        const double hr = rng.uniform(spec.hr_lo, spec.hr_hi);
        Rng clip_rng = rng.fork(static_cast<std::uint64_t>(i) + 1);
        const SynthClip clip = gen_clip(spec, hr, clip_rng);

        char id[32];
        std::snprintf(id, sizeof(id), "clip_%04d", i);
        const std::string pm_rel = std::string("clips/") + id + ".pm.csv";
        const std::string pme_rel = std::string("clips/") + id + ".pme.csv";
        const std::string bvp_rel = std::string("clips/") + id + ".bvp.csv";
        save_trace_csv((fs::path(dir) / pm_rel).string(), clip.pm);
        save_trace_csv((fs::path(dir) / pme_rel).string(), clip.pm_e);
        save_bvp_csv((fs::path(dir) / bvp_rel).string(), clip.bvp);
        manifest << id << ',' << pm_rel << ',' << bvp_rel << ',' << fmt_double(clip.hr_gt) << "\n";
    }
    write_text_file((fs::path(dir) / "manifest.csv").string(), manifest.str());
}

std::vector<ManifestEntry> load_manifest(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = fs::path(dir) / "manifest.csv";
    if (!fs::exists(manifest_path)) {
        throw IoError("manifest not found: " + manifest_path.string());
    }
    const std::string text = read_text_file(manifest_path.string());
    std::istringstream in(text);
    std::string line;
    std::vector<ManifestEntry> entries;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto parts = split(t, ',');
        if (parts.size() != 4) {
            throw IoError(manifest_path.string() + ":" + std::to_string(lineno) +
                          ": expected 'clip_id,trace_path,bvp_path,hr_gt'");
        }
        ManifestEntry e;
        e.clip_id = trim(parts[0]);
        e.trace_path = (fs::path(dir) / trim(parts[1])).string();
        e.bvp_path = (fs::path(dir) / trim(parts[2])).string();
        e.hr_gt = parse_double(parts[3], "manifest hr_gt");
        // enlarged map rides next to the trace by naming convention
        std::string cand = trim(parts[1]);
        const size_t pos = cand.rfind(".pm.csv");
        if (pos != std::string::npos) {
            cand.replace(pos, 7, ".pme.csv");
            const fs::path pme = fs::path(dir) / cand;
            if (fs::exists(pme)) e.enlarged_path = pme.string();
        }
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw IoError(manifest_path.string() + ": no clips listed");
    return entries;
}

}  // namespace drnet
