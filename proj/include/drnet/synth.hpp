#pragma once

#include <string>
#include <vector>

#include "drnet/dsp.hpp"
#include "drnet/pixelmap.hpp"
#include "drnet/rng.hpp"

namespace drnet {

// Synthetic clip generator. Every clip is built additively from a pulse
// component and a noise component at sub-row resolution, so the generated
// maps satisfy pm = pm_p + pm_np by construction and the enlarged map's
// gamma^2-blocks average back to the parent rows.
struct SynthSpec {
    double hr_lo = 42.0, hr_hi = 180.0;  // bpm
    double amp_lo = 0.2, amp_hi = 1.5;   // per-row pulse amplitude
    double dc_lo = 80.0, dc_hi = 180.0;  // per-row mean intensity
    double drift_amp = 2.0;              // slow baseline wander
    double spike_amp = 4.0;              // sustained step changes across row bands
    double noise_sigma = 1.0;            // white noise per sub-row sample
    double common_mode_amp = 0.0;        // in-band intensity tone, relative to DC
    int n = 32;
    int gamma = 2;
    int frames = 256;
    double fs = 30.0;

    void validate() const;

    static SynthSpec noise_free() {
        SynthSpec s;
        s.drift_amp = 0.0;
        s.spike_amp = 0.0;
        s.noise_sigma = 0.0;
        s.common_mode_amp = 0.0;
        return s;
    }
    static SynthSpec noisy() { return SynthSpec{}; }
    static SynthSpec common_mode() {
        SynthSpec s = noise_free();
        s.common_mode_amp = 0.02;
        return s;
    }
};

struct SynthClip {
    PixelMap pm;     // n rows
    PixelMap pm_e;   // n*gamma^2 rows
    PixelMap pm_p;   // pulse component, n rows
    PixelMap pm_np;  // noise component, n rows
    BvpSignal bvp;   // ground-truth waveform with hr_gt set
    double hr_gt = 0.0;
};

// Quasi-periodic pulse waveform: fundamental plus a 0.3-amplitude second
// harmonic and a small smooth frequency jitter, z-scored.
BvpSignal gen_bvp(double hr_bpm, double fs, int frames, Rng& rng);

SynthClip gen_clip(const SynthSpec& spec, double hr_bpm, Rng& rng);

// Writes clips/clip_xxxx.pm.csv, .pme.csv, .bvp.csv plus manifest.csv with
// one "clip_id,trace_path,bvp_path,hr_gt" line per clip. HRs are drawn
// uniformly over the spec range. Byte-identical for a given seed.
void gen_dataset(const std::string& dir, int n_clips, const SynthSpec& spec, std::uint64_t seed);

struct ManifestEntry {
    std::string clip_id;
    std::string trace_path;     // resolved against the dataset dir
    std::string enlarged_path;  // empty when absent
    std::string bvp_path;
    double hr_gt = 0.0;
};

std::vector<ManifestEntry> load_manifest(const std::string& dir);

}  // namespace drnet
