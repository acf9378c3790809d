#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drnet/dsp.hpp"
#include "drnet/losses.hpp"
#include "drnet/metrics.hpp"
#include "drnet/models.hpp"
#include "drnet/patch_crop.hpp"
#include "drnet/pixelmap.hpp"
#include "drnet/synth.hpp"

namespace drnet {

struct TrainConfig {
    double lr = 1e-4;
    int batch = 32;      // clips per optimizer step (batch/2 pairs)
    int epochs = 40;
    int frames = 256;    // clip length T
    int clip_step = 10;  // stride between training windows
    int gamma = 2;
    double rho = 0.5;    // Patch Cropping probability; 0 disables PC
    std::uint64_t seed = 0;
    double band_lo = 0.6;
    double band_hi = 3.0;
    double fs = 30.0;
    int nfft = 2048;

    void validate() const;
};

// One training/eval sample.
struct ClipRecord {
    PixelMap pm;                     // 3 x n x T
    std::optional<PixelMap> pm_e;    // 3 x n*gamma^2 x T, when available
    BvpSignal s_gt;                  // preprocessed waveform, length T
    double hr_gt = 0.0;              // bpm, from estimate_hr on s_gt
    std::string source_id;
};

// Sliding windows [k*step, k*step+T) over a trace and its aligned BVP.
// Per-clip ground-truth HR comes from the PSD argmax of the window.
std::vector<ClipRecord> make_clips(const PixelMap& trace, const BvpSignal& bvp, int frames,
                                   int step, const PixelMap* trace_enlarged = nullptr,
                                   const std::string& source_id = "");

// Manifest loading: resamples the BVP to the trace rate when needed,
// zero-phase bandpass, then windows every source with make_clips.
std::vector<ClipRecord> load_clips(const std::vector<ManifestEntry>& entries,
                                   const TrainConfig& cfg);

// Eq. 3 plumbing on plain maps.
PixelMap decompose(const PixelMap& pm, const PixelMap& pm_p);
std::pair<PixelMap, PixelMap> cross_reconstruct(const PixelMap& pm_p1, const PixelMap& pm_np2,
                                                const PixelMap& pm_p2, const PixelMap& pm_np1);

struct DrnetModel {
    ModelConfig mcfg;
    EstimatorEp ep;
    GeneratorGp gp;

    DrnetModel() = default;
    DrnetModel(const ModelConfig& cfg, Rng& rng);
    std::vector<Tensor> trainable_params();  // estimator + modulation head; autoencoder stays frozen
    NamedTensors named() const;
    void load(const NamedTensors& src);
    void load_autoencoder(const NamedTensors& src);
};

struct EpochLog {
    int epoch = 0;
    double loss_total = 0.0;
    double loss_phy = 0.0;
    double loss_cyc = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
};

// Scalar loss components of one pair step (returned for logging).
struct StepLoss {
    double total = 0.0, phy = 0.0, cyc = 0.0;
};

// Full decomposition/reconstruction pass for one clip pair: generate pm_p,
// decompose, cross-reconstruct, magnify all six maps, PC on the two real
// STMaps, six estimator predictions, L_phy + L_cyc, backward. Gradients
// accumulate scaled by `grad_scale`; the caller owns the Adam step.
StepLoss train_step(DrnetModel& model, const ClipRecord& a, const ClipRecord& b,
                    const CycleLoss& cyc_plan, const TrainConfig& cfg, Rng& rng,
                    double grad_scale = 1.0);

// Epoch loop with seeded random pairing, gradient accumulation over
// batch/2 pairs per Adam step, per-epoch loss logging and optional
// per-epoch DRNW checkpoints.
TrainResult train(DrnetModel& model, const std::vector<ClipRecord>& clips, const TrainConfig& cfg,
                  const std::string& checkpoint_dir = "");

struct EvalResult {
    std::vector<std::string> source_ids;
    std::vector<double> pred_hr;  // per source, mean over its clips
    std::vector<double> gt_hr;
    MetricReport metrics;
};

// Runs the estimator on the ground-truth STMaps only (no PC), HR per clip
// via the band-limited PSD argmax, mean-of-clip-HRs per source. Clips are
// independent; jobs > 1 fans the forward passes over worker threads.
EvalResult evaluate(DrnetModel& model, const std::vector<ClipRecord>& clips,
                    const TrainConfig& cfg, int jobs = 1);

std::string training_log_csv(const std::vector<EpochLog>& log);

}  // namespace drnet
