#pragma once

#include <string>
#include <vector>

#include "drnet/dsp.hpp"
#include "drnet/nn.hpp"
#include "drnet/rng.hpp"
#include "drnet/tensor.hpp"

namespace drnet {

// Model sizes. The defaults are the full-size network; tests and the
// synthetic experiment shrink them through this config.
struct ModelConfig {
    int rows = 32;       // STMap rows fed to the estimator
    int frames = 256;    // clip length T
    int stem_width = 32;
    std::vector<int> block_widths{64, 64, 64};
    int sab_reduction = 4;
    int kernel = 3;
    int ae_width = 8;     // first encoder stage channels
    int ae_latent = 16;   // latent channels at T/8
    int ae_kernel = 5;    // wider than the estimator kernel to smooth upsampling

    void validate() const;
};

// Channel + row gating with a residual combination:
// y = x + x (.) w_channel (.) w_row.
struct SabBlock {
    int channels = 0;
    int rows = 0;
    int reduction = 4;
    Linear fc1, fc2;   // channel gate C -> C/r -> C
    Linear fc_row;     // row gate n -> n

    SabBlock() = default;
    SabBlock(int channels, int rows, int reduction, Rng& rng);
    Tensor forward(const Tensor& x) const;
    void collect(std::vector<Tensor>& params) const;
    void named(NamedTensors& out, const std::string& prefix) const;
    std::int64_t param_count() const;
};

// rPPG estimator: conv stem, attention-gated conv blocks, row pooling and a
// single-channel head emitting one sample per input frame. Input is a raw
// [B,3,n,T] STMap batch in [0,255]; the value scaling to [-1,1] happens
// inside forward().
struct EstimatorEp {
    ModelConfig cfg;
    Conv1xk stem;
    BatchNorm2d stem_bn;
    std::vector<Conv1xk> convs;
    std::vector<BatchNorm2d> bns;
    std::vector<SabBlock> sabs;
    Conv1xk head;

    EstimatorEp() = default;
    EstimatorEp(const ModelConfig& cfg, Rng& rng);
    // [B,3,n,T] -> [B,T]; training toggles batch-norm statistics.
    Tensor forward(const Tensor& stmap, bool training);
    void collect(std::vector<Tensor>& params) const;
    void named(NamedTensors& out) const;
};

// 1-D conv autoencoder over BVP waveforms: three conv+pool stages down to
// ae_latent x T/8, mirrored decoder back to T samples.
struct SignalAutoencoder {
    ModelConfig cfg;
    std::vector<Conv1xk> enc;
    std::vector<Conv1xk> dec;

    SignalAutoencoder() = default;
    SignalAutoencoder(const ModelConfig& cfg, Rng& rng);
    Tensor encode(const Tensor& x) const;  // [B,T] -> [B,latent,1,T/8]
    Tensor decode(const Tensor& z) const;  // -> [B,T]
    Tensor forward(const Tensor& x) const { return decode(encode(x)); }
    void collect(std::vector<Tensor>& params) const;
    void named(NamedTensors& out) const;
};

// Physiological map generator: frozen autoencoder cleans the input BVP into
// a waveform, a trainable per-(channel,row) affine head modulates it into a
// [C,n,T] map. Amplitudes stay positive through a softplus parameterization.
struct GeneratorGp {
    ModelConfig cfg;
    SignalAutoencoder ae;
    Tensor alpha;   // [3,n] pre-softplus amplitudes
    Tensor offset;  // [3,n]

    GeneratorGp() = default;
    GeneratorGp(const ModelConfig& cfg, Rng& rng);
    // Autoencoder pass of a z-scored BVP clip; constant w.r.t. DRNet training.
    Tensor waveform(const Tensor& s) const;  // [T] -> [T]
    // pm_p[c,i,t] = softplus(alpha[c,i]) * w[t] + offset[c,i].
    Tensor modulate(const Tensor& w) const;  // [T] -> [3,n,T]
    Tensor forward(const Tensor& s) const { return modulate(waveform(s)); }
    // Only the modulation head trains inside DRNet.
    void collect(std::vector<Tensor>& params) const;
    void named(NamedTensors& out) const;
};

struct PretrainResult {
    double train_mse = 0.0;
    double holdout_mse = 0.0;
    int epochs = 0;
};

// Trains the autoencoder to reconstruct z-scored BVP signals (MSE, Adam).
// `signals` must be normalized to zero mean, unit variance. Throws on
// divergence (non-finite loss).
PretrainResult pretrain_autoencoder(SignalAutoencoder& ae, const std::vector<BvpSignal>& train,
                                    const std::vector<BvpSignal>& holdout, int epochs, double lr,
                                    int batch, Rng& rng);

// z-score helper shared by training and generation paths.
std::vector<double> zscore(const std::vector<double>& x);

}  // namespace drnet
