#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "drnet/rng.hpp"
#include "drnet/tensor.hpp"

namespace drnet {

// --------------------------------------------------------------------------
// Batch normalization over the channel axis of [B,C,H,W].
// --------------------------------------------------------------------------

struct BatchNormStats {
    Tensor running_mean;  // [C]
    Tensor running_var;   // [C]
};

// Training mode normalizes with batch statistics and updates `stats` in
// place (EMA with `momentum` on the new value, unbiased variance). Eval mode
// normalizes with the running statistics.
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormStats& stats, double eps, double momentum, bool training);

// --------------------------------------------------------------------------
// Adam
// --------------------------------------------------------------------------

struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t t = 0;
    std::vector<std::vector<double>> m;  // first moment, parallel to params
    std::vector<std::vector<double>> v;  // second moment

    void init(const std::vector<Tensor>& params);
};

// One bias-corrected Adam update from the accumulated gradients. Parameters
// without a gradient are treated as having gradient zero. Clears all grads.
void adam_step(std::vector<Tensor>& params, AdamState& state);

// --------------------------------------------------------------------------
// Layers: thin parameter bundles over the tensor ops.
// --------------------------------------------------------------------------

struct Linear {
    Tensor w;  // [I,O]
    Tensor b;  // [O]

    Linear() = default;
    Linear(int in, int out, Rng& rng);
    Tensor forward(const Tensor& x) const { return fully_connected(x, w, b); }
    void collect(std::vector<Tensor>& params) const;
};

struct Conv1xk {
    Tensor w;  // [Cout,Cin,1,k]
    Tensor b;  // [Cout]

    Conv1xk() = default;
    Conv1xk(int cin, int cout, int k, Rng& rng);
    Tensor forward(const Tensor& x) const { return conv2d_1xk(x, w, b); }
    void collect(std::vector<Tensor>& params) const;
};

struct BatchNorm2d {
    Tensor gamma;  // [C]
    Tensor beta;   // [C]
    BatchNormStats stats;
    double eps = 1e-5;
    double momentum = 0.1;

    BatchNorm2d() = default;
    explicit BatchNorm2d(int channels);
    Tensor forward(const Tensor& x, bool training) {
        return batchnorm2d(x, gamma, beta, stats, eps, momentum, training);
    }
    void collect(std::vector<Tensor>& params) const;
};

// Named parameter/state map used by the DRNW serializer. BatchNorm running
// stats ride along as plain named vectors.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

}  // namespace drnet
