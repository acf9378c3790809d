#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "drnet/rng.hpp"

namespace drnet {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until touched by backward / ensure_grad
    bool requires_grad = false;
    // Captures shared_ptrs to the parent nodes, so the graph stays alive as
    // long as someone holds the output.
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

// Value-semantic handle to an N-d double tensor. Copies share storage;
// mutation through data_mut() is reserved for parameter init and optimizer
// updates, never for tensors already recorded on a tape.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    // i.i.d. N(0, stddev^2) entries.
    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int axis) const { return node_->shape[static_cast<size_t>(axis)]; }
    int ndim() const { return static_cast<int>(node_->shape.size()); }
    std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }

    std::span<const double> data() const { return node_->value; }
    std::span<double> data_mut() { return node_->value; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool has_grad() const { return node_ && !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> grad_mut() { node_->ensure_grad(); return node_->grad; }
    void zero_grad() { if (node_) node_->grad.clear(); }

    double item() const;
    double at(std::initializer_list<int> idx) const;

    // Identity of the underlying node; used by Tape and tests.
    detail::Node* node() const { return node_.get(); }
    std::shared_ptr<detail::Node> node_ptr() const { return node_; }

    static Tensor wrap(std::shared_ptr<detail::Node> n) { Tensor t; t.node_ = std::move(n); return t; }

private:
    std::shared_ptr<detail::Node> node_;
};

// Wengert list: ops executed while a Tape is active append their output node
// here in creation order. backward() replays the list in reverse, so every
// recorded node is visited exactly once. Single-owner, single-threaded.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::shared_ptr<detail::Node> n) { order_.push_back(std::move(n)); }
    size_t size() const { return order_.size(); }
    void clear() { order_.clear(); }

    // loss must be scalar. Seeds d(loss)/d(loss)=1 and propagates to every
    // tensor with requires_grad, accumulating into .grad.
    void backward(const Tensor& loss);

private:
    std::vector<std::shared_ptr<detail::Node>> order_;
};

// RAII activation of a tape on the current thread. While no tape is active,
// ops run forward-only (evaluation mode) and record nothing.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

Tape* active_tape();

// ---------------------------------------------------------------------------
// Elementwise ops. Binary ops accept b with shape equal to a's, or with a
// shape that is a strict suffix of a's (trailing-axes-aligned expansion, e.g.
// [B,T] op [T]), or a scalar. The gradient of the broadcast operand is
// sum-reduced over the leading axes back to its original shape.
// ---------------------------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor neg(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softplus(const Tensor& a);

enum class Activation { Relu, Elu, Sigmoid };
Tensor activation(Activation kind, const Tensor& a);
Tensor relu(const Tensor& a);
Tensor elu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// ---------------------------------------------------------------------------
// Shape ops.
// ---------------------------------------------------------------------------
Tensor reshape(const Tensor& a, Shape new_shape);
// [d0,...,dk] -> [d0,...,dk,n] by repetition; gradient sums over the new axis.
Tensor expand_last(const Tensor& a, int n);
// K same-shaped tensors -> [K,d0,...]; gradients split back per slice.
Tensor stack_batch(const std::vector<Tensor>& xs);

// ---------------------------------------------------------------------------
// Reductions.
// ---------------------------------------------------------------------------
enum class Reduce { Mean, Sum };
Tensor reduce(Reduce kind, const Tensor& a, int axis);  // removes `axis`
Tensor mean_all(const Tensor& a);                       // -> scalar
Tensor sum_all(const Tensor& a);                        // -> scalar
// [B,C,H,W] -> [B,C,1,W], mean over rows.
Tensor pool_rows_mean(const Tensor& a);
// [B,C,H,W] -> [B,C], mean over H and W.
Tensor global_avg(const Tensor& a);

// ---------------------------------------------------------------------------
// Linear algebra / NN primitives (see nn.hpp for stateful layers).
// ---------------------------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);                       // [B,I]x[I,O]
Tensor fully_connected(const Tensor& x, const Tensor& w, const Tensor& b);

// Cross-correlation with a [Cout,Cin,1,k] kernel, odd k, stride 1, zero
// same-padding along W. Input [B,Cin,H,W] -> [B,Cout,H,W].
Tensor conv2d_1xk(const Tensor& x, const Tensor& kernel, const Tensor& bias);

// Gate scaling used by the attention block: out[b,c,h,w] = x[b,c,h,w]*g[b,c]
// (scale_channels) or *g[b,h] (scale_rows).
Tensor scale_channels(const Tensor& x, const Tensor& gate);
Tensor scale_rows(const Tensor& x, const Tensor& gate);

// Average rows `indices` of a [C,n,T] tensor into [C,T]. Gradient scatters
// uniformly back into the selected rows.
Tensor mean_rows(const Tensor& x, const std::vector<int>& indices);

// Per-(channel,row) min-max scaling of [C,n,T] (or [n,T]) onto [0,255].
// Rows with range below `flat_eps` map to zero. Differentiable a.e.
Tensor magnify_rows(const Tensor& x, double flat_eps = 1e-9);

// 1-D pooling along the last axis of [B,C,H,W]: non-overlapping mean windows
// of width `k` (W divisible by k) and nearest-neighbour upsampling by `k`.
Tensor avgpool_w(const Tensor& x, int k);
Tensor upsample_nearest_w(const Tensor& x, int k);

// ---------------------------------------------------------------------------
// Softmax / cross-entropy over the last axis.
// ---------------------------------------------------------------------------
Tensor softmax_lastaxis(const Tensor& x);
// logits: 1-D [K]. CE = -log softmax(logits)[target], max-shift stabilized.
Tensor cross_entropy(const Tensor& logits, int target_index);
// Row-wise CE of [B,K] logits against per-row targets -> [B].
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets);

}  // namespace drnet
