#include "drnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace drnet {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

thread_local Tape* g_active_tape = nullptr;

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one dim");
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dims must be positive, got " + shape_str(shape));
    }
}

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<double> value) {
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    return n;
}

// Finalizes an op result: decides requires_grad from the parents, installs
// the pullback, and records on the active tape. With no active tape the
// result is a plain value.
template <typename... Parents>
Tensor finish(std::shared_ptr<detail::Node> out, std::function<void(detail::Node&)> backprop,
              const Parents&... parents) {
    const bool any_rg = (... || parents.requires_grad());
    if (g_active_tape != nullptr && any_rg) {
        out->requires_grad = true;
        out->backprop = std::move(backprop);
        g_active_tape->record(out);
    }
    return Tensor::wrap(std::move(out));
}

enum class BroadcastMode { Equal, Suffix, Scalar };

// The only broadcasting this engine supports: b equal to a, b a strict
// suffix of a's shape, or b scalar. Anything else is a shape error.
BroadcastMode broadcast_mode(const Shape& a, const Shape& b) {
    if (a == b) return BroadcastMode::Equal;
    if (shape_numel(b) == 1) return BroadcastMode::Scalar;
    if (b.size() < a.size() &&
        std::equal(b.begin(), b.end(), a.end() - static_cast<std::ptrdiff_t>(b.size()))) {
        return BroadcastMode::Suffix;
    }
    throw std::invalid_argument("shapes not broadcastable: " + shape_str(a) + " vs " + shape_str(b));
}

void check_finite_positive(const Tensor& a, const char* op, bool strictly_positive) {
    for (double v : a.data()) {
        if (strictly_positive ? (v <= 0.0) : (v < 0.0)) {
            throw std::domain_error(std::string(op) + ": input out of domain");
        }
    }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    validate_shape(shape);
    auto n = make_node(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), 0.0));
    n->requires_grad = requires_grad;
    return wrap(std::move(n));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    validate_shape(shape);
    auto n = make_node(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), v));
    n->requires_grad = requires_grad;
    return wrap(std::move(n));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    validate_shape(shape);
    if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
        throw std::invalid_argument("data length does not match shape " + shape_str(shape));
    }
    auto n = make_node(std::move(shape), std::move(data));
    n->requires_grad = requires_grad;
    return wrap(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_data({1}, {v}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
    validate_shape(shape);
    std::vector<double> d(static_cast<size_t>(shape_numel(shape)));
    for (auto& v : d) v = rng.normal(0.0, stddev);
    return from_data(std::move(shape), std::move(d), requires_grad);
}

double Tensor::item() const {
    if (!node_ || node_->value.size() != 1) {
        throw std::invalid_argument("item() requires a scalar tensor");
    }
    return node_->value[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
    const Shape& s = node_->shape;
    if (idx.size() != s.size()) throw std::invalid_argument("at(): rank mismatch");
    std::int64_t flat = 0;
    size_t k = 0;
    for (int i : idx) {
        if (i < 0 || i >= s[k]) throw std::out_of_range("at(): index out of range");
        flat = flat * s[k] + i;
        ++k;
    }
    return node_->value[static_cast<size_t>(flat)];
}

// --------------------------------------------------------------------------
// Tape
// --------------------------------------------------------------------------

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw std::invalid_argument("backward() requires a scalar loss");
    }
    detail::Node* root = loss.node();
    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        detail::Node& n = **it;
        if (n.backprop && !n.grad.empty()) n.backprop(n);
    }
}

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

Tape* active_tape() { return g_active_tape; }

// --------------------------------------------------------------------------
// Elementwise binary ops
// --------------------------------------------------------------------------

namespace {

enum class BinKind { Add, Sub, Mul, Div };

Tensor binary_op(BinKind kind, const Tensor& a, const Tensor& b) {
    const BroadcastMode mode = broadcast_mode(a.shape(), b.shape());
    const auto av = a.data();
    const auto bv = b.data();
    const size_t n = av.size();
    const size_t bn = bv.size();

    std::vector<double> out(n);
    switch (kind) {
        case BinKind::Add:
            for (size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i % bn];
            break;
        case BinKind::Sub:
            for (size_t i = 0; i < n; ++i) out[i] = av[i] - bv[i % bn];
            break;
        case BinKind::Mul:
            for (size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i % bn];
            break;
        case BinKind::Div:
            for (size_t i = 0; i < n; ++i) out[i] = av[i] / bv[i % bn];
            break;
    }
    (void)mode;  // suffix/scalar share the i % bn indexing

    auto node = make_node(a.shape(), std::move(out));
    auto ap = a.node_ptr();
    auto bp = b.node_ptr();
    auto backprop = [kind, ap, bp, bn](detail::Node& o) {
        const auto& g = o.grad;
        if (ap->requires_grad) {
            ap->ensure_grad();
            auto& ga = ap->grad;
            switch (kind) {
                case BinKind::Add:
                case BinKind::Sub:
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                    break;
                case BinKind::Mul:
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bp->value[i % bn];
                    break;
                case BinKind::Div:
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bp->value[i % bn];
                    break;
            }
        }
        if (bp->requires_grad) {
            bp->ensure_grad();
            auto& gb = bp->grad;
            switch (kind) {
                case BinKind::Add:
                    for (size_t i = 0; i < g.size(); ++i) gb[i % bn] += g[i];
                    break;
                case BinKind::Sub:
                    for (size_t i = 0; i < g.size(); ++i) gb[i % bn] -= g[i];
                    break;
                case BinKind::Mul:
                    for (size_t i = 0; i < g.size(); ++i) gb[i % bn] += g[i] * ap->value[i];
                    break;
                case BinKind::Div: {
                    for (size_t i = 0; i < g.size(); ++i) {
                        const double b_i = bp->value[i % bn];
                        gb[i % bn] -= g[i] * ap->value[i] / (b_i * b_i);
                    }
                    break;
                }
            }
        }
    };
    return finish(std::move(node), std::move(backprop), a, b);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(BinKind::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(BinKind::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(BinKind::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(BinKind::Div, a, b); }

// --------------------------------------------------------------------------
// Unary ops
// --------------------------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd_factor) {
    const auto av = a.data();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    auto node = make_node(a.shape(), std::move(out));
    auto ap = a.node_ptr();
    auto backprop = [ap, bwd_factor](detail::Node& o) {
        if (!ap->requires_grad) return;
        ap->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) {
            ap->grad[i] += o.grad[i] * bwd_factor(ap->value[i], o.value[i]);
        }
    };
    return finish(std::move(node), std::move(backprop), a);
}

}  // namespace

Tensor add_scalar(const Tensor& a, double c) {
    return unary_op(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
    return unary_op(a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor sqrt(const Tensor& a) {
    check_finite_positive(a, "sqrt", false);
    return unary_op(a, [](double x) { return std::sqrt(x); },
                    [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor exp(const Tensor& a) {
    return unary_op(a, [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    check_finite_positive(a, "log", true);
    return unary_op(a, [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
    auto fwd = [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); };
    auto bwd = [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); };
    return unary_op(a, fwd, bwd);
}

namespace {

double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor activation(Activation kind, const Tensor& a) {
    switch (kind) {
        case Activation::Relu:
            return unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; },
                            [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
        case Activation::Elu:
            return unary_op(a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
                            [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
        case Activation::Sigmoid:
            return unary_op(a, [](double x) { return sigmoid_scalar(x); },
                            [](double, double y) { return y * (1.0 - y); });
    }
    throw std::invalid_argument("unknown activation");
}

Tensor relu(const Tensor& a) { return activation(Activation::Relu, a); }
Tensor elu(const Tensor& a) { return activation(Activation::Elu, a); }
Tensor sigmoid(const Tensor& a) { return activation(Activation::Sigmoid, a); }

// --------------------------------------------------------------------------
// Shape ops
// --------------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape new_shape) {
    validate_shape(new_shape);
    if (shape_numel(new_shape) != a.numel()) {
        throw std::invalid_argument("reshape: element count mismatch " + shape_str(a.shape()) +
                                    " -> " + shape_str(new_shape));
    }
    auto node = make_node(std::move(new_shape), std::vector<double>(a.data().begin(), a.data().end()));
    auto ap = a.node_ptr();
    auto backprop = [ap](detail::Node& o) {
        if (!ap->requires_grad) return;
        ap->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) ap->grad[i] += o.grad[i];
    };
    return finish(std::move(node), std::move(backprop), a);
}

Tensor expand_last(const Tensor& a, int n) {
    if (n <= 0) throw std::invalid_argument("expand_last: n must be positive");
    Shape s = a.shape();
    s.push_back(n);
    const auto av = a.data();
    std::vector<double> out(av.size() * static_cast<size_t>(n));
    for (size_t i = 0; i < av.size(); ++i) {
        std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(i) * n, n, av[i]);
    }
    auto node = make_node(std::move(s), std::move(out));
    auto ap = a.node_ptr();
    auto backprop = [ap, n](detail::Node& o) {
        if (!ap->requires_grad) return;
        ap->ensure_grad();
        for (size_t i = 0; i < ap->grad.size(); ++i) {
            double acc = 0.0;
            const double* g = o.grad.data() + static_cast<std::ptrdiff_t>(i) * n;
            for (int j = 0; j < n; ++j) acc += g[j];
            ap->grad[i] += acc;
        }
    };
    return finish(std::move(node), std::move(backprop), a);
}

// --------------------------------------------------------------------------
// Reductions
// --------------------------------------------------------------------------

Tensor reduce(Reduce kind, const Tensor& a, int axis) {
    const Shape& s = a.shape();
    if (axis < 0 || axis >= a.ndim()) {
        throw std::invalid_argument("reduce: axis " + std::to_string(axis) + " out of range for " +
                                    shape_str(s));
    }
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
    for (int i = axis + 1; i < a.ndim(); ++i) inner *= s[static_cast<size_t>(i)];
    const std::int64_t d = s[static_cast<size_t>(axis)];

    Shape out_shape;
    for (int i = 0; i < a.ndim(); ++i) {
        if (i != axis) out_shape.push_back(s[static_cast<size_t>(i)]);
    }
    if (out_shape.empty()) out_shape = {1};

    const auto av = a.data();
    std::vector<double> out(static_cast<size_t>(outer * inner), 0.0);
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t k = 0; k < d; ++k) {
            const double* src = av.data() + (o * d + k) * inner;
            double* dst = out.data() + o * inner;
            for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
    }
    const double scale = kind == Reduce::Mean ? 1.0 / static_cast<double>(d) : 1.0;
    if (kind == Reduce::Mean) {
        for (auto& v : out) v *= scale;
    }

    auto node = make_node(std::move(out_shape), std::move(out));
    auto ap = a.node_ptr();
    auto backprop = [ap, outer, inner, d, scale](detail::Node& o) {
        if (!ap->requires_grad) return;
        ap->ensure_grad();
        for (std::int64_t ou = 0; ou < outer; ++ou) {
            for (std::int64_t k = 0; k < d; ++k) {
                double* dst = ap->grad.data() + (ou * d + k) * inner;
                const double* g = o.grad.data() + ou * inner;
                for (std::int64_t i = 0; i < inner; ++i) dst[i] += g[i] * scale;
            }
        }
    };
    return finish(std::move(node), std::move(backprop), a);
}

namespace {

Tensor reduce_all(Reduce kind, const Tensor& a) {
    const auto av = a.data();
    double acc = 0.0;
    for (double v : av) acc += v;
    const double scale = kind == Reduce::Mean ? 1.0 / static_cast<double>(av.size()) : 1.0;
    auto node = make_node({1}, {acc * scale});
    auto ap = a.node_ptr();
    auto backprop = [ap, scale](detail::Node& o) {
        if (!ap->requires_grad) return;
        ap->ensure_grad();
        const double g = o.grad[0] * scale;
        for (auto& v : ap->grad) v += g;
    };
    return finish(std::move(node), std::move(backprop), a);
}

}  // namespace

Tensor mean_all(const Tensor& a) { return reduce_all(Reduce::Mean, a); }
Tensor sum_all(const Tensor& a) { return reduce_all(Reduce::Sum, a); }

Tensor pool_rows_mean(const Tensor& a) {
    if (a.ndim() != 4) throw std::invalid_argument("pool_rows_mean expects [B,C,H,W]");
    const int B = a.dim(0), C = a.dim(1), H = a.dim(2), W = a.dim(3);
    const auto av = a.data();
    std::vector<double> out(static_cast<size_t>(B) * C * W, 0.0);
    for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc) {
        const double* src = av.data() + bc * H * W;
        double* dst = out.data() + bc * W;
        for (int h = 0; h < H; ++h) {
            for (int w = 0; w < W; ++w) dst[w] += src[h * W + w];
        }
        for (int w = 0; w < W; ++w) dst[w] /= H;
    }
    auto node = make_node({B, C, 1, W}, std::move(out));
    auto ap = a.node_ptr();
    auto backprop = [ap, B, C, H, W](detail::Node& o) {
        if (!ap->requires_grad) return;
        ap->ensure_grad();
        for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc) {
            double* dst = ap->grad.data() + bc * H * W;
            const double* g = o.grad.data() + bc * W;
            for (int h = 0; h < H; ++h) {
                for (int w = 0; w < W; ++w) dst[h * W + w] += g[w] / H;
            }
        }
    };
    return finish(std::move(node), std::move(backprop), a);
}

Tensor global_avg(const Tensor& a) {
    if (a.ndim() != 4) throw std::invalid_argument("global_avg expects [B,C,H,W]");
    const int B = a.dim(0), C = a.dim(1), H = a.dim(2), W = a.dim(3);
    const std::int64_t hw = static_cast<std::int64_t>(H) * W;
    const auto av = a.data();
    std::vector<double> out(static_cast<size_t>(B) * C, 0.0);
    for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc) {
        const double* src = av.data() + bc * hw;
        double acc = 0.0;
        for (std::int64_t i = 0; i < hw; ++i) acc += src[i];
        out[static_cast<size_t>(bc)] = acc / static_cast<double>(hw);
    }
    auto node = make_node({B, C}, std::move(out));
    auto ap = a.node_ptr();
    auto backprop = [ap, B, C, hw](detail::Node& o) {
        if (!ap->requires_grad) return;
        ap->ensure_grad();
        for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc) {
            const double g = o.grad[static_cast<size_t>(bc)] / static_cast<double>(hw);
            double* dst = ap->grad.data() + bc * hw;
            for (std::int64_t i = 0; i < hw; ++i) dst[i] += g;
        }
    };
    return finish(std::move(node), std::move(backprop), a);
}

// --------------------------------------------------------------------------
// matmul / fully connected
// --------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    }
    const int B = a.dim(0), I = a.dim(1), O = b.dim(1);
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out(static_cast<size_t>(B) * O, 0.0);
    for (int r = 0; r < B; ++r) {
        for (int i = 0; i < I; ++i) {
            const double x = av[static_cast<size_t>(r) * I + i];
            const double* brow = bv.data() + static_cast<std::ptrdiff_t>(i) * O;
            double* orow = out.data() + static_cast<std::ptrdiff_t>(r) * O;
            for (int o = 0; o < O; ++o) orow[o] += x * brow[o];
        }
    }
    auto node = make_node({B, O}, std::move(out));
    auto ap = a.node_ptr();
    auto bp = b.node_ptr();
    auto backprop = [ap, bp, B, I, O](detail::Node& o) {
        const auto& g = o.grad;
        if (ap->requires_grad) {
            ap->ensure_grad();
            for (int r = 0; r < B; ++r) {
                for (int i = 0; i < I; ++i) {
                    const double* brow = bp->value.data() + static_cast<std::ptrdiff_t>(i) * O;
                    const double* grow = g.data() + static_cast<std::ptrdiff_t>(r) * O;
                    double acc = 0.0;
                    for (int c = 0; c < O; ++c) acc += grow[c] * brow[c];
                    ap->grad[static_cast<size_t>(r) * I + i] += acc;
                }
            }
        }
        if (bp->requires_grad) {
            bp->ensure_grad();
            for (int r = 0; r < B; ++r) {
                for (int i = 0; i < I; ++i) {
                    const double x = ap->value[static_cast<size_t>(r) * I + i];
                    const double* grow = g.data() + static_cast<std::ptrdiff_t>(r) * O;
                    double* brow = bp->grad.data() + static_cast<std::ptrdiff_t>(i) * O;
                    for (int c = 0; c < O; ++c) brow[c] += x * grow[c];
                }
            }
        }
    };
    return finish(std::move(node), std::move(backprop), a, b);
}

Tensor fully_connected(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (b.ndim() != 1 || b.dim(0) != w.dim(1)) {
        throw std::invalid_argument("fully_connected: bias shape " + shape_str(b.shape()) +
                                    " does not match weight " + shape_str(w.shape()));
    }
    return add(matmul(x, w), b);
}

// --------------------------------------------------------------------------
// Softmax / cross-entropy
// --------------------------------------------------------------------------

Tensor softmax_lastaxis(const Tensor& x) {
    const Shape& s = x.shape();
    const int K = s.back();
    const std::int64_t rows = x.numel() / K;
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* src = xv.data() + r * K;
        double* dst = out.data() + r * K;
        double mx = src[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, src[k]);
        double sum = 0.0;
        for (int k = 0; k < K; ++k) {
            dst[k] = std::exp(src[k] - mx);
            sum += dst[k];
        }
        for (int k = 0; k < K; ++k) dst[k] /= sum;
    }
    auto node = make_node(s, std::move(out));
    auto ap = x.node_ptr();
    auto backprop = [ap, K, rows](detail::Node& o) {
        if (!ap->requires_grad) return;
        ap->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* y = o.value.data() + r * K;
            const double* g = o.grad.data() + r * K;
            double dot = 0.0;
            for (int k = 0; k < K; ++k) dot += g[k] * y[k];
            double* dst = ap->grad.data() + r * K;
            for (int k = 0; k < K; ++k) dst[k] += y[k] * (g[k] - dot);
        }
    };
    return finish(std::move(node), std::move(backprop), x);
}

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets) {
    if (logits.ndim() != 2) throw std::invalid_argument("cross_entropy_rows expects [B,K] logits");
    const int B = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(targets.size()) != B) {
        throw std::invalid_argument("cross_entropy_rows: need one target per row");
    }
    for (int t : targets) {
        if (t < 0 || t >= K) {
            throw std::out_of_range("cross_entropy: target index " + std::to_string(t) +
                                    " out of range [0," + std::to_string(K) + ")");
        }
    }
    const auto xv = logits.data();
    std::vector<double> out(static_cast<size_t>(B));
    std::vector<double> lses(static_cast<size_t>(B));
    for (int r = 0; r < B; ++r) {
        const double* row = xv.data() + static_cast<std::ptrdiff_t>(r) * K;
        double mx = row[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double sum = 0.0;
        for (int k = 0; k < K; ++k) sum += std::exp(row[k] - mx);
        const double lse = mx + std::log(sum);
        lses[static_cast<size_t>(r)] = lse;
        out[static_cast<size_t>(r)] = lse - row[targets[static_cast<size_t>(r)]];
    }
    auto node = make_node({B}, std::move(out));
    auto ap = logits.node_ptr();
    auto tg = targets;
    auto backprop = [ap, tg, B, K, lses](detail::Node& o) {
        if (!ap->requires_grad) return;
        ap->ensure_grad();
        for (int r = 0; r < B; ++r) {
            const double g = o.grad[static_cast<size_t>(r)];
            if (g == 0.0) continue;
            const double* row = ap->value.data() + static_cast<std::ptrdiff_t>(r) * K;
            double* grow = ap->grad.data() + static_cast<std::ptrdiff_t>(r) * K;
            for (int k = 0; k < K; ++k) {
                const double p = std::exp(row[k] - lses[static_cast<size_t>(r)]);
                grow[k] += g * (p - (k == tg[static_cast<size_t>(r)] ? 1.0 : 0.0));
            }
        }
    };
    return finish(std::move(node), std::move(backprop), logits);
}

Tensor cross_entropy(const Tensor& logits, int target_index) {
    if (logits.ndim() != 1) throw std::invalid_argument("cross_entropy expects 1-D logits");
    const Tensor rows = reshape(logits, {1, logits.dim(0)});
    return reshape(cross_entropy_rows(rows, {target_index}), {1});
}

}  // namespace drnet
