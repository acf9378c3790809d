#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "drnet/tensor.hpp"

namespace drnet {

namespace {

// Mirrors the helper in tensor.cpp; kept local to each TU on purpose.
std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<double> value) {
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    return n;
}

template <typename... Parents>
Tensor finish(std::shared_ptr<detail::Node> out, std::function<void(detail::Node&)> backprop,
              const Parents&... parents) {
    const bool any_rg = (... || parents.requires_grad());
    Tape* tape = active_tape();
    if (tape != nullptr && any_rg) {
        out->requires_grad = true;
        out->backprop = std::move(backprop);
        tape->record(out);
    }
    return Tensor::wrap(std::move(out));
}

}  // namespace

Tensor stack_batch(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw std::invalid_argument("stack_batch: empty input");
    const Shape& inner = xs[0].shape();
    for (const auto& x : xs) {
        if (x.shape() != inner) throw std::invalid_argument("stack_batch: shape mismatch");
    }
    const std::int64_t stride = xs[0].numel();
    Shape out_shape{static_cast<int>(xs.size())};
    out_shape.insert(out_shape.end(), inner.begin(), inner.end());
    std::vector<double> out;
    out.reserve(static_cast<size_t>(stride) * xs.size());
    for (const auto& x : xs) out.insert(out.end(), x.data().begin(), x.data().end());

    auto node = make_node(std::move(out_shape), std::move(out));
    std::vector<std::shared_ptr<detail::Node>> parents;
    bool any_rg = false;
    for (const auto& x : xs) {
        parents.push_back(x.node_ptr());
        any_rg = any_rg || x.requires_grad();
    }
    auto backprop = [parents, stride](detail::Node& o) {
        for (size_t k = 0; k < parents.size(); ++k) {
            auto& p = parents[k];
            if (!p->requires_grad) continue;
            p->ensure_grad();
            const double* g = o.grad.data() + static_cast<std::int64_t>(k) * stride;
            for (std::int64_t i = 0; i < stride; ++i) p->grad[static_cast<size_t>(i)] += g[i];
        }
    };
    Tape* tape = active_tape();
    if (tape != nullptr && any_rg) {
        node->requires_grad = true;
        node->backprop = std::move(backprop);
        tape->record(node);
    }
    return Tensor::wrap(std::move(node));
}

// --------------------------------------------------------------------------
// conv2d_1xk: same-padded cross-correlation along W with a 1-row kernel.
// --------------------------------------------------------------------------

Tensor conv2d_1xk(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    if (x.ndim() != 4) throw std::invalid_argument("conv2d_1xk: input must be [B,Cin,H,W]");
    if (kernel.ndim() != 4 || kernel.dim(2) != 1) {
        throw std::invalid_argument("conv2d_1xk: kernel must be [Cout,Cin,1,k]");
    }
    const int B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = kernel.dim(0), k = kernel.dim(3);
    if (kernel.dim(1) != Cin) {
        throw std::invalid_argument("conv2d_1xk: kernel Cin " + std::to_string(kernel.dim(1)) +
                                    " != input Cin " + std::to_string(Cin));
    }
    if (k % 2 == 0) throw std::invalid_argument("conv2d_1xk: kernel width must be odd");
    if (bias.ndim() != 1 || bias.dim(0) != Cout) {
        throw std::invalid_argument("conv2d_1xk: bias must be [Cout]");
    }
    const int off = k / 2;

    const auto xv = x.data();
    const auto kv = kernel.data();
    const auto bv = bias.data();
    std::vector<double> out(static_cast<size_t>(B) * Cout * H * W);

    for (int b = 0; b < B; ++b) {
        for (int co = 0; co < Cout; ++co) {
            double* oplane = out.data() + (static_cast<std::int64_t>(b) * Cout + co) * H * W;
            std::fill_n(oplane, static_cast<std::int64_t>(H) * W, bv[static_cast<size_t>(co)]);
            for (int ci = 0; ci < Cin; ++ci) {
                const double* kr = kv.data() + (static_cast<std::int64_t>(co) * Cin + ci) * k;
                const double* xplane = xv.data() + (static_cast<std::int64_t>(b) * Cin + ci) * H * W;
                for (int h = 0; h < H; ++h) {
                    const double* xr = xplane + static_cast<std::int64_t>(h) * W;
                    double* orow = oplane + static_cast<std::int64_t>(h) * W;
                    for (int t = 0; t < k; ++t) {
                        const double c = kr[t];
                        const int s = t - off;
                        const int w0 = std::max(0, -s);
                        const int w1 = std::min(W, W - s);
                        for (int w = w0; w < w1; ++w) orow[w] += c * xr[w + s];
                    }
                }
            }
        }
    }

    auto node = make_node({B, Cout, H, W}, std::move(out));
    auto xp = x.node_ptr();
    auto kp = kernel.node_ptr();
    auto bp = bias.node_ptr();
    auto backprop = [xp, kp, bp, B, Cin, Cout, H, W, k, off](detail::Node& o) {
        const auto& g = o.grad;
        if (bp->requires_grad) {
            bp->ensure_grad();
            for (int b = 0; b < B; ++b) {
                for (int co = 0; co < Cout; ++co) {
                    const double* gp = g.data() + (static_cast<std::int64_t>(b) * Cout + co) * H * W;
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < static_cast<std::int64_t>(H) * W; ++i) acc += gp[i];
                    bp->grad[static_cast<size_t>(co)] += acc;
                }
            }
        }
        if (kp->requires_grad) {
            kp->ensure_grad();
            for (int b = 0; b < B; ++b) {
                for (int co = 0; co < Cout; ++co) {
                    const double* gplane = g.data() + (static_cast<std::int64_t>(b) * Cout + co) * H * W;
                    for (int ci = 0; ci < Cin; ++ci) {
                        double* kr = kp->grad.data() + (static_cast<std::int64_t>(co) * Cin + ci) * k;
                        const double* xplane =
                            xp->value.data() + (static_cast<std::int64_t>(b) * Cin + ci) * H * W;
                        for (int h = 0; h < H; ++h) {
                            const double* xr = xplane + static_cast<std::int64_t>(h) * W;
                            const double* gr = gplane + static_cast<std::int64_t>(h) * W;
                            for (int t = 0; t < k; ++t) {
                                const int s = t - off;
                                const int w0 = std::max(0, -s);
                                const int w1 = std::min(W, W - s);
                                double acc = 0.0;
                                for (int w = w0; w < w1; ++w) acc += gr[w] * xr[w + s];
                                kr[t] += acc;
                            }
                        }
                    }
                }
            }
        }
        if (xp->requires_grad) {
            xp->ensure_grad();
            for (int b = 0; b < B; ++b) {
                for (int co = 0; co < Cout; ++co) {
                    const double* gplane = g.data() + (static_cast<std::int64_t>(b) * Cout + co) * H * W;
                    for (int ci = 0; ci < Cin; ++ci) {
                        const double* kr = kp->value.data() + (static_cast<std::int64_t>(co) * Cin + ci) * k;
                        double* xplane = xp->grad.data() + (static_cast<std::int64_t>(b) * Cin + ci) * H * W;
                        for (int h = 0; h < H; ++h) {
                            double* xr = xplane + static_cast<std::int64_t>(h) * W;
                            const double* gr = gplane + static_cast<std::int64_t>(h) * W;
                            for (int t = 0; t < k; ++t) {
                                const double c = kr[t];
                                const int s = t - off;
                                const int w0 = std::max(0, -s);
                                const int w1 = std::min(W, W - s);
                                for (int w = w0; w < w1; ++w) xr[w + s] += c * gr[w];
                            }
                        }
                    }
                }
            }
        }
    };
    return finish(std::move(node), std::move(backprop), x, kernel, bias);
}

// --------------------------------------------------------------------------
// Gate scaling
// --------------------------------------------------------------------------

Tensor scale_channels(const Tensor& x, const Tensor& gate) {
    if (x.ndim() != 4) throw std::invalid_argument("scale_channels: x must be [B,C,H,W]");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (gate.ndim() != 2 || gate.dim(0) != B || gate.dim(1) != C) {
        throw std::invalid_argument("scale_channels: gate must be [B,C]");
    }
    const std::int64_t hw = static_cast<std::int64_t>(H) * W;
    const auto xv = x.data();
    const auto gv = gate.data();
    std::vector<double> out(xv.size());
    for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc) {
        const double s = gv[static_cast<size_t>(bc)];
        const double* src = xv.data() + bc * hw;
        double* dst = out.data() + bc * hw;
        for (std::int64_t i = 0; i < hw; ++i) dst[i] = src[i] * s;
    }
    auto node = make_node({B, C, H, W}, std::move(out));
    auto xp = x.node_ptr();
    auto gp = gate.node_ptr();
    auto backprop = [xp, gp, B, C, hw](detail::Node& o) {
        const auto& g = o.grad;
        if (xp->requires_grad) {
            xp->ensure_grad();
            for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc) {
                const double s = gp->value[static_cast<size_t>(bc)];
                double* dst = xp->grad.data() + bc * hw;
                const double* gr = g.data() + bc * hw;
                for (std::int64_t i = 0; i < hw; ++i) dst[i] += gr[i] * s;
            }
        }
        if (gp->requires_grad) {
            gp->ensure_grad();
            for (std::int64_t bc = 0; bc < static_cast<std::int64_t>(B) * C; ++bc) {
                const double* xr = xp->value.data() + bc * hw;
                const double* gr = g.data() + bc * hw;
                double acc = 0.0;
                for (std::int64_t i = 0; i < hw; ++i) acc += gr[i] * xr[i];
                gp->grad[static_cast<size_t>(bc)] += acc;
            }
        }
    };
    return finish(std::move(node), std::move(backprop), x, gate);
}

Tensor scale_rows(const Tensor& x, const Tensor& gate) {
    if (x.ndim() != 4) throw std::invalid_argument("scale_rows: x must be [B,C,H,W]");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (gate.ndim() != 2 || gate.dim(0) != B || gate.dim(1) != H) {
        throw std::invalid_argument("scale_rows: gate must be [B,H]");
    }
    const auto xv = x.data();
    const auto gv = gate.data();
    std::vector<double> out(xv.size());
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            for (int h = 0; h < H; ++h) {
                const double s = gv[static_cast<size_t>(b) * H + h];
                const std::int64_t base = ((static_cast<std::int64_t>(b) * C + c) * H + h) * W;
                for (int w = 0; w < W; ++w) out[static_cast<size_t>(base + w)] = xv[static_cast<size_t>(base + w)] * s;
            }
        }
    }
    auto node = make_node({B, C, H, W}, std::move(out));
    auto xp = x.node_ptr();
    auto gp = gate.node_ptr();
    auto backprop = [xp, gp, B, C, H, W](detail::Node& o) {
        const auto& g = o.grad;
        if (xp->requires_grad) {
            xp->ensure_grad();
            for (int b = 0; b < B; ++b) {
                for (int c = 0; c < C; ++c) {
                    for (int h = 0; h < H; ++h) {
                        const double s = gp->value[static_cast<size_t>(b) * H + h];
                        const std::int64_t base = ((static_cast<std::int64_t>(b) * C + c) * H + h) * W;
                        for (int w = 0; w < W; ++w) {
                            xp->grad[static_cast<size_t>(base + w)] += g[static_cast<size_t>(base + w)] * s;
                        }
                    }
                }
            }
        }
        if (gp->requires_grad) {
            gp->ensure_grad();
            for (int b = 0; b < B; ++b) {
                for (int c = 0; c < C; ++c) {
                    for (int h = 0; h < H; ++h) {
                        const std::int64_t base = ((static_cast<std::int64_t>(b) * C + c) * H + h) * W;
                        double acc = 0.0;
                        for (int w = 0; w < W; ++w) {
                            acc += g[static_cast<size_t>(base + w)] * xp->value[static_cast<size_t>(base + w)];
                        }
                        gp->grad[static_cast<size_t>(b) * H + h] += acc;
                    }
                }
            }
        }
    };
    return finish(std::move(node), std::move(backprop), x, gate);
}

// --------------------------------------------------------------------------
// mean_rows
// --------------------------------------------------------------------------

Tensor mean_rows(const Tensor& x, const std::vector<int>& indices) {
    if (x.ndim() != 3) throw std::invalid_argument("mean_rows: x must be [C,n,T]");
    if (indices.empty()) throw std::invalid_argument("mean_rows: empty row selection");
    const int C = x.dim(0), n = x.dim(1), T = x.dim(2);
    for (int i : indices) {
        if (i < 0 || i >= n) throw std::out_of_range("mean_rows: row index out of range");
    }
    const double inv = 1.0 / static_cast<double>(indices.size());
    const auto xv = x.data();
    std::vector<double> out(static_cast<size_t>(C) * T, 0.0);
    for (int c = 0; c < C; ++c) {
        double* dst = out.data() + static_cast<std::int64_t>(c) * T;
        for (int i : indices) {
            const double* src = xv.data() + (static_cast<std::int64_t>(c) * n + i) * T;
            for (int t = 0; t < T; ++t) dst[t] += src[t];
        }
        for (int t = 0; t < T; ++t) dst[t] *= inv;
    }
    auto node = make_node({C, T}, std::move(out));
    auto xp = x.node_ptr();
    auto idx = indices;
    auto backprop = [xp, idx, C, n, T, inv](detail::Node& o) {
        if (!xp->requires_grad) return;
        xp->ensure_grad();
        for (int c = 0; c < C; ++c) {
            const double* g = o.grad.data() + static_cast<std::int64_t>(c) * T;
            for (int i : idx) {
                double* dst = xp->grad.data() + (static_cast<std::int64_t>(c) * n + i) * T;
                for (int t = 0; t < T; ++t) dst[t] += g[t] * inv;
            }
        }
    };
    return finish(std::move(node), std::move(backprop), x);
}

// --------------------------------------------------------------------------
// magnify_rows: per-row min-max onto [0,255]; flat rows map to 0.
// --------------------------------------------------------------------------

Tensor magnify_rows(const Tensor& x, double flat_eps) {
    if (x.ndim() < 2) throw std::invalid_argument("magnify_rows: need at least 2 dims");
    const int T = x.shape().back();
    const std::int64_t rows = x.numel() / T;
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* src = xv.data() + r * T;
        double* dst = out.data() + r * T;
        double mn = src[0], mx = src[0];
        for (int t = 1; t < T; ++t) {
            mn = std::min(mn, src[t]);
            mx = std::max(mx, src[t]);
        }
        const double range = mx - mn;
        if (range < flat_eps) {
            std::fill_n(dst, T, 0.0);
        } else {
            const double s = 255.0 / range;
            for (int t = 0; t < T; ++t) dst[t] = (src[t] - mn) * s;
        }
    }
    auto node = make_node(x.shape(), std::move(out));
    auto xp = x.node_ptr();
    auto backprop = [xp, rows, T, flat_eps](detail::Node& o) {
        if (!xp->requires_grad) return;
        xp->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* src = xp->value.data() + r * T;
            const double* g = o.grad.data() + r * T;
            double* dst = xp->grad.data() + r * T;
            double mn = src[0], mx = src[0];
            int amin = 0, amax = 0;
            for (int t = 1; t < T; ++t) {
                if (src[t] < mn) { mn = src[t]; amin = t; }
                if (src[t] > mx) { mx = src[t]; amax = t; }
            }
            const double range = mx - mn;
            if (range < flat_eps) continue;  // flat rows emit a constant: zero gradient
            double gsum = 0.0, gxsum = 0.0;
            for (int t = 0; t < T; ++t) {
                gsum += g[t];
                gxsum += g[t] * src[t];
            }
            const double s = 255.0 / range;
            for (int t = 0; t < T; ++t) dst[t] += g[t] * s;
            // d/d(min): 255*(x_t - max)/range^2 ; d/d(max): -255*(x_t - min)/range^2
            dst[amin] += 255.0 * (gxsum - mx * gsum) / (range * range);
            dst[amax] -= 255.0 * (gxsum - mn * gsum) / (range * range);
        }
    };
    return finish(std::move(node), std::move(backprop), x);
}

// --------------------------------------------------------------------------
// 1-D pooling along W
// --------------------------------------------------------------------------

Tensor avgpool_w(const Tensor& x, int k) {
    if (x.ndim() != 4) throw std::invalid_argument("avgpool_w: x must be [B,C,H,W]");
    if (k <= 0 || x.dim(3) % k != 0) {
        throw std::invalid_argument("avgpool_w: W must be divisible by window " + std::to_string(k));
    }
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Wo = W / k;
    const std::int64_t rows = static_cast<std::int64_t>(B) * C * H;
    const auto xv = x.data();
    std::vector<double> out(static_cast<size_t>(rows) * Wo);
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* src = xv.data() + r * W;
        double* dst = out.data() + r * Wo;
        for (int w = 0; w < Wo; ++w) {
            double acc = 0.0;
            for (int j = 0; j < k; ++j) acc += src[w * k + j];
            dst[w] = acc / k;
        }
    }
    auto node = make_node({B, C, H, Wo}, std::move(out));
    auto xp = x.node_ptr();
    auto backprop = [xp, rows, W, Wo, k](detail::Node& o) {
        if (!xp->requires_grad) return;
        xp->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            double* dst = xp->grad.data() + r * W;
            const double* g = o.grad.data() + r * Wo;
            for (int w = 0; w < Wo; ++w) {
                const double gv = g[w] / k;
                for (int j = 0; j < k; ++j) dst[w * k + j] += gv;
            }
        }
    };
    return finish(std::move(node), std::move(backprop), x);
}

Tensor upsample_nearest_w(const Tensor& x, int k) {
    if (x.ndim() != 4) throw std::invalid_argument("upsample_nearest_w: x must be [B,C,H,W]");
    if (k <= 0) throw std::invalid_argument("upsample_nearest_w: factor must be positive");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Wo = W * k;
    const std::int64_t rows = static_cast<std::int64_t>(B) * C * H;
    const auto xv = x.data();
    std::vector<double> out(static_cast<size_t>(rows) * Wo);
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* src = xv.data() + r * W;
        double* dst = out.data() + r * Wo;
        for (int w = 0; w < W; ++w) std::fill_n(dst + static_cast<std::int64_t>(w) * k, k, src[w]);
    }
    auto node = make_node({B, C, H, Wo}, std::move(out));
    auto xp = x.node_ptr();
    auto backprop = [xp, rows, W, k](detail::Node& o) {
        if (!xp->requires_grad) return;
        xp->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            double* dst = xp->grad.data() + r * W;
            const double* g = o.grad.data() + r * W * k;
            for (int w = 0; w < W; ++w) {
                double acc = 0.0;
                for (int j = 0; j < k; ++j) acc += g[w * k + j];
                dst[w] += acc;
            }
        }
    };
    return finish(std::move(node), std::move(backprop), x);
}

}  // namespace drnet
