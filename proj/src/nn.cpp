#include "drnet/nn.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>

namespace drnet {

namespace {

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<double> value) {
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    return n;
}

}  // namespace

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormStats& stats, double eps, double momentum, bool training) {
    if (x.ndim() != 4) throw std::invalid_argument("batchnorm2d: input must be [B,C,H,W]");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (gamma.ndim() != 1 || gamma.dim(0) != C || beta.ndim() != 1 || beta.dim(0) != C) {
        throw std::invalid_argument("batchnorm2d: gamma/beta must be [C]");
    }
    if (!stats.running_mean.defined()) {
        stats.running_mean = Tensor::zeros({C});
        stats.running_var = Tensor::full({C}, 1.0);
    }
    if (stats.running_mean.numel() != C || stats.running_var.numel() != C) {
        throw std::invalid_argument("batchnorm2d: running stats shape mismatch");
    }
    const std::int64_t m = static_cast<std::int64_t>(B) * H * W;  // per-channel sample count
    if (m < 1) throw std::invalid_argument("batchnorm2d: empty batch");
    const std::int64_t hw = static_cast<std::int64_t>(H) * W;

    const auto xv = x.data();
    std::vector<double> mean(static_cast<size_t>(C), 0.0);
    std::vector<double> var(static_cast<size_t>(C), 0.0);

    if (training) {
        for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            for (int b = 0; b < B; ++b) {
                const double* p = xv.data() + (static_cast<std::int64_t>(b) * C + c) * hw;
                for (std::int64_t i = 0; i < hw; ++i) acc += p[i];
            }
            mean[static_cast<size_t>(c)] = acc / static_cast<double>(m);
            double vacc = 0.0;
            for (int b = 0; b < B; ++b) {
                const double* p = xv.data() + (static_cast<std::int64_t>(b) * C + c) * hw;
                for (std::int64_t i = 0; i < hw; ++i) {
                    const double d = p[i] - mean[static_cast<size_t>(c)];
                    vacc += d * d;
                }
            }
            var[static_cast<size_t>(c)] = vacc / static_cast<double>(m);  // biased, for normalization
        }
        const double unbias = m > 1 ? static_cast<double>(m) / static_cast<double>(m - 1) : 1.0;
        auto rm = stats.running_mean.data_mut();
        auto rv = stats.running_var.data_mut();
        for (int c = 0; c < C; ++c) {
            rm[static_cast<size_t>(c)] =
                (1.0 - momentum) * rm[static_cast<size_t>(c)] + momentum * mean[static_cast<size_t>(c)];
            rv[static_cast<size_t>(c)] =
                (1.0 - momentum) * rv[static_cast<size_t>(c)] + momentum * var[static_cast<size_t>(c)] * unbias;
        }
    } else {
        const auto rm = stats.running_mean.data();
        const auto rv = stats.running_var.data();
        mean.assign(rm.begin(), rm.end());
        var.assign(rv.begin(), rv.end());
    }

    std::vector<double> inv_std(static_cast<size_t>(C));
    for (int c = 0; c < C; ++c) inv_std[static_cast<size_t>(c)] = 1.0 / std::sqrt(var[static_cast<size_t>(c)] + eps);

    const auto gv = gamma.data();
    const auto bv = beta.data();
    std::vector<double> out(xv.size());
    std::vector<double> xhat(xv.size());
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            const double mu = mean[static_cast<size_t>(c)];
            const double is = inv_std[static_cast<size_t>(c)];
            const double ga = gv[static_cast<size_t>(c)];
            const double be = bv[static_cast<size_t>(c)];
            const std::int64_t base = (static_cast<std::int64_t>(b) * C + c) * hw;
            for (std::int64_t i = 0; i < hw; ++i) {
                const double xh = (xv[static_cast<size_t>(base + i)] - mu) * is;
                xhat[static_cast<size_t>(base + i)] = xh;
                out[static_cast<size_t>(base + i)] = ga * xh + be;
            }
        }
    }

    auto node = make_node({B, C, H, W}, std::move(out));
    auto xp = x.node_ptr();
    auto gp = gamma.node_ptr();
    auto bp = beta.node_ptr();
    auto xh = std::make_shared<std::vector<double>>(std::move(xhat));
    auto istd = std::make_shared<std::vector<double>>(std::move(inv_std));
    auto backprop = [xp, gp, bp, xh, istd, B, C, hw, m, training](detail::Node& o) {
        const auto& g = o.grad;
        // Per-channel reductions of g and g*xhat are shared by all three inputs.
        std::vector<double> sum_g(static_cast<size_t>(C), 0.0);
        std::vector<double> sum_gx(static_cast<size_t>(C), 0.0);
        for (int b = 0; b < B; ++b) {
            for (int c = 0; c < C; ++c) {
                const std::int64_t base = (static_cast<std::int64_t>(b) * C + c) * hw;
                double a0 = 0.0, a1 = 0.0;
                for (std::int64_t i = 0; i < hw; ++i) {
                    a0 += g[static_cast<size_t>(base + i)];
                    a1 += g[static_cast<size_t>(base + i)] * (*xh)[static_cast<size_t>(base + i)];
                }
                sum_g[static_cast<size_t>(c)] += a0;
                sum_gx[static_cast<size_t>(c)] += a1;
            }
        }
        if (gp->requires_grad) {
            gp->ensure_grad();
            for (int c = 0; c < C; ++c) gp->grad[static_cast<size_t>(c)] += sum_gx[static_cast<size_t>(c)];
        }
        if (bp->requires_grad) {
            bp->ensure_grad();
            for (int c = 0; c < C; ++c) bp->grad[static_cast<size_t>(c)] += sum_g[static_cast<size_t>(c)];
        }
        if (xp->requires_grad) {
            xp->ensure_grad();
            for (int b = 0; b < B; ++b) {
                for (int c = 0; c < C; ++c) {
                    const double ga = gp->value[static_cast<size_t>(c)];
                    const double is = (*istd)[static_cast<size_t>(c)];
                    const std::int64_t base = (static_cast<std::int64_t>(b) * C + c) * hw;
                    if (training) {
                        const double mg = sum_g[static_cast<size_t>(c)] / static_cast<double>(m);
                        const double mgx = sum_gx[static_cast<size_t>(c)] / static_cast<double>(m);
                        for (std::int64_t i = 0; i < hw; ++i) {
                            const double gi = g[static_cast<size_t>(base + i)];
                            const double xhi = (*xh)[static_cast<size_t>(base + i)];
                            xp->grad[static_cast<size_t>(base + i)] += ga * is * (gi - mg - xhi * mgx);
                        }
                    } else {
                        for (std::int64_t i = 0; i < hw; ++i) {
                            xp->grad[static_cast<size_t>(base + i)] += g[static_cast<size_t>(base + i)] * ga * is;
                        }
                    }
                }
            }
        }
    };

    Tape* tape = active_tape();
    const bool any_rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    if (tape != nullptr && any_rg) {
        node->requires_grad = true;
        node->backprop = std::move(backprop);
        tape->record(node);
    }
    return Tensor::wrap(std::move(node));
}

// --------------------------------------------------------------------------
// Adam
// --------------------------------------------------------------------------

void AdamState::init(const std::vector<Tensor>& params) {
    t = 0;
    m.clear();
    v.clear();
    for (const auto& p : params) {
        m.emplace_back(static_cast<size_t>(p.numel()), 0.0);
        v.emplace_back(static_cast<size_t>(p.numel()), 0.0);
    }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
    if (state.m.size() != params.size()) {
        throw std::invalid_argument("adam_step: state not initialized for this parameter list");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        auto val = p.data_mut();
        auto& mi = state.m[pi];
        auto& vi = state.v[pi];
        if (mi.size() != val.size()) throw std::invalid_argument("adam_step: accumulator shape mismatch");
        const bool has_grad = p.has_grad();
        auto gr = has_grad ? p.grad() : std::span<const double>();
        for (size_t i = 0; i < val.size(); ++i) {
            const double g = has_grad ? gr[i] : 0.0;
            mi[i] = state.beta1 * mi[i] + (1.0 - state.beta1) * g;
            vi[i] = state.beta2 * vi[i] + (1.0 - state.beta2) * g * g;
            const double mhat = mi[i] / bc1;
            const double vhat = vi[i] / bc2;
            val[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        p.zero_grad();
    }
}

// --------------------------------------------------------------------------
// Layers
// --------------------------------------------------------------------------

Linear::Linear(int in, int out, Rng& rng) {
    w = Tensor::randn({in, out}, rng, std::sqrt(2.0 / in), true);
    b = Tensor::zeros({out}, true);
}

void Linear::collect(std::vector<Tensor>& params) const {
    params.push_back(w);
    params.push_back(b);
}

Conv1xk::Conv1xk(int cin, int cout, int k, Rng& rng) {
    w = Tensor::randn({cout, cin, 1, k}, rng, std::sqrt(2.0 / (cin * k)), true);
    b = Tensor::zeros({cout}, true);
}

void Conv1xk::collect(std::vector<Tensor>& params) const {
    params.push_back(w);
    params.push_back(b);
}

BatchNorm2d::BatchNorm2d(int channels) {
    gamma = Tensor::full({channels}, 1.0, true);
    beta = Tensor::zeros({channels}, true);
    stats.running_mean = Tensor::zeros({channels});
    stats.running_var = Tensor::full({channels}, 1.0);
}

void BatchNorm2d::collect(std::vector<Tensor>& params) const {
    params.push_back(gamma);
    params.push_back(beta);
}

}  // namespace drnet
