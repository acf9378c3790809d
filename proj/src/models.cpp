#include "drnet/models.hpp"

#include <cmath>
#include <stdexcept>

namespace drnet {

void ModelConfig::validate() const {
    if (rows <= 0 || frames <= 0) throw std::invalid_argument("ModelConfig: rows/frames must be positive");
    if (frames % 8 != 0) throw std::invalid_argument("ModelConfig: frames must be divisible by 8");
    if (stem_width <= 0 || block_widths.empty()) {
        throw std::invalid_argument("ModelConfig: need a stem width and at least one block");
    }
    for (int w : block_widths) {
        if (w <= 0) throw std::invalid_argument("ModelConfig: block widths must be positive");
        if (w % sab_reduction != 0) {
            throw std::invalid_argument("ModelConfig: block widths must be divisible by the SAB reduction");
        }
    }
    if (kernel <= 0 || kernel % 2 == 0) throw std::invalid_argument("ModelConfig: kernel must be odd");
    if (ae_width <= 0 || ae_latent <= 0) throw std::invalid_argument("ModelConfig: ae widths must be positive");
    if (ae_kernel <= 0 || ae_kernel % 2 == 0) throw std::invalid_argument("ModelConfig: ae_kernel must be odd");
}

// --------------------------------------------------------------------------
// SabBlock
// --------------------------------------------------------------------------

SabBlock::SabBlock(int channels_, int rows_, int reduction_, Rng& rng)
    : channels(channels_), rows(rows_), reduction(reduction_) {
    fc1 = Linear(channels, channels / reduction, rng);
    fc2 = Linear(channels / reduction, channels, rng);
    fc_row = Linear(rows, rows, rng);
}

Tensor SabBlock::forward(const Tensor& x) const {
    if (x.ndim() != 4 || x.dim(1) != channels || x.dim(2) != rows) {
        throw std::invalid_argument("SabBlock: input " + shape_str(x.shape()) + " does not match C=" +
                                    std::to_string(channels) + " n=" + std::to_string(rows));
    }
    const Tensor w_c = sigmoid(fc2.forward(relu(fc1.forward(global_avg(x)))));  // [B,C]
    // row descriptor: mean over time, then over channels -> [B,H]
    const Tensor row_feat = reduce(Reduce::Mean, reduce(Reduce::Mean, x, 3), 1);
    const Tensor w_s = sigmoid(fc_row.forward(row_feat));                       // [B,H]
    return add(x, scale_rows(scale_channels(x, w_c), w_s));
}

void SabBlock::collect(std::vector<Tensor>& params) const {
    fc1.collect(params);
    fc2.collect(params);
    fc_row.collect(params);
}

void SabBlock::named(NamedTensors& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".fc1.w", fc1.w);
    out.emplace_back(prefix + ".fc1.b", fc1.b);
    out.emplace_back(prefix + ".fc2.w", fc2.w);
    out.emplace_back(prefix + ".fc2.b", fc2.b);
    out.emplace_back(prefix + ".fcrow.w", fc_row.w);
    out.emplace_back(prefix + ".fcrow.b", fc_row.b);
}

std::int64_t SabBlock::param_count() const {
    std::int64_t n = 0;
    std::vector<Tensor> ps;
    collect(ps);
    for (const auto& p : ps) n += p.numel();
    return n;
}

// --------------------------------------------------------------------------
// EstimatorEp
// --------------------------------------------------------------------------

EstimatorEp::EstimatorEp(const ModelConfig& cfg_, Rng& rng) : cfg(cfg_) {
    cfg.validate();
    stem = Conv1xk(3, cfg.stem_width, cfg.kernel, rng);
    stem_bn = BatchNorm2d(cfg.stem_width);
    int cin = cfg.stem_width;
    for (int w : cfg.block_widths) {
        convs.emplace_back(cin, w, cfg.kernel, rng);
        bns.emplace_back(w);
        sabs.emplace_back(w, cfg.rows, cfg.sab_reduction, rng);
        cin = w;
    }
    head = Conv1xk(cin, 1, cfg.kernel, rng);
}

Tensor EstimatorEp::forward(const Tensor& stmap, bool training) {
    if (stmap.ndim() != 4 || stmap.dim(1) != 3 || stmap.dim(2) != cfg.rows) {
        throw std::invalid_argument("EstimatorEp: input " + shape_str(stmap.shape()) +
                                    " does not match [B,3," + std::to_string(cfg.rows) + ",T]");
    }
    const int B = stmap.dim(0), T = stmap.dim(3);
    Tensor x = add_scalar(mul_scalar(stmap, 1.0 / 127.5), -1.0);  // [0,255] -> [-1,1]
    x = relu(stem_bn.forward(stem.forward(x), training));
    for (size_t i = 0; i < convs.size(); ++i) {
        x = relu(bns[i].forward(convs[i].forward(x), training));
        x = sabs[i].forward(x);
    }
    x = pool_rows_mean(x);          // [B,C,1,T]
    x = head.forward(x);            // [B,1,1,T]
    return reshape(x, {B, T});
}

void EstimatorEp::collect(std::vector<Tensor>& params) const {
    stem.collect(params);
    stem_bn.collect(params);
    for (size_t i = 0; i < convs.size(); ++i) {
        convs[i].collect(params);
        bns[i].collect(params);
        sabs[i].collect(params);
    }
    head.collect(params);
}

namespace {

void named_bn(NamedTensors& out, const std::string& prefix, const BatchNorm2d& bn) {
    out.emplace_back(prefix + ".gamma", bn.gamma);
    out.emplace_back(prefix + ".beta", bn.beta);
    out.emplace_back(prefix + ".running_mean", bn.stats.running_mean);
    out.emplace_back(prefix + ".running_var", bn.stats.running_var);
}

}  // namespace

void EstimatorEp::named(NamedTensors& out) const {
    out.emplace_back("ep.stem.conv.w", stem.w);
    out.emplace_back("ep.stem.conv.b", stem.b);
    named_bn(out, "ep.stem.bn", stem_bn);
    for (size_t i = 0; i < convs.size(); ++i) {
        const std::string p = "ep.block" + std::to_string(i);
        out.emplace_back(p + ".conv.w", convs[i].w);
        out.emplace_back(p + ".conv.b", convs[i].b);
        named_bn(out, p + ".bn", bns[i]);
        sabs[i].named(out, p + ".sab");
    }
    out.emplace_back("ep.head.conv.w", head.w);
    out.emplace_back("ep.head.conv.b", head.b);
}

// --------------------------------------------------------------------------
// SignalAutoencoder
// --------------------------------------------------------------------------

SignalAutoencoder::SignalAutoencoder(const ModelConfig& cfg_, Rng& rng) : cfg(cfg_) {
    cfg.validate();
    enc.emplace_back(1, cfg.ae_width, cfg.ae_kernel, rng);
    enc.emplace_back(cfg.ae_width, cfg.ae_latent, cfg.ae_kernel, rng);
    enc.emplace_back(cfg.ae_latent, cfg.ae_latent, cfg.ae_kernel, rng);
    dec.emplace_back(cfg.ae_latent, cfg.ae_latent, cfg.ae_kernel, rng);
    dec.emplace_back(cfg.ae_latent, cfg.ae_width, cfg.ae_kernel, rng);
    dec.emplace_back(cfg.ae_width, 1, cfg.ae_kernel, rng);
}

Tensor SignalAutoencoder::encode(const Tensor& x) const {
    if (x.ndim() != 2) throw std::invalid_argument("SignalAutoencoder: input must be [B,T]");
    if (x.dim(1) % 8 != 0) throw std::invalid_argument("SignalAutoencoder: T must be divisible by 8");
    Tensor z = reshape(x, {x.dim(0), 1, 1, x.dim(1)});
    for (const auto& c : enc) z = avgpool_w(relu(c.forward(z)), 2);
    return z;
}

Tensor SignalAutoencoder::decode(const Tensor& z) const {
    Tensor x = z;
    for (size_t i = 0; i < dec.size(); ++i) {
        x = dec[i].forward(upsample_nearest_w(x, 2));
        if (i + 1 < dec.size()) x = relu(x);
    }
    return reshape(x, {x.dim(0), x.dim(3)});
}

void SignalAutoencoder::collect(std::vector<Tensor>& params) const {
    for (const auto& c : enc) c.collect(params);
    for (const auto& c : dec) c.collect(params);
}

void SignalAutoencoder::named(NamedTensors& out) const {
    for (size_t i = 0; i < enc.size(); ++i) {
        out.emplace_back("ae.es.conv" + std::to_string(i) + ".w", enc[i].w);
        out.emplace_back("ae.es.conv" + std::to_string(i) + ".b", enc[i].b);
    }
    for (size_t i = 0; i < dec.size(); ++i) {
        out.emplace_back("ae.ds.conv" + std::to_string(i) + ".w", dec[i].w);
        out.emplace_back("ae.ds.conv" + std::to_string(i) + ".b", dec[i].b);
    }
}

// --------------------------------------------------------------------------
// GeneratorGp
// --------------------------------------------------------------------------

GeneratorGp::GeneratorGp(const ModelConfig& cfg_, Rng& rng) : cfg(cfg_), ae(cfg_, rng) {
    // softplus(-0.4328) ~= 0.5 starting amplitude
    alpha = Tensor::full({3, cfg.rows}, std::log(std::exp(0.5) - 1.0), true);
    offset = Tensor::zeros({3, cfg.rows}, true);
}

Tensor GeneratorGp::waveform(const Tensor& s) const {
    if (s.ndim() != 1) throw std::invalid_argument("GeneratorGp: signal must be [T]");
    const Tensor out = ae.forward(reshape(s, {1, s.dim(0)}));
    return reshape(out, {s.dim(0)});
}

Tensor GeneratorGp::modulate(const Tensor& w) const {
    if (w.ndim() != 1) throw std::invalid_argument("GeneratorGp: waveform must be [T]");
    const int T = w.dim(0);
    const Tensor amp = softplus(alpha);                       // [3,n], positive
    const Tensor scaled = mul(expand_last(amp, T), w);        // broadcast over [T]
    return add(scaled, expand_last(offset, T));
}

void GeneratorGp::collect(std::vector<Tensor>& params) const {
    params.push_back(alpha);
    params.push_back(offset);
}

void GeneratorGp::named(NamedTensors& out) const {
    out.emplace_back("gp.alpha", alpha);
    out.emplace_back("gp.offset", offset);
    ae.named(out);
}

// --------------------------------------------------------------------------
// Autoencoder pre-training
// --------------------------------------------------------------------------

std::vector<double> zscore(const std::vector<double>& x) {
    if (x.size() < 2) throw std::invalid_argument("zscore: need at least 2 samples");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(var + 1e-12);
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv;
    return out;
}

namespace {

double mse_over(const SignalAutoencoder& ae, const std::vector<BvpSignal>& signals) {
    if (signals.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : signals) {
        const int T = s.length();
        const Tensor x = Tensor::from_data({1, T}, s.samples);
        const Tensor rec = ae.forward(x);
        double e = 0.0;
        for (int t = 0; t < T; ++t) {
            const double d = rec.data()[static_cast<size_t>(t)] - s.samples[static_cast<size_t>(t)];
            e += d * d;
        }
        acc += e / T;
    }
    return acc / static_cast<double>(signals.size());
}

}  // namespace

PretrainResult pretrain_autoencoder(SignalAutoencoder& ae, const std::vector<BvpSignal>& train,
                                    const std::vector<BvpSignal>& holdout, int epochs, double lr,
                                    int batch, Rng& rng) {
    if (train.empty()) throw std::invalid_argument("pretrain_autoencoder: empty training set");
    if (epochs <= 0 || batch <= 0 || lr <= 0.0) {
        throw std::invalid_argument("pretrain_autoencoder: bad hyperparameters");
    }
    const int T = train.front().length();
    for (const auto& s : train) {
        if (s.length() != T) throw std::invalid_argument("pretrain_autoencoder: mixed signal lengths");
    }

    std::vector<Tensor> params;
    ae.collect(params);
    AdamState adam;
    adam.lr = lr;
    adam.init(params);

    std::vector<int> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    PretrainResult result;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        // seeded shuffle
        for (size_t i = order.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(batch));
            const int bsz = static_cast<int>(end - start);
            std::vector<double> data(static_cast<size_t>(bsz) * T);
            for (int b = 0; b < bsz; ++b) {
                const auto& src = train[static_cast<size_t>(order[start + static_cast<size_t>(b)])].samples;
                std::copy(src.begin(), src.end(), data.begin() + static_cast<std::ptrdiff_t>(b) * T);
            }
            const Tensor x = Tensor::from_data({bsz, T}, std::move(data));
            Tape tape;
            {
                TapeScope scope(tape);
                const Tensor rec = ae.forward(x);
                const Tensor diff = sub(rec, x);
                const Tensor loss = mean_all(mul(diff, diff));
                const double lv = loss.item();
                if (!std::isfinite(lv)) {
                    throw std::runtime_error("pretrain_autoencoder: loss diverged (non-finite) at epoch " +
                                             std::to_string(epoch));
                }
                epoch_loss += lv;
                ++batches;
                tape.backward(loss);
            }
            adam_step(params, adam);
        }
        result.train_mse = epoch_loss / std::max(1, batches);
        result.epochs = epoch + 1;
    }
    result.holdout_mse = mse_over(ae, holdout);
    return result;
}

}  // namespace drnet
