#include "drnet/trainer.hpp"
#include <atomic>
#include <thread>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "drnet/weights.hpp"

namespace drnet {

void TrainConfig::validate() const {
    if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (batch <= 0 || epochs <= 0 || frames <= 0 || clip_step <= 0) {
        throw std::invalid_argument("TrainConfig: batch/epochs/frames/clip_step must be positive");
    }
    if (gamma < 1) throw std::invalid_argument("TrainConfig: gamma must be >= 1");
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("TrainConfig: rho must lie in [0,1]");
    if (!(0.0 < band_lo && band_lo < band_hi && band_hi < fs / 2.0)) {
        throw std::invalid_argument("TrainConfig: band outside (0, fs/2)");
    }
    if (nfft < frames || (nfft & (nfft - 1)) != 0) {
        throw std::invalid_argument("TrainConfig: nfft must be a power of two >= frames");
    }
}

// --------------------------------------------------------------------------
// Clip construction
// --------------------------------------------------------------------------

namespace {

PixelMap window_of(const PixelMap& pm, int start, int frames) {
    PixelMap out = PixelMap::zeros(pm.channels, pm.rows, frames, pm.fs);
    out.order = pm.order;
    for (int c = 0; c < pm.channels; ++c) {
        for (int r = 0; r < pm.rows; ++r) {
            const double* src = pm.row(c, r) + start;
            std::copy(src, src + frames, out.row(c, r));
        }
    }
    return out;
}

Tensor tensor_of(const PixelMap& pm) {
    return Tensor::from_data({pm.channels, pm.rows, pm.frames}, pm.data);
}

Tensor tensor_of(const STMap& m) {
    return Tensor::from_data({m.channels, m.rows, m.frames}, m.data);
}

}  // namespace

std::vector<ClipRecord> make_clips(const PixelMap& trace, const BvpSignal& bvp, int frames,
                                   int step, const PixelMap* trace_enlarged,
                                   const std::string& source_id) {
    trace.validate();
    if (step <= 0 || frames <= 0) throw std::invalid_argument("make_clips: bad window geometry");
    if (trace.frames < frames) {
        throw std::invalid_argument("make_clips: stream length " + std::to_string(trace.frames) +
                                    " shorter than T=" + std::to_string(frames));
    }
    if (bvp.length() != trace.frames) {
        throw std::invalid_argument("make_clips: BVP length " + std::to_string(bvp.length()) +
                                    " != trace frames " + std::to_string(trace.frames));
    }
    if (std::fabs(bvp.fs - trace.fs) > 1e-9) {
        throw std::invalid_argument("make_clips: BVP and trace sampling rates differ");
    }
    if (trace_enlarged != nullptr && trace_enlarged->frames != trace.frames) {
        throw std::invalid_argument("make_clips: enlarged trace length mismatch");
    }

    std::vector<ClipRecord> clips;
    for (int start = 0; start + frames <= trace.frames; start += step) {
        ClipRecord rec;
        rec.pm = window_of(trace, start, frames);
        if (trace_enlarged != nullptr) rec.pm_e = window_of(*trace_enlarged, start, frames);
        rec.s_gt.fs = bvp.fs;
        rec.s_gt.samples.assign(bvp.samples.begin() + start, bvp.samples.begin() + start + frames);
        rec.hr_gt = estimate_hr(rec.s_gt);
        rec.s_gt.hr_gt = rec.hr_gt;
        rec.source_id = source_id.empty() ? "clip" : source_id;
        clips.push_back(std::move(rec));
    }
    return clips;
}

std::vector<ClipRecord> load_clips(const std::vector<ManifestEntry>& entries,
                                   const TrainConfig& cfg) {
    cfg.validate();
    std::vector<ClipRecord> clips;
    const auto filt = butter_bandpass(4, cfg.band_lo, cfg.band_hi, cfg.fs);
    for (const auto& e : entries) {
        PixelMap pm = load_trace_csv(e.trace_path);
        BvpSignal bvp = load_bvp_csv(e.bvp_path);
        if (std::fabs(bvp.fs - pm.fs) > 1e-9) bvp = resample_cubic(bvp, pm.fs);
        // align lengths after resampling, then clean the ground truth
        const int len = std::min(pm.frames, bvp.length());
        if (len < pm.frames) {
            PixelMap trimmed = window_of(pm, 0, len);
            pm = std::move(trimmed);
        }
        bvp.samples.resize(static_cast<size_t>(len));
        bvp.hr_gt.reset();
        bvp = filter_zero_phase(bvp, filt);

        std::optional<PixelMap> pm_e;
        if (!e.enlarged_path.empty()) {
            PixelMap big = load_trace_csv(e.enlarged_path);
            if (big.frames > len) big = window_of(big, 0, len);
            pm_e = std::move(big);
        }
        auto windows = make_clips(pm, bvp, cfg.frames, cfg.clip_step,
                                  pm_e ? &*pm_e : nullptr, e.clip_id);
        for (auto& w : windows) clips.push_back(std::move(w));
    }
    if (clips.empty()) throw std::invalid_argument("load_clips: no clips produced");
    return clips;
}

// --------------------------------------------------------------------------
// Eq. 3 plumbing
// --------------------------------------------------------------------------

PixelMap decompose(const PixelMap& pm, const PixelMap& pm_p) {
    pm.validate();
    if (pm.channels != pm_p.channels || pm.rows != pm_p.rows || pm.frames != pm_p.frames) {
        throw std::invalid_argument("decompose: shape mismatch");
    }
    PixelMap out = pm;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = pm.data[i] - pm_p.data[i];
    return out;
}

std::pair<PixelMap, PixelMap> cross_reconstruct(const PixelMap& pm_p1, const PixelMap& pm_np2,
                                                const PixelMap& pm_p2, const PixelMap& pm_np1) {
    if (pm_p1.data.size() != pm_np2.data.size() || pm_p2.data.size() != pm_np1.data.size() ||
        pm_p1.data.size() != pm_p2.data.size()) {
        throw std::invalid_argument("cross_reconstruct: shape mismatch");
    }
    PixelMap pse1 = pm_p1, pse2 = pm_p2;
    for (size_t i = 0; i < pse1.data.size(); ++i) {
        pse1.data[i] = pm_p1.data[i] + pm_np2.data[i];
        pse2.data[i] = pm_p2.data[i] + pm_np1.data[i];
    }
    return {std::move(pse1), std::move(pse2)};
}

// --------------------------------------------------------------------------
// Model bundle
// --------------------------------------------------------------------------

DrnetModel::DrnetModel(const ModelConfig& cfg, Rng& rng) : mcfg(cfg), ep(cfg, rng), gp(cfg, rng) {}

std::vector<Tensor> DrnetModel::trainable_params() {
    std::vector<Tensor> params;
    ep.collect(params);
    gp.collect(params);  // modulation head only; the autoencoder stays frozen
    return params;
}

NamedTensors DrnetModel::named() const {
    NamedTensors out;
    ep.named(out);
    gp.named(out);
    return out;
}

void DrnetModel::load(const NamedTensors& src) {
    NamedTensors mine = named();
    assign_from(mine, src);
}

void DrnetModel::load_autoencoder(const NamedTensors& src) {
    NamedTensors mine;
    gp.ae.named(mine);
    assign_from(mine, src);
}

// --------------------------------------------------------------------------
// Training
// --------------------------------------------------------------------------

namespace {

Tensor waveform_for(const DrnetModel& model, const ClipRecord& clip) {
    const Tensor s = Tensor::from_data({clip.s_gt.length()}, zscore(clip.s_gt.samples));
    return model.gp.waveform(s);
}

struct PairInputs {
    Tensor w1, w2;  // cached autoencoder waveforms (constants under training)
};

StepLoss run_pair(DrnetModel& model, const ClipRecord& a, const ClipRecord& b,
                  const CycleLoss& cyc_plan, const TrainConfig& cfg, Rng& rng, double grad_scale,
                  const Tensor* w1_cache, const Tensor* w2_cache) {
    const int T = cfg.frames;
    const Tensor w1 = w1_cache ? *w1_cache : waveform_for(model, a);
    const Tensor w2 = w2_cache ? *w2_cache : waveform_for(model, b);

    // real STMaps: magnify + Patch Cropping, off-tape (no gradients flow
    // into recorded video data)
    const STMap m1 = magnify(a.pm);
    const STMap m2 = magnify(b.pm);
    Tensor mc1, mc2;
    if (cfg.rho > 0.0 && a.pm_e) {
        mc1 = tensor_of(patch_crop(m1, magnify(*a.pm_e), cfg.rho, rng));
    } else {
        mc1 = tensor_of(m1);
    }
    if (cfg.rho > 0.0 && b.pm_e) {
        mc2 = tensor_of(patch_crop(m2, magnify(*b.pm_e), cfg.rho, rng));
    } else {
        mc2 = tensor_of(m2);
    }

    const Tensor pm1 = tensor_of(a.pm);
    const Tensor pm2 = tensor_of(b.pm);
    const Tensor s1 = Tensor::from_data({T}, a.s_gt.samples);
    const Tensor s2 = Tensor::from_data({T}, b.s_gt.samples);

    StepLoss out;
    Tape tape;
    {
        TapeScope scope(tape);
        const Tensor pm_p1 = model.gp.modulate(w1);
        const Tensor pm_p2 = model.gp.modulate(w2);
        const Tensor pm_np1 = sub(pm1, pm_p1);
        const Tensor pm_np2 = sub(pm2, pm_p2);
        const Tensor pm_pse1 = add(pm_p1, pm_np2);
        const Tensor pm_pse2 = add(pm_p2, pm_np1);

#ifndef NDEBUG
        for (std::int64_t i = 0; i < pm1.numel(); ++i) {
            const double lhs = pm_pse1.data()[static_cast<size_t>(i)] + pm_pse2.data()[static_cast<size_t>(i)];
            const double rhs = pm1.data()[static_cast<size_t>(i)] + pm2.data()[static_cast<size_t>(i)];
            assert(std::fabs(lhs - rhs) < 1e-9 && "cross_reconstruct conservation violated");
        }
#endif

        // all six maps through the magnifying operation; the synthetic four
        // stay on the tape
        const Tensor batch = stack_batch({mc1, mc2, magnify_rows(pm_p1), magnify_rows(pm_p2),
                                          magnify_rows(pm_pse1), magnify_rows(pm_pse2)});
        const Tensor preds = model.ep.forward(batch, /*training=*/true);  // [6,T]

        std::vector<double> target_data;
        target_data.reserve(static_cast<size_t>(6) * T);
        for (const Tensor* s : {&s1, &s2, &s1, &s2, &s1, &s2}) {
            target_data.insert(target_data.end(), s->data().begin(), s->data().end());
        }
        const Tensor targets = Tensor::from_data({6, T}, std::move(target_data));

        const Tensor phy = loss_phy(preds, targets, 1e-8);
        const Tensor cyc1 = cyc_plan(pm_p1, a.hr_gt, rng);
        const Tensor cyc2 = cyc_plan(pm_p2, b.hr_gt, rng);
        const Tensor total = loss_total({phy}, {cyc1, cyc2});

        out.total = total.item();
        out.phy = phy.item();
        out.cyc = 0.5 * (cyc1.item() + cyc2.item());
        if (!std::isfinite(out.total)) {
            throw std::runtime_error("train_step: non-finite loss on pair (" + a.source_id + ", " +
                                     b.source_id + "): total=" + std::to_string(out.total) +
                                     " phy=" + std::to_string(out.phy) +
                                     " cyc=" + std::to_string(out.cyc));
        }
        tape.backward(grad_scale == 1.0 ? total : mul_scalar(total, grad_scale));
    }
    return out;
}

}  // namespace

StepLoss train_step(DrnetModel& model, const ClipRecord& a, const ClipRecord& b,
                    const CycleLoss& cyc_plan, const TrainConfig& cfg, Rng& rng,
                    double grad_scale) {
    return run_pair(model, a, b, cyc_plan, cfg, rng, grad_scale, nullptr, nullptr);
}

TrainResult train(DrnetModel& model, const std::vector<ClipRecord>& clips, const TrainConfig& cfg,
                  const std::string& checkpoint_dir) {
    cfg.validate();
    if (clips.size() < 2) throw std::invalid_argument("train: need at least 2 clips for pairing");
    for (const auto& c : clips) {
        if (c.pm.frames != cfg.frames || c.s_gt.length() != cfg.frames) {
            throw std::invalid_argument("train: clip length does not match configured T");
        }
        if (c.pm.rows != model.mcfg.rows) {
            throw std::invalid_argument("train: clip rows do not match the model config");
        }
    }

    Rng master(cfg.seed);
    Rng shuffle_rng = master.fork(1);
    Rng step_rng = master.fork(2);

    const CycleLossConfig ccfg{cfg.band_lo, cfg.band_hi, cfg.nfft};
    const CycleLoss cyc_plan(ccfg, cfg.fs, cfg.frames);

    // the autoencoder is frozen: waveforms are constants, computed once
    std::vector<Tensor> waveforms;
    waveforms.reserve(clips.size());
    for (const auto& c : clips) waveforms.push_back(waveform_for(model, c));

    std::vector<Tensor> params = model.trainable_params();
    AdamState adam;
    adam.lr = cfg.lr;
    adam.init(params);

    const size_t pair_batch = static_cast<size_t>(std::max(1, cfg.batch / 2));
    std::vector<size_t> order(clips.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }
        const size_t n_pairs = order.size() / 2;

        EpochLog log;
        log.epoch = epoch;
        size_t done = 0;
        while (done < n_pairs) {
            const size_t batch_pairs = std::min(pair_batch, n_pairs - done);
            const double scale = 1.0 / static_cast<double>(batch_pairs);
            for (size_t p = 0; p < batch_pairs; ++p) {
                const size_t ia = order[2 * (done + p)];
                const size_t ib = order[2 * (done + p) + 1];
                const StepLoss sl = run_pair(model, clips[ia], clips[ib], cyc_plan, cfg, step_rng,
                                             scale, &waveforms[ia], &waveforms[ib]);
                log.loss_total += sl.total;
                log.loss_phy += sl.phy;
                log.loss_cyc += sl.cyc;
            }
            adam_step(params, adam);
            done += batch_pairs;
        }
        if (n_pairs > 0) {
            log.loss_total /= static_cast<double>(n_pairs);
            log.loss_phy /= static_cast<double>(n_pairs);
            log.loss_cyc /= static_cast<double>(n_pairs);
        }
        result.log.push_back(log);

        if (!checkpoint_dir.empty()) {
            namespace fs = std::filesystem;
            std::error_code ec;
            fs::create_directories(checkpoint_dir, ec);
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%03d.drnw", epoch);
            save_drnw((fs::path(checkpoint_dir) / name).string(), model.named());
        }
    }
    return result;
}

// --------------------------------------------------------------------------
// Evaluation
// --------------------------------------------------------------------------

EvalResult evaluate(DrnetModel& model, const std::vector<ClipRecord>& clips,
                    const TrainConfig& cfg, int jobs) {
    if (clips.empty()) throw std::invalid_argument("evaluate: empty clip list");

    // per-clip HRs; clips are independent and the model is read-only here
    std::vector<double> clip_hr(clips.size(), 0.0);
    auto predict = [&](size_t i) {
        const auto& clip = clips[i];
        const STMap m = magnify(clip.pm);
        const Tensor x = reshape(tensor_of(m), {1, 3, clip.pm.rows, clip.pm.frames});
        const Tensor pred = model.ep.forward(x, /*training=*/false);
        BvpSignal sig;
        sig.fs = clip.pm.fs;
        sig.samples.assign(pred.data().begin(), pred.data().end());
        try {
            clip_hr[i] = estimate_hr(sig, cfg.band_lo, cfg.band_hi, cfg.nfft);
        } catch (const std::invalid_argument&) {
            clip_hr[i] = 0.5 * (cfg.band_lo + cfg.band_hi) * 60.0;  // degenerate flat prediction
        }
    };
    if (jobs <= 1) {
        for (size_t i = 0; i < clips.size(); ++i) predict(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs; ++w) {
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < clips.size(); i = next.fetch_add(1)) {
                    predict(i);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    // per-source accumulation (mean of clip HRs)
    std::vector<std::string> ids;
    std::vector<double> pred_sum, gt_sum;
    std::vector<int> counts;
    for (size_t i = 0; i < clips.size(); ++i) {
        const auto& clip = clips[i];
        const double hr = clip_hr[i];
        auto it = std::find(ids.begin(), ids.end(), clip.source_id);
        if (it == ids.end()) {
            ids.push_back(clip.source_id);
            pred_sum.push_back(hr);
            gt_sum.push_back(clip.hr_gt);
            counts.push_back(1);
        } else {
            const size_t k = static_cast<size_t>(std::distance(ids.begin(), it));
            pred_sum[k] += hr;
            gt_sum[k] += clip.hr_gt;
            counts[k] += 1;
        }
    }

    EvalResult res;
    res.source_ids = ids;
    for (size_t k = 0; k < ids.size(); ++k) {
        res.pred_hr.push_back(pred_sum[k] / counts[k]);
        res.gt_hr.push_back(gt_sum[k] / counts[k]);
    }
    res.metrics = compute_metrics(res.pred_hr, res.gt_hr);
    return res;
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
    std::ostringstream os;
    os << "epoch,loss_total,loss_phy,loss_cyc\n";
    char buf[128];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f\n", e.epoch, e.loss_total, e.loss_phy,
                      e.loss_cyc);
        os << buf;
    }
    return os.str();
}

}  // namespace drnet
