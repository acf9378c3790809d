// drnet: synthetic data generation, STMap construction, augmentation,
// training, evaluation and classical baselines behind one binary.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "drnet/baselines.hpp"
#include "drnet/config.hpp"
#include "drnet/io_util.hpp"
#include "drnet/patch_crop.hpp"
#include "drnet/roi.hpp"
#include "drnet/trainer.hpp"
#include "drnet/weights.hpp"

namespace fs = std::filesystem;
using drnet::RunConfig;
using ordered_json = nlohmann::ordered_json;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    bool seed_set = false;
    std::uint64_t seed = 0;
    bool epochs_set = false;
    int epochs = 0;
    bool rho_set = false;
    double rho = 0.0;
    bool gamma_set = false;
    int gamma = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool out_required = true) {
    cmd->add_option("--config", o.config_path, "key=value config file");
    auto* out = cmd->add_option("--out", o.out_dir, "output directory");
    if (out_required) out->required();
    cmd->add_option("--seed", o.seed, "seed override")->each([&o](const std::string&) { o.seed_set = true; });
    cmd->add_option("--epochs", o.epochs, "epoch override")->each([&o](const std::string&) { o.epochs_set = true; });
    cmd->add_option("--rho", o.rho, "Patch Cropping probability override")
        ->each([&o](const std::string&) { o.rho_set = true; });
    cmd->add_option("--gamma", o.gamma, "enlargement factor override")
        ->each([&o](const std::string&) { o.gamma_set = true; });
}

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig cfg = drnet::load_config(o.config_path);
    if (o.seed_set) cfg.train.seed = o.seed;
    if (o.epochs_set) cfg.train.epochs = o.epochs;
    if (o.rho_set) cfg.train.rho = o.rho;
    if (o.gamma_set) cfg.train.gamma = o.gamma;
    cfg.finalize();
    return cfg;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw drnet::IoError("cannot create output dir " + dir + ": " + ec.message());
}

// Reproducibility record: resolved configuration and inputs, no timestamps,
// so identical runs produce identical bytes.
void write_provenance(const std::string& out_dir, const std::string& command,
                      const RunConfig& cfg, const ordered_json& inputs) {
    ordered_json j;
    j["tool"] = "drnet";
    j["version"] = drnet::kToolVersion;
    j["command"] = command;
    j["seed"] = cfg.train.seed;
    j["inputs"] = inputs;
    ordered_json config_map;
    std::istringstream lines(cfg.to_text());
    std::string line;
    while (std::getline(lines, line)) {
        const size_t eq = line.find('=');
        if (eq != std::string::npos) config_map[line.substr(0, eq)] = line.substr(eq + 1);
    }
    j["config"] = config_map;
    drnet::write_text_file((fs::path(out_dir) / "run.json").string(), j.dump(2) + "\n");
}

void write_predictions_csv(const std::string& path, const drnet::EvalResult& ev) {
    std::ostringstream os;
    os << "source,pred_hr,gt_hr\n";
    char buf[128];
    for (size_t i = 0; i < ev.source_ids.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", ev.source_ids[i].c_str(), ev.pred_hr[i],
                      ev.gt_hr[i]);
        os << buf;
    }
    drnet::write_text_file(path, os.str());
}

std::vector<drnet::BvpSignal> synth_pretrain_signals(const RunConfig& cfg, int count,
                                                     std::uint64_t seed) {
    std::vector<drnet::BvpSignal> sigs;
    drnet::Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        const double hr = rng.uniform(cfg.synth.hr_lo, cfg.synth.hr_hi);
        sigs.push_back(drnet::gen_bvp(hr, cfg.train.fs, cfg.train.frames, rng));
    }
    return sigs;
}

// --------------------------------------------------------------------------
// Subcommands
// --------------------------------------------------------------------------

int cmd_synth(const CommonOpts& o, int clips, const std::string& noise_preset) {
    RunConfig cfg = resolve_config(o);
    if (!noise_preset.empty()) {
        drnet::SynthSpec preset;
        if (noise_preset == "none") preset = drnet::SynthSpec::noise_free();
        else if (noise_preset == "standard") preset = drnet::SynthSpec::noisy();
        else if (noise_preset == "common") preset = drnet::SynthSpec::common_mode();
        else throw std::invalid_argument("unknown --noise preset '" + noise_preset + "'");
        cfg.synth.drift_amp = preset.drift_amp;
        cfg.synth.spike_amp = preset.spike_amp;
        cfg.synth.noise_sigma = preset.noise_sigma;
        cfg.synth.common_mode_amp = preset.common_mode_amp;
        cfg.finalize();
    }
    ensure_out_dir(o.out_dir);
    drnet::gen_dataset(o.out_dir, clips, cfg.synth, cfg.train.seed);
    write_provenance(o.out_dir, "synth", cfg,
                     ordered_json{{"clips", clips}, {"noise", noise_preset.empty() ? "config" : noise_preset}});
    std::cout << "wrote " << clips << " clips under " << o.out_dir << "\n";
    return 0;
}

int cmd_stmap(const CommonOpts& o, const std::string& trace_path, const std::string& trace_e_path,
              const std::string& video_path, const std::string& landmarks_path, bool enlarged) {
    RunConfig cfg = resolve_config(o);
    ensure_out_dir(o.out_dir);

    drnet::PixelMap pm;
    std::optional<drnet::PixelMap> pm_e;
    if (!trace_path.empty()) {
        pm = drnet::load_trace_csv(trace_path);
        if (!trace_e_path.empty()) pm_e = drnet::load_trace_csv(trace_e_path);
    } else if (!video_path.empty()) {
        if (landmarks_path.empty()) {
            throw std::invalid_argument("--video requires --landmarks");
        }
        const drnet::FrameSequence frames = drnet::load_rvf(video_path);
        drnet::LandmarkTrack lm = drnet::load_landmarks_csv(landmarks_path);
        lm.fs = frames.fps;
        const drnet::RoiDefinition roi =
            drnet::build_roi_definition(lm, cfg.synth.n, cfg.train.gamma);
        pm = drnet::compute_pixelmap(frames, roi, false);
        if (enlarged) pm_e = drnet::compute_pixelmap(frames, roi, true);
        drnet::save_trace_csv((fs::path(o.out_dir) / "trace.pm.csv").string(), pm);
        if (pm_e) drnet::save_trace_csv((fs::path(o.out_dir) / "trace.pme.csv").string(), *pm_e);
    } else {
        throw std::invalid_argument("stmap needs --trace or --video");
    }

    if (cfg.color_order == drnet::ChannelOrder::Yuv) {
        pm = drnet::to_yuv(pm);
        if (pm_e) pm_e = drnet::to_yuv(*pm_e);
    }
    drnet::save_stmap_csv((fs::path(o.out_dir) / "stmap.csv").string(), drnet::magnify(pm));
    if (pm_e) {
        drnet::save_stmap_csv((fs::path(o.out_dir) / "stmap_e.csv").string(), drnet::magnify(*pm_e));
    }
    write_provenance(o.out_dir, "stmap", cfg,
                     ordered_json{{"trace", trace_path}, {"video", video_path},
                                  {"landmarks", landmarks_path}});
    return 0;
}

int cmd_augment(const CommonOpts& o, const std::string& stmap_path, const std::string& enlarged_path) {
    RunConfig cfg = resolve_config(o);
    ensure_out_dir(o.out_dir);
    const drnet::STMap m = drnet::load_stmap_csv(stmap_path);
    const drnet::STMap me = drnet::load_stmap_csv(enlarged_path);
    drnet::Rng rng(cfg.train.seed);
    const drnet::STMap cropped = drnet::patch_crop(m, me, cfg.train.rho, rng);
    drnet::save_stmap_csv((fs::path(o.out_dir) / "cropped.csv").string(), cropped);
    write_provenance(o.out_dir, "augment", cfg,
                     ordered_json{{"stmap", stmap_path}, {"enlarged", enlarged_path}});
    return 0;
}

int cmd_pretrain_ae(const CommonOpts& o, int signals, double lr) {
    RunConfig cfg = resolve_config(o);
    ensure_out_dir(o.out_dir);
    const int epochs = o.epochs_set ? cfg.train.epochs : 200;

    auto all = synth_pretrain_signals(cfg, signals, cfg.train.seed);
    std::vector<drnet::BvpSignal> train, holdout;
    for (size_t i = 0; i < all.size(); ++i) {
        (i % 6 == 0 ? holdout : train).push_back(std::move(all[i]));
    }
    drnet::Rng rng(cfg.train.seed + 1);
    drnet::SignalAutoencoder ae(cfg.model, rng);
    drnet::Rng train_rng(cfg.train.seed + 2);
    const drnet::PretrainResult res =
        drnet::pretrain_autoencoder(ae, train, holdout, epochs, lr, 8, train_rng);

    drnet::NamedTensors named;
    ae.named(named);
    drnet::save_drnw((fs::path(o.out_dir) / "ae.drnw").string(), named);
    write_provenance(o.out_dir, "pretrain-ae", cfg,
                     ordered_json{{"signals", signals}, {"epochs", epochs}, {"lr", lr}});
    std::printf("autoencoder: train mse %.5f, holdout mse %.5f (%d epochs)\n", res.train_mse,
                res.holdout_mse, res.epochs);
    if (res.holdout_mse >= 0.05) {
        std::cerr << "warning: holdout reconstruction mse " << res.holdout_mse
                  << " above the 0.05 target\n";
    }
    return 0;
}

int cmd_train(const CommonOpts& o, const std::string& data_dir, const std::string& ae_path,
              const std::string& checkpoint_dir) {
    RunConfig cfg = resolve_config(o);
    ensure_out_dir(o.out_dir);

    const auto entries = drnet::load_manifest(data_dir);
    const auto clips = drnet::load_clips(entries, cfg.train);

    drnet::Rng rng(cfg.train.seed);
    drnet::DrnetModel model(cfg.model, rng);
    if (!ae_path.empty()) {
        model.load_autoencoder(drnet::load_drnw(ae_path));
    } else {
        // no pretrained autoencoder supplied: pretrain on synthetic waveforms
        auto sigs = synth_pretrain_signals(cfg, 240, cfg.train.seed + 11);
        drnet::Rng ae_rng(cfg.train.seed + 12);
        (void)drnet::pretrain_autoencoder(model.gp.ae, sigs, {}, 200, 1e-2, 8, ae_rng);
        drnet::NamedTensors named;
        model.gp.ae.named(named);
        drnet::save_drnw((fs::path(o.out_dir) / "ae.drnw").string(), named);
    }

    const drnet::TrainResult res = drnet::train(model, clips, cfg.train, checkpoint_dir);
    drnet::write_text_file((fs::path(o.out_dir) / "log.csv").string(),
                           drnet::training_log_csv(res.log));
    drnet::save_drnw((fs::path(o.out_dir) / "weights.drnw").string(), model.named());
    write_provenance(o.out_dir, "train", cfg,
                     ordered_json{{"data", data_dir},
                                  {"ae", ae_path.empty() ? "pretrained-internally" : ae_path},
                                  {"clips", clips.size()}});
    if (!res.log.empty()) {
        std::printf("trained %d epochs, final loss %.4f (phy %.4f, cyc %.4f)\n",
                    res.log.back().epoch, res.log.back().loss_total, res.log.back().loss_phy,
                    res.log.back().loss_cyc);
    }
    return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& data_dir, const std::string& weights_path,
             int jobs) {
    RunConfig cfg = resolve_config(o);
    ensure_out_dir(o.out_dir);
    const auto entries = drnet::load_manifest(data_dir);
    const auto clips = drnet::load_clips(entries, cfg.train);

    drnet::Rng rng(cfg.train.seed);
    drnet::DrnetModel model(cfg.model, rng);
    model.load(drnet::load_drnw(weights_path));

    const drnet::EvalResult ev = drnet::evaluate(model, clips, cfg.train, jobs);
    write_predictions_csv((fs::path(o.out_dir) / "predictions.csv").string(), ev);
    drnet::write_text_file((fs::path(o.out_dir) / "metrics.csv").string(),
                           drnet::metrics_csv("drnet", ev.metrics));
    write_provenance(o.out_dir, "eval", cfg,
                     ordered_json{{"data", data_dir}, {"weights", weights_path}});
    std::printf("drnet: n=%d mae=%.3f rmse=%.3f std=%.3f mer=%.2f%% r=%.3f\n", ev.metrics.count,
                ev.metrics.mae, ev.metrics.rmse, ev.metrics.std_err, ev.metrics.mer * 100.0,
                ev.metrics.r);
    return 0;
}

int cmd_baseline(const CommonOpts& o, const std::string& data_dir, const std::string& method_name,
                 int jobs) {
    RunConfig cfg = resolve_config(o);
    ensure_out_dir(o.out_dir);
    const drnet::BaselineMethod method = drnet::parse_baseline_method(method_name);
    const auto entries = drnet::load_manifest(data_dir);
    const auto clips = drnet::load_clips(entries, cfg.train);

    std::vector<double> clip_hr(clips.size(), 0.0);
    const int workers = std::max(1, jobs);
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    auto work = [&] {
        for (size_t i = next.fetch_add(1); i < clips.size(); i = next.fetch_add(1)) {
            const drnet::BvpSignal pulse = drnet::run_baseline(method, clips[i].pm);
            clip_hr[i] = drnet::estimate_hr(pulse, cfg.train.band_lo, cfg.train.band_hi,
                                            cfg.train.nfft);
        }
    };
    if (workers == 1) {
        work();
    } else {
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    // aggregate per source (mean of clip HRs)
    drnet::EvalResult ev;
    std::vector<int> counts;
    for (size_t i = 0; i < clips.size(); ++i) {
        auto it = std::find(ev.source_ids.begin(), ev.source_ids.end(), clips[i].source_id);
        if (it == ev.source_ids.end()) {
            ev.source_ids.push_back(clips[i].source_id);
            ev.pred_hr.push_back(clip_hr[i]);
            ev.gt_hr.push_back(clips[i].hr_gt);
            counts.push_back(1);
        } else {
            const size_t k = static_cast<size_t>(std::distance(ev.source_ids.begin(), it));
            ev.pred_hr[k] += clip_hr[i];
            ev.gt_hr[k] += clips[i].hr_gt;
            counts[k] += 1;
        }
    }
    for (size_t k = 0; k < ev.pred_hr.size(); ++k) {
        ev.pred_hr[k] /= counts[k];
        ev.gt_hr[k] /= counts[k];
    }
    ev.metrics = drnet::compute_metrics(ev.pred_hr, ev.gt_hr);

    write_predictions_csv((fs::path(o.out_dir) / "predictions.csv").string(), ev);
    drnet::write_text_file((fs::path(o.out_dir) / "metrics.csv").string(),
                           drnet::metrics_csv(method_name, ev.metrics));
    write_provenance(o.out_dir, "baseline", cfg,
                     ordered_json{{"data", data_dir}, {"method", method_name}});
    std::printf("%s: n=%d mae=%.3f rmse=%.3f std=%.3f mer=%.2f%% r=%.3f\n", method_name.c_str(),
                ev.metrics.count, ev.metrics.mae, ev.metrics.rmse, ev.metrics.std_err,
                ev.metrics.mer * 100.0, ev.metrics.r);
    return 0;
}

int cmd_psd(const CommonOpts& o, const std::string& bvp_path, int nfft) {
    RunConfig cfg = resolve_config(o);
    ensure_out_dir(o.out_dir);
    const drnet::BvpSignal sig = drnet::load_bvp_csv(bvp_path);
    const drnet::PsdResult r = drnet::psd(sig, nfft);
    std::ostringstream os;
    os << "freq_hz,power\n";
    char buf[80];
    for (size_t k = 0; k < r.freqs.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", r.freqs[k], r.power[k]);
        os << buf;
    }
    drnet::write_text_file((fs::path(o.out_dir) / "psd.csv").string(), os.str());
    write_provenance(o.out_dir, "psd", cfg, ordered_json{{"bvp", bvp_path}, {"nfft", nfft}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"remote-photoplethysmography pipeline: synthetic data, spatial-temporal maps, "
                 "decomposition/reconstruction training and classical baselines"};
    app.require_subcommand(1);

    CommonOpts synth_o, stmap_o, augment_o, ae_o, train_o, eval_o, base_o, psd_o;

    auto* c_synth = app.add_subcommand("synth", "generate a synthetic dataset");
    int synth_clips = 10;
    std::string synth_noise;
    c_synth->add_option("--clips", synth_clips, "number of clips");
    c_synth->add_option("--noise", synth_noise, "noise preset: none|standard|common");
    add_common(c_synth, synth_o);

    auto* c_stmap = app.add_subcommand("stmap", "build STMaps from a trace or an RVF1 video");
    std::string stmap_trace, stmap_trace_e, stmap_video, stmap_lm;
    bool stmap_enlarged = false;
    c_stmap->add_option("--trace", stmap_trace, "PixelMap trace CSV");
    c_stmap->add_option("--trace-enlarged", stmap_trace_e, "enlarged PixelMap trace CSV");
    c_stmap->add_option("--video", stmap_video, "RVF1 raw frame file");
    c_stmap->add_option("--landmarks", stmap_lm, "68-point landmarks CSV");
    c_stmap->add_flag("--enlarged", stmap_enlarged, "also emit the sub-ROI STMap");
    add_common(c_stmap, stmap_o);

    auto* c_aug = app.add_subcommand("augment", "apply Patch Cropping to an STMap");
    std::string aug_stmap, aug_enlarged;
    c_aug->add_option("--stmap", aug_stmap, "original STMap CSV")->required();
    c_aug->add_option("--enlarged", aug_enlarged, "enlarged STMap CSV")->required();
    add_common(c_aug, augment_o);

    auto* c_ae = app.add_subcommand("pretrain-ae", "pretrain the signal autoencoder");
    int ae_signals = 400;
    double ae_lr = 1e-2;
    c_ae->add_option("--signals", ae_signals, "synthetic waveform count");
    c_ae->add_option("--lr", ae_lr, "learning rate");
    add_common(c_ae, ae_o);

    auto* c_train = app.add_subcommand("train", "train on a dataset directory");
    std::string train_data, train_ae, train_ckpt;
    c_train->add_option("--data", train_data, "dataset directory with manifest.csv")->required();
    c_train->add_option("--ae", train_ae, "pretrained autoencoder DRNW file");
    c_train->add_option("--checkpoint-dir", train_ckpt, "per-epoch checkpoint directory");
    add_common(c_train, train_o);

    auto* c_eval = app.add_subcommand("eval", "evaluate weights on a dataset");
    std::string eval_data, eval_weights;
    int eval_jobs = 1;
    c_eval->add_option("--data", eval_data, "dataset directory")->required();
    c_eval->add_option("--weights", eval_weights, "DRNW weight file")->required();
    c_eval->add_option("--jobs", eval_jobs, "parallel clip workers");
    add_common(c_eval, eval_o);

    auto* c_base = app.add_subcommand("baseline", "run a classical method on a dataset");
    std::string base_data, base_method = "green";
    int base_jobs = 1;
    c_base->add_option("--data", base_data, "dataset directory")->required();
    c_base->add_option("--method", base_method, "green|chrom|pos")->required();
    c_base->add_option("--jobs", base_jobs, "parallel clip workers");
    add_common(c_base, base_o);

    auto* c_psd = app.add_subcommand("psd", "write the PSD of a BVP file as CSV");
    std::string psd_bvp;
    int psd_nfft = 2048;
    c_psd->add_option("--bvp", psd_bvp, "BVP CSV file")->required();
    c_psd->add_option("--nfft", psd_nfft, "FFT length (power of two)");
    add_common(c_psd, psd_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (app.got_subcommand(c_synth)) return cmd_synth(synth_o, synth_clips, synth_noise);
        if (app.got_subcommand(c_stmap)) {
            return cmd_stmap(stmap_o, stmap_trace, stmap_trace_e, stmap_video, stmap_lm,
                             stmap_enlarged);
        }
        if (app.got_subcommand(c_aug)) return cmd_augment(augment_o, aug_stmap, aug_enlarged);
        if (app.got_subcommand(c_ae)) return cmd_pretrain_ae(ae_o, ae_signals, ae_lr);
        if (app.got_subcommand(c_train)) return cmd_train(train_o, train_data, train_ae, train_ckpt);
        if (app.got_subcommand(c_eval)) return cmd_eval(eval_o, eval_data, eval_weights, eval_jobs);
        if (app.got_subcommand(c_base)) return cmd_baseline(base_o, base_data, base_method, base_jobs);
        if (app.got_subcommand(c_psd)) return cmd_psd(psd_o, psd_bvp, psd_nfft);
    } catch (const drnet::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
