#include "drnet/config.hpp"

#include <sstream>
#include <stdexcept>

#include "drnet/io_util.hpp"

namespace drnet {

void RunConfig::finalize() {
    model.frames = train.frames;
    model.rows = synth.n;
    synth.frames = train.frames;
    synth.gamma = train.gamma;
    synth.fs = train.fs;
    train.validate();
    model.validate();
    synth.validate();
}

namespace {

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
    std::vector<int> out;
    for (const auto& part : split(s, ',')) {
        out.push_back(static_cast<int>(parse_long(part, what)));
    }
    if (out.empty()) throw std::invalid_argument(what + ": empty list");
    return out;
}

std::string join_ints(const std::vector<int>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ',';
        os << v[i];
    }
    return os.str();
}

}  // namespace

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value,
                     const std::string& where) {
    auto bad = [&](const std::string& msg) {
        throw std::invalid_argument(where + ": " + msg + " for key '" + key + "'");
    };
    try {
        if (key == "lr") cfg.train.lr = parse_double(value, key);
        else if (key == "batch") cfg.train.batch = static_cast<int>(parse_long(value, key));
        else if (key == "epochs") cfg.train.epochs = static_cast<int>(parse_long(value, key));
        else if (key == "T" || key == "frames") cfg.train.frames = static_cast<int>(parse_long(value, key));
        else if (key == "clip_step") cfg.train.clip_step = static_cast<int>(parse_long(value, key));
        else if (key == "gamma") cfg.train.gamma = static_cast<int>(parse_long(value, key));
        else if (key == "rho") {
            cfg.train.rho = parse_double(value, key);
            if (cfg.train.rho < 0.0 || cfg.train.rho > 1.0) bad("rho outside [0,1]");
        } else if (key == "seed") cfg.train.seed = static_cast<std::uint64_t>(parse_long(value, key));
        else if (key == "band_lo") cfg.train.band_lo = parse_double(value, key);
        else if (key == "band_hi") cfg.train.band_hi = parse_double(value, key);
        else if (key == "fs") cfg.train.fs = parse_double(value, key);
        else if (key == "nfft") cfg.train.nfft = static_cast<int>(parse_long(value, key));
        else if (key == "n") cfg.synth.n = static_cast<int>(parse_long(value, key));
        else if (key == "stem_width") cfg.model.stem_width = static_cast<int>(parse_long(value, key));
        else if (key == "block_widths") cfg.model.block_widths = parse_int_list(value, key);
        else if (key == "sab_reduction") cfg.model.sab_reduction = static_cast<int>(parse_long(value, key));
        else if (key == "kernel") cfg.model.kernel = static_cast<int>(parse_long(value, key));
        else if (key == "ae_width") cfg.model.ae_width = static_cast<int>(parse_long(value, key));
        else if (key == "ae_latent") cfg.model.ae_latent = static_cast<int>(parse_long(value, key));
        else if (key == "ae_kernel") cfg.model.ae_kernel = static_cast<int>(parse_long(value, key));
        else if (key == "hr_lo") cfg.synth.hr_lo = parse_double(value, key);
        else if (key == "hr_hi") cfg.synth.hr_hi = parse_double(value, key);
        else if (key == "amp_lo") cfg.synth.amp_lo = parse_double(value, key);
        else if (key == "amp_hi") cfg.synth.amp_hi = parse_double(value, key);
        else if (key == "dc_lo") cfg.synth.dc_lo = parse_double(value, key);
        else if (key == "dc_hi") cfg.synth.dc_hi = parse_double(value, key);
        else if (key == "drift_amp") cfg.synth.drift_amp = parse_double(value, key);
        else if (key == "spike_amp") cfg.synth.spike_amp = parse_double(value, key);
        else if (key == "noise_sigma") cfg.synth.noise_sigma = parse_double(value, key);
        else if (key == "common_mode_amp") cfg.synth.common_mode_amp = parse_double(value, key);
        else if (key == "color_order") {
            if (value == "rgb" || value == "RGB") cfg.color_order = ChannelOrder::Rgb;
            else if (value == "yuv" || value == "YUV") cfg.color_order = ChannelOrder::Yuv;
            else bad("expected rgb or yuv");
        } else {
            throw std::invalid_argument(where + ": unknown config key '" + key + "'");
        }
    } catch (const std::invalid_argument&) {
        throw;
    }
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                        ": expected key=value, got '" + t + "'");
        }
        apply_config_kv(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)),
                        origin + ":" + std::to_string(lineno));
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return parse_config_text(read_text_file(path), path);
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os << "lr=" << fmt_double(train.lr) << "\n";
    os << "batch=" << train.batch << "\n";
    os << "epochs=" << train.epochs << "\n";
    os << "T=" << train.frames << "\n";
    os << "clip_step=" << train.clip_step << "\n";
    os << "gamma=" << train.gamma << "\n";
    os << "rho=" << fmt_double(train.rho) << "\n";
    os << "seed=" << train.seed << "\n";
    os << "band_lo=" << fmt_double(train.band_lo) << "\n";
    os << "band_hi=" << fmt_double(train.band_hi) << "\n";
    os << "fs=" << fmt_double(train.fs) << "\n";
    os << "nfft=" << train.nfft << "\n";
    os << "n=" << synth.n << "\n";
    os << "stem_width=" << model.stem_width << "\n";
    os << "block_widths=" << join_ints(model.block_widths) << "\n";
    os << "sab_reduction=" << model.sab_reduction << "\n";
    os << "kernel=" << model.kernel << "\n";
    os << "ae_width=" << model.ae_width << "\n";
    os << "ae_latent=" << model.ae_latent << "\n";
    os << "ae_kernel=" << model.ae_kernel << "\n";
    os << "hr_lo=" << fmt_double(synth.hr_lo) << "\n";
    os << "hr_hi=" << fmt_double(synth.hr_hi) << "\n";
    os << "amp_lo=" << fmt_double(synth.amp_lo) << "\n";
    os << "amp_hi=" << fmt_double(synth.amp_hi) << "\n";
    os << "dc_lo=" << fmt_double(synth.dc_lo) << "\n";
    os << "dc_hi=" << fmt_double(synth.dc_hi) << "\n";
    os << "drift_amp=" << fmt_double(synth.drift_amp) << "\n";
    os << "spike_amp=" << fmt_double(synth.spike_amp) << "\n";
    os << "noise_sigma=" << fmt_double(synth.noise_sigma) << "\n";
    os << "common_mode_amp=" << fmt_double(synth.common_mode_amp) << "\n";
    os << "color_order=" << (color_order == ChannelOrder::Rgb ? "rgb" : "yuv") << "\n";
    return os.str();
}

}  // namespace drnet
