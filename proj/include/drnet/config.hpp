#pragma once

#include <string>

#include "drnet/models.hpp"
#include "drnet/pixelmap.hpp"
#include "drnet/synth.hpp"
#include "drnet/trainer.hpp"

namespace drnet {

inline constexpr const char* kToolVersion = "0.1.0";

// Resolved run configuration: training hyperparameters, model sizes and the
// synthetic-data spec, parsed from flat "key=value" files ('#' comments).
// Unknown keys are rejected with the file and line in the message.
struct RunConfig {
    TrainConfig train;
    ModelConfig model;
    SynthSpec synth;
    ChannelOrder color_order = ChannelOrder::Rgb;

    // Propagates the shared fields (frames, fs, gamma, rows) into the model
    // and synth sub-configs, then validates everything.
    void finalize();

    // One "key=value" line per setting, stable order; feeds the provenance
    // record and reproduces the run when written back to a file.
    std::string to_text() const;
};

// Applies one key=value assignment; `where` prefixes error messages.
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value,
                     const std::string& where);

RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig load_config(const std::string& path);  // empty path -> defaults

}  // namespace drnet
