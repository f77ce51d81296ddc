#pragma once

#include "pairvc/cli/manifest.hpp"
#include "pairvc/model/vc_model.hpp"

namespace pairvc::infer {

struct ConvertOptions {
    std::string eps_policy = "zero";  // "zero" uses the prior mean; "sample" draws
    uint64_t seed = 0;
};

struct ConvertResult {
    audio::Waveform audio;
    std::vector<std::string> warnings;
};

// Loads a checkpoint once and converts any number of utterances. The content
// prior comes from the source, the speaker embedding and F0 median from the
// reference; output length is always source-frames * hop.
class Converter {
  public:
    Converter(const cli::RunConfig& cfg, const std::string& checkpoint_path, bool force = false);

    ConvertResult convert(const audio::Waveform& source, const audio::Waveform& reference,
                          const ConvertOptions& opt = {}) const;

    const model::VcModel& vc() const { return model_; }
    const model::CheckpointMeta& meta() const { return meta_; }

  private:
    model::VcModel model_;
    model::CheckpointMeta meta_;
};

struct BatchRowResult {
    std::string id;
    bool ok = false;
    std::string out_path;  // when ok
    std::string message;   // error or warning summary
};

struct BatchResult {
    std::vector<BatchRowResult> rows;
    std::vector<std::string> warnings;
    int n_ok = 0;
};

// One output per manifest row, named {row_id}_cv.wav in out_dir. A row needs
// wav_path (source) and ref_path (reference); per-row failures are recorded
// and the run continues.
BatchResult batch_convert(const Converter& converter, const cli::Manifest& manifest,
                          const std::string& out_dir, const ConvertOptions& opt = {});

}  // namespace pairvc::infer
