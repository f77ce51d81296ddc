#pragma once

#include <string>
#include <vector>

#include "pairvc/audio/types.hpp"
#include "pairvc/model/renderer.hpp"

namespace pairvc::cli {

struct AudioSection {
    int sample_rate = 16000;
    int n_fft = 256;
    int win_length = 256;
    int hop = 256;
    int n_mels = 32;
    double fmin = 0.0;
    double fmax = 8000.0;
    double log_floor = 1e-5;
    int f0_win_length = 1024;
    double f0_min = 60.0;
    double f0_max = 500.0;
    double f0_threshold = 0.15;
    double f0_energy_gate = 1e-4;
};

struct SynthSection {
    std::string vocab_path = "data/vocab.json";
    int n_speakers = 8;           // training voices
    int n_heldout_speakers = 4;   // reserved for phase-2 "real" audio
    int hidden = 16;
    int flow_layers = 4;
    int flow_hidden = 24;
    int speaker_dim = 8;
    int text_len_min = 8;  // keeps every utterance over the 0.5 s embed floor
    int text_len_max = 12;
    double base_f0_min = 110.0;
    double base_f0_max = 320.0;
    uint64_t seed = 71;  // fixes generator weights and speaker timbres
};

struct ModelSection {
    int latent = 16;
    int hidden = 48;
    int context_frames = 12;  // +-context window stacked by the front-end
    int context_stride = 2;   // tap spacing inside that window
    int speaker_dim = 16;
    int pitch_dim = 8;
    int flow_layers = 4;
    int flow_hidden = 32;
    std::string posterior_input = "linear";  // or "mel"
    bool speaker_to_decoder = true;
    int harmonics = 16;
    double noise_voiced = 0.05;
    double noise_unvoiced = 1.0;
    double sigma_floor = 1e-4;
    uint64_t frontend_seed = 333;
    uint64_t init_seed = 1234;
};

struct LossSection {
    double w_mel = 45.0;
    double w_kl = 1.0;
    double w_adv = 1.0;
    double w_fm = 1.0;
    bool distill_enabled = false;  // extension hook; contributes exactly zero
    double w_distill = 0.0;
};

struct TrainerSection {
    int batch_size = 8;
    double segment_seconds = 1.0;
    double lr_g = 2e-4;
    double lr_d = 2e-4;
    double lr_decay = 0.999875;
    double beta1 = 0.8;
    double beta2 = 0.99;
    int phase1_steps = 5000;
    int phase2_steps = 2000;
    int checkpoint_every = 1000;
    int log_every = 25;
    int hash_check_every = 250;
    std::vector<std::string> freeze_phase1 = {"frontend"};
    std::vector<std::string> freeze_phase2 = {"frontend", "content"};
    bool freeze_speaker_phase2 = false;
    double speaker_contrastive_weight = 0.0;
    std::string pair_mode = "paired";  // "recon" trains the ablation control
};

struct EvalSection {
    int kmeans_restarts = 10;
    uint64_t kmeans_seed = 4242;
};

struct RunConfig {
    uint64_t seed = 17;
    AudioSection audio;
    SynthSection synth;
    ModelSection model;
    LossSection loss;
    TrainerSection trainer;
    EvalSection eval;

    std::string config_dir;  // directory of the file this was loaded from

    audio::MelConfig mel_config() const;
    audio::F0Config f0_config() const;
    model::RenderConfig render_config() const;
    std::string resolve_path(const std::string& p) const;

    // Canonical-serialization FNV hash; embedded in checkpoints and reports.
    uint64_t hash() const;
    std::string to_json_string() const;

    void validate() const;
};

// Strict load: unknown keys anywhere are an error; missing keys keep
// defaults. Throws Error("config not found: ...") if the file is absent.
RunConfig load_config(const std::string& path);
RunConfig config_from_json_string(const std::string& text);

void write_resolved_config(const RunConfig& cfg, const std::string& out_path);

}  // namespace pairvc::cli
