#pragma once

#include "pairvc/audio/dsp.hpp"
#include "pairvc/cli/config.hpp"
#include "pairvc/model/frontend.hpp"
#include "pairvc/model/renderer.hpp"
#include "pairvc/nn/module.hpp"

namespace pairvc::model {

struct DiscriminatorOutput {
    std::vector<nn::Var> scores;                 // one per resolution
    std::vector<std::vector<nn::Var>> features;  // per resolution, per layer
};

// Conversion network. Prior comes from source-side content features, the
// posterior from the target spectrogram; a speaker-conditioned coupling flow
// bridges the two so the KL term stays in closed form. The decoder predicts a
// log-mel envelope which a deterministic harmonic renderer turns into audio.
//
// Parameter prefixes: frontend, content, post, flow, f0enc, dec, spk, disc.
// Freezing and drift hashing operate on these prefixes.
class VcModel {
  public:
    void build(const cli::RunConfig& cfg);

    // ----- graph builders (training and inference share these) -----

    // (T x frontend dim) content features -> diagonal Gaussian prior
    nn::GaussianSeq encode_prior(nn::Graph& g, nn::Var content_feats) const;

    // target spectrogram (T x bins) + unit speaker row -> posterior
    nn::GaussianSeq encode_posterior(nn::Graph& g, nn::Var spec, nn::Var spk_row) const;

    const nn::CouplingFlow& flow() const { return flow_; }

    // F0 contour -> (frames x pitch_dim). The contour is nearest-neighbor
    // resampled when its length differs from `frames` by at most two frames;
    // larger gaps are an error. Unvoiced frames get a learned embedding.
    nn::Var encode_f0(nn::Graph& g, const audio::F0Contour& f0, long frames) const;

    // latent + pitch (+ speaker) -> predicted log-mel (T x n_mels)
    nn::Var decode_mel(nn::Graph& g, nn::Var z, nn::Var pitch, nn::Var spk_row) const;

    // predicted log-mel -> waveform (T*hop x 1) through the fixed renderer
    nn::Var decode_audio(nn::Graph& g, nn::Var logmel, const audio::F0Contour& f0) const;

    // log-mel (T x n_mels) -> unit-norm row (1 x speaker_dim)
    nn::Var speaker_embed(nn::Graph& g, nn::Var mel, bool frozen = false) const;

    // Reference-utterance convenience; requires at least 0.5 s of audio.
    nn::Mat speaker_embed(const audio::Waveform& wav) const;

    // wave is (S x 1). frozen = true runs without gradient tracking.
    DiscriminatorOutput discriminate(nn::Graph& g, nn::Var wave, bool frozen) const;

    // ----- plumbing -----
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const Frontend& frontend() const { return frontend_; }
    const audio::MelFilterbank& filterbank() const { return fb_; }
    const cli::RunConfig& config() const { return cfg_; }

    std::vector<nn::Param*> generator_params();      // everything except disc
    std::vector<nn::Param*> discriminator_params();  // disc only

  private:
    nn::GaussianSeq heads(nn::Graph& g, nn::Var h, const nn::Linear& mu,
                          const nn::Linear& ls) const;

    cli::RunConfig cfg_;
    audio::MelFilterbank fb_;
    nn::ParamStore params_;
    Frontend frontend_;

    nn::Conv1d content_c1_, content_c2_;
    nn::Linear content_mu_, content_ls_;

    nn::Conv1d post_c1_, post_c2_;
    nn::Linear post_mu_, post_ls_;

    nn::CouplingFlow flow_;

    nn::Linear f0_lin_;
    nn::Param* f0_unvoiced_ = nullptr;

    nn::Conv1d dec_c1_, dec_c2_;
    nn::Linear dec_out_;

    nn::Conv1d spk_conv_;
    nn::Linear spk_out_;

    struct DiscScale {
        nn::StridedConv l1, l2, l3;
        nn::Conv1d l4, head;
    };
    DiscScale disc_[2];
};

struct CheckpointMeta {
    uint64_t config_hash = 0;
    std::string phase;  // "phase1" or "phase2"
    int64_t step = 0;
    bool has_optimizers = false;
};

// Parameters + optional optimizer state + rng blob, all little-endian binary.
// Saving is byte-stable: identical state produces identical files.
void save_checkpoint(const std::string& path, const VcModel& model, const CheckpointMeta& meta,
                     const nn::Adam* g_opt, const nn::Adam* d_opt, const std::string& rng_blob);

// Restores into an already-built model. Refuses a config-hash mismatch unless
// force is set. Returns the stored metadata; rng_blob may be null.
CheckpointMeta load_checkpoint(const std::string& path, VcModel& model, nn::Adam* g_opt,
                               nn::Adam* d_opt, std::string* rng_blob, bool force = false);

// Metadata without touching parameters (for `inspect` style tooling).
CheckpointMeta peek_checkpoint(const std::string& path);

}  // namespace pairvc::model
