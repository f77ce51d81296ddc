#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pairvc/audio/types.hpp"
#include "pairvc/cli/config.hpp"
#include "pairvc/nn/module.hpp"

namespace pairvc::synth {

// Closed symbol set. The leading `unvoiced_prefix` symbols behave like
// noise consonants: their frames render without harmonics.
struct Vocab {
    std::vector<std::string> symbols;
    int unvoiced_prefix = 0;

    int size() const { return int(symbols.size()); }
    int id_of(const std::string& sym) const;
    bool is_unvoiced(int id) const { return id < unvoiced_prefix; }
};

Vocab load_vocab(const std::string& path);

struct LatentPlan {
    nn::Mat h_text;               // tokens x hidden
    std::vector<int> durations;   // per token, >= 1
    nn::Mat mu_p, sigma_p;        // frames x latent, expanded
    nn::Mat z_p;                  // frames x latent
    nn::Mat noise_w;              // tokens x 1
    int g_choice = -1;            // speaker that conditioned the durations
    std::vector<uint8_t> frame_unvoiced;  // per frame, from token class
    int frames() const { return int(mu_p.rows()); }
};

struct SyntheticPair {
    audio::Waveform source, target;
    LatentPlan plan;
    std::vector<int> text_ids;
    int src_speaker = -1, tgt_speaker = -1;
    uint64_t seed = 0;
};

// Miniature multi-speaker synthesizer. Weights are fixed functions of the
// synth seed (never trained); speaker identity enters through the duration
// token, the inverse flow conditioning, and a procedural timbre decoder
// (per-speaker base F0, spectral tilt, and envelope shape).
class PairGenerator {
  public:
    explicit PairGenerator(const cli::RunConfig& cfg);

    int n_train_speakers() const { return cfg_.synth.n_speakers; }
    int n_total_speakers() const {
        return cfg_.synth.n_speakers + cfg_.synth.n_heldout_speakers;
    }
    const Vocab& vocab() const { return vocab_; }
    double base_f0(int speaker) const;

    nn::Mat encode_text(const std::vector<int>& ids) const;
    // Symmetric in (src, tgt): the draw decides between the smaller and the
    // larger id, so argument order cannot change the outcome.
    int sample_speaker_token(int src, int tgt, Rng& rng) const;
    std::vector<int> predict_duration(const nn::Mat& h_text, int g, const nn::Mat& w) const;
    static std::pair<nn::Mat, nn::Mat> length_regulate(const nn::Mat& mu, const nn::Mat& sigma,
                                                       const std::vector<int>& durations);
    std::pair<nn::Mat, nn::Mat> project_latent(const nn::Mat& h_text) const;  // per-token mu/sigma
    static nn::Mat sample_latent(const nn::Mat& mu, const nn::Mat& sigma, const nn::Mat& eps);
    nn::Mat inverse_flow(const nn::Mat& z_p, int speaker) const;
    nn::Mat forward_flow(const nn::Mat& z, int speaker) const;
    audio::Waveform decode(const nn::Mat& z, int speaker,
                           const std::vector<uint8_t>* frame_unvoiced = nullptr) const;

    std::vector<int> sample_text(Rng& rng) const;
    SyntheticPair generate_pair(const std::vector<int>& text, int src, int tgt,
                                uint64_t seed) const;
    // Single utterance from one speaker; used for the held-out "real" rows.
    audio::Waveform generate_single(const std::vector<int>& text, int speaker,
                                    uint64_t seed) const;

    // F0 contour the decoder will condition on (exposed for tests).
    audio::F0Contour plan_f0(const nn::Mat& z, int speaker,
                             const std::vector<uint8_t>* frame_unvoiced) const;

  private:
    nn::Mat envelope(const nn::Mat& z, int speaker,
                     const std::vector<uint8_t>* frame_unvoiced) const;

    cli::RunConfig cfg_;
    Vocab vocab_;
    audio::MelFilterbank fb_;
    model::RenderConfig render_;

    // fixed weights
    nn::Mat emb_;                   // V x H
    nn::Mat enc_w_[3];              // H x H context taps
    nn::Mat enc_b_;                 // 1 x H
    nn::Mat dur_w_;                 // H x 1
    nn::Mat dur_g_;                 // H x 1, applied to the g-token embedding
    nn::Mat g_table_;               // speakers x H
    double dur_wnoise_ = 0.35;
    double dur_bias_ = 0.0;
    nn::Mat proj_mu_, proj_ls_;     // H x D
    nn::Mat spk_table_;             // speakers x speaker_dim (flow conditioning)
    nn::Mat env_mod_;               // D x M content modulation
    nn::Mat pitch_vec_;             // D x 1 latent-to-pitch modulation
    std::vector<double> base_f0_, tilt_;
    nn::Mat env_shape_;             // speakers x M smooth per-speaker envelope
    std::vector<double> vib_phase_;
    mutable nn::ParamStore flow_params_;
    nn::CouplingFlow flow_;
};

}  // namespace pairvc::synth
