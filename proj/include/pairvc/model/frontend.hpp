#pragma once

#include "pairvc/audio/dsp.hpp"
#include "pairvc/cli/config.hpp"
#include "pairvc/nn/module.hpp"

namespace pairvc::model {

// Frozen speech-representation front-end: per-utterance normalised log-mel
// plus delta channels, passed through a fixed orthonormal mixing matrix
// seeded from config, then stacked over a strided +-context window. The
// normalisation strips the average spectral envelope so frames from
// different voices stay comparable; the orthonormal mix changes basis
// without distorting frame geometry. The mixing matrix is registered in the
// ParamStore (non-trainable) so checkpoints and freeze hashes cover it.
class Frontend {
  public:
    void build(nn::ParamStore& ps, const cli::RunConfig& cfg);

    nn::Mat from_mel(const audio::MelSpectrogram& mel) const;
    nn::Mat from_wav(const audio::Waveform& wav) const;  // computes mel first

    int dim() const { return dim_; }

  private:
    const nn::Param* mix_ = nullptr;  // 2M x 2M orthonormal
    int context_ = 12;
    int stride_ = 2;
    int dim_ = 0;
    audio::MelConfig mel_cfg_;
};

}  // namespace pairvc::model
