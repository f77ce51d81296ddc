#pragma once

#include "pairvc/audio/dsp.hpp"
#include "pairvc/nn/tensor.hpp"

namespace pairvc::model {

// Harmonic-plus-noise synthesis from a log-mel envelope and an F0 contour.
// Harmonic amplitudes are read off the envelope at k*f0 by linear
// interpolation between mel band centers; phase advances by recurrence so the
// waveform is continuous across frames. Output is tanh-bounded.
//
// Rendering is a pure function of (logmel, f0, config): the noise excitation
// comes from a fixed-seed stream, so decoding twice is bit-identical.
struct RenderConfig {
    int sample_rate = 16000;
    int hop = 256;
    int harmonics = 16;
    double noise_voiced = 0.05;    // noise floor under voiced frames
    double noise_unvoiced = 1.0;   // full-strength noise when unvoiced
    uint64_t noise_seed = 9001;
};

// Plain forward. logmel is (T x M); f0 must have T frames.
std::vector<double> render_waveform(const nn::Mat& logmel, const audio::F0Contour& f0,
                                    const audio::MelFilterbank& fb, const RenderConfig& cfg);

// Graph op: same computation, with gradients flowing into logmel (amplitudes
// only; f0 is a constant conditioning signal). Output is (T*hop x 1).
nn::Var render_waveform_op(nn::Graph& g, nn::Var logmel, const audio::F0Contour& f0,
                           const audio::MelFilterbank& fb, const RenderConfig& cfg);

}  // namespace pairvc::model
