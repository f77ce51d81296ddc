#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace pairvc::audio {

using Mat = Eigen::MatrixXd;

struct Waveform {
    std::vector<double> samples;  // mono, in [-1, 1]
    int sample_rate = 0;

    size_t size() const { return samples.size(); }
    double seconds() const {
        return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0;
    }
};

// Frame-major: (frames x n_mels), natural log of floor-clamped filterbank
// energies.
struct MelSpectrogram {
    Mat values;
    int sample_rate = 0;
    int hop = 0;
    int frames() const { return int(values.rows()); }
    int bins() const { return int(values.cols()); }
};

// Frame-major: (frames x bins), log magnitude of the STFT.
struct LinSpectrogram {
    Mat values;
    int sample_rate = 0;
    int hop = 0;
    int frames() const { return int(values.rows()); }
};

// hz[t] is meaningful only where voiced[t]; unvoiced frames carry 0.
struct F0Contour {
    std::vector<double> hz;
    std::vector<uint8_t> voiced;
    int hop = 0;
    int sample_rate = 0;

    int frames() const { return int(hz.size()); }
    int voiced_count() const {
        int n = 0;
        for (auto v : voiced) n += v != 0;
        return n;
    }
};

struct MelConfig {
    int sample_rate = 16000;
    int n_fft = 256;
    int win_length = 256;
    int hop = 256;
    int n_mels = 32;
    double fmin = 0.0;
    double fmax = 8000.0;
    double log_floor = 1e-5;
};

struct F0Config {
    int sample_rate = 16000;
    int hop = 256;
    int win_length = 1024;
    double fmin = 60.0;
    double fmax = 500.0;
    double threshold = 0.15;   // CMNDF acceptance threshold
    double energy_gate = 1e-4; // frame RMS below this is unvoiced
};

}  // namespace pairvc::audio
