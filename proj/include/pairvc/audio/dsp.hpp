#pragma once

#include <complex>
#include <vector>

#include "pairvc/audio/types.hpp"

namespace pairvc::audio {

// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse = false);

// Triangular filterbank rows on mel-spaced centers; also exposes the center
// frequencies so downstream code can map Hz to fractional mel-bin positions.
struct MelFilterbank {
    Mat weights;                            // (n_mels x n_fft/2+1)
    std::vector<double> centers_hz;         // size n_mels

    // Fractional bin index whose interpolated center matches f, clamped to
    // [0, n_mels-1]; -1 if f is outside [centers.front(), centers.back()].
    double position(double f) const;
};

MelFilterbank make_mel_filterbank(const MelConfig& cfg);

// Frame count is always ceil(samples/hop); frames are centered on t*hop with
// reflect padding. Silence maps to log(log_floor) everywhere.
MelSpectrogram compute_mel(const Waveform& w, const MelConfig& cfg);

LinSpectrogram compute_linspec(const Waveform& w, const MelConfig& cfg);

// YIN. Same frame grid as compute_mel for equal hop, so contours and mel
// spectrograms line up frame for frame.
F0Contour extract_f0(const Waveform& w, const F0Config& cfg);

// Log-domain median shift: voiced frames become
//   exp(log f - median(log f_voiced) + median(log ref_voiced)).
// Unvoiced frames stay zero. Medians use the lower of two middles so the
// shift is exact arithmetic on contour elements.
F0Contour shift_f0(const F0Contour& source, const F0Contour& reference);

double log_f0_median(const F0Contour& c);  // over voiced frames only

}  // namespace pairvc::audio
