#include "pairvc/audio/dsp.hpp"

#include <cmath>
#include <numbers>

#include "pairvc/common.hpp"

namespace pairvc::audio {

namespace {
constexpr double kPi = std::numbers::pi;

// Reflect index into [0, n); bounces off both ends without repeating them.
size_t reflect(long long i, long long n) {
    if (n == 1) return 0;
    long long period = 2 * (n - 1);
    long long m = i % period;
    if (m < 0) m += period;
    if (m >= n) m = period - m;
    return size_t(m);
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    size_t n = a.size();
    require(n && (n & (n - 1)) == 0, "fft size must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * kPi / double(len) * (inverse ? 1.0 : -1.0);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                auto u = a[i + j];
                auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= double(n);
}

double MelFilterbank::position(double f) const {
    if (centers_hz.empty()) return -1.0;
    if (f < centers_hz.front() || f > centers_hz.back()) return -1.0;
    auto it = std::upper_bound(centers_hz.begin(), centers_hz.end(), f);
    if (it == centers_hz.begin()) return 0.0;
    size_t hi = size_t(it - centers_hz.begin());
    if (hi >= centers_hz.size()) return double(centers_hz.size() - 1);
    size_t lo = hi - 1;
    double span = centers_hz[hi] - centers_hz[lo];
    double frac = span > 0 ? (f - centers_hz[lo]) / span : 0.0;
    return double(lo) + frac;
}

MelFilterbank make_mel_filterbank(const MelConfig& cfg) {
    require(cfg.n_mels >= 2, "need at least 2 mel bins");
    require(cfg.fmax <= cfg.sample_rate / 2.0, "fmax above Nyquist");
    int bins = cfg.n_fft / 2 + 1;
    std::vector<double> pts(size_t(cfg.n_mels) + 2);
    double mlo = hz_to_mel(cfg.fmin), mhi = hz_to_mel(cfg.fmax);
    for (size_t i = 0; i < pts.size(); ++i)
        pts[i] = mel_to_hz(mlo + (mhi - mlo) * double(i) / double(pts.size() - 1));

    MelFilterbank fb;
    fb.weights = Mat::Zero(cfg.n_mels, bins);
    fb.centers_hz.assign(pts.begin() + 1, pts.end() - 1);
    double bin_hz = double(cfg.sample_rate) / cfg.n_fft;
    for (int m = 0; m < cfg.n_mels; ++m) {
        double lo = pts[m], c = pts[m + 1], hi = pts[m + 2];
        for (int b = 0; b < bins; ++b) {
            double f = b * bin_hz;
            double w = 0.0;
            if (f > lo && f < c)
                w = (f - lo) / (c - lo);
            else if (f >= c && f < hi)
                w = (hi - f) / (hi - c);
            if (w > 0) fb.weights(m, b) = w;
        }
    }
    return fb;
}

namespace {

// Shared framing: T = ceil(N/hop), frame t centered at t*hop, reflect-padded.
int frame_count(size_t n, int hop) { return int((n + size_t(hop) - 1) / size_t(hop)); }

std::vector<double> frame_at(const Waveform& w, long long center, int length) {
    std::vector<double> out(size_t(length), 0.0);
    long long n = (long long)w.samples.size();
    if (n == 0) return out;
    long long start = center - length / 2;
    for (int i = 0; i < length; ++i) out[size_t(i)] = w.samples[reflect(start + i, n)];
    return out;
}

Mat power_frames(const Waveform& w, const MelConfig& cfg) {
    require(cfg.hop > 0 && cfg.n_fft > 0, "bad stft config");
    require(cfg.win_length <= cfg.n_fft, "win_length exceeds n_fft");
    require(cfg.win_length >= cfg.hop, "window must cover the hop");
    if (w.samples.size() < size_t(cfg.win_length)) fail("input too short");
    for (double s : w.samples)
        if (!std::isfinite(s)) fail("waveform contains non-finite samples");
    int T = frame_count(w.samples.size(), cfg.hop);
    int bins = cfg.n_fft / 2 + 1;
    std::vector<double> window(size_t(cfg.win_length));
    for (int i = 0; i < cfg.win_length; ++i)
        window[size_t(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / cfg.win_length);

    Mat out(T, bins);
    std::vector<std::complex<double>> buf(size_t(cfg.n_fft));
    for (int t = 0; t < T; ++t) {
        auto fr = frame_at(w, (long long)t * cfg.hop, cfg.win_length);
        std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
        for (int i = 0; i < cfg.win_length; ++i) buf[size_t(i)] = fr[size_t(i)] * window[size_t(i)];
        fft(buf);
        for (int b = 0; b < bins; ++b) out(t, b) = std::norm(buf[size_t(b)]);
    }
    return out;
}

}  // namespace

MelSpectrogram compute_mel(const Waveform& w, const MelConfig& cfg) {
    auto fb = make_mel_filterbank(cfg);
    Mat power = power_frames(w, cfg);
    MelSpectrogram mel;
    mel.sample_rate = cfg.sample_rate;
    mel.hop = cfg.hop;
    mel.values = (power * fb.weights.transpose())
                     .cwiseMax(cfg.log_floor)
                     .array()
                     .log()
                     .matrix();
    return mel;
}

LinSpectrogram compute_linspec(const Waveform& w, const MelConfig& cfg) {
    Mat power = power_frames(w, cfg);
    LinSpectrogram s;
    s.sample_rate = cfg.sample_rate;
    s.hop = cfg.hop;
    s.values = power.cwiseSqrt().cwiseMax(cfg.log_floor).array().log().matrix();
    return s;
}

F0Contour extract_f0(const Waveform& w, const F0Config& cfg) {
    require(cfg.fmin > 0 && cfg.fmax > cfg.fmin, "bad f0 search range");
    require(cfg.sample_rate > 0 && cfg.hop > 0, "bad f0 config");
    int T = frame_count(w.samples.size(), cfg.hop);
    int half = cfg.win_length / 2;
    int tau_min = std::max(2, int(std::floor(cfg.sample_rate / cfg.fmax)));
    int tau_max = std::min(half - 2, int(std::ceil(cfg.sample_rate / cfg.fmin)));
    require(tau_max > tau_min, "f0 window too short for fmin");

    F0Contour c;
    c.hop = cfg.hop;
    c.sample_rate = cfg.sample_rate;
    c.hz.assign(size_t(T), 0.0);
    c.voiced.assign(size_t(T), 0);

    std::vector<double> d(size_t(tau_max) + 1, 0.0), nd(size_t(tau_max) + 1, 1.0);
    for (int t = 0; t < T; ++t) {
        auto fr = frame_at(w, (long long)t * cfg.hop, cfg.win_length);
        double rms = 0.0;
        for (int i = 0; i < half; ++i) rms += fr[size_t(i)] * fr[size_t(i)];
        rms = std::sqrt(rms / half);
        if (rms < cfg.energy_gate) continue;

        // Difference function over the first half window.
        for (int tau = 1; tau <= tau_max; ++tau) {
            double acc = 0.0;
            for (int i = 0; i < half; ++i) {
                double diff = fr[size_t(i)] - fr[size_t(i + tau)];
                acc += diff * diff;
            }
            d[size_t(tau)] = acc;
        }
        // Cumulative mean normalized difference.
        double run = 0.0;
        nd[0] = 1.0;
        for (int tau = 1; tau <= tau_max; ++tau) {
            run += d[size_t(tau)];
            nd[size_t(tau)] = run > 0.0 ? d[size_t(tau)] * tau / run : 1.0;
        }
        // Absolute threshold, then descend to the local minimum.
        int tau = -1;
        for (int k = tau_min; k <= tau_max; ++k) {
            if (nd[size_t(k)] < cfg.threshold) {
                tau = k;
                while (tau + 1 <= tau_max && nd[size_t(tau + 1)] < nd[size_t(tau)]) ++tau;
                break;
            }
        }
        // Fallback when nothing dips below the threshold: take the earliest
        // dip within a small margin of the global floor (the earliest pick
        // avoids sliding down an octave). Aperiodic frames keep nd near 1,
        // so the 0.35 ceiling leaves noise and silence unvoiced.
        if (tau < 0) {
            double floor_v = nd[size_t(tau_min)];
            for (int k = tau_min + 1; k <= tau_max; ++k)
                floor_v = std::min(floor_v, nd[size_t(k)]);
            if (floor_v < 0.35) {
                for (int k = tau_min; k <= tau_max; ++k) {
                    if (nd[size_t(k)] <= floor_v + 0.03) {
                        tau = k;
                        while (tau + 1 <= tau_max && nd[size_t(tau + 1)] < nd[size_t(tau)]) ++tau;
                        break;
                    }
                }
            }
        }
        if (tau < 0) continue;  // no credible dip: unvoiced

        // Parabolic interpolation of the minimum.
        double delta = 0.0;
        if (tau > tau_min && tau < tau_max) {
            double a = nd[size_t(tau) - 1], b = nd[size_t(tau)], cc = nd[size_t(tau) + 1];
            double denom = a - 2.0 * b + cc;
            if (std::abs(denom) > 1e-12) delta = std::clamp(0.5 * (a - cc) / denom, -0.5, 0.5);
        }
        double f0 = cfg.sample_rate / (double(tau) + delta);
        if (f0 < cfg.fmin || f0 > cfg.fmax) continue;
        c.hz[size_t(t)] = f0;
        c.voiced[size_t(t)] = 1;
    }
    return c;
}

double log_f0_median(const F0Contour& c) {
    std::vector<double> logs;
    logs.reserve(c.hz.size());
    for (size_t i = 0; i < c.hz.size(); ++i)
        if (c.voiced[i]) logs.push_back(std::log(c.hz[i]));
    if (logs.empty()) fail("f0 contour has no voiced frames");
    return median_lower(std::move(logs));
}

F0Contour shift_f0(const F0Contour& source, const F0Contour& reference) {
    if (source.hz.empty() || source.voiced_count() == 0)
        fail("shift_f0: source contour has no voiced frames");
    if (reference.hz.empty() || reference.voiced_count() == 0)
        fail("shift_f0: reference contour has no voiced frames");
    double ratio = std::exp(log_f0_median(reference) - log_f0_median(source));
    F0Contour out = source;
    for (size_t i = 0; i < out.hz.size(); ++i)
        out.hz[i] = out.voiced[i] ? source.hz[i] * ratio : 0.0;
    return out;
}

}  // namespace pairvc::audio
