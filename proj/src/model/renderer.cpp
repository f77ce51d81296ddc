#include "pairvc/model/renderer.hpp"

#include <cmath>
#include <numbers>

#include "pairvc/common.hpp"

namespace pairvc::model {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Harmonic {
    int lo = 0, hi = 0;     // logmel columns the amplitude interpolates between
    double whi = 0.0;       // weight on hi (1-whi on lo)
    double amp = 0.0;
    double cosd = 1.0, sind = 0.0;  // per-sample phase rotation
};

// One pass over the signal. Always produces the waveform; when gout is given
// it also accumulates d(loss)/d(logmel) into glogmel. The backward pass
// replays the identical phase/noise sequences, so only the per-sample sin
// values need recomputing, never storing.
void render_pass(const nn::Mat& logmel, const audio::F0Contour& f0,
                 const audio::MelFilterbank& fb, const RenderConfig& cfg,
                 std::vector<double>& wave, const nn::Mat* gout, nn::Mat* glogmel) {
    long T = logmel.rows(), M = logmel.cols();
    require(T == f0.frames(), "render: f0/envelope frame mismatch");
    require(M == long(fb.centers_hz.size()), "render: filterbank size mismatch");
    int K = cfg.harmonics;
    double gain = 1.0 / std::sqrt(double(std::max(1, K)));

    wave.assign(size_t(T) * size_t(cfg.hop), 0.0);
    Rng noise = make_rng(cfg.noise_seed, "render-noise");
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> sinp(size_t(K), 0.0), cosp(size_t(K), 1.0);
    std::vector<Harmonic> hs(size_t(K), Harmonic{});
    std::vector<double> ga(size_t(K), 0.0);

    for (long t = 0; t < T; ++t) {
        bool voiced = f0.voiced[size_t(t)] != 0;
        int active = 0;
        if (voiced) {
            double hz = f0.hz[size_t(t)];
            for (int k = 1; k <= K; ++k) {
                double fk = hz * k;
                if (fk > fb.centers_hz.back()) break;
                double pos = fb.position(fk);
                if (pos < 0.0) continue;  // below the first band center
                Harmonic& h = hs[size_t(active)];
                h.lo = int(pos);
                h.hi = std::min<long>(h.lo + 1, M - 1);
                h.whi = pos - h.lo;
                double lenv = (1.0 - h.whi) * logmel(t, h.lo) + h.whi * logmel(t, h.hi);
                h.amp = gain * std::exp(0.5 * lenv);
                double delta = kTwoPi * hz * k / cfg.sample_rate;
                h.cosd = std::cos(delta);
                h.sind = std::sin(delta);
                ++active;
            }
        }
        double nlevel = voiced ? cfg.noise_voiced : cfg.noise_unvoiced;
        double navg = logmel.row(t).mean();
        double namp = nlevel * std::exp(0.5 * navg);

        std::fill(ga.begin(), ga.begin() + active, 0.0);
        double gn = 0.0;
        for (int i = 0; i < cfg.hop; ++i) {
            size_t s = size_t(t) * size_t(cfg.hop) + size_t(i);
            double x = 0.0;
            for (int k = 0; k < active; ++k) x += hs[size_t(k)].amp * sinp[size_t(k)];
            double eta = gauss(noise);
            x += namp * eta;
            double o = std::tanh(x);
            wave[s] = o;
            if (gout) {
                double gx = (*gout)(long(s), 0) * (1.0 - o * o);
                for (int k = 0; k < active; ++k) ga[size_t(k)] += gx * sinp[size_t(k)];
                gn += gx * eta;
            }
            for (int k = 0; k < active; ++k) {
                double sn = sinp[size_t(k)] * hs[size_t(k)].cosd + cosp[size_t(k)] * hs[size_t(k)].sind;
                double cn = cosp[size_t(k)] * hs[size_t(k)].cosd - sinp[size_t(k)] * hs[size_t(k)].sind;
                sinp[size_t(k)] = sn;
                cosp[size_t(k)] = cn;
            }
        }
        if (gout) {
            for (int k = 0; k < active; ++k) {
                const Harmonic& h = hs[size_t(k)];
                double gamp = ga[size_t(k)] * h.amp * 0.5;  // d amp / d lenv = amp/2
                (*glogmel)(t, h.lo) += gamp * (1.0 - h.whi);
                (*glogmel)(t, h.hi) += gamp * h.whi;
            }
            double gnav = gn * namp * 0.5 / double(M);
            for (long m = 0; m < M; ++m) (*glogmel)(t, m) += gnav;
        }
    }
}

}  // namespace

std::vector<double> render_waveform(const nn::Mat& logmel, const audio::F0Contour& f0,
                                    const audio::MelFilterbank& fb, const RenderConfig& cfg) {
    std::vector<double> wave;
    render_pass(logmel, f0, fb, cfg, wave, nullptr, nullptr);
    return wave;
}

nn::Var render_waveform_op(nn::Graph& g, nn::Var logmel, const audio::F0Contour& f0,
                           const audio::MelFilterbank& fb, const RenderConfig& cfg) {
    std::vector<double> wave;
    render_pass(logmel.value(), f0, fb, cfg, wave, nullptr, nullptr);
    nn::Mat out(long(wave.size()), 1);
    for (size_t i = 0; i < wave.size(); ++i) out(long(i), 0) = wave[i];
    nn::Node* n = g.alloc(std::move(out), logmel.needs_grad());
    if (n->needs_grad) {
        nn::Node* ln = logmel.node();
        // captured by value; cheap POD + shared filterbank copy
        audio::F0Contour f0c = f0;
        audio::MelFilterbank fbc = fb;
        RenderConfig cc = cfg;
        n->backprop = [ln, f0c, fbc, cc](nn::Node& self) {
            nn::Mat& gl = nn::gref(ln);
            std::vector<double> scratch;
            render_pass(ln->value, f0c, fbc, cc, scratch, &self.grad, &gl);
        };
    }
    return nn::Var(n);
}

}  // namespace pairvc::model
