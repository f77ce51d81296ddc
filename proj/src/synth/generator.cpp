#include "pairvc/synth/generator.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "pairvc/audio/dsp.hpp"

namespace pairvc::synth {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

int Vocab::id_of(const std::string& sym) const {
    for (size_t i = 0; i < symbols.size(); ++i)
        if (symbols[i] == sym) return int(i);
    fail("symbol not in vocabulary: " + sym);
}

Vocab load_vocab(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail("vocab file not found: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("vocab parse error: ") + e.what());
    }
    Vocab v;
    v.symbols = j.at("symbols").get<std::vector<std::string>>();
    v.unvoiced_prefix = j.value("unvoiced_prefix", 0);
    require(!v.symbols.empty(), "vocabulary is empty");
    require(v.unvoiced_prefix >= 0 && v.unvoiced_prefix <= v.size(),
            "vocab unvoiced_prefix out of range");
    for (size_t i = 0; i < v.symbols.size(); ++i)
        for (size_t k = i + 1; k < v.symbols.size(); ++k)
            require(v.symbols[i] != v.symbols[k], "duplicate vocab symbol: " + v.symbols[i]);
    return v;
}

PairGenerator::PairGenerator(const cli::RunConfig& cfg) : cfg_(cfg) {
    vocab_ = load_vocab(cfg.resolve_path(cfg.synth.vocab_path));
    fb_ = audio::make_mel_filterbank(cfg.mel_config());
    render_ = cfg.render_config();

    int V = vocab_.size();
    long H = cfg.synth.hidden;
    long D = cfg.model.latent;  // latent dimension is shared with the conversion model
    long M = cfg.audio.n_mels;
    int S = n_total_speakers();

    Rng rng = make_rng(cfg.synth.seed, "synth-weights");
    emb_ = nn::init_uniform(rng, V, H, 1.0);
    for (auto& w : enc_w_) w = nn::init_uniform(rng, H, H, 1.0 / std::sqrt(double(H)));
    enc_b_ = nn::init_uniform(rng, 1, H, 0.1);
    dur_w_ = nn::init_uniform(rng, H, 1, 1.0 / std::sqrt(double(H)));
    dur_g_ = nn::init_uniform(rng, H, 1, 1.0 / std::sqrt(double(H)));
    g_table_ = nn::init_uniform(rng, S, H, 1.0);
    proj_mu_ = nn::init_uniform(rng, H, D, 1.2 / std::sqrt(double(H)));
    proj_ls_ = nn::init_uniform(rng, H, D, 1.0 / std::sqrt(double(H)));
    spk_table_ = nn::init_uniform(rng, S, cfg.synth.speaker_dim, 1.0);
    env_mod_ = nn::init_uniform(rng, D, M, 0.6);
    pitch_vec_ = nn::init_uniform(rng, D, 1, 0.5);

    // Per-speaker timbre: base pitch stratified over the configured range in
    // a shuffled order, so held-out voices are not all at one extreme.
    std::vector<int> perm(size_t(S), 0);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = S - 1; i > 0; --i) std::swap(perm[size_t(i)], perm[size_t(uniform_int(rng, 0, i))]);
    double llo = std::log(cfg.synth.base_f0_min), lhi = std::log(cfg.synth.base_f0_max);
    base_f0_.resize(size_t(S));
    tilt_.resize(size_t(S));
    vib_phase_.resize(size_t(S));
    env_shape_ = nn::Mat::Zero(S, M);
    for (int s = 0; s < S; ++s) {
        double pos = (perm[size_t(s)] + 0.3 + 0.4 * uniform(rng, 0.0, 1.0)) / double(S);
        base_f0_[size_t(s)] = std::exp(llo + pos * (lhi - llo));
        tilt_[size_t(s)] = uniform(rng, -0.8, 0.8);
        vib_phase_[size_t(s)] = uniform(rng, 0.0, kTwoPi);
        for (int c = 1; c <= 3; ++c) {
            double a = uniform(rng, 0.35, 0.95) / c;
            double phi = uniform(rng, 0.0, kTwoPi);
            for (long m = 0; m < M; ++m)
                env_shape_(s, m) += a * std::cos(std::numbers::pi * c * (m + 0.5) / double(M) + phi);
        }
    }

    // Small random coupling coefficients: the flow is speaker-dependent from
    // the start, and still exactly invertible.
    flow_.build(flow_params_, rng, "synthflow", D, cfg.synth.speaker_dim, cfg.synth.flow_hidden,
                cfg.synth.flow_layers, /*zero_init_coeffs=*/false);
}

double PairGenerator::base_f0(int speaker) const {
    require(speaker >= 0 && speaker < n_total_speakers(), "speaker id out of range");
    return base_f0_[size_t(speaker)];
}

nn::Mat PairGenerator::encode_text(const std::vector<int>& ids) const {
    require(!ids.empty(), "encode_text: empty input");
    long N = long(ids.size());
    long H = cfg_.synth.hidden;
    nn::Mat e(N, H);
    for (long t = 0; t < N; ++t) {
        int id = ids[size_t(t)];
        require(id >= 0 && id < vocab_.size(), "token id out of vocabulary range");
        e.row(t) = emb_.row(id);
    }
    nn::Mat h(N, H);
    for (long t = 0; t < N; ++t) {
        nn::Mat acc = enc_b_;
        for (int j = 0; j < 3; ++j) {
            long src = t + j - 1;
            if (src < 0 || src >= N) continue;
            acc += e.row(src) * enc_w_[j];
        }
        h.row(t) = acc.array().tanh();
    }
    return h;
}

int PairGenerator::sample_speaker_token(int src, int tgt, Rng& rng) const {
    int lo = std::min(src, tgt), hi = std::max(src, tgt);
    if (lo == hi) return lo;
    return uniform(rng, 0.0, 1.0) < 0.5 ? lo : hi;
}

std::vector<int> PairGenerator::predict_duration(const nn::Mat& h_text, int g,
                                                 const nn::Mat& w) const {
    require(g >= 0 && g < n_total_speakers(), "speaker token out of range");
    require(w.rows() == h_text.rows() && w.cols() == 1, "duration noise shape mismatch");
    nn::Mat a = h_text * dur_w_;
    double gterm = (g_table_.row(g) * dur_g_)(0, 0);
    std::vector<int> out(size_t(h_text.rows()));
    for (long t = 0; t < h_text.rows(); ++t) {
        double v = a(t, 0) + gterm + dur_wnoise_ * w(t, 0) + dur_bias_;
        out[size_t(t)] = std::max(1, int(std::lround(6.0 + 2.5 * std::tanh(v))));
    }
    return out;
}

std::pair<nn::Mat, nn::Mat> PairGenerator::length_regulate(const nn::Mat& mu, const nn::Mat& sigma,
                                                           const std::vector<int>& durations) {
    require(mu.rows() == sigma.rows() && mu.rows() == long(durations.size()),
            "length_regulate: token count mismatch");
    long total = 0;
    for (int d : durations) {
        require(d >= 0, "length_regulate: negative duration");
        total += d;
    }
    require(total >= 1, "length_regulate: all durations zero");
    nn::Mat mu_out(total, mu.cols()), sg_out(total, sigma.cols());
    long r = 0;
    for (long t = 0; t < mu.rows(); ++t) {
        for (int k = 0; k < durations[size_t(t)]; ++k) {
            mu_out.row(r) = mu.row(t);
            sg_out.row(r) = sigma.row(t);
            ++r;
        }
    }
    return {mu_out, sg_out};
}

std::pair<nn::Mat, nn::Mat> PairGenerator::project_latent(const nn::Mat& h_text) const {
    nn::Mat mu = h_text * proj_mu_;
    nn::Mat pre = h_text * proj_ls_;
    nn::Mat sigma = (0.25 * (pre.array() - 1.5).exp().log1p() + 1e-4).matrix();
    return {mu, sigma};
}

nn::Mat PairGenerator::sample_latent(const nn::Mat& mu, const nn::Mat& sigma,
                                     const nn::Mat& eps) {
    require(mu.rows() == eps.rows() && mu.cols() == eps.cols(), "sample_latent: eps shape");
    require((sigma.array() > 0.0).all(), "sample_latent: sigma must be positive");
    return mu + sigma.cwiseProduct(eps);
}

nn::Mat PairGenerator::inverse_flow(const nn::Mat& z_p, int speaker) const {
    require(speaker >= 0 && speaker < n_total_speakers(), "speaker id out of range");
    nn::Graph g;
    return flow_.inverse(g, g.input(z_p), g.input(nn::Mat(spk_table_.row(speaker)))).value();
}

nn::Mat PairGenerator::forward_flow(const nn::Mat& z, int speaker) const {
    require(speaker >= 0 && speaker < n_total_speakers(), "speaker id out of range");
    nn::Graph g;
    return flow_.forward(g, g.input(z), g.input(nn::Mat(spk_table_.row(speaker)))).value();
}

nn::Mat PairGenerator::envelope(const nn::Mat& z, int speaker,
                                const std::vector<uint8_t>* frame_unvoiced) const {
    long T = z.rows(), M = cfg_.audio.n_mels;
    nn::Mat env(T, M);
    nn::Mat mod = z * env_mod_;
    for (long t = 0; t < T; ++t) {
        bool uv = frame_unvoiced && (*frame_unvoiced)[size_t(t)] != 0;
        for (long m = 0; m < M; ++m) {
            double rel = M > 1 ? double(m) / double(M - 1) : 0.0;
            double v = -2.5 + env_shape_(speaker, m) + tilt_[size_t(speaker)] * (2.0 * rel - 1.0) +
                       mod(t, m);
            if (uv) v += -1.0 + 1.6 * std::max(0.0, (rel - 0.55) / 0.45);
            env(t, m) = std::clamp(v, std::log(cfg_.audio.log_floor), 2.0);
        }
    }
    return env;
}

audio::F0Contour PairGenerator::plan_f0(const nn::Mat& z, int speaker,
                                        const std::vector<uint8_t>* frame_unvoiced) const {
    long T = z.rows();
    audio::F0Contour c;
    c.hop = cfg_.audio.hop;
    c.sample_rate = cfg_.audio.sample_rate;
    c.hz.assign(size_t(T), 0.0);
    c.voiced.assign(size_t(T), 1);
    nn::Mat pmod = z * pitch_vec_;
    double lo = cfg_.audio.f0_min + 10.0, hi = cfg_.audio.f0_max - 60.0;
    for (long t = 0; t < T; ++t) {
        if (frame_unvoiced && (*frame_unvoiced)[size_t(t)] != 0) {
            c.voiced[size_t(t)] = 0;
            continue;
        }
        double tsec = double(t) * cfg_.audio.hop / cfg_.audio.sample_rate;
        double wob = std::clamp(pmod(t, 0), -1.5, 1.5);
        double logf = std::log(base_f0_[size_t(speaker)]) +
                      0.05 * std::sin(kTwoPi * 4.5 * tsec + vib_phase_[size_t(speaker)]) +
                      0.04 * wob;
        c.hz[size_t(t)] = std::clamp(std::exp(logf), lo, hi);
    }
    return c;
}

audio::Waveform PairGenerator::decode(const nn::Mat& z, int speaker,
                                      const std::vector<uint8_t>* frame_unvoiced) const {
    require(z.rows() >= 1, "decode: need at least one frame");
    require(speaker >= 0 && speaker < n_total_speakers(), "speaker id out of range");
    if (frame_unvoiced)
        require(long(frame_unvoiced->size()) == z.rows(), "decode: unvoiced mask length mismatch");
    nn::Mat env = envelope(z, speaker, frame_unvoiced);
    audio::F0Contour f0 = plan_f0(z, speaker, frame_unvoiced);
    audio::Waveform w;
    w.sample_rate = cfg_.audio.sample_rate;
    w.samples = model::render_waveform(env, f0, fb_, render_);
    return w;
}

std::vector<int> PairGenerator::sample_text(Rng& rng) const {
    int len = int(uniform_int(rng, cfg_.synth.text_len_min, cfg_.synth.text_len_max));
    std::vector<int> ids(size_t(len), 0);
    for (int i = 0; i < len; ++i) {
        bool uv = vocab_.unvoiced_prefix > 0 && uniform(rng, 0.0, 1.0) < 0.2;
        ids[size_t(i)] = uv ? int(uniform_int(rng, 0, vocab_.unvoiced_prefix - 1))
                            : int(uniform_int(rng, vocab_.unvoiced_prefix, vocab_.size() - 1));
    }
    return ids;
}

SyntheticPair PairGenerator::generate_pair(const std::vector<int>& text, int src, int tgt,
                                           uint64_t seed) const {
    require(src >= 0 && src < n_total_speakers() && tgt >= 0 && tgt < n_total_speakers(),
            "speaker id out of range");
    LatentPlan plan;
    plan.h_text = encode_text(text);
    long N = plan.h_text.rows();

    Rng rng_g = make_rng(seed, "pair-g");
    plan.g_choice = sample_speaker_token(src, tgt, rng_g);

    Rng rng_w = make_rng(seed, "pair-w");
    plan.noise_w = nn::Mat(N, 1);
    for (long t = 0; t < N; ++t) plan.noise_w(t, 0) = normal(rng_w);
    plan.durations = predict_duration(plan.h_text, plan.g_choice, plan.noise_w);

    auto [mu_tok, sg_tok] = project_latent(plan.h_text);
    std::tie(plan.mu_p, plan.sigma_p) = length_regulate(mu_tok, sg_tok, plan.durations);

    long T = plan.mu_p.rows();
    Rng rng_e = make_rng(seed, "pair-eps");
    nn::Mat eps(T, plan.mu_p.cols());
    for (long t = 0; t < T; ++t)
        for (long d = 0; d < eps.cols(); ++d) eps(t, d) = normal(rng_e);
    plan.z_p = sample_latent(plan.mu_p, plan.sigma_p, eps);

    plan.frame_unvoiced.assign(size_t(T), 0);
    long r = 0;
    for (long t = 0; t < N; ++t) {
        bool uv = vocab_.is_unvoiced(text[size_t(t)]);
        for (int k = 0; k < plan.durations[size_t(t)]; ++k)
            plan.frame_unvoiced[size_t(r++)] = uv ? 1 : 0;
    }

    SyntheticPair pair;
    pair.plan = std::move(plan);
    pair.text_ids = text;
    pair.src_speaker = src;
    pair.tgt_speaker = tgt;
    pair.seed = seed;
    pair.source = decode(inverse_flow(pair.plan.z_p, src), src, &pair.plan.frame_unvoiced);
    pair.target = decode(inverse_flow(pair.plan.z_p, tgt), tgt, &pair.plan.frame_unvoiced);
    return pair;
}

audio::Waveform PairGenerator::generate_single(const std::vector<int>& text, int speaker,
                                               uint64_t seed) const {
    SyntheticPair p = generate_pair(text, speaker, speaker, seed);
    return p.target;
}

}  // namespace pairvc::synth
