#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "pairvc/audio/dsp.hpp"
#include "pairvc/model/losses.hpp"
#include "pairvc/model/renderer.hpp"
#include "pairvc/model/vc_model.hpp"
#include "pairvc/synth/generator.hpp"
#include "test_util.hpp"

using namespace pairvc;
using namespace pairvc::model;

namespace {

audio::Waveform test_tone(double hz, double secs, uint64_t seed) {
    audio::Waveform w;
    w.sample_rate = 16000;
    Rng rng = make_rng(seed, "model-tone");
    w.samples.resize(size_t(secs * 16000));
    for (size_t i = 0; i < w.samples.size(); ++i) {
        double t = double(i) / 16000.0;
        w.samples[i] = 0.35 * std::sin(2.0 * std::numbers::pi * hz * t) + 0.01 * normal(rng);
    }
    return w;
}

audio::F0Contour flat_f0(int frames, double hz) {
    audio::F0Contour c;
    c.hop = 256;
    c.sample_rate = 16000;
    c.hz.assign(size_t(frames), hz);
    c.voiced.assign(size_t(frames), 1);
    return c;
}

}  // namespace

TEST_CASE("frontend features are deterministic functions of config and audio") {
    auto cfg = test_config();
    Frontend fa, fb;
    nn::ParamStore pa, pb;
    fa.build(pa, cfg);
    fb.build(pb, cfg);
    audio::Waveform w = test_tone(200.0, 0.4, 1);
    nn::Mat ma = fa.from_wav(w), mb = fb.from_wav(w);
    CHECK((ma - mb).cwiseAbs().maxCoeff() == 0.0);
    int taps = 2 * (cfg.model.context_frames / cfg.model.context_stride) + 1;
    CHECK(ma.cols() == taps * 2 * cfg.audio.n_mels);
    CHECK(ma.cols() == fa.dim());
    CHECK(ma.rows() == (long(w.size()) + cfg.audio.hop - 1) / cfg.audio.hop);
    CHECK_FALSE(pa.get("frontend.mix").trainable);

    auto cfg2 = cfg;
    cfg2.model.frontend_seed += 1;
    Frontend fc;
    nn::ParamStore pc;
    fc.build(pc, cfg2);
    CHECK((fc.from_wav(w) - ma).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("model builds with the documented parameter prefixes") {
    auto cfg = test_config();
    VcModel m;
    m.build(cfg);
    for (const char* pfx : {"frontend", "content", "post", "flow", "f0enc", "dec", "spk", "disc"})
        CHECK(m.params().with_prefix(pfx).size() > 0);
    // generator/discriminator split covers the store exactly once
    VcModel m2;
    m2.build(cfg);
    size_t g = m2.generator_params().size(), d = m2.discriminator_params().size();
    CHECK(g + d == m2.params().count());
    CHECK(d > 0);
}

TEST_CASE("prior and posterior heads emit matched positive-variance gaussians") {
    auto cfg = test_config();
    VcModel m;
    m.build(cfg);
    audio::Waveform w = test_tone(180.0, 0.6, 3);
    nn::Mat feats = m.frontend().from_wav(w);
    audio::LinSpectrogram spec = audio::compute_linspec(w, cfg.mel_config());

    nn::Graph g;
    auto prior = m.encode_prior(g, g.input(feats));
    CHECK(prior.mu.rows() == feats.rows());
    CHECK(prior.mu.cols() == cfg.model.latent);
    CHECK(prior.sigma.value().minCoeff() >= cfg.model.sigma_floor);

    nn::Var spk = m.speaker_embed(g, g.input(audio::compute_mel(w, cfg.mel_config()).values));
    nn::Mat mel_emb = m.speaker_embed(w);
    CHECK(mel_emb.rows() == 1);
    CHECK(mel_emb.cols() == cfg.model.speaker_dim);
    CHECK(std::abs(mel_emb.norm() - 1.0) < 1e-9);

    auto post = m.encode_posterior(g, g.input(spec.values), g.input(mel_emb));
    CHECK(post.mu.rows() == spec.values.rows());
    CHECK(post.mu.cols() == cfg.model.latent);
    CHECK(post.sigma.value().minCoeff() >= cfg.model.sigma_floor);
}

TEST_CASE("speaker embedding rejects references shorter than half a second") {
    auto cfg = test_config();
    VcModel m;
    m.build(cfg);
    audio::Waveform w = test_tone(150.0, 0.2, 4);
    CHECK_THROWS_WITH_AS(m.speaker_embed(w),
                         "speaker reference too short: need at least 0.5 s of audio", Error);
}

TEST_CASE("f0 encoding distinguishes voiced from unvoiced frames") {
    auto cfg = test_config();
    VcModel m;
    m.build(cfg);
    audio::F0Contour c = flat_f0(12, 200.0);
    c.voiced[3] = 0;
    c.hz[3] = 0.0;
    nn::Graph g;
    nn::Var pe = m.encode_f0(g, c, 12);
    CHECK(pe.rows() == 12);
    CHECK(pe.cols() == cfg.model.pitch_dim);
    // voiced rows with equal hz agree; the unvoiced row uses its own embedding
    CHECK((pe.value().row(2) - pe.value().row(4)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((pe.value().row(3) - pe.value().row(2)).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("f0 encoding tolerates tiny length drift and rejects large gaps") {
    auto cfg = test_config();
    VcModel m;
    m.build(cfg);
    nn::Graph g;
    CHECK(m.encode_f0(g, flat_f0(14, 180.0), 12).rows() == 12);
    CHECK_THROWS_AS(m.encode_f0(g, flat_f0(20, 180.0), 12), Error);
}

TEST_CASE("decoder output has mel shape and responds to the speaker row") {
    auto cfg = test_config();
    VcModel m;
    m.build(cfg);
    Rng rng = make_rng(5, "dec");
    nn::Mat z(10, cfg.model.latent);
    for (long i = 0; i < z.size(); ++i) z.data()[i] = 0.5 * normal(rng);
    audio::F0Contour c = flat_f0(10, 160.0);

    nn::Graph g;
    nn::Var pitch = m.encode_f0(g, c, 10);
    nn::Mat s1 = nn::Mat::Zero(1, cfg.model.speaker_dim);
    s1(0, 0) = 1.0;
    nn::Mat s2 = nn::Mat::Zero(1, cfg.model.speaker_dim);
    s2(0, 1) = 1.0;
    nn::Var m1 = m.decode_mel(g, g.input(z), pitch, g.input(s1));
    nn::Var m2 = m.decode_mel(g, g.input(z), pitch, g.input(s2));
    CHECK(m1.rows() == 10);
    CHECK(m1.cols() == cfg.audio.n_mels);
    CHECK((m1.value() - m2.value()).cwiseAbs().maxCoeff() > 1e-9);

    nn::Var wave = m.decode_audio(g, m1, c);
    CHECK(wave.rows() == 10 * cfg.audio.hop);
    CHECK(wave.cols() == 1);
    CHECK(wave.value().cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("renderer is deterministic and differentiable toward the envelope") {
    auto cfg = test_config();
    auto fb = audio::make_mel_filterbank(cfg.mel_config());
    RenderConfig rc = cfg.render_config();
    Rng rng = make_rng(6, "render");
    nn::Mat logmel(6, cfg.audio.n_mels);
    for (long i = 0; i < logmel.size(); ++i) logmel.data()[i] = -2.0 + 0.3 * normal(rng);
    audio::F0Contour c = flat_f0(6, 140.0);
    c.voiced[5] = 0;
    c.hz[5] = 0.0;

    auto w1 = render_waveform(logmel, c, fb, rc);
    auto w2 = render_waveform(logmel, c, fb, rc);
    REQUIRE(w1.size() == size_t(6 * rc.hop));
    CHECK(w1 == w2);

    nn::ParamStore ps;
    nn::Param& p = ps.add("env", logmel);
    auto eval = [&](bool bw) {
        nn::Graph g;
        nn::Var out = render_waveform_op(g, g.param(p), c, fb, rc);
        nn::Var loss = mean(square(out));
        if (bw) g.backward(loss);
        return loss.value()(0, 0);
    };
    auto res = nn::grad_check(eval, {&p}, 40, 1e-5, 2e-3, 17);
    CHECK(res.passed >= res.checked - 1);  // tanh clip can pin isolated coords
}

TEST_CASE("discriminator yields two resolutions with four feature maps each") {
    auto cfg = test_config();
    VcModel m;
    m.build(cfg);
    Rng rng = make_rng(7, "disc");
    nn::Mat wave(2048, 1);
    for (long i = 0; i < wave.size(); ++i) wave.data()[i] = 0.1 * normal(rng);
    nn::Graph g;
    auto out = m.discriminate(g, g.input(wave), /*frozen=*/false);
    REQUIRE(out.scores.size() == 2);
    REQUIRE(out.features.size() == 2);
    for (const auto& scale : out.features) CHECK(scale.size() == 4);
    for (const auto& s : out.scores) CHECK(s.cols() == 1);
}

TEST_CASE("frozen discriminator pass leaves its parameters grad-free") {
    auto cfg = test_config();
    VcModel m;
    m.build(cfg);
    for (auto* p : m.discriminator_params()) p->zero_grad();
    Rng rng = make_rng(8, "disc-frozen");
    nn::Mat wave(1024, 1);
    for (long i = 0; i < wave.size(); ++i) wave.data()[i] = 0.1 * normal(rng);
    nn::Graph g;
    auto out = m.discriminate(g, g.input(wave), /*frozen=*/true);
    nn::Var loss = mean(square(out.scores[0]));
    for (const auto& f : out.features[0]) loss = add(loss, mean(abs_v(f)));
    g.backward(loss);
    for (auto* p : m.discriminator_params()) CHECK(p->grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoints round-trip parameters, metadata and rng blob") {
    auto cfg = test_config();
    auto dir = temp_dir("ckpt");
    VcModel m;
    m.build(cfg);
    m.params().get("dec.out.w").value(0, 0) = 0.123456;
    CheckpointMeta meta;
    meta.config_hash = cfg.hash();
    meta.phase = "phase1";
    meta.step = 321;
    std::string path = (dir / "ck.bin").string();
    save_checkpoint(path, m, meta, nullptr, nullptr, "rng:test-blob");

    CheckpointMeta peeked = peek_checkpoint(path);
    CHECK(peeked.phase == "phase1");
    CHECK(peeked.step == 321);
    CHECK(peeked.config_hash == cfg.hash());
    CHECK_FALSE(peeked.has_optimizers);

    VcModel m2;
    m2.build(cfg);
    std::string blob;
    CheckpointMeta got = load_checkpoint(path, m2, nullptr, nullptr, &blob);
    CHECK(got.step == 321);
    CHECK(blob == "rng:test-blob");
    CHECK(m2.params().value_hash() == m.params().value_hash());
    CHECK(m2.params().get("dec.out.w").value(0, 0) == 0.123456);
}

TEST_CASE("checkpoint config-hash mismatch refuses unless forced") {
    auto cfg = test_config();
    auto dir = temp_dir("ckpt-hash");
    VcModel m;
    m.build(cfg);
    CheckpointMeta meta;
    meta.config_hash = cfg.hash();
    meta.phase = "phase1";
    std::string path = (dir / "ck.bin").string();
    save_checkpoint(path, m, meta, nullptr, nullptr, "");

    auto cfg2 = cfg;
    cfg2.loss.w_mel = 44.0;
    VcModel m2;
    m2.build(cfg2);
    CHECK_THROWS_AS(load_checkpoint(path, m2, nullptr, nullptr, nullptr), Error);
    try {
        load_checkpoint(path, m2, nullptr, nullptr, nullptr);
    } catch (const Error& e) {
        std::string msg = e.what();
        CHECK(msg.find("config hash mismatch") != std::string::npos);
        CHECK(msg.find("--force") != std::string::npos);
    }
    CheckpointMeta forced = load_checkpoint(path, m2, nullptr, nullptr, nullptr, /*force=*/true);
    CHECK(forced.phase == "phase1");
    CHECK(m2.params().value_hash() == m.params().value_hash());
}

TEST_CASE("checkpoint files are byte-stable for identical state") {
    auto cfg = test_config();
    auto dir = temp_dir("ckpt-stable");
    VcModel m;
    m.build(cfg);
    CheckpointMeta meta;
    meta.config_hash = cfg.hash();
    meta.phase = "phase2";
    meta.step = 7;
    std::string p1 = (dir / "a.bin").string(), p2 = (dir / "b.bin").string();
    save_checkpoint(p1, m, meta, nullptr, nullptr, "blob");
    save_checkpoint(p2, m, meta, nullptr, nullptr, "blob");
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    CHECK(s1.size() > 0);
}

TEST_CASE("truncated checkpoints are rejected") {
    auto cfg = test_config();
    auto dir = temp_dir("ckpt-trunc");
    VcModel m;
    m.build(cfg);
    CheckpointMeta meta;
    meta.config_hash = cfg.hash();
    meta.phase = "phase1";
    std::string path = (dir / "ck.bin").string();
    save_checkpoint(path, m, meta, nullptr, nullptr, "");
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), long(bytes.size()) - 16);
    out.close();
    VcModel m2;
    m2.build(cfg);
    CHECK_THROWS_AS(load_checkpoint(path, m2, nullptr, nullptr, nullptr), Error);
}
