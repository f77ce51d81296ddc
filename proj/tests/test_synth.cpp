#include <cmath>

#include "doctest.h"
#include "pairvc/audio/dsp.hpp"
#include "pairvc/cli/config.hpp"
#include "pairvc/synth/generator.hpp"
#include "test_util.hpp"

using namespace pairvc;
using namespace pairvc::synth;

TEST_CASE("vocab loads and classifies unvoiced symbols") {
    auto cfg = test_config();
    Vocab v = load_vocab(cfg.resolve_path(cfg.synth.vocab_path));
    REQUIRE(v.size() > 4);
    REQUIRE(v.unvoiced_prefix > 0);
    CHECK(v.is_unvoiced(0));
    CHECK_FALSE(v.is_unvoiced(v.size() - 1));
    CHECK(v.id_of(v.symbols[2]) == 2);
}

TEST_CASE("paired utterances share one latent and differ only by voice") {
    auto cfg = test_config();
    PairGenerator gen(cfg);
    Rng rng = make_rng(cfg.seed, "synth-test");
    auto text = gen.sample_text(rng);
    SyntheticPair pair = gen.generate_pair(text, 1, 4, 777);

    // Equal length by construction: both sides decode the same frame plan.
    CHECK(pair.source.size() == pair.target.size());
    CHECK(pair.source.sample_rate == cfg.audio.sample_rate);
    CHECK(pair.plan.frames() >= 1);
    CHECK(pair.source.size() == size_t(pair.plan.frames()) * size_t(cfg.audio.hop));

    // The two sides are different audio (different voices) ...
    double diff = 0.0, norm = 0.0;
    for (size_t i = 0; i < pair.source.size(); ++i) {
        diff += std::abs(pair.source.samples[i] - pair.target.samples[i]);
        norm += std::abs(pair.source.samples[i]);
    }
    REQUIRE(norm > 0.0);
    CHECK(diff / norm > 0.05);

    // ... but re-decoding the stored latent reproduces each side bit-exactly.
    audio::Waveform src2 =
        gen.decode(gen.inverse_flow(pair.plan.z_p, 1), 1, &pair.plan.frame_unvoiced);
    audio::Waveform tgt2 =
        gen.decode(gen.inverse_flow(pair.plan.z_p, 4), 4, &pair.plan.frame_unvoiced);
    REQUIRE(src2.size() == pair.source.size());
    for (size_t i = 0; i < src2.size(); ++i) {
        CHECK(src2.samples[i] == pair.source.samples[i]);
        CHECK(tgt2.samples[i] == pair.target.samples[i]);
    }
}

TEST_CASE("pair generation is reproducible from its seed") {
    auto cfg = test_config();
    PairGenerator gen(cfg);
    Rng rng = make_rng(3, "synth-seed");
    auto text = gen.sample_text(rng);
    SyntheticPair a = gen.generate_pair(text, 0, 2, 42);
    SyntheticPair b = gen.generate_pair(text, 0, 2, 42);
    REQUIRE(a.source.size() == b.source.size());
    for (size_t i = 0; i < a.source.size(); ++i) {
        CHECK(a.source.samples[i] == b.source.samples[i]);
        CHECK(a.target.samples[i] == b.target.samples[i]);
    }
    SyntheticPair c = gen.generate_pair(text, 0, 2, 43);
    bool same = a.source.size() == c.source.size();
    if (same) {
        double d = 0.0;
        for (size_t i = 0; i < a.source.size(); ++i)
            d += std::abs(a.source.samples[i] - c.source.samples[i]);
        same = d == 0.0;
    }
    CHECK_FALSE(same);
}

TEST_CASE("speaker token sampling ignores argument order") {
    auto cfg = test_config();
    PairGenerator gen(cfg);
    for (uint64_t s = 0; s < 32; ++s) {
        Rng r1 = make_rng(s, "tok");
        Rng r2 = make_rng(s, "tok");
        int a = gen.sample_speaker_token(2, 5, r1);
        int b = gen.sample_speaker_token(5, 2, r2);
        CHECK(a == b);
        CHECK((a == 2 || a == 5));
    }
}

TEST_CASE("durations are positive and expand the token plan") {
    auto cfg = test_config();
    PairGenerator gen(cfg);
    Rng rng = make_rng(9, "dur");
    auto text = gen.sample_text(rng);
    SyntheticPair p = gen.generate_pair(text, 0, 1, 5);
    REQUIRE(p.plan.durations.size() == text.size());
    int total = 0;
    for (int d : p.plan.durations) {
        CHECK(d >= 1);
        total += d;
    }
    CHECK(total == p.plan.frames());
    CHECK(p.plan.frame_unvoiced.size() == size_t(p.plan.frames()));
}

TEST_CASE("flow round-trips the shared latent for every speaker") {
    auto cfg = test_config();
    PairGenerator gen(cfg);
    Rng rng = make_rng(12, "flowrt");
    auto text = gen.sample_text(rng);
    SyntheticPair p = gen.generate_pair(text, 2, 3, 11);
    for (int spk = 0; spk < gen.n_total_speakers(); ++spk) {
        nn::Mat z = gen.inverse_flow(p.plan.z_p, spk);
        nn::Mat back = gen.forward_flow(z, spk);
        CHECK((back - p.plan.z_p).cwiseAbs().maxCoeff() < 1e-9);
    }
    // Different speakers map the same content to different data latents.
    nn::Mat z0 = gen.inverse_flow(p.plan.z_p, 0);
    nn::Mat z1 = gen.inverse_flow(p.plan.z_p, 1);
    CHECK((z0 - z1).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("speakers keep distinct pitch registers") {
    auto cfg = test_config();
    PairGenerator gen(cfg);
    std::vector<double> f0;
    for (int s = 0; s < gen.n_total_speakers(); ++s) {
        double b = gen.base_f0(s);
        CHECK(b >= cfg.synth.base_f0_min);
        CHECK(b <= cfg.synth.base_f0_max);
        f0.push_back(b);
    }
    for (size_t i = 0; i < f0.size(); ++i)
        for (size_t j = i + 1; j < f0.size(); ++j) CHECK(f0[i] != f0[j]);
}

TEST_CASE("planned f0 lands near the speaker's base register") {
    auto cfg = test_config();
    PairGenerator gen(cfg);
    Rng rng = make_rng(21, "f0plan");
    auto text = gen.sample_text(rng);
    SyntheticPair p = gen.generate_pair(text, 1, 6, 99);
    for (int spk : {1, 6}) {
        nn::Mat z = gen.inverse_flow(p.plan.z_p, spk);
        audio::F0Contour c = gen.plan_f0(z, spk, &p.plan.frame_unvoiced);
        REQUIRE(c.voiced_count() > 0);
        double med = std::exp(audio::log_f0_median(c));
        CHECK(med == doctest::Approx(gen.base_f0(spk)).epsilon(0.15));
    }
}

TEST_CASE("rendered audio of a voiced speaker tracks the planned pitch") {
    auto cfg = test_config();
    PairGenerator gen(cfg);
    Rng rng = make_rng(33, "f0render");
    auto text = gen.sample_text(rng);
    SyntheticPair p = gen.generate_pair(text, 0, 5, 1234);
    audio::F0Contour plan =
        gen.plan_f0(gen.inverse_flow(p.plan.z_p, 5), 5, &p.plan.frame_unvoiced);
    audio::F0Contour meas = audio::extract_f0(p.target, cfg.f0_config());
    REQUIRE(meas.voiced_count() > 0);
    double want = audio::log_f0_median(plan);
    double got = audio::log_f0_median(meas);
    CHECK(std::abs(got - want) < std::log(1.06));
}

TEST_CASE("generate_single matches the pair target for the same seed") {
    auto cfg = test_config();
    PairGenerator gen(cfg);
    Rng rng = make_rng(44, "single");
    auto text = gen.sample_text(rng);
    audio::Waveform one = gen.generate_single(text, 9, 555);
    audio::Waveform two = gen.generate_single(text, 9, 555);
    REQUIRE(one.size() == two.size());
    for (size_t i = 0; i < one.size(); ++i) CHECK(one.samples[i] == two.samples[i]);
    CHECK(one.size() > 0);
}

TEST_CASE("sampled text stays inside the vocab and configured length range") {
    auto cfg = test_config();
    PairGenerator gen(cfg);
    Rng rng = make_rng(55, "textlen");
    for (int i = 0; i < 50; ++i) {
        auto text = gen.sample_text(rng);
        CHECK(int(text.size()) >= cfg.synth.text_len_min);
        CHECK(int(text.size()) <= cfg.synth.text_len_max);
        for (int id : text) {
            CHECK(id >= 0);
            CHECK(id < gen.vocab().size());
        }
    }
}
