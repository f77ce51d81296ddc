#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pairvc/audio/wav_io.hpp"
#include "pairvc/cli/manifest.hpp"
#include "pairvc/synth/generator.hpp"
#include "pairvc/train/trainer.hpp"
#include "test_util.hpp"

using namespace pairvc;
using namespace pairvc::train;

namespace {

// Tiny shared corpus: generated once, reused by every case in this file.
struct Corpus {
    std::filesystem::path dir;
    std::string manifest_path;
    cli::RunConfig cfg;

    Corpus() {
        cfg = test_config();
        // Small model keeps per-step cost low; contracts do not depend on size.
        cfg.model.hidden = 24;
        cfg.model.flow_hidden = 16;
        cfg.model.flow_layers = 2;
        cfg.trainer.batch_size = 2;
        cfg.trainer.segment_seconds = 0.4;
        cfg.trainer.checkpoint_every = 4;
        cfg.trainer.log_every = 2;
        cfg.trainer.hash_check_every = 2;
        dir = temp_dir("trainer-corpus");
        synth::PairGenerator gen(cfg);
        cli::Manifest man;
        man.dir = dir.string();
        Rng rng = make_rng(5, "trainer-corpus");
        for (int i = 0; i < 6; ++i) {
            auto text = gen.sample_text(rng);
            int tgt = int(uniform_int(rng, 0, cfg.synth.n_speakers - 1));
            int src = int(uniform_int(rng, 0, cfg.synth.n_speakers - 2));
            if (src >= tgt) ++src;
            auto pair = gen.generate_pair(text, src, tgt, uint64_t(100 + i));
            std::string base = "p" + std::to_string(i);
            audio::write_wav((dir / (base + "_s.wav")).string(), pair.source);
            audio::write_wav((dir / (base + "_t.wav")).string(), pair.target);
            cli::ManifestRow rs;
            rs.id = base + "_src";
            rs.role = "src";
            rs.wav_path = base + "_s.wav";
            rs.speaker_id = "spk" + std::to_string(src);
            rs.pair_id = base;
            cli::ManifestRow rt = rs;
            rt.id = base + "_tgt";
            rt.role = "tgt";
            rt.wav_path = base + "_t.wav";
            rt.speaker_id = "spk" + std::to_string(tgt);
            man.rows.push_back(rs);
            man.rows.push_back(rt);
        }
        // Held-out singles for phase 2.
        for (int j = 0; j < 2; ++j) {
            auto text = gen.sample_text(rng);
            int spk = cfg.synth.n_speakers + j;
            auto w = gen.generate_single(text, spk, uint64_t(900 + j));
            cli::ManifestRow r;
            r.id = "r" + std::to_string(j);
            r.role = "real";
            r.wav_path = r.id + ".wav";
            r.speaker_id = "spk" + std::to_string(spk);
            audio::write_wav((dir / r.wav_path).string(), w);
            man.rows.push_back(r);
        }
        manifest_path = (dir / "manifest.jsonl").string();
        write_manifest(man, manifest_path);
    }
};

Corpus& corpus() {
    static Corpus c;
    return c;
}

// Everything deterministic about a step; wall_ms legitimately varies.
std::string sig(const StepRecord& r) {
    char buf[256];
    snprintf(buf, sizeof buf, "%lld %a %a %a %a %a %a %a %a", static_cast<long long>(r.step),
             r.losses.kl, r.losses.rec_or_cv, r.losses.adv_g, r.losses.adv_d, r.losses.fm,
             r.losses.total_g, r.losses.total_d, r.grad_norm);
    return buf;
}

}  // namespace

TEST_CASE("a few optimization steps shrink the generator objective") {
    auto& c = corpus();
    Trainer t(c.cfg, 1);
    t.load_data(cli::read_manifest(c.manifest_path));
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 30; ++i) {
        auto rec = t.step();
        if (i == 0) first = rec.losses.total_g;
        last = rec.losses.total_g;
        CHECK(std::isfinite(rec.losses.total_g));
        CHECK(std::isfinite(rec.losses.total_d));
        CHECK(rec.step == i + 1);
    }
    CHECK(last < first);
}

TEST_CASE("training steps are deterministic given config and step index") {
    auto& c = corpus();
    auto run_five = [&]() {
        Trainer t(c.cfg, 1);
        t.load_data(cli::read_manifest(c.manifest_path));
        std::vector<std::string> recs;
        for (int i = 0; i < 5; ++i) recs.push_back(sig(t.step()));
        return recs;
    };
    auto a = run_five();
    auto b = run_five();
    CHECK(a == b);
}

TEST_CASE("paired phase-1 rejects a pair whose sides share one speaker") {
    auto& c = corpus();
    cli::Manifest man = cli::read_manifest(c.manifest_path);
    for (auto& r : man.rows)
        if (r.role == "tgt") r.speaker_id = man.rows[0].speaker_id;
    for (auto& r : man.rows)
        if (r.role == "src") r.speaker_id = man.rows[0].speaker_id;
    Trainer t(c.cfg, 1);
    CHECK_THROWS_AS(t.load_data(man), Error);
}

TEST_CASE("frozen prefixes stay bit-identical across optimization") {
    auto& c = corpus();
    Trainer t(c.cfg, 1);
    t.load_data(cli::read_manifest(c.manifest_path));
    uint64_t before = t.model().params().value_hash("frontend");
    for (int i = 0; i < 6; ++i) t.step();
    t.verify_frozen();
    CHECK(t.model().params().value_hash("frontend") == before);

    // Tampering is caught.
    t.model().params().get("frontend.proj").value(0, 0) += 1e-9;
    CHECK_THROWS_AS(t.verify_frozen(), Error);
}

TEST_CASE("phase 2 freezes the content encoder as well") {
    auto& c = corpus();
    auto dir = temp_dir("trainer-p2");
    TrainOptions o1;
    o1.phase = 1;
    o1.manifest_path = c.manifest_path;
    o1.out_dir = (dir / "p1").string();
    o1.steps_override = 3;
    auto r1 = run_training(c.cfg, o1);

    Trainer t(c.cfg, 2);
    t.resume_from(r1.final_checkpoint, false);
    t.load_data(cli::read_manifest(c.manifest_path));
    uint64_t content = t.model().params().value_hash("content");
    uint64_t frontend = t.model().params().value_hash("frontend");
    uint64_t dec = t.model().params().value_hash("dec");
    for (int i = 0; i < 4; ++i) t.step();
    t.verify_frozen();
    CHECK(t.model().params().value_hash("content") == content);
    CHECK(t.model().params().value_hash("frontend") == frontend);
    CHECK(t.model().params().value_hash("dec") != dec);  // the rest still learns
}

TEST_CASE("run_training writes checkpoints, logs and a latest pointer") {
    auto& c = corpus();
    auto dir = temp_dir("trainer-run");
    TrainOptions opt;
    opt.phase = 1;
    opt.manifest_path = c.manifest_path;
    opt.out_dir = (dir / "run").string();
    opt.steps_override = 5;
    auto res = run_training(c.cfg, opt);
    namespace fs = std::filesystem;
    CHECK(fs::exists(res.final_checkpoint));
    CHECK(fs::exists(dir / "run" / "latest.bin"));
    CHECK(fs::exists(dir / "run" / "config.resolved.json"));
    CHECK(fs::exists(dir / "run" / "train_phase1.log.jsonl"));
    CHECK(res.records.size() == 5);
    // initial + step-4 cadence + final
    CHECK(res.checkpoints.size() >= 2);
    auto meta = model::peek_checkpoint(res.final_checkpoint);
    CHECK(meta.phase == "phase1");
    CHECK(meta.step == 5);
    CHECK(meta.config_hash == c.cfg.hash());

    // Zero steps: only the initial state is saved.
    TrainOptions z = opt;
    z.out_dir = (dir / "zero").string();
    z.steps_override = 0;
    auto rz = run_training(c.cfg, z);
    CHECK(rz.records.empty());
    CHECK(model::peek_checkpoint(rz.final_checkpoint).step == 0);
}

TEST_CASE("resume replays the exact step stream of an unbroken run") {
    auto& c = corpus();
    auto dir = temp_dir("trainer-resume");
    TrainOptions whole;
    whole.phase = 1;
    whole.manifest_path = c.manifest_path;
    whole.out_dir = (dir / "whole").string();
    whole.steps_override = 6;
    auto full = run_training(c.cfg, whole);

    TrainOptions part = whole;
    part.out_dir = (dir / "part").string();
    part.steps_override = 4;
    auto first = run_training(c.cfg, part);
    TrainOptions rest = part;
    rest.resume = first.final_checkpoint;
    rest.steps_override = 6;
    auto second = run_training(c.cfg, rest);

    REQUIRE(second.records.size() == 2);
    CHECK(sig(second.records[0]) == sig(full.records[4]));
    CHECK(sig(second.records[1]) == sig(full.records[5]));
}

TEST_CASE("phase 2 without a checkpoint is refused") {
    auto& c = corpus();
    auto dir = temp_dir("trainer-p2-guard");
    TrainOptions opt;
    opt.phase = 2;
    opt.manifest_path = c.manifest_path;
    opt.out_dir = (dir / "p2").string();
    opt.steps_override = 1;
    CHECK_THROWS_AS(run_training(c.cfg, opt), Error);
}

TEST_CASE("an empty dataset is an error") {
    auto& c = corpus();
    auto dir = temp_dir("trainer-empty");
    cli::Manifest empty;
    empty.dir = dir.string();
    write_manifest(empty, (dir / "m.jsonl").string());
    TrainOptions opt;
    opt.phase = 1;
    opt.manifest_path = (dir / "m.jsonl").string();
    opt.out_dir = (dir / "out").string();
    opt.steps_override = 1;
    CHECK_THROWS_AS(run_training(c.cfg, opt), Error);
}

TEST_CASE("non-finite parameters abort with the last checkpoint intact") {
    auto& c = corpus();
    auto dir = temp_dir("trainer-nan");
    TrainOptions opt;
    opt.phase = 1;
    opt.manifest_path = c.manifest_path;
    opt.out_dir = (dir / "run").string();
    opt.steps_override = 2;
    auto res = run_training(c.cfg, opt);

    Trainer t(c.cfg, 1);
    t.resume_from(res.final_checkpoint, false);
    t.load_data(cli::read_manifest(c.manifest_path));
    t.model().params().get("dec.out.w").value(0, 0) = std::nan("");
    CHECK_THROWS_AS(t.step(), Error);
    // The poisoned update never reached disk; the checkpoint still loads.
    Trainer t2(c.cfg, 1);
    t2.resume_from(res.final_checkpoint, false);
    CHECK(t2.steps_done() == 2);
}

TEST_CASE("recon mode trains the ablation arm on the same corpus") {
    auto& c = corpus();
    auto cfg = c.cfg;
    cfg.trainer.pair_mode = "recon";
    Trainer t(cfg, 1);
    t.load_data(cli::read_manifest(c.manifest_path));
    auto rec = t.step();
    CHECK(std::isfinite(rec.losses.total_g));
    CHECK(rec.losses.rec_or_cv > 0.0);
}
