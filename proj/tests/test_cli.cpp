#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pairvc/audio/wav_io.hpp"
#include "pairvc/cli/commands.hpp"
#include "pairvc/cli/config.hpp"
#include "pairvc/cli/manifest.hpp"
#include "test_util.hpp"

using namespace pairvc;
using namespace pairvc::cli;

namespace {

int run(std::vector<std::string> args) {
    std::vector<char*> argv;
    args.insert(args.begin(), "pairvc");
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(int(argv.size()), argv.data());
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

}  // namespace

TEST_CASE("config loads, validates and hashes stably") {
    auto cfg = test_config();
    CHECK(cfg.seed == 17);
    CHECK(cfg.audio.sample_rate == 16000);
    CHECK(cfg.trainer.phase1_steps == 5000);
    cfg.validate();
    uint64_t h1 = cfg.hash();
    CHECK(h1 == cfg.hash());
    auto cfg2 = cfg;
    CHECK(cfg2.hash() == h1);
    cfg2.model.latent += 1;
    CHECK(cfg2.hash() != h1);
    // Round-trip through the canonical serialization preserves the hash.
    auto cfg3 = config_from_json_string(cfg.to_json_string());
    cfg3.config_dir = cfg.config_dir;
    CHECK(cfg3.hash() == h1);
}

TEST_CASE("config rejects unknown keys and bad values") {
    CHECK_THROWS_AS(config_from_json_string(R"({"sede": 17})"), Error);
    CHECK_THROWS_AS(config_from_json_string(R"({"model": {"latents": 16}})"), Error);
    try {
        config_from_json_string(R"({"trainer": {"batch_sizes": 8}})");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("batch_sizes") != std::string::npos);
    }
    CHECK_THROWS_AS(config_from_json_string(R"({"model": {"latent": -2}})"), Error);
    CHECK_THROWS_AS(config_from_json_string(R"({"trainer": {"pair_mode": "banana"}})"), Error);
    CHECK_THROWS_AS(config_from_json_string("{not json"), Error);
}

TEST_CASE("missing config files carry the dedicated error prefix") {
    try {
        load_config("/no/such/config.json");
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).rfind("config not found", 0) == 0);
    }
}

TEST_CASE("manifest round-trips including optional fields") {
    auto dir = temp_dir("manifest");
    Manifest m;
    m.dir = dir.string();
    ManifestRow a;
    a.id = "p0_src";
    a.role = "src";
    a.wav_path = "a.wav";
    a.speaker_id = "spk1";
    a.text_ids = {3, 1, 4};
    a.pair_id = "p0";
    a.seed = 99;
    ManifestRow b;
    b.id = "p0_tgt";
    b.role = "tgt";
    b.wav_path = "b.wav";
    b.speaker_id = "spk2";
    b.pair_id = "p0";
    ManifestRow c;
    c.id = "r0";
    c.role = "real";
    c.wav_path = "c.wav";
    c.ref_path = "b.wav";
    m.rows = {a, b, c};
    auto path = dir / "m.jsonl";
    write_manifest(m, path.string());
    Manifest r = read_manifest(path.string());
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].id == "p0_src");
    CHECK(r.rows[0].text_ids == std::vector<int>{3, 1, 4});
    CHECK(r.rows[0].seed == 99);
    CHECK(r.rows[1].seed == -1);
    CHECK(r.rows[2].ref_path == "b.wav");
    CHECK(r.dir == dir.string());
    CHECK(r.resolve_wav(r.rows[0]) == (dir / "a.wav").string());
    CHECK(manifest_hash(r) == manifest_hash(m));
}

TEST_CASE("manifest parsing reports the offending line and field") {
    auto dir = temp_dir("manifest-bad");
    auto path = dir / "m.jsonl";
    write_text(path, R"({"id": "x", "role": "real", "wav_path": "x.wav"}
{"id": "y", "role": "real", "wav_path": "y.wav", "surprise": 1}
)");
    try {
        read_manifest(path.string());
        FAIL("expected a throw");
    } catch (const Error& e) {
        std::string msg = e.what();
        CHECK(msg.find("row 2") != std::string::npos);
        CHECK(msg.find("surprise") != std::string::npos);
    }
}

TEST_CASE("manifest validation finds structural violations") {
    auto dir = temp_dir("manifest-val");
    audio::Waveform w;
    w.sample_rate = 16000;
    w.samples.assign(1024, 0.0);
    audio::write_wav((dir / "ok.wav").string(), w);

    Manifest m;
    m.dir = dir.string();
    ManifestRow good;
    good.id = "r0";
    good.role = "real";
    good.wav_path = "ok.wav";
    ManifestRow dup = good;  // duplicate id
    ManifestRow missing;
    missing.id = "r1";
    missing.role = "real";
    missing.wav_path = "gone.wav";
    ManifestRow badrole;
    badrole.id = "r2";
    badrole.role = "alto";
    badrole.wav_path = "ok.wav";
    ManifestRow src;  // src without a tgt partner
    src.id = "p0_src";
    src.role = "src";
    src.wav_path = "ok.wav";
    src.pair_id = "p0";
    ManifestRow nopair;  // src without any pair id
    nopair.id = "p1_src";
    nopair.role = "src";
    nopair.wav_path = "ok.wav";
    m.rows = {good, dup, missing, badrole, src, nopair};
    auto v = validate_manifest(m);
    CHECK(v.size() >= 4);
    auto joined = std::string();
    for (const auto& s : v) joined += s + "\n";
    CHECK(joined.find("duplicate id") != std::string::npos);
    CHECK(joined.find("gone.wav") != std::string::npos);
    CHECK(joined.find("alto") != std::string::npos);
    CHECK(joined.find("p0") != std::string::npos);

    Manifest ok;
    ok.dir = dir.string();
    ok.rows = {good};
    CHECK(validate_manifest(ok).empty());
}

TEST_CASE("cli maps missing config to exit code 2") {
    unsetenv("PAIRVC_CONFIG");
    CHECK(run({"synth-pairs", "--config", "/no/such.json", "--out", "/tmp/nowhere"}) == 2);
    // No --config and no env var: still the dedicated code.
    CHECK(run({"synth-pairs", "--out", "/tmp/nowhere"}) == 2);
}

TEST_CASE("cli falls back to the config env var") {
    auto dir = temp_dir("cli-env");
    setenv("PAIRVC_CONFIG", (repo_root() + "/configs/default.json").c_str(), 1);
    int rc = run({"synth-pairs", "--n", "1", "--real", "0", "--out", (dir / "c").string(),
                  "--seed", "5"});
    unsetenv("PAIRVC_CONFIG");
    CHECK(rc == 0);
    CHECK(std::filesystem::exists(dir / "c" / "manifest.jsonl"));
    CHECK(std::filesystem::exists(dir / "c" / "config.resolved.json"));
}

TEST_CASE("cli validate-manifest distinguishes clean from broken") {
    auto dir = temp_dir("cli-vm");
    audio::Waveform w;
    w.sample_rate = 16000;
    w.samples.assign(512, 0.0);
    audio::write_wav((dir / "a.wav").string(), w);
    write_text(dir / "good.jsonl", R"({"id": "r0", "role": "real", "wav_path": "a.wav"}
)");
    write_text(dir / "bad.jsonl", R"({"id": "r0", "role": "real", "wav_path": "missing.wav"}
)");
    CHECK(run({"validate-manifest", (dir / "good.jsonl").string()}) == 0);
    CHECK(run({"validate-manifest", (dir / "bad.jsonl").string()}) == 1);
    CHECK(run({"validate-manifest", (dir / "absent.jsonl").string()}) == 1);
}

TEST_CASE("cli synth-pairs writes coherent corpus artifacts") {
    auto dir = temp_dir("cli-synth");
    std::string cfgp = repo_root() + "/configs/default.json";
    int rc = run({"synth-pairs", "--config", cfgp, "--n", "3", "--real", "2", "--out",
                  (dir / "c").string(), "--seed", "11"});
    REQUIRE(rc == 0);
    Manifest m = read_manifest((dir / "c" / "manifest.jsonl").string());
    CHECK(m.rows.size() == 3 * 2 + 2);
    CHECK(validate_manifest(m).empty());
    int n_src = 0, n_tgt = 0, n_real = 0;
    for (const auto& r : m.rows) {
        if (r.role == "src") ++n_src;
        if (r.role == "tgt") ++n_tgt;
        if (r.role == "real") ++n_real;
    }
    CHECK(n_src == 3);
    CHECK(n_tgt == 3);
    CHECK(n_real == 2);
    Manifest conv = read_manifest((dir / "c" / "convert_manifest.jsonl").string());
    CHECK(conv.rows.size() == 3);
    for (const auto& r : conv.rows) {
        CHECK_FALSE(r.ref_path.empty());
        CHECK(std::filesystem::exists(conv.resolve(r.ref_path)));
        CHECK(std::filesystem::exists(conv.resolve_wav(r)));
    }
    // Same seed, same corpus: manifests hash identically.
    int rc2 = run({"synth-pairs", "--config", cfgp, "--n", "3", "--real", "2", "--out",
                   (dir / "d").string(), "--seed", "11"});
    REQUIRE(rc2 == 0);
    Manifest m2 = read_manifest((dir / "d" / "manifest.jsonl").string());
    CHECK(manifest_hash(m2) == manifest_hash(m));
}

TEST_CASE("cli inspect-alignment prints a json summary") {
    auto dir = temp_dir("cli-align");
    std::string cfgp = repo_root() + "/configs/default.json";
    REQUIRE(run({"synth-pairs", "--config", cfgp, "--n", "1", "--real", "0", "--out",
                 (dir / "c").string(), "--seed", "3"}) == 0);
    Manifest m = read_manifest((dir / "c" / "manifest.jsonl").string());
    int rc = run({"inspect-alignment", "--config", cfgp, "--a", m.resolve_wav(m.rows[0]),
                  "--b", m.resolve_wav(m.rows[1]), "--out", (dir / "sim.pgm").string()});
    CHECK(rc == 0);
    CHECK(std::filesystem::exists(dir / "sim.pgm"));
}

TEST_CASE("cli rejects unusable argument combinations") {
    std::string cfgp = repo_root() + "/configs/default.json";
    // convert without source/reference or manifest
    auto dir = temp_dir("cli-bad");
    CHECK(run({"convert", "--config", cfgp, "--checkpoint", (dir / "none.bin").string()}) == 1);
    // unknown subcommand is a CLI parse error, not an exception
    CHECK(run({"frobnicate"}) != 0);
}
