#include "pairvc/cli/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pairvc/audio/wav_io.hpp"
#include "pairvc/cli/config.hpp"
#include "pairvc/cli/manifest.hpp"
#include "pairvc/eval/alignment.hpp"
#include "pairvc/eval/metrics.hpp"
#include "pairvc/infer/pipeline.hpp"
#include "pairvc/synth/generator.hpp"
#include "pairvc/train/trainer.hpp"

namespace pairvc::cli {

namespace fs = std::filesystem;

namespace {

RunConfig load_config_or_env(std::string path) {
    if (path.empty()) {
        const char* env = std::getenv("PAIRVC_CONFIG");
        if (env != nullptr) path = env;
    }
    if (path.empty()) fail("config not found (pass --config or set PAIRVC_CONFIG)");
    return load_config(path);
}

std::string zero_pad_id(const char* stem, int i) {
    char buf[32];
    snprintf(buf, sizeof buf, "%s%04d", stem, i);
    return buf;
}

int cmd_synth_pairs(const RunConfig& cfg, int n, int n_real, const std::string& out_dir,
                    uint64_t seed) {
    require(n >= 0 && n_real >= 0, "pair and real counts must be non-negative");
    synth::PairGenerator gen(cfg);
    fs::create_directories(out_dir);
    write_resolved_config(cfg, (fs::path(out_dir) / "config.resolved.json").string());

    Manifest man;
    man.dir = out_dir;
    Rng rng = make_rng(seed, "synth-corpus");
    int S = cfg.synth.n_speakers;
    require(S >= 2, "need at least two training speakers for pairs");

    struct PairRec {
        int src, tgt;
        std::string src_wav, tgt_wav;
    };
    std::vector<PairRec> recs;
    for (int i = 0; i < n; ++i) {
        std::vector<int> text = gen.sample_text(rng);
        int tgt = int(uniform_int(rng, 0, S - 1));
        int src = int(uniform_int(rng, 0, S - 2));
        if (src >= tgt) ++src;  // uniform over speakers != tgt
        auto pair_seed = uint64_t(uniform_int(rng, 0, int64_t(1) << 62));
        synth::SyntheticPair pair = gen.generate_pair(text, src, tgt, pair_seed);

        std::string base = zero_pad_id("pair", i);
        PairRec rec{src, tgt, base + "_src.wav", base + "_tgt.wav"};
        audio::write_wav((fs::path(out_dir) / rec.src_wav).string(), pair.source);
        audio::write_wav((fs::path(out_dir) / rec.tgt_wav).string(), pair.target);

        ManifestRow rs;
        rs.id = base + "_src";
        rs.role = "src";
        rs.wav_path = rec.src_wav;
        rs.speaker_id = "spk" + std::to_string(src);
        rs.text_ids = text;
        rs.pair_id = base;
        rs.seed = int64_t(pair_seed);
        ManifestRow rt = rs;
        rt.id = base + "_tgt";
        rt.role = "tgt";
        rt.wav_path = rec.tgt_wav;
        rt.speaker_id = "spk" + std::to_string(tgt);
        man.rows.push_back(rs);
        man.rows.push_back(rt);
        recs.push_back(rec);
    }
    for (int j = 0; j < n_real; ++j) {
        std::vector<int> text = gen.sample_text(rng);
        int spk = S + int(uniform_int(rng, 0, cfg.synth.n_heldout_speakers - 1));
        auto item_seed = uint64_t(uniform_int(rng, 0, int64_t(1) << 62));
        audio::Waveform w = gen.generate_single(text, spk, item_seed);
        ManifestRow r;
        r.id = zero_pad_id("real", j);
        r.role = "real";
        r.wav_path = r.id + ".wav";
        r.speaker_id = "spk" + std::to_string(spk);
        r.seed = int64_t(item_seed);
        audio::write_wav((fs::path(out_dir) / r.wav_path).string(), w);
        man.rows.push_back(r);
    }
    std::string man_path = (fs::path(out_dir) / "manifest.jsonl").string();
    write_manifest(man, man_path);

    // Conversion worklist: each pair's source against a target utterance of a
    // different voice, so downstream convert/evaluate run from the same corpus.
    Manifest conv;
    conv.dir = out_dir;
    for (int i = 0; i < n; ++i) {
        int ref = -1;
        for (int d = 1; d < n && ref < 0; ++d) {
            int j = (i + d) % n;
            if (recs[size_t(j)].tgt != recs[size_t(i)].src) ref = j;
        }
        if (ref < 0) continue;
        ManifestRow r;
        r.id = zero_pad_id("cv", i);
        r.role = "src";
        r.wav_path = recs[size_t(i)].src_wav;
        r.ref_path = recs[size_t(ref)].tgt_wav;
        r.speaker_id = "spk" + std::to_string(recs[size_t(i)].src);
        conv.rows.push_back(r);
    }
    std::string conv_path = (fs::path(out_dir) / "convert_manifest.jsonl").string();
    write_manifest(conv, conv_path);

    if (man.rows.empty())
        std::cerr << "warning: empty corpus requested; manifests have no rows\n";
    std::cout << "wrote " << n << " pairs and " << n_real << " held-out utterances to " << out_dir
              << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, int phase, const std::string& manifest,
              const std::string& out_dir, const std::string& resume, int steps, bool force) {
    train::TrainOptions opt;
    opt.phase = phase;
    opt.manifest_path = manifest;
    opt.out_dir = out_dir;
    opt.resume = resume;
    opt.steps_override = steps;
    opt.force = force;
    train::RunResult res = train::run_training(cfg, opt);
    if (!res.records.empty()) std::cout << res.records.back().to_json() << "\n";
    std::cout << "final checkpoint: " << res.final_checkpoint << "\n";
    return 0;
}

int cmd_convert(const RunConfig& cfg, const std::string& checkpoint, const std::string& source,
                const std::string& reference, const std::string& out,
                const std::string& manifest_path, const std::string& out_dir,
                const infer::ConvertOptions& opt, bool force) {
    infer::Converter converter(cfg, checkpoint, force);
    if (!manifest_path.empty()) {
        require(!out_dir.empty(), "batch conversion needs --out-dir");
        Manifest man = read_manifest(manifest_path);
        infer::BatchResult res = infer::batch_convert(converter, man, out_dir, opt);
        write_resolved_config(cfg, (fs::path(out_dir) / "config.resolved.json").string());
        std::string log_path = (fs::path(out_dir) / "convert_log.jsonl").string();
        std::ofstream log(log_path, std::ios::trunc);
        if (!log) fail("cannot write conversion log: " + log_path);
        for (const auto& r : res.rows) {
            nlohmann::json j;
            j["id"] = r.id;
            j["ok"] = r.ok;
            if (r.ok) j["out"] = r.out_path;
            if (!r.message.empty()) j["message"] = r.message;
            log << j.dump() << "\n";
        }
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
        for (const auto& r : res.rows)
            if (!r.ok) std::cerr << "warning: row '" << r.id << "' failed: " << r.message << "\n";
        std::cout << "converted " << res.n_ok << "/" << res.rows.size() << " rows into " << out_dir
                  << "\n";
        return 0;
    }
    require(!source.empty() && !reference.empty() && !out.empty(),
            "single conversion needs --source, --reference and --out");
    audio::Waveform src = audio::read_wav(source);
    audio::Waveform ref = audio::read_wav(reference);
    infer::ConvertResult res = converter.convert(src, ref, opt);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    audio::write_wav(out, res.audio);
    fs::path snap = fs::path(out).parent_path() / "config.resolved.json";
    write_resolved_config(cfg, snap.string());
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint,
                 const std::string& manifest_path, const std::string& converted_dir,
                 const std::string& out, double mos, double smos, const std::string& plot,
                 bool force) {
    infer::Converter converter(cfg, checkpoint, force);
    Manifest man = read_manifest(manifest_path);
    eval::MetricReport rep = eval::run_evaluation(converter, man, converted_dir, mos, smos);
    std::string out_path =
        out.empty() ? (fs::path(converted_dir) / "metric_report.json").string() : out;
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) fail("cannot write report: " + out_path);
    f << rep.to_json() << "\n";
    write_resolved_config(
        cfg, (fs::path(out_path).parent_path() / "config.resolved.json").string());
    std::cout << rep.to_json() << "\n";

    if (!plot.empty()) {
        for (const auto& row : man.rows) {
            std::string conv_path =
                (fs::path(converted_dir) / (row.id + "_cv.wav")).string();
            if (row.wav_path.empty() || !fs::exists(conv_path)) continue;
            audio::Waveform src = audio::read_wav(man.resolve_wav(row));
            audio::Waveform conv = audio::read_wav(conv_path);
            const auto& model = converter.vc();
            auto al = eval::align_features(model.frontend().from_wav(src),
                                           model.frontend().from_wav(conv));
            eval::write_similarity_pgm(al.similarity, plot);
            break;
        }
    }
    return 0;
}

int cmd_inspect_alignment(const RunConfig& cfg, const std::string& a_path,
                          const std::string& b_path, const std::string& out) {
    model::Frontend fe;
    nn::ParamStore ps;
    fe.build(ps, cfg);
    audio::Waveform a = audio::read_wav(a_path);
    audio::Waveform b = audio::read_wav(b_path);
    auto al = eval::align_features(fe.from_wav(a), fe.from_wav(b));
    for (const auto& w : al.warnings) std::cerr << "warning: " << w << "\n";
    if (!out.empty()) eval::write_similarity_pgm(al.similarity, out);
    nlohmann::json j;
    j["frames_a"] = al.similarity.rows();
    j["frames_b"] = al.similarity.cols();
    j["diagonal_fraction"] = al.diagonal_fraction;
    std::cout << j.dump() << "\n";
    return 0;
}

int cmd_validate_manifest(const std::string& path) {
    Manifest man = read_manifest(path);
    auto violations = validate_manifest(man);
    for (const auto& v : violations) std::cout << v << "\n";
    if (violations.empty()) {
        std::cout << "manifest ok (" << man.rows.size() << " rows)\n";
        return 0;
    }
    std::cerr << "error: manifest has " << violations.size() << " violation(s)\n";
    return 1;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"voice conversion trained on paired synthetic speech"};
    app.require_subcommand(1);

    std::string config_path, out_dir, manifest_path, resume, checkpoint;
    std::string source, reference, out_file, converted_dir, plot, a_path, b_path;
    int n_pairs = 40, n_real = 16, phase = 1, steps = -1;
    uint64_t seed = 0;
    bool have_seed = false, force = false;
    double mos = 3.0, smos = 3.0;
    std::string eps_policy = "zero";
    uint64_t eps_seed = 0;

    auto* sp = app.add_subcommand("synth-pairs", "generate a paired synthetic corpus");
    sp->add_option("--config", config_path, "run config (or PAIRVC_CONFIG)");
    sp->add_option("--n", n_pairs, "number of pairs")->capture_default_str();
    sp->add_option("--real", n_real, "held-out single utterances for phase 2")
        ->capture_default_str();
    sp->add_option("--out", out_dir, "output directory")->required();
    auto* seed_opt = sp->add_option("--seed", seed, "corpus seed (default: config seed)");

    auto* tr = app.add_subcommand("train", "run one training phase");
    tr->add_option("--config", config_path, "run config (or PAIRVC_CONFIG)");
    tr->add_option("--phase", phase, "1 or 2")->required()->check(CLI::Range(1, 2));
    tr->add_option("--manifest", manifest_path, "training manifest")->required();
    tr->add_option("--out", out_dir, "checkpoint/log directory")->required();
    tr->add_option("--resume", resume, "checkpoint to resume or initialize from");
    tr->add_option("--steps", steps, "override the configured step budget");
    tr->add_flag("--force", force, "accept checkpoint config-hash mismatch");

    auto* cv = app.add_subcommand("convert", "convert source audio to a reference voice");
    cv->add_option("--config", config_path, "run config (or PAIRVC_CONFIG)");
    cv->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    cv->add_option("--source", source, "source wav");
    cv->add_option("--reference", reference, "reference wav");
    cv->add_option("--out", out_file, "output wav");
    cv->add_option("--manifest", manifest_path, "batch worklist (wav_path + ref_path rows)");
    cv->add_option("--out-dir", out_dir, "batch output directory");
    cv->add_option("--eps", eps_policy, "zero | sample")->capture_default_str();
    cv->add_option("--seed", eps_seed, "sampling seed for --eps sample");
    cv->add_flag("--force", force, "accept checkpoint config-hash mismatch");

    auto* ev = app.add_subcommand("evaluate", "score conversions into a metric report");
    ev->add_option("--config", config_path, "run config (or PAIRVC_CONFIG)");
    ev->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    ev->add_option("--manifest", manifest_path, "conversion manifest")->required();
    ev->add_option("--converted", converted_dir, "directory with {id}_cv.wav files")->required();
    ev->add_option("--out", out_file, "report path (default: <converted>/metric_report.json)");
    ev->add_option("--mos", mos, "naturalness score in [1,5]")->capture_default_str();
    ev->add_option("--smos", smos, "similarity score in [1,5]")->capture_default_str();
    ev->add_option("--plot", plot, "write a similarity heatmap (pgm)");
    ev->add_flag("--force", force, "accept checkpoint config-hash mismatch");

    auto* ia = app.add_subcommand("inspect-alignment", "frame alignment between two wavs");
    ia->add_option("--config", config_path, "run config (or PAIRVC_CONFIG)");
    ia->add_option("--a", a_path, "first wav")->required();
    ia->add_option("--b", b_path, "second wav")->required();
    ia->add_option("--out", out_file, "similarity heatmap (pgm)");

    auto* vm = app.add_subcommand("validate-manifest", "check a manifest for violations");
    vm->add_option("manifest", manifest_path, "manifest path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    have_seed = seed_opt->count() > 0;

    try {
        if (vm->parsed()) return cmd_validate_manifest(manifest_path);
        RunConfig cfg = load_config_or_env(config_path);
        if (sp->parsed())
            return cmd_synth_pairs(cfg, n_pairs, n_real, out_dir, have_seed ? seed : cfg.seed);
        if (tr->parsed())
            return cmd_train(cfg, phase, manifest_path, out_dir, resume, steps, force);
        if (cv->parsed()) {
            infer::ConvertOptions opt;
            opt.eps_policy = eps_policy;
            opt.seed = eps_seed;
            return cmd_convert(cfg, checkpoint, source, reference, out_file, manifest_path,
                               out_dir, opt, force);
        }
        if (ev->parsed())
            return cmd_evaluate(cfg, checkpoint, manifest_path, converted_dir, out_file, mos,
                                smos, plot, force);
        if (ia->parsed()) return cmd_inspect_alignment(cfg, a_path, b_path, out_file);
    } catch (const Error& e) {
        std::string msg = e.what();
        std::cerr << "error: " << msg << "\n";
        return msg.rfind("config not found", 0) == 0 ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace pairvc::cli
