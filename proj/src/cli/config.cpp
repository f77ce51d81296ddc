#include "pairvc/cli/config.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "pairvc/common.hpp"

namespace pairvc::cli {

using nlohmann::json;

namespace {

// Overlay `src` onto the defaults already in place, complaining about any key
// the schema does not know. `get` writers below register the known keys.
struct Section {
    const json* obj;
    std::string path;
    mutable std::vector<std::string> seen;

    template <class T>
    void get(const char* key, T& out) const {
        seen.push_back(key);
        if (!obj->contains(key)) return;
        try {
            out = obj->at(key).get<T>();
        } catch (const json::exception&) {
            fail("config key has wrong type: " + path + key);
        }
    }

    const json* sub(const char* key) const {
        seen.push_back(key);
        if (!obj->contains(key)) return nullptr;
        if (!obj->at(key).is_object()) fail("config key must be an object: " + path + key);
        return &obj->at(key);
    }

    void finish() const {
        for (auto it = obj->begin(); it != obj->end(); ++it) {
            if (std::find(seen.begin(), seen.end(), it.key()) == seen.end())
                fail("unknown config key: " + path + it.key());
        }
    }
};

void read_audio(const json* j, AudioSection& a) {
    if (!j) return;
    Section s{j, "audio.", {}};
    s.get("sample_rate", a.sample_rate);
    s.get("n_fft", a.n_fft);
    s.get("win_length", a.win_length);
    s.get("hop", a.hop);
    s.get("n_mels", a.n_mels);
    s.get("fmin", a.fmin);
    s.get("fmax", a.fmax);
    s.get("log_floor", a.log_floor);
    s.get("f0_win_length", a.f0_win_length);
    s.get("f0_min", a.f0_min);
    s.get("f0_max", a.f0_max);
    s.get("f0_threshold", a.f0_threshold);
    s.get("f0_energy_gate", a.f0_energy_gate);
    s.finish();
}

void read_synth(const json* j, SynthSection& a) {
    if (!j) return;
    Section s{j, "synth.", {}};
    s.get("vocab_path", a.vocab_path);
    s.get("n_speakers", a.n_speakers);
    s.get("n_heldout_speakers", a.n_heldout_speakers);
    s.get("hidden", a.hidden);
    s.get("flow_layers", a.flow_layers);
    s.get("flow_hidden", a.flow_hidden);
    s.get("speaker_dim", a.speaker_dim);
    s.get("text_len_min", a.text_len_min);
    s.get("text_len_max", a.text_len_max);
    s.get("base_f0_min", a.base_f0_min);
    s.get("base_f0_max", a.base_f0_max);
    s.get("seed", a.seed);
    s.finish();
}

void read_model(const json* j, ModelSection& a) {
    if (!j) return;
    Section s{j, "model.", {}};
    s.get("latent", a.latent);
    s.get("hidden", a.hidden);
    s.get("context_frames", a.context_frames);
    s.get("context_stride", a.context_stride);
    s.get("speaker_dim", a.speaker_dim);
    s.get("pitch_dim", a.pitch_dim);
    s.get("flow_layers", a.flow_layers);
    s.get("flow_hidden", a.flow_hidden);
    s.get("posterior_input", a.posterior_input);
    s.get("speaker_to_decoder", a.speaker_to_decoder);
    s.get("harmonics", a.harmonics);
    s.get("noise_voiced", a.noise_voiced);
    s.get("noise_unvoiced", a.noise_unvoiced);
    s.get("sigma_floor", a.sigma_floor);
    s.get("frontend_seed", a.frontend_seed);
    s.get("init_seed", a.init_seed);
    s.finish();
}

void read_loss(const json* j, LossSection& a) {
    if (!j) return;
    Section s{j, "loss.", {}};
    s.get("w_mel", a.w_mel);
    s.get("w_kl", a.w_kl);
    s.get("w_adv", a.w_adv);
    s.get("w_fm", a.w_fm);
    s.get("distill_enabled", a.distill_enabled);
    s.get("w_distill", a.w_distill);
    s.finish();
}

void read_trainer(const json* j, TrainerSection& a) {
    if (!j) return;
    Section s{j, "trainer.", {}};
    s.get("batch_size", a.batch_size);
    s.get("segment_seconds", a.segment_seconds);
    s.get("lr_g", a.lr_g);
    s.get("lr_d", a.lr_d);
    s.get("lr_decay", a.lr_decay);
    s.get("beta1", a.beta1);
    s.get("beta2", a.beta2);
    s.get("phase1_steps", a.phase1_steps);
    s.get("phase2_steps", a.phase2_steps);
    s.get("checkpoint_every", a.checkpoint_every);
    s.get("log_every", a.log_every);
    s.get("hash_check_every", a.hash_check_every);
    s.get("freeze_phase1", a.freeze_phase1);
    s.get("freeze_phase2", a.freeze_phase2);
    s.get("freeze_speaker_phase2", a.freeze_speaker_phase2);
    s.get("speaker_contrastive_weight", a.speaker_contrastive_weight);
    s.get("pair_mode", a.pair_mode);
    s.finish();
}

void read_eval(const json* j, EvalSection& a) {
    if (!j) return;
    Section s{j, "eval.", {}};
    s.get("kmeans_restarts", a.kmeans_restarts);
    s.get("kmeans_seed", a.kmeans_seed);
    s.finish();
}

json dump_config(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["audio"] = {{"sample_rate", c.audio.sample_rate},
                  {"n_fft", c.audio.n_fft},
                  {"win_length", c.audio.win_length},
                  {"hop", c.audio.hop},
                  {"n_mels", c.audio.n_mels},
                  {"fmin", c.audio.fmin},
                  {"fmax", c.audio.fmax},
                  {"log_floor", c.audio.log_floor},
                  {"f0_win_length", c.audio.f0_win_length},
                  {"f0_min", c.audio.f0_min},
                  {"f0_max", c.audio.f0_max},
                  {"f0_threshold", c.audio.f0_threshold},
                  {"f0_energy_gate", c.audio.f0_energy_gate}};
    j["synth"] = {{"vocab_path", c.synth.vocab_path},
                  {"n_speakers", c.synth.n_speakers},
                  {"n_heldout_speakers", c.synth.n_heldout_speakers},
                  {"hidden", c.synth.hidden},
                  {"flow_layers", c.synth.flow_layers},
                  {"flow_hidden", c.synth.flow_hidden},
                  {"speaker_dim", c.synth.speaker_dim},
                  {"text_len_min", c.synth.text_len_min},
                  {"text_len_max", c.synth.text_len_max},
                  {"base_f0_min", c.synth.base_f0_min},
                  {"base_f0_max", c.synth.base_f0_max},
                  {"seed", c.synth.seed}};
    j["model"] = {{"latent", c.model.latent},
                  {"hidden", c.model.hidden},
                  {"context_frames", c.model.context_frames},
                  {"context_stride", c.model.context_stride},
                  {"speaker_dim", c.model.speaker_dim},
                  {"pitch_dim", c.model.pitch_dim},
                  {"flow_layers", c.model.flow_layers},
                  {"flow_hidden", c.model.flow_hidden},
                  {"posterior_input", c.model.posterior_input},
                  {"speaker_to_decoder", c.model.speaker_to_decoder},
                  {"harmonics", c.model.harmonics},
                  {"noise_voiced", c.model.noise_voiced},
                  {"noise_unvoiced", c.model.noise_unvoiced},
                  {"sigma_floor", c.model.sigma_floor},
                  {"frontend_seed", c.model.frontend_seed},
                  {"init_seed", c.model.init_seed}};
    j["loss"] = {{"w_mel", c.loss.w_mel},       {"w_kl", c.loss.w_kl},
                 {"w_adv", c.loss.w_adv},       {"w_fm", c.loss.w_fm},
                 {"distill_enabled", c.loss.distill_enabled},
                 {"w_distill", c.loss.w_distill}};
    j["trainer"] = {{"batch_size", c.trainer.batch_size},
                    {"segment_seconds", c.trainer.segment_seconds},
                    {"lr_g", c.trainer.lr_g},
                    {"lr_d", c.trainer.lr_d},
                    {"lr_decay", c.trainer.lr_decay},
                    {"beta1", c.trainer.beta1},
                    {"beta2", c.trainer.beta2},
                    {"phase1_steps", c.trainer.phase1_steps},
                    {"phase2_steps", c.trainer.phase2_steps},
                    {"checkpoint_every", c.trainer.checkpoint_every},
                    {"log_every", c.trainer.log_every},
                    {"hash_check_every", c.trainer.hash_check_every},
                    {"freeze_phase1", c.trainer.freeze_phase1},
                    {"freeze_phase2", c.trainer.freeze_phase2},
                    {"freeze_speaker_phase2", c.trainer.freeze_speaker_phase2},
                    {"speaker_contrastive_weight", c.trainer.speaker_contrastive_weight},
                    {"pair_mode", c.trainer.pair_mode}};
    j["eval"] = {{"kmeans_restarts", c.eval.kmeans_restarts},
                 {"kmeans_seed", c.eval.kmeans_seed}};
    return j;
}

}  // namespace

audio::MelConfig RunConfig::mel_config() const {
    audio::MelConfig m;
    m.sample_rate = audio.sample_rate;
    m.n_fft = audio.n_fft;
    m.win_length = audio.win_length;
    m.hop = audio.hop;
    m.n_mels = audio.n_mels;
    m.fmin = audio.fmin;
    m.fmax = audio.fmax;
    m.log_floor = audio.log_floor;
    return m;
}

audio::F0Config RunConfig::f0_config() const {
    audio::F0Config f;
    f.sample_rate = audio.sample_rate;
    f.hop = audio.hop;
    f.win_length = audio.f0_win_length;
    f.fmin = audio.f0_min;
    f.fmax = audio.f0_max;
    f.threshold = audio.f0_threshold;
    f.energy_gate = audio.f0_energy_gate;
    return f;
}

model::RenderConfig RunConfig::render_config() const {
    model::RenderConfig r;
    r.sample_rate = audio.sample_rate;
    r.hop = audio.hop;
    r.harmonics = model.harmonics;
    r.noise_voiced = model.noise_voiced;
    r.noise_unvoiced = model.noise_unvoiced;
    return r;
}

std::string RunConfig::resolve_path(const std::string& p) const {
    std::filesystem::path fp(p);
    if (fp.is_absolute() || config_dir.empty()) return p;
    return (std::filesystem::path(config_dir) / fp).string();
}

std::string RunConfig::to_json_string() const { return dump_config(*this).dump(2) + "\n"; }

uint64_t RunConfig::hash() const { return fnv1a(dump_config(*this).dump()); }

void RunConfig::validate() const {
    require(audio.sample_rate > 0 && audio.hop > 0, "audio: sample_rate and hop must be positive");
    require(audio.win_length >= audio.hop && audio.n_fft >= audio.win_length,
            "audio: need n_fft >= win_length >= hop");
    require(audio.n_mels >= 2, "audio: n_mels must be >= 2");
    require(audio.f0_min >= 40.0 && audio.f0_max <= 1000.0 && audio.f0_min < audio.f0_max,
            "audio: f0 bounds must satisfy 40 <= f0_min < f0_max <= 1000");
    require(synth.n_speakers >= 2, "synth: need at least 2 speakers");
    require(synth.text_len_min >= 1 && synth.text_len_max >= synth.text_len_min,
            "synth: bad text length range");
    require(model.latent > 0 && model.latent % 2 == 0,
            "model: latent must be positive and even for the coupling flow");
    require(model.hidden > 0 && model.speaker_dim > 0 && model.pitch_dim > 0 &&
                model.flow_layers > 0 && model.flow_hidden > 0 && model.harmonics > 0,
            "model: dimensions must be positive");
    require(model.context_frames >= 0 && model.context_stride > 0,
            "model: bad front-end context window");
    require(model.posterior_input == "linear" || model.posterior_input == "mel",
            "model: posterior_input must be 'linear' or 'mel'");
    require(trainer.pair_mode == "paired" || trainer.pair_mode == "recon",
            "trainer: pair_mode must be 'paired' or 'recon'");
    require(trainer.batch_size >= 1 && trainer.segment_seconds > 0, "trainer: bad batch/segment");
    auto has = [](const std::vector<std::string>& v, const char* k) {
        return std::find(v.begin(), v.end(), k) != v.end();
    };
    require(has(trainer.freeze_phase1, "frontend"), "trainer: phase 1 must freeze the frontend");
    require(has(trainer.freeze_phase2, "frontend") && has(trainer.freeze_phase2, "content"),
            "trainer: phase 2 must freeze frontend and content extractor");
}

RunConfig config_from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object()) fail("config root must be an object");
    RunConfig c;
    Section root{&j, "", {}};
    root.get("seed", c.seed);
    read_audio(root.sub("audio"), c.audio);
    read_synth(root.sub("synth"), c.synth);
    read_model(root.sub("model"), c.model);
    read_loss(root.sub("loss"), c.loss);
    read_trainer(root.sub("trainer"), c.trainer);
    read_eval(root.sub("eval"), c.eval);
    root.finish();
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail("config not found: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    RunConfig c = config_from_json_string(text);
    c.config_dir = std::filesystem::path(path).parent_path().string();
    return c;
}

void write_resolved_config(const RunConfig& cfg, const std::string& out_path) {
    std::ofstream f(out_path);
    if (!f) fail("cannot write resolved config: " + out_path);
    f << cfg.to_json_string();
}

}  // namespace pairvc::cli
