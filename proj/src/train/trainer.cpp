#include "pairvc/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace pairvc::train {

namespace fs = std::filesystem;
using model::LossBreakdown;
using nn::Graph;
using nn::Var;

std::string StepRecord::to_json() const {
    nlohmann::json j;
    j["step"] = step;
    j["phase"] = losses.phase;
    j["kl"] = losses.kl;
    j["rec_or_cv"] = losses.rec_or_cv;
    j["adv_g"] = losses.adv_g;
    j["adv_d"] = losses.adv_d;
    j["fm"] = losses.fm;
    j["total_g"] = losses.total_g;
    j["total_d"] = losses.total_d;
    j["wall_ms"] = wall_ms;
    j["grad_norm"] = grad_norm;
    return j.dump();
}

Trainer::Trainer(const cli::RunConfig& cfg, int phase) : cfg_(cfg), phase_(phase) {
    require(phase == 1 || phase == 2, "phase must be 1 or 2");
    cfg_.validate();
    paired_ = phase == 1 && cfg_.trainer.pair_mode == "paired";
    model_.build(cfg_);

    const auto& freeze =
        phase == 1 ? cfg_.trainer.freeze_phase1 : cfg_.trainer.freeze_phase2;
    for (const auto& prefix : freeze) model_.params().set_trainable(prefix, false);
    if (phase == 2 && cfg_.trainer.freeze_speaker_phase2)
        model_.params().set_trainable("spk", false);

    nn::AdamConfig ga{cfg_.trainer.lr_g, cfg_.trainer.beta1, cfg_.trainer.beta2, 1e-9,
                      cfg_.trainer.lr_decay};
    nn::AdamConfig da{cfg_.trainer.lr_d, cfg_.trainer.beta1, cfg_.trainer.beta2, 1e-9,
                      cfg_.trainer.lr_decay};
    g_opt_ = std::make_unique<nn::Adam>(model_.generator_params(), ga);
    d_opt_ = std::make_unique<nn::Adam>(model_.discriminator_params(), da);

    capture_frozen_hashes();
}

void Trainer::capture_frozen_hashes() {
    frozen_hashes_.clear();
    const auto& freeze =
        phase_ == 1 ? cfg_.trainer.freeze_phase1 : cfg_.trainer.freeze_phase2;
    std::vector<std::string> prefixes = freeze;
    if (phase_ == 2 && cfg_.trainer.freeze_speaker_phase2) prefixes.push_back("spk");
    for (const auto& p : prefixes)
        frozen_hashes_.emplace_back(p, model_.params().value_hash(p));
}

void Trainer::verify_frozen() const {
    for (const auto& [prefix, h] : frozen_hashes_) {
        if (model_.params().value_hash(prefix) != h)
            fail("frozen parameters drifted under '" + prefix + "' after step " +
                 std::to_string(step_));
    }
}

void Trainer::load_data(const cli::Manifest& manifest) {
    data_ = Dataset::load(manifest, model_);
    require(!data_.empty(), "dataset is empty");
    if (paired_) {
        require(!data_.pairs.empty(), "phase 1 needs paired rows in the manifest");
        for (const auto& p : data_.pairs) {
            if (!p.src.speaker_id.empty() && p.src.speaker_id == p.tgt.speaker_id)
                fail("pair '" + p.pair_id + "' has identical source and target speaker '" +
                     p.src.speaker_id + "'");
            require(p.src.frames() == p.tgt.frames(),
                    "pair '" + p.pair_id + "' has mismatched frame counts");
        }
    }
    if (phase_ == 2)
        require(!data_.singles.empty(), "phase 2 needs rows with role 'real'");
}

Trainer::ItemView Trainer::pick_item(size_t index) const {
    if (paired_) {
        const auto& p = data_.pairs[index];
        return {&p.src, &p.tgt};
    }
    // reconstruction: source and target are the same utterance
    if (index < data_.pairs.size()) {
        const auto& p = data_.pairs[index];
        return {&p.tgt, &p.tgt};
    }
    const auto& s = data_.singles[index - data_.pairs.size()];
    return {&s, &s};
}

void Trainer::resume_from(const std::string& checkpoint_path, bool force) {
    auto meta = model::peek_checkpoint(checkpoint_path);
    std::string want = "phase" + std::to_string(phase_);
    if (meta.phase == want) {
        model::load_checkpoint(checkpoint_path, model_, g_opt_.get(), d_opt_.get(), nullptr,
                               force);
        step_ = meta.step;
    } else if (phase_ == 2 && meta.phase == "phase1") {
        model::load_checkpoint(checkpoint_path, model_, nullptr, nullptr, nullptr, force);
        step_ = 0;
    } else {
        fail("cannot start phase " + std::to_string(phase_) + " from a checkpoint tagged '" +
             meta.phase + "'");
    }
    // the checkpoint's trainable flags reflect its own phase; re-apply ours
    for (auto& p : model_.params().all()) p.trainable = true;
    const auto& freeze =
        phase_ == 1 ? cfg_.trainer.freeze_phase1 : cfg_.trainer.freeze_phase2;
    for (const auto& prefix : freeze) model_.params().set_trainable(prefix, false);
    if (phase_ == 2 && cfg_.trainer.freeze_speaker_phase2)
        model_.params().set_trainable("spk", false);
    capture_frozen_hashes();
}

StepRecord Trainer::step() {
    require(!data_.empty(), "no data loaded");
    auto t_start = std::chrono::steady_clock::now();

    size_t n_items = paired_ ? data_.pairs.size() : data_.pairs.size() + data_.singles.size();
    long seg_frames =
        std::lround(cfg_.trainer.segment_seconds * cfg_.audio.sample_rate / cfg_.audio.hop);
    seg_frames = std::max<long>(seg_frames, 8);

    Rng rng = make_rng(cfg_.seed,
                       "phase" + std::to_string(phase_) + "-step-" + std::to_string(step_));
    auto frames_of = [&](size_t i) {
        ItemView v = pick_item(i);
        return std::min(v.src->frames(), v.tgt->frames());
    };
    auto picks = pick_batch(rng, n_items, frames_of, seg_frames, cfg_.trainer.batch_size);

    Graph g;
    Var kl_acc, rec_acc, adv_acc, fm_acc, extra_acc;
    std::vector<nn::Mat> fake_waves, real_waves;
    std::vector<Var> spk_rows;
    std::vector<std::string> spk_labels;
    for (const auto& pick : picks) {
        ItemView v = pick_item(pick.index);
        long frames = std::min<long>(seg_frames, frames_of(pick.index));
        Crop src = crop_item(*v.src, pick.t0, frames, cfg_.audio.hop);
        Crop tgt = crop_item(*v.tgt, pick.t0, frames, cfg_.audio.hop);

        nn::GaussianSeq prior = model_.encode_prior(g, g.input(src.feats));
        Var mel_t = g.input(tgt.mel);
        Var spk = model_.speaker_embed(g, mel_t);
        nn::GaussianSeq post = model_.encode_posterior(g, g.input(tgt.spec), spk);

        nn::Mat eps(frames, cfg_.model.latent);
        for (long t = 0; t < eps.rows(); ++t)
            for (long d = 0; d < eps.cols(); ++d) eps(t, d) = normal(rng);
        Var z = add(post.mu, mul(post.sigma, g.input(eps)));

        nn::GaussianSeq pushed = model_.flow().forward_gaussian(g, post, spk);
        Var kl = model::kl_loss(pushed, prior);

        Var pitch = model_.encode_f0(g, tgt.f0, frames);
        Var logmel_hat = model_.decode_mel(g, z, pitch, spk);
        Var rec = model::mel_l1(logmel_hat, mel_t);

        Var wav_hat = model_.decode_audio(g, logmel_hat, tgt.f0);
        auto fake = model_.discriminate(g, wav_hat, /*frozen=*/false);
        auto real = model_.discriminate(g, g.input(tgt.wave), /*frozen=*/true);
        Var adv_g = model::adv_loss_g(fake.scores);
        Var fm = model::feature_matching(real.features, fake.features);

        kl_acc = kl_acc.valid() ? add(kl_acc, kl) : kl;
        rec_acc = rec_acc.valid() ? add(rec_acc, rec) : rec;
        adv_acc = adv_acc.valid() ? add(adv_acc, adv_g) : adv_g;
        fm_acc = fm_acc.valid() ? add(fm_acc, fm) : fm;
        spk_rows.push_back(spk);
        spk_labels.push_back(v.tgt->speaker_id);
        fake_waves.push_back(wav_hat.value());
        real_waves.push_back(tgt.wave);
    }
    double inv_b = 1.0 / double(picks.size());
    Var kl_b = scale(kl_acc, inv_b);
    Var rec_b = scale(rec_acc, inv_b);
    Var adv_b = scale(adv_acc, inv_b);
    Var fm_b = scale(fm_acc, inv_b);
    Var total_g = model::weighted_generator_loss(kl_b, rec_b, adv_b, fm_b, cfg_.loss);

    // Optional metric-style pull on speaker embeddings; phase 1 only, since
    // phase 2 must not read speaker labels.
    double cw = cfg_.trainer.speaker_contrastive_weight;
    if (phase_ == 1 && cw > 0.0) {
        Var con;
        int n_terms = 0;
        for (size_t i = 0; i < spk_rows.size(); ++i) {
            for (size_t j = i + 1; j < spk_rows.size(); ++j) {
                if (spk_labels[i].empty() || spk_labels[j].empty()) continue;
                Var cos = sum(mul(spk_rows[i], spk_rows[j]));
                Var term = spk_labels[i] == spk_labels[j]
                               ? add_scalar(neg(cos), 1.0)
                               : leaky_relu(add_scalar(cos, -0.2), 0.0);
                con = con.valid() ? add(con, term) : term;
                ++n_terms;
            }
        }
        if (n_terms > 0) total_g = add(total_g, scale(con, cw / n_terms));
    }

    // Discriminator loss on detached fakes.
    Graph gd;
    Var d_acc;
    for (size_t i = 0; i < fake_waves.size(); ++i) {
        auto real = model_.discriminate(gd, gd.input(real_waves[i]), /*frozen=*/false);
        auto fake = model_.discriminate(gd, gd.input(fake_waves[i]), /*frozen=*/false);
        Var d = model::adv_loss_d(real.scores, fake.scores);
        d_acc = d_acc.valid() ? add(d_acc, d) : d;
    }
    Var d_total = scale(d_acc, inv_b);

    // Finiteness gate before any parameter is touched, so the checkpoint on
    // disk stays the last good state.
    LossBreakdown breakdown =
        model::total_losses(kl_b.value()(0, 0), rec_b.value()(0, 0), adv_b.value()(0, 0),
                            d_total.value()(0, 0), fm_b.value()(0, 0), cfg_.loss, phase_);

    d_opt_->zero_grad();
    gd.backward(d_total);
    d_opt_->step();

    g_opt_->zero_grad();
    g.backward(total_g);
    double gnorm = g_opt_->grad_norm();
    if (!std::isfinite(gnorm)) fail("non-finite gradient norm at step " + std::to_string(step_));
    g_opt_->step();

    ++step_;
    if (cfg_.trainer.hash_check_every > 0 && step_ % cfg_.trainer.hash_check_every == 0)
        verify_frozen();

    StepRecord rec;
    rec.step = step_;
    rec.losses = breakdown;
    rec.grad_norm = gnorm;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            t_start)
                      .count();
    return rec;
}

void Trainer::save(const std::string& path) const {
    model::CheckpointMeta meta;
    meta.config_hash = cfg_.hash();
    meta.phase = "phase" + std::to_string(phase_);
    meta.step = step_;
    std::string rng_blob = "stateless-step:" + std::to_string(step_);
    model::save_checkpoint(path, model_, meta, g_opt_.get(), d_opt_.get(), rng_blob);
}

RunResult run_training(const cli::RunConfig& cfg, const TrainOptions& opt) {
    int64_t target = opt.steps_override >= 0
                         ? opt.steps_override
                         : (opt.phase == 1 ? cfg.trainer.phase1_steps : cfg.trainer.phase2_steps);

    cli::Manifest manifest = cli::read_manifest(opt.manifest_path);
    Trainer trainer(cfg, opt.phase);
    if (!opt.resume.empty())
        trainer.resume_from(opt.resume, opt.force);
    else if (opt.phase == 2)
        fail("phase 2 requires a phase-1 checkpoint (--resume)");
    trainer.load_data(manifest);

    fs::create_directories(opt.out_dir);
    cli::write_resolved_config(cfg, (fs::path(opt.out_dir) / "config.resolved.json").string());

    auto ckpt_name = [&](int64_t s) {
        char buf[64];
        snprintf(buf, sizeof buf, "ckpt_phase%d_%06lld.bin", opt.phase,
                 static_cast<long long>(s));
        return (fs::path(opt.out_dir) / buf).string();
    };
    std::string latest = (fs::path(opt.out_dir) / "latest.bin").string();

    RunResult res;
    auto save_at = [&](int64_t s) {
        std::string p = ckpt_name(s);
        trainer.save(p);
        trainer.save(latest);
        res.checkpoints.push_back(p);
        res.final_checkpoint = p;
    };

    std::string log_path =
        (fs::path(opt.out_dir) / ("train_phase" + std::to_string(opt.phase) + ".log.jsonl"))
            .string();
    std::ofstream log(log_path, trainer.steps_done() > 0 ? std::ios::app : std::ios::trunc);
    if (!log) fail("cannot write training log: " + log_path);

    save_at(trainer.steps_done());  // initial (or resumed) state is always on disk

    while (trainer.steps_done() < target) {
        StepRecord rec;
        try {
            rec = trainer.step();
        } catch (const Error& e) {
            log.flush();
            fail(std::string(e.what()) + " (training aborted; last checkpoint: " +
                 res.final_checkpoint + ")");
        }
        res.records.push_back(rec);
        log << rec.to_json() << "\n";
        if (cfg.trainer.checkpoint_every > 0 &&
            trainer.steps_done() % cfg.trainer.checkpoint_every == 0)
            save_at(trainer.steps_done());
    }
    if (res.checkpoints.empty() || res.checkpoints.back() != ckpt_name(target))
        save_at(trainer.steps_done());
    trainer.verify_frozen();
    return res;
}

}  // namespace pairvc::train
