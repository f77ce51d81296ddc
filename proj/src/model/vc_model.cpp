#include "pairvc/model/vc_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace pairvc::model {

using nn::Graph;
using nn::Mat;
using nn::Var;

void VcModel::build(const cli::RunConfig& cfg) {
    cfg.validate();
    cfg_ = cfg;
    fb_ = audio::make_mel_filterbank(cfg.mel_config());
    frontend_.build(params_, cfg);

    const auto& m = cfg.model;
    long spec_bins = cfg.model.posterior_input == "mel" ? cfg.audio.n_mels
                                                        : cfg.audio.n_fft / 2 + 1;
    Rng rng = make_rng(m.init_seed, "model-init");

    content_c1_.build(params_, rng, "content.c1", frontend_.dim(), m.hidden, 3);
    content_c2_.build(params_, rng, "content.c2", m.hidden, m.hidden, 3);
    content_mu_.build(params_, rng, "content.mu", m.hidden, m.latent);
    content_ls_.build(params_, rng, "content.ls", m.hidden, m.latent);

    post_c1_.build(params_, rng, "post.c1", spec_bins + m.speaker_dim, m.hidden, 3);
    post_c2_.build(params_, rng, "post.c2", m.hidden, m.hidden, 3);
    post_mu_.build(params_, rng, "post.mu", m.hidden, m.latent);
    post_ls_.build(params_, rng, "post.ls", m.hidden, m.latent);

    flow_.build(params_, rng, "flow", m.latent, m.speaker_dim, m.flow_hidden, m.flow_layers);

    f0_lin_.build(params_, rng, "f0enc.lin", 1, m.pitch_dim);
    f0_unvoiced_ = &params_.add("f0enc.unvoiced", nn::init_uniform(rng, 1, m.pitch_dim, 0.5));

    long dec_in = m.latent + m.pitch_dim + (m.speaker_to_decoder ? m.speaker_dim : 0);
    dec_c1_.build(params_, rng, "dec.c1", dec_in, m.hidden, 3);
    dec_c2_.build(params_, rng, "dec.c2", m.hidden, m.hidden, 3);
    dec_out_.build(params_, rng, "dec.out", m.hidden, cfg.audio.n_mels);

    spk_conv_.build(params_, rng, "spk.conv", cfg.audio.n_mels, m.hidden, 3);
    spk_out_.build(params_, rng, "spk.out", 2 * m.hidden, m.speaker_dim);

    for (int s = 0; s < 2; ++s) {
        std::string base = "disc.s" + std::to_string(s);
        disc_[s].l1.build(params_, rng, base + ".l1", 1, 8, 16, 8, 4);
        disc_[s].l2.build(params_, rng, base + ".l2", 8, 16, 8, 4, 2);
        disc_[s].l3.build(params_, rng, base + ".l3", 16, 24, 8, 4, 2);
        disc_[s].l4.build(params_, rng, base + ".l4", 24, 24, 3);
        disc_[s].head.build(params_, rng, base + ".head", 24, 1, 3);
    }
}

nn::GaussianSeq VcModel::heads(Graph& g, Var h, const nn::Linear& mu,
                               const nn::Linear& ls) const {
    Var m = mu.apply(g, h);
    Var s = add_scalar(softplus_v(ls.apply(g, h)), cfg_.model.sigma_floor);
    return {m, s};
}

nn::GaussianSeq VcModel::encode_prior(Graph& g, Var content_feats) const {
    require(content_feats.cols() == frontend_.dim(), "encode_prior: feature dim mismatch");
    Var h = tanh_v(content_c1_.apply(g, content_feats));
    h = tanh_v(content_c2_.apply(g, h));
    return heads(g, h, content_mu_, content_ls_);
}

nn::GaussianSeq VcModel::encode_posterior(Graph& g, Var spec, Var spk_row) const {
    require(spk_row.rows() == 1 && spk_row.cols() == cfg_.model.speaker_dim,
            "encode_posterior: bad speaker row");
    Var x = concat_cols(spec, broadcast_rows(spk_row, spec.rows()));
    Var h = tanh_v(post_c1_.apply(g, x));
    h = tanh_v(post_c2_.apply(g, h));
    return heads(g, h, post_mu_, post_ls_);
}

Var VcModel::encode_f0(Graph& g, const audio::F0Contour& f0, long frames) const {
    long len = f0.frames();
    require(frames > 0, "encode_f0: no frames requested");
    if (std::labs(len - frames) > 2)
        fail("encode_f0: contour length " + std::to_string(len) + " does not match " +
             std::to_string(frames) + " frames");
    long p = cfg_.model.pitch_dim;
    Mat x = Mat::Zero(frames, 1);
    Mat voiced_mask = Mat::Zero(frames, p);
    Mat unvoiced_mask = Mat::Ones(frames, p);
    for (long t = 0; t < frames; ++t) {
        long idx = std::clamp<long>(std::lround(double(t) * len / frames), 0, len - 1);
        if (f0.voiced[size_t(idx)]) {
            x(t, 0) = std::log(f0.hz[size_t(idx)] / 220.0);
            voiced_mask.row(t).setOnes();
            unvoiced_mask.row(t).setZero();
        }
    }
    Var voiced = tanh_v(f0_lin_.apply(g, g.input(x)));
    Var uv = broadcast_rows(g.param(*f0_unvoiced_), frames);
    return add(mul(voiced, g.input(voiced_mask)), mul(uv, g.input(unvoiced_mask)));
}

Var VcModel::decode_mel(Graph& g, Var z, Var pitch, Var spk_row) const {
    require(z.rows() == pitch.rows(), "decode_mel: latent/pitch frame mismatch");
    Var x = concat_cols(z, pitch);
    if (cfg_.model.speaker_to_decoder)
        x = concat_cols(x, broadcast_rows(spk_row, z.rows()));
    Var h = tanh_v(dec_c1_.apply(g, x));
    h = tanh_v(dec_c2_.apply(g, h));
    return dec_out_.apply(g, h);
}

Var VcModel::decode_audio(Graph& g, Var logmel, const audio::F0Contour& f0) const {
    return render_waveform_op(g, logmel, f0, fb_, cfg_.render_config());
}

Var VcModel::speaker_embed(Graph& g, Var mel, bool frozen) const {
    Var h = tanh_v(spk_conv_.apply(g, mel, frozen));
    Var mu = mean_rows(h);
    Var var = sub(mean_rows(square(h)), square(mu));
    Var sd = pow_scalar(add_scalar(var, 1e-5), 0.5);
    Var e = spk_out_.apply(g, concat_cols(mu, sd), frozen);
    Var inv_norm = pow_scalar(add_scalar(sum(square(e)), 1e-12), -0.5);
    return mul_scalar_var(e, inv_norm);
}

nn::Mat VcModel::speaker_embed(const audio::Waveform& wav) const {
    require(2 * wav.samples.size() >= size_t(wav.sample_rate),
            "speaker reference too short: need at least 0.5 s of audio");
    auto mel = audio::compute_mel(wav, cfg_.mel_config());
    Graph g;
    return speaker_embed(g, g.input(mel.values), /*frozen=*/true).value();
}

DiscriminatorOutput VcModel::discriminate(Graph& g, Var wave, bool frozen) const {
    require(wave.cols() == 1, "discriminate: expected a single-channel column");
    DiscriminatorOutput out;
    for (int s = 0; s < 2; ++s) {
        Var x = s == 0 ? wave : avg_pool_rows(wave, 4);
        const auto& d = disc_[s];
        std::vector<Var> feats;
        x = leaky_relu(d.l1.apply(g, x, frozen), 0.2);
        feats.push_back(x);
        x = leaky_relu(d.l2.apply(g, x, frozen), 0.2);
        feats.push_back(x);
        x = leaky_relu(d.l3.apply(g, x, frozen), 0.2);
        feats.push_back(x);
        x = leaky_relu(d.l4.apply(g, x, frozen), 0.2);
        feats.push_back(x);
        out.scores.push_back(d.head.apply(g, x, frozen));
        out.features.push_back(std::move(feats));
    }
    return out;
}

std::vector<nn::Param*> VcModel::generator_params() {
    std::vector<nn::Param*> out;
    for (auto& p : params_.all())
        if (p.name.rfind("disc.", 0) != 0) out.push_back(&p);
    return out;
}

std::vector<nn::Param*> VcModel::discriminator_params() {
    return params_.with_prefix("disc.");
}

// ----- checkpoints -----

static const char kCkptMagic[] = "pairvc-ckpt-v1";
static const char kCkptEnd[] = "pairvc-ckpt-end";

void save_checkpoint(const std::string& path, const VcModel& model, const CheckpointMeta& meta,
                     const nn::Adam* g_opt, const nn::Adam* d_opt, const std::string& rng_blob) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail("cannot write checkpoint: " + path);
    nn::write_string(os, kCkptMagic);
    nn::write_u64(os, meta.config_hash);
    nn::write_string(os, meta.phase);
    nn::write_i64(os, meta.step);
    const auto& params = model.params().all();
    nn::write_u64(os, params.size());
    for (const auto& p : params) {
        nn::write_string(os, p.name);
        nn::write_u64(os, p.trainable ? 1 : 0);
        nn::write_mat(os, p.value);
    }
    std::string opt_blob;
    if (g_opt && d_opt) {
        std::ostringstream buf;
        g_opt->save_state(buf);
        d_opt->save_state(buf);
        opt_blob = buf.str();
    }
    nn::write_string(os, opt_blob);
    nn::write_string(os, rng_blob);
    nn::write_string(os, kCkptEnd);
    if (!os) fail("failed writing checkpoint: " + path);
}

static CheckpointMeta read_header(std::istream& is, const std::string& path) {
    std::string magic;
    try {
        magic = nn::read_string(is);
    } catch (const Error&) {
        fail("not a checkpoint file: " + path);
    }
    if (magic != kCkptMagic) fail("not a checkpoint file: " + path);
    CheckpointMeta meta;
    meta.config_hash = nn::read_u64(is);
    meta.phase = nn::read_string(is);
    meta.step = nn::read_i64(is);
    return meta;
}

CheckpointMeta load_checkpoint(const std::string& path, VcModel& model, nn::Adam* g_opt,
                               nn::Adam* d_opt, std::string* rng_blob, bool force) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("checkpoint not found: " + path);
    CheckpointMeta meta = read_header(is, path);
    uint64_t expect = model.config().hash();
    if (meta.config_hash != expect && !force)
        fail("checkpoint config hash mismatch: checkpoint has " + hex64(meta.config_hash) +
             ", current config is " + hex64(expect) + " (use --force to load anyway)");
    uint64_t n = nn::read_u64(is);
    auto& params = model.params().all();
    require(n == params.size(), "checkpoint parameter count does not match model");
    for (auto& p : params) {
        std::string name = nn::read_string(is);
        if (name != p.name) fail("checkpoint does not match model: expected parameter " +
                                 p.name + ", found " + name);
        p.trainable = nn::read_u64(is) != 0;
        Mat v = nn::read_mat(is);
        if (v.rows() != p.value.rows() || v.cols() != p.value.cols())
            fail("checkpoint shape mismatch for " + p.name);
        p.value = std::move(v);
    }
    std::string opt_blob = nn::read_string(is);
    meta.has_optimizers = !opt_blob.empty();
    if (g_opt && d_opt) {
        require(meta.has_optimizers, "checkpoint has no optimizer state: " + path);
        std::istringstream buf(opt_blob);
        g_opt->load_state(buf);
        d_opt->load_state(buf);
    }
    std::string rng = nn::read_string(is);
    if (rng_blob) *rng_blob = rng;
    std::string trailer = nn::read_string(is);
    require(trailer == kCkptEnd, "truncated checkpoint: " + path);
    return meta;
}

CheckpointMeta peek_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("checkpoint not found: " + path);
    CheckpointMeta meta = read_header(is, path);
    uint64_t n = nn::read_u64(is);
    for (uint64_t i = 0; i < n; ++i) {
        nn::read_string(is);
        nn::read_u64(is);
        nn::read_mat(is);
    }
    meta.has_optimizers = !nn::read_string(is).empty();
    return meta;
}

}  // namespace pairvc::model
