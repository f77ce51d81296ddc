#include "pairvc/infer/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "pairvc/audio/wav_io.hpp"

namespace pairvc::infer {

namespace fs = std::filesystem;
using nn::Graph;
using nn::Mat;
using nn::Var;

Converter::Converter(const cli::RunConfig& cfg, const std::string& checkpoint_path, bool force) {
    model_.build(cfg);
    meta_ = model::load_checkpoint(checkpoint_path, model_, nullptr, nullptr, nullptr, force);
}

ConvertResult Converter::convert(const audio::Waveform& source, const audio::Waveform& reference,
                                 const ConvertOptions& opt) const {
    const auto& cfg = model_.config();
    require(opt.eps_policy == "zero" || opt.eps_policy == "sample",
            "unknown eps policy: " + opt.eps_policy);
    require(source.sample_rate == cfg.audio.sample_rate &&
                reference.sample_rate == cfg.audio.sample_rate,
            "sample rate mismatch with config");
    require(!source.samples.empty(), "source audio is empty");

    ConvertResult res;
    Mat spk = model_.speaker_embed(reference);  // checks the 0.5 s minimum

    Mat feats = model_.frontend().from_wav(source);
    long frames = feats.rows();

    Graph g;
    nn::GaussianSeq prior = model_.encode_prior(g, g.input(feats));
    Var z_p;
    if (opt.eps_policy == "zero") {
        z_p = prior.mu;
    } else {
        Rng rng = make_rng(opt.seed, "convert-eps");
        Mat eps(frames, cfg.model.latent);
        for (long t = 0; t < frames; ++t)
            for (long d = 0; d < eps.cols(); ++d) eps(t, d) = normal(rng);
        z_p = add(prior.mu, mul(prior.sigma, g.input(eps)));
    }
    Var spk_row = g.input(spk);
    Var z = model_.flow().inverse(g, z_p, spk_row);

    audio::F0Contour f0_src = audio::extract_f0(source, cfg.f0_config());
    audio::F0Contour f0_ref = audio::extract_f0(reference, cfg.f0_config());
    audio::F0Contour shifted;
    if (f0_src.voiced_count() == 0) {
        res.warnings.push_back("source has no voiced frames; F0 shift skipped");
        shifted = f0_src;
    } else if (f0_ref.voiced_count() == 0) {
        res.warnings.push_back("reference has no voiced frames; keeping source pitch");
        shifted = f0_src;
    } else {
        shifted = audio::shift_f0(f0_src, f0_ref);
    }

    Var pitch = model_.encode_f0(g, shifted, frames);
    Var logmel = model_.decode_mel(g, z, pitch, spk_row);

    res.audio.sample_rate = cfg.audio.sample_rate;
    // contour resampled to the frame grid, matching what encode_f0 consumed
    audio::F0Contour f0_frames;
    f0_frames.hop = cfg.audio.hop;
    f0_frames.sample_rate = cfg.audio.sample_rate;
    f0_frames.hz.resize(size_t(frames));
    f0_frames.voiced.resize(size_t(frames));
    long len = shifted.frames();
    for (long t = 0; t < frames; ++t) {
        long idx = std::clamp<long>(std::lround(double(t) * len / frames), 0, len - 1);
        f0_frames.hz[size_t(t)] = shifted.hz[size_t(idx)];
        f0_frames.voiced[size_t(t)] = shifted.voiced[size_t(idx)];
    }
    res.audio.samples =
        model::render_waveform(logmel.value(), f0_frames, model_.filterbank(),
                               cfg.render_config());
    return res;
}

BatchResult batch_convert(const Converter& converter, const cli::Manifest& manifest,
                          const std::string& out_dir, const ConvertOptions& opt) {
    BatchResult res;
    fs::create_directories(out_dir);
    if (manifest.rows.empty()) {
        res.warnings.push_back("manifest has no rows; nothing to convert");
        return res;
    }
    for (const auto& row : manifest.rows) {
        BatchRowResult r;
        r.id = row.id;
        try {
            require(!row.wav_path.empty(), "row has no wav_path");
            require(!row.ref_path.empty(), "row has no ref_path");
            audio::Waveform src = audio::read_wav(manifest.resolve_wav(row));
            audio::Waveform ref = audio::read_wav(manifest.resolve(row.ref_path));
            ConvertResult c = converter.convert(src, ref, opt);
            r.out_path = (fs::path(out_dir) / (row.id + "_cv.wav")).string();
            audio::write_wav(r.out_path, c.audio);
            r.ok = true;
            if (!c.warnings.empty()) {
                r.message = c.warnings.front();
                for (size_t i = 1; i < c.warnings.size(); ++i) r.message += "; " + c.warnings[i];
            }
            res.n_ok += 1;
        } catch (const Error& e) {
            r.ok = false;
            r.message = e.what();
        }
        res.rows.push_back(std::move(r));
    }
    return res;
}

}  // namespace pairvc::infer
