#include "pairvc/train/dataset.hpp"

#include <map>

#include "pairvc/audio/wav_io.hpp"

namespace pairvc::train {

static ItemCache load_item(const cli::Manifest& manifest, const cli::ManifestRow& row,
                           const model::VcModel& model) {
    const auto& cfg = model.config();
    audio::Waveform w = audio::read_wav(manifest.resolve_wav(row));
    require(w.sample_rate == cfg.audio.sample_rate,
            "sample rate mismatch for '" + row.id + "': got " + std::to_string(w.sample_rate) +
                ", config wants " + std::to_string(cfg.audio.sample_rate));
    ItemCache item;
    item.id = row.id;
    item.speaker_id = row.speaker_id;
    item.mel = audio::compute_mel(w, cfg.mel_config());
    if (cfg.model.posterior_input == "mel")
        item.spec = item.mel.values;
    else
        item.spec = audio::compute_linspec(w, cfg.mel_config()).values;
    item.f0 = audio::extract_f0(w, cfg.f0_config());
    item.feats = model.frontend().from_mel(item.mel);
    item.wave = std::move(w.samples);
    long t = item.frames();
    require(item.spec.rows() == t && item.f0.frames() == t && item.feats.rows() == t,
            "frame grid mismatch while caching '" + row.id + "'");
    return item;
}

Dataset Dataset::load(const cli::Manifest& manifest, const model::VcModel& model) {
    auto violations = validate_manifest(manifest);
    if (!violations.empty()) fail("invalid manifest: " + violations.front());

    Dataset ds;
    std::map<std::string, std::pair<const cli::ManifestRow*, const cli::ManifestRow*>> by_pair;
    for (const auto& row : manifest.rows) {
        if (row.role == "real") {
            ds.singles.push_back(load_item(manifest, row, model));
        } else if (row.role == "src") {
            by_pair[row.pair_id].first = &row;
        } else {
            by_pair[row.pair_id].second = &row;
        }
    }
    for (const auto& [pid, rows] : by_pair) {
        PairItem p;
        p.pair_id = pid;
        p.src = load_item(manifest, *rows.first, model);
        p.tgt = load_item(manifest, *rows.second, model);
        ds.pairs.push_back(std::move(p));
    }
    return ds;
}

Crop crop_item(const ItemCache& item, long t0, long frames, int hop) {
    long total = item.frames();
    require(t0 >= 0 && frames >= 1 && t0 + frames <= total, "crop out of range");
    Crop c;
    c.mel = item.mel.values.middleRows(t0, frames);
    c.spec = item.spec.middleRows(t0, frames);
    c.feats = item.feats.middleRows(t0, frames);
    c.f0.hop = item.f0.hop;
    c.f0.sample_rate = item.f0.sample_rate;
    c.f0.hz.assign(item.f0.hz.begin() + t0, item.f0.hz.begin() + t0 + frames);
    c.f0.voiced.assign(item.f0.voiced.begin() + t0, item.f0.voiced.begin() + t0 + frames);
    long s0 = t0 * hop;
    long n = frames * hop;
    c.wave = nn::Mat::Zero(n, 1);
    long avail = std::min<long>(n, long(item.wave.size()) - s0);
    for (long i = 0; i < avail; ++i) c.wave(i, 0) = item.wave[size_t(s0 + i)];
    return c;
}

std::vector<BatchPick> pick_batch(Rng& rng, size_t n_items,
                                  const std::function<long(size_t)>& frames_of, long seg_frames,
                                  int batch_size) {
    require(n_items > 0, "pick_batch: empty dataset");
    std::vector<BatchPick> out;
    out.reserve(size_t(batch_size));
    for (int b = 0; b < batch_size; ++b) {
        BatchPick p;
        p.index = size_t(uniform_int(rng, 0, int64_t(n_items) - 1));
        long frames = frames_of(p.index);
        long span = std::max<long>(0, frames - seg_frames);
        p.t0 = span > 0 ? long(uniform_int(rng, 0, span)) : 0;
        out.push_back(p);
    }
    return out;
}

}  // namespace pairvc::train
