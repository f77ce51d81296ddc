#pragma once

#include "pairvc/audio/types.hpp"
#include "pairvc/cli/manifest.hpp"
#include "pairvc/model/vc_model.hpp"

namespace pairvc::train {

// Everything a training step needs from one utterance, precomputed once at
// load time. Contours and spectrograms share the mel frame grid.
struct ItemCache {
    std::string id;
    std::string speaker_id;
    audio::MelSpectrogram mel;
    nn::Mat spec;  // posterior input: linear or mel per config
    audio::F0Contour f0;
    nn::Mat feats;  // frozen front-end content features
    std::vector<double> wave;

    long frames() const { return mel.values.rows(); }
};

struct PairItem {
    ItemCache src;
    ItemCache tgt;
    std::string pair_id;
};

// A crop of one item: frame window [t0, t0+frames) plus the matching samples.
struct Crop {
    nn::Mat mel;
    nn::Mat spec;
    nn::Mat feats;
    audio::F0Contour f0;
    nn::Mat wave;  // (frames*hop x 1)
};

Crop crop_item(const ItemCache& item, long t0, long frames, int hop);

class Dataset {
  public:
    // Validates the manifest (first violation is fatal), loads every wav,
    // extracts spectrograms/F0/front-end features once.
    static Dataset load(const cli::Manifest& manifest, const model::VcModel& model);

    std::vector<PairItem> pairs;
    std::vector<ItemCache> singles;  // role == "real"

    bool empty() const { return pairs.empty() && singles.empty(); }
};

// Seed-determined batch selection. Returns (item index, crop start) pairs;
// pure function of (rng state, sizes), so resumed runs draw identically.
struct BatchPick {
    size_t index;
    long t0;
};
std::vector<BatchPick> pick_batch(Rng& rng, size_t n_items,
                                  const std::function<long(size_t)>& frames_of, long seg_frames,
                                  int batch_size);

}  // namespace pairvc::train
