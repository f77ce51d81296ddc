#include "pairvc/model/frontend.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace pairvc::model {

namespace {

int tap_count(int context, int stride) {
    return 2 * (context / stride) + 1;  // offsets -context..context in stride steps
}

}  // namespace

void Frontend::build(nn::ParamStore& ps, const cli::RunConfig& cfg) {
    context_ = cfg.model.context_frames;
    stride_ = cfg.model.context_stride;
    mel_cfg_ = cfg.mel_config();
    int chans = 2 * cfg.audio.n_mels;  // normalised mel + deltas
    dim_ = tap_count(context_, stride_) * chans;
    Rng rng = make_rng(cfg.model.frontend_seed, "frontend");
    nn::Mat gauss(chans, chans);
    for (long i = 0; i < gauss.rows(); ++i)
        for (long j = 0; j < gauss.cols(); ++j) gauss(i, j) = normal(rng);
    Eigen::HouseholderQR<nn::Mat> qr(gauss);
    nn::Mat q = qr.householderQ() * nn::Mat::Identity(chans, chans);
    nn::Param& p = ps.add("frontend.mix", q);
    p.trainable = false;
    mix_ = &p;
}

nn::Mat Frontend::from_mel(const audio::MelSpectrogram& mel) const {
    require(mix_ != nullptr, "frontend not built");
    const nn::Mat& m = mel.values;
    long t_len = m.rows(), n_mels = m.cols();
    require(t_len > 0, "frontend: empty mel input");

    nn::Mat chans(t_len, 2 * n_mels);
    for (long j = 0; j < n_mels; ++j) {
        double mu = m.col(j).mean();
        double sd = std::sqrt((m.col(j).array() - mu).square().mean());
        chans.col(j) = (m.col(j).array() - mu) / std::max(sd, 1e-6);
    }
    if (t_len > 1) {
        chans.block(0, n_mels, 1, n_mels) =
            chans.block(1, 0, 1, n_mels) - chans.block(0, 0, 1, n_mels);
        chans.block(t_len - 1, n_mels, 1, n_mels) =
            chans.block(t_len - 1, 0, 1, n_mels) - chans.block(t_len - 2, 0, 1, n_mels);
        if (t_len > 2)
            chans.block(1, n_mels, t_len - 2, n_mels) =
                0.5 * (chans.block(2, 0, t_len - 2, n_mels) -
                       chans.block(0, 0, t_len - 2, n_mels));
    } else {
        chans.rightCols(n_mels).setZero();
    }

    nn::Mat mixed = chans * mix_->value;
    long width = mixed.cols();
    int reach = context_ / stride_;
    nn::Mat stacked(t_len, dim_);
    for (long t = 0; t < t_len; ++t) {
        for (int k = -reach; k <= reach; ++k) {
            long src = std::clamp(t + long(k) * stride_, 0L, t_len - 1);  // edges repeat
            stacked.block(t, (k + reach) * width, 1, width) = mixed.row(src);
        }
    }
    return stacked;
}

nn::Mat Frontend::from_wav(const audio::Waveform& wav) const {
    return from_mel(audio::compute_mel(wav, mel_cfg_));
}

}  // namespace pairvc::model
