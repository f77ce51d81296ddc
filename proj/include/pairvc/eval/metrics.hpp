#pragma once

#include <functional>

#include "pairvc/cli/manifest.hpp"
#include "pairvc/infer/pipeline.hpp"
#include "pairvc/model/vc_model.hpp"

namespace pairvc::eval {

// Pearson correlation over jointly voiced frames; the shorter contour is
// linearly resampled to the longer grid first. Needs >=10 jointly voiced
// frames. Invariant under positive affine maps of either contour.
double f0_pcc(const audio::F0Contour& a, const audio::F0Contour& b);

using Embedder = std::function<nn::Mat(const audio::Waveform&)>;

double speaker_cosine(const audio::Waveform& a, const audio::Waveform& b,
                      const Embedder& embedder);

// Mean of the two scores; both must lie in [1, 5].
double b_mos(double mos, double smos);

// Seeded k-means with restarts; returns the assignment with lowest inertia.
std::vector<int> kmeans(const nn::Mat& x, int k, uint64_t seed, int restarts);

double adjusted_rand_index(const std::vector<int>& labels, const std::vector<int>& pred);
double normalized_mutual_info(const std::vector<int>& labels, const std::vector<int>& pred);
double silhouette_score(const nn::Mat& x, const std::vector<int>& assign);

struct ClusterProbes {
    double ari = 0.0;
    double nmi = 0.0;
    double silhouette = 0.0;
};

// Speaker-leakage probe: cluster the embeddings and compare against labels.
// Lower scores mean less speaker information. Preconditions: k equals the
// number of distinct labels, >=2 labels, >=2 items per label. Identical
// embeddings are an error (silhouette undefined), not a NaN.
ClusterProbes clustering_probes(const nn::Mat& embeddings, const std::vector<int>& labels, int k,
                                uint64_t seed, int restarts);

// Mean-pooled content-prior mean for one utterance (1 x latent).
nn::Mat content_embedding(const model::VcModel& model, const audio::Waveform& wav);

// CSV with an id column; round-trips losslessly via hex doubles.
void export_embeddings(const std::vector<std::string>& ids, const nn::Mat& embeddings,
                       const std::string& path);
std::pair<std::vector<std::string>, nn::Mat> read_embeddings(const std::string& path);

struct MetricReport {
    double secs = 0.0;
    double f0_pcc = 0.0;
    double ari = 0.0;
    double nmi = 0.0;
    double silhouette = 0.0;
    double b_mos = 0.0;
    double diagonal_fraction = 0.0;
    std::string manifest_hash;   // hex
    std::string checkpoint_id;   // config hash + phase + step
    uint64_t seed = 0;

    std::string to_json() const;
    static MetricReport from_json(const std::string& text);
    void require_finite() const;
};

// Full evaluation over a conversion manifest (wav_path = source, ref_path =
// reference, speaker_id labels the source voice) against converted outputs
// {id}_cv.wav in converted_dir.
MetricReport run_evaluation(const infer::Converter& converter, const cli::Manifest& manifest,
                            const std::string& converted_dir, double mos, double smos);

}  // namespace pairvc::eval
