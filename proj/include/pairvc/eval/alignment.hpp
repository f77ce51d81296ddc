#pragma once

#include "pairvc/nn/tensor.hpp"

namespace pairvc::eval {

// Frame-to-frame cosine comparison of two feature sequences. Zero-norm frames
// get zero similarity rows/columns (with a warning) instead of NaN.
struct AlignmentResult {
    nn::Mat similarity;           // (T_a x T_b), entries in [-1, 1]
    std::vector<long> top1_path;  // per a-frame argmax over b-frames
    double diagonal_fraction = 0.0;
    std::vector<std::string> warnings;
};

AlignmentResult align_features(const nn::Mat& a, const nn::Mat& b);

// Grayscale heatmap of a similarity matrix, for eyeballing the diagonal.
void write_similarity_pgm(const nn::Mat& sim, const std::string& path);

}  // namespace pairvc::eval
