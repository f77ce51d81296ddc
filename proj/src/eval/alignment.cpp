#include "pairvc/eval/alignment.hpp"

#include <cmath>
#include <fstream>

#include "pairvc/common.hpp"

namespace pairvc::eval {

AlignmentResult align_features(const nn::Mat& a, const nn::Mat& b) {
    require(a.rows() > 0 && b.rows() > 0, "alignment: empty feature sequence");
    require(a.cols() == b.cols(), "alignment: feature dimension mismatch");
    long ta = a.rows(), tb = b.rows();

    AlignmentResult res;
    Eigen::VectorXd na(ta), nb(tb);
    bool warned = false;
    for (long i = 0; i < ta; ++i) na(i) = a.row(i).norm();
    for (long j = 0; j < tb; ++j) nb(j) = b.row(j).norm();
    for (long i = 0; i < ta; ++i)
        if (na(i) == 0.0 && !warned) {
            res.warnings.push_back("zero-norm frame encountered; its similarities are set to 0");
            warned = true;
        }
    for (long j = 0; j < tb; ++j)
        if (nb(j) == 0.0 && !warned) {
            res.warnings.push_back("zero-norm frame encountered; its similarities are set to 0");
            warned = true;
        }

    res.similarity = nn::Mat::Zero(ta, tb);
    for (long i = 0; i < ta; ++i) {
        if (na(i) == 0.0) continue;
        for (long j = 0; j < tb; ++j) {
            if (nb(j) == 0.0) continue;
            double c = a.row(i).dot(b.row(j)) / (na(i) * nb(j));
            res.similarity(i, j) = std::clamp(c, -1.0, 1.0);
        }
    }

    res.top1_path.resize(size_t(ta));
    long hits = 0;
    double ratio = double(tb) / double(ta);
    for (long i = 0; i < ta; ++i) {
        long best = 0;
        double best_v = res.similarity(i, 0);
        for (long j = 1; j < tb; ++j)
            if (res.similarity(i, j) > best_v) {
                best_v = res.similarity(i, j);
                best = j;
            }
        res.top1_path[size_t(i)] = best;
        if (std::abs(double(i) * ratio - double(best)) <= 1.0) ++hits;
    }
    res.diagonal_fraction = double(hits) / double(ta);
    return res;
}

void write_similarity_pgm(const nn::Mat& sim, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail("cannot write heatmap: " + path);
    f << "P5\n" << sim.cols() << " " << sim.rows() << "\n255\n";
    for (long i = 0; i < sim.rows(); ++i)
        for (long j = 0; j < sim.cols(); ++j) {
            double v = (std::clamp(sim(i, j), -1.0, 1.0) + 1.0) * 0.5;
            f.put(char(std::lround(v * 255.0)));
        }
    if (!f) fail("failed writing heatmap: " + path);
}

}  // namespace pairvc::eval
