#include "pairvc/eval/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"
#include "pairvc/audio/wav_io.hpp"
#include "pairvc/eval/alignment.hpp"

namespace pairvc::eval {

namespace fs = std::filesystem;
using nn::Mat;

namespace {

struct Resampled {
    std::vector<double> hz;
    std::vector<uint8_t> voiced;
};

// Linear interpolation onto `length` points; a frame is voiced only when both
// contributing source frames are.
Resampled resample_contour(const audio::F0Contour& c, long length) {
    Resampled out;
    out.hz.assign(size_t(length), 0.0);
    out.voiced.assign(size_t(length), 0);
    long lc = c.frames();
    for (long t = 0; t < length; ++t) {
        double pos = length > 1 ? double(t) * (lc - 1) / double(length - 1) : 0.0;
        long lo = long(std::floor(pos));
        long hi = std::min(lo + 1, lc - 1);
        double frac = pos - double(lo);
        if (c.voiced[size_t(lo)] && c.voiced[size_t(hi)]) {
            out.hz[size_t(t)] = (1.0 - frac) * c.hz[size_t(lo)] + frac * c.hz[size_t(hi)];
            out.voiced[size_t(t)] = 1;
        }
    }
    return out;
}

}  // namespace

double f0_pcc(const audio::F0Contour& a, const audio::F0Contour& b) {
    require(a.frames() > 0 && b.frames() > 0, "f0_pcc: empty contour");
    long length = std::max(a.frames(), b.frames());
    Resampled ra = resample_contour(a, length);
    Resampled rb = resample_contour(b, length);
    std::vector<double> va, vb;
    for (long t = 0; t < length; ++t) {
        if (ra.voiced[size_t(t)] && rb.voiced[size_t(t)]) {
            va.push_back(ra.hz[size_t(t)]);
            vb.push_back(rb.hz[size_t(t)]);
        }
    }
    if (va.size() < 10) fail("insufficient voiced overlap");
    double n = double(va.size());
    double ma = 0, mb = 0;
    for (size_t i = 0; i < va.size(); ++i) {
        ma += va[i];
        mb += vb[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (size_t i = 0; i < va.size(); ++i) {
        sab += (va[i] - ma) * (vb[i] - mb);
        saa += (va[i] - ma) * (va[i] - ma);
        sbb += (vb[i] - mb) * (vb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) fail("f0_pcc undefined for a constant contour");
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double speaker_cosine(const audio::Waveform& a, const audio::Waveform& b,
                      const Embedder& embedder) {
    Mat ea = embedder(a), eb = embedder(b);
    require(ea.size() == eb.size() && ea.rows() == 1, "speaker_cosine: embedding shape mismatch");
    double na = ea.norm(), nb = eb.norm();
    require(na > 0 && nb > 0, "speaker_cosine: zero-norm embedding");
    return std::clamp((ea * eb.transpose())(0, 0) / (na * nb), -1.0, 1.0);
}

double b_mos(double mos, double smos) {
    require(mos >= 1.0 && mos <= 5.0 && smos >= 1.0 && smos <= 5.0,
            "b_mos inputs must lie in [1, 5]");
    return (mos + smos) / 2.0;
}

std::vector<int> kmeans(const Mat& x, int k, uint64_t seed, int restarts) {
    long n = x.rows();
    require(k >= 1 && n >= k, "k-means: fewer points than clusters");
    std::vector<int> best_assign;
    double best_inertia = 0.0;
    for (int r = 0; r < std::max(1, restarts); ++r) {
        Rng rng = make_rng(seed, "kmeans-" + std::to_string(r));
        std::vector<long> order(size_t(n), 0);
        for (long i = 0; i < n; ++i) order[size_t(i)] = i;
        for (long i = n - 1; i > 0; --i)
            std::swap(order[size_t(i)], order[size_t(uniform_int(rng, 0, i))]);
        Mat centers(k, x.cols());
        for (int c = 0; c < k; ++c) centers.row(c) = x.row(order[size_t(c)]);

        std::vector<int> assign(size_t(n), -1);
        for (int iter = 0; iter < 200; ++iter) {
            bool changed = false;
            for (long i = 0; i < n; ++i) {
                int arg = 0;
                double bd = (x.row(i) - centers.row(0)).squaredNorm();
                for (int c = 1; c < k; ++c) {
                    double d = (x.row(i) - centers.row(c)).squaredNorm();
                    if (d < bd) {
                        bd = d;
                        arg = c;
                    }
                }
                if (assign[size_t(i)] != arg) {
                    assign[size_t(i)] = arg;
                    changed = true;
                }
            }
            if (!changed) break;
            for (int c = 0; c < k; ++c) {
                Mat sum = Mat::Zero(1, x.cols());
                long cnt = 0;
                for (long i = 0; i < n; ++i)
                    if (assign[size_t(i)] == c) {
                        sum += x.row(i);
                        ++cnt;
                    }
                if (cnt > 0) {
                    centers.row(c) = sum / double(cnt);
                } else {
                    // reseed an empty cluster with the worst-fit point
                    long far_i = 0;
                    double far_d = -1.0;
                    for (long i = 0; i < n; ++i) {
                        double d = (x.row(i) - centers.row(assign[size_t(i)])).squaredNorm();
                        if (d > far_d) {
                            far_d = d;
                            far_i = i;
                        }
                    }
                    centers.row(c) = x.row(far_i);
                }
            }
        }
        double inertia = 0.0;
        for (long i = 0; i < n; ++i)
            inertia += (x.row(i) - centers.row(assign[size_t(i)])).squaredNorm();
        if (best_assign.empty() || inertia < best_inertia) {
            best_assign = assign;
            best_inertia = inertia;
        }
    }
    return best_assign;
}

namespace {

std::map<int, int> index_of(const std::vector<int>& v) {
    std::map<int, int> m;
    for (int x : v)
        if (!m.count(x)) m[x] = int(m.size());
    return m;
}

double comb2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double adjusted_rand_index(const std::vector<int>& labels, const std::vector<int>& pred) {
    require(labels.size() == pred.size() && !labels.empty(), "ari: size mismatch");
    auto li = index_of(labels), pi = index_of(pred);
    Mat cont = Mat::Zero(long(li.size()), long(pi.size()));
    for (size_t i = 0; i < labels.size(); ++i) cont(li[labels[i]], pi[pred[i]]) += 1.0;
    double index = 0.0;
    for (long i = 0; i < cont.rows(); ++i)
        for (long j = 0; j < cont.cols(); ++j) index += comb2(cont(i, j));
    double sum_a = 0.0, sum_b = 0.0;
    for (long i = 0; i < cont.rows(); ++i) sum_a += comb2(cont.row(i).sum());
    for (long j = 0; j < cont.cols(); ++j) sum_b += comb2(cont.col(j).sum());
    double total = comb2(double(labels.size()));
    require(total > 0, "ari: need at least 2 items");
    double expected = sum_a * sum_b / total;
    double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;  // both partitions trivial and identical
    return (index - expected) / (max_index - expected);
}

double normalized_mutual_info(const std::vector<int>& labels, const std::vector<int>& pred) {
    require(labels.size() == pred.size() && !labels.empty(), "nmi: size mismatch");
    auto li = index_of(labels), pi = index_of(pred);
    double n = double(labels.size());
    Mat cont = Mat::Zero(long(li.size()), long(pi.size()));
    for (size_t i = 0; i < labels.size(); ++i) cont(li[labels[i]], pi[pred[i]]) += 1.0;
    double hu = 0.0, hv = 0.0, mi = 0.0;
    for (long i = 0; i < cont.rows(); ++i) {
        double p = cont.row(i).sum() / n;
        if (p > 0) hu -= p * std::log(p);
    }
    for (long j = 0; j < cont.cols(); ++j) {
        double p = cont.col(j).sum() / n;
        if (p > 0) hv -= p * std::log(p);
    }
    for (long i = 0; i < cont.rows(); ++i)
        for (long j = 0; j < cont.cols(); ++j) {
            double pij = cont(i, j) / n;
            if (pij > 0)
                mi += pij * std::log(pij * n * n / (cont.row(i).sum() * cont.col(j).sum()));
        }
    double denom = 0.5 * (hu + hv);
    if (denom == 0.0) return labels == pred ? 1.0 : 0.0;
    return std::clamp(mi / denom, 0.0, 1.0);
}

double silhouette_score(const Mat& x, const std::vector<int>& assign) {
    long n = x.rows();
    require(size_t(n) == assign.size() && n >= 2, "silhouette: size mismatch");
    auto ai = index_of(assign);
    int k = int(ai.size());
    if (k < 2) fail("silhouette undefined for a single cluster");
    bool any_distance = false;
    for (long i = 1; i < n && !any_distance; ++i)
        if ((x.row(i) - x.row(0)).norm() > 0) any_distance = true;
    if (!any_distance) fail("all embeddings identical; silhouette undefined");

    std::vector<int> idx(size_t(n), 0);
    for (long i = 0; i < n; ++i) idx[size_t(i)] = ai[assign[size_t(i)]];
    std::vector<long> count(size_t(k), 0);
    for (int c : idx) ++count[size_t(c)];

    double total = 0.0;
    for (long i = 0; i < n; ++i) {
        std::vector<double> dist_sum(size_t(k), 0.0);
        for (long j = 0; j < n; ++j) {
            if (j == i) continue;
            dist_sum[size_t(idx[size_t(j)])] += (x.row(i) - x.row(j)).norm();
        }
        int own = idx[size_t(i)];
        if (count[size_t(own)] <= 1) continue;  // singleton contributes 0
        double a = dist_sum[size_t(own)] / double(count[size_t(own)] - 1);
        double b = 0.0;
        bool first = true;
        for (int c = 0; c < k; ++c) {
            if (c == own || count[size_t(c)] == 0) continue;
            double m = dist_sum[size_t(c)] / double(count[size_t(c)]);
            if (first || m < b) {
                b = m;
                first = false;
            }
        }
        double denom = std::max(a, b);
        if (denom > 0) total += (b - a) / denom;
    }
    return total / double(n);
}

ClusterProbes clustering_probes(const Mat& embeddings, const std::vector<int>& labels, int k,
                                uint64_t seed, int restarts) {
    require(size_t(embeddings.rows()) == labels.size(), "clustering_probes: label count mismatch");
    std::map<int, long> counts;
    for (int l : labels) counts[l] += 1;
    require(counts.size() >= 2, "clustering_probes: need at least two distinct speakers");
    for (const auto& [l, c] : counts)
        require(c >= 2, "clustering_probes: need at least two items per speaker");
    require(k == int(counts.size()),
            "clustering_probes: k must equal the number of distinct labels");
    bool any_distance = false;
    for (long i = 1; i < embeddings.rows() && !any_distance; ++i)
        if ((embeddings.row(i) - embeddings.row(0)).norm() > 0) any_distance = true;
    if (!any_distance) fail("all embeddings identical; silhouette undefined");

    std::vector<int> assign = kmeans(embeddings, k, seed, restarts);
    ClusterProbes p;
    p.ari = adjusted_rand_index(labels, assign);
    p.nmi = normalized_mutual_info(labels, assign);
    p.silhouette = silhouette_score(embeddings, assign);
    return p;
}

Mat content_embedding(const model::VcModel& model, const audio::Waveform& wav) {
    Mat feats = model.frontend().from_wav(wav);
    nn::Graph g;
    nn::GaussianSeq prior = model.encode_prior(g, g.input(feats));
    return prior.mu.value().colwise().mean();
}

void export_embeddings(const std::vector<std::string>& ids, const Mat& embeddings,
                       const std::string& path) {
    require(ids.size() == size_t(embeddings.rows()), "export_embeddings: id count mismatch");
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail("cannot write embeddings: " + path);
    f << "id";
    for (long d = 0; d < embeddings.cols(); ++d) f << ",d" << d;
    f << "\n";
    char buf[40];
    for (long i = 0; i < embeddings.rows(); ++i) {
        require(ids[size_t(i)].find(',') == std::string::npos, "embedding id contains a comma");
        f << ids[size_t(i)];
        for (long d = 0; d < embeddings.cols(); ++d) {
            snprintf(buf, sizeof buf, "%a", embeddings(i, d));  // hex float: lossless
            f << "," << buf;
        }
        f << "\n";
    }
    if (!f) fail("failed writing embeddings: " + path);
}

std::pair<std::vector<std::string>, Mat> read_embeddings(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail("embeddings file not found: " + path);
    std::string header;
    if (!std::getline(f, header)) fail("embeddings file is empty: " + path);
    long dims = -1;
    for (char c : header)
        if (c == ',') dims = dims < 0 ? 1 : dims + 1;
    if (dims < 0) dims = 0;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        size_t pos = line.find(',');
        std::string id = pos == std::string::npos ? line : line.substr(0, pos);
        std::vector<double> vals;
        while (pos != std::string::npos) {
            size_t next = line.find(',', pos + 1);
            std::string tok = line.substr(pos + 1, next == std::string::npos ? std::string::npos
                                                                             : next - pos - 1);
            vals.push_back(std::strtod(tok.c_str(), nullptr));
            pos = next;
        }
        require(long(vals.size()) == dims,
                "embeddings row has wrong dimension in " + path);
        ids.push_back(id);
        rows.push_back(std::move(vals));
    }
    Mat m(long(rows.size()), dims);
    for (size_t i = 0; i < rows.size(); ++i)
        for (long d = 0; d < dims; ++d) m(long(i), d) = rows[i][size_t(d)];
    return {ids, m};
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["secs"] = secs;
    j["f0_pcc"] = f0_pcc;
    j["ari"] = ari;
    j["nmi"] = nmi;
    j["silhouette"] = silhouette;
    j["b_mos"] = b_mos;
    j["diagonal_fraction"] = diagonal_fraction;
    j["manifest_hash"] = manifest_hash;
    j["checkpoint_id"] = checkpoint_id;
    j["seed"] = seed;
    return j.dump(2);
}

MetricReport MetricReport::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("invalid metric report: ") + e.what());
    }
    MetricReport r;
    try {
        r.secs = j.at("secs").get<double>();
        r.f0_pcc = j.at("f0_pcc").get<double>();
        r.ari = j.at("ari").get<double>();
        r.nmi = j.at("nmi").get<double>();
        r.silhouette = j.at("silhouette").get<double>();
        r.b_mos = j.at("b_mos").get<double>();
        r.diagonal_fraction = j.at("diagonal_fraction").get<double>();
        r.manifest_hash = j.at("manifest_hash").get<std::string>();
        r.checkpoint_id = j.at("checkpoint_id").get<std::string>();
        r.seed = j.at("seed").get<uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("invalid metric report: ") + e.what());
    }
    return r;
}

void MetricReport::require_finite() const {
    auto chk = [](double v, const char* name) {
        if (!std::isfinite(v)) fail(std::string("metric report has non-finite ") + name);
    };
    chk(secs, "secs");
    chk(f0_pcc, "f0_pcc");
    chk(ari, "ari");
    chk(nmi, "nmi");
    chk(silhouette, "silhouette");
    chk(b_mos, "b_mos");
    chk(diagonal_fraction, "diagonal_fraction");
}

MetricReport run_evaluation(const infer::Converter& converter, const cli::Manifest& manifest,
                            const std::string& converted_dir, double mos, double smos) {
    const auto& model = converter.vc();
    Embedder embedder = [&](const audio::Waveform& w) { return model.speaker_embed(w); };

    double secs_sum = 0.0, pcc_sum = 0.0, diag_sum = 0.0;
    int n_rows = 0, n_pcc = 0;
    std::vector<std::string> label_names;
    std::vector<int> labels;
    std::map<std::string, int> label_ids;
    std::vector<Mat> content_rows;

    for (const auto& row : manifest.rows) {
        if (row.wav_path.empty() || row.ref_path.empty()) continue;
        std::string conv_path = (fs::path(converted_dir) / (row.id + "_cv.wav")).string();
        if (!fs::exists(conv_path)) continue;
        audio::Waveform src = audio::read_wav(manifest.resolve_wav(row));
        audio::Waveform ref = audio::read_wav(manifest.resolve(row.ref_path));
        audio::Waveform conv = audio::read_wav(conv_path);

        secs_sum += speaker_cosine(conv, ref, embedder);
        try {
            pcc_sum += f0_pcc(audio::extract_f0(src, model.config().f0_config()),
                              audio::extract_f0(conv, model.config().f0_config()));
            ++n_pcc;
        } catch (const Error&) {
            // insufficient voiced overlap on this row; averaged over the rest
        }
        diag_sum += align_features(model.frontend().from_wav(src),
                                   model.frontend().from_wav(conv))
                        .diagonal_fraction;
        if (!row.speaker_id.empty()) {
            if (!label_ids.count(row.speaker_id))
                label_ids[row.speaker_id] = int(label_ids.size());
            labels.push_back(label_ids[row.speaker_id]);
            content_rows.push_back(content_embedding(model, src));
        }
        ++n_rows;
    }
    require(n_rows > 0, "no evaluable rows (need wav_path, ref_path and a converted file)");
    require(n_pcc > 0, "insufficient voiced overlap on every row");

    MetricReport rep;
    rep.secs = secs_sum / n_rows;
    rep.f0_pcc = pcc_sum / n_pcc;
    rep.diagonal_fraction = diag_sum / n_rows;

    require(labels.size() == size_t(n_rows),
            "clustering probes need speaker_id on every evaluated row");
    Mat emb(long(content_rows.size()), content_rows.front().cols());
    for (size_t i = 0; i < content_rows.size(); ++i) emb.row(long(i)) = content_rows[i];
    const auto& ecfg = model.config().eval;
    ClusterProbes probes = clustering_probes(emb, labels, int(label_ids.size()),
                                             ecfg.kmeans_seed, ecfg.kmeans_restarts);
    rep.ari = probes.ari;
    rep.nmi = probes.nmi;
    rep.silhouette = probes.silhouette;

    rep.b_mos = b_mos(mos, smos);
    rep.manifest_hash = hex64(manifest_hash(manifest));
    const auto& meta = converter.meta();
    rep.checkpoint_id =
        hex64(meta.config_hash) + "-" + meta.phase + "-" + std::to_string(meta.step);
    rep.seed = model.config().seed;
    rep.require_finite();
    return rep;
}

}  // namespace pairvc::eval
