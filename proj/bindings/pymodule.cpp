// Python surface. Thin translation layer only: numpy <-> Eigen/std::vector
// conversion plus keyword plumbing. Anything with behavior lives in the C++
// core and is tested there.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pairvc/audio/dsp.hpp"
#include "pairvc/audio/wav_io.hpp"
#include "pairvc/cli/commands.hpp"
#include "pairvc/cli/config.hpp"
#include "pairvc/cli/manifest.hpp"
#include "pairvc/eval/alignment.hpp"
#include "pairvc/eval/metrics.hpp"
#include "pairvc/infer/pipeline.hpp"
#include "pairvc/model/losses.hpp"
#include "pairvc/synth/generator.hpp"

namespace py = pybind11;
using namespace pairvc;

namespace {

audio::Waveform to_wave(const Eigen::VectorXd& samples, int sample_rate) {
    audio::Waveform w;
    w.sample_rate = sample_rate;
    w.samples.assign(samples.data(), samples.data() + samples.size());
    return w;
}

Eigen::VectorXd from_wave(const audio::Waveform& w) {
    return Eigen::Map<const Eigen::VectorXd>(w.samples.data(), long(w.samples.size()));
}

audio::F0Contour to_contour(const Eigen::VectorXd& hz, int hop, int sample_rate) {
    audio::F0Contour c;
    c.hop = hop;
    c.sample_rate = sample_rate;
    for (long i = 0; i < hz.size(); ++i) {
        c.hz.push_back(hz[i]);
        c.voiced.push_back(hz[i] > 0.0 ? 1 : 0);
    }
    return c;
}

}  // namespace

PYBIND11_MODULE(_pairvc, m) {
    m.doc() = "voice conversion on paired synthetic speech";

    py::class_<cli::RunConfig>(m, "RunConfig")
        .def_static("load", &cli::load_config, py::arg("path"))
        .def_static("from_json", &cli::config_from_json_string, py::arg("text"))
        .def("to_json", &cli::RunConfig::to_json_string)
        .def("hash", &cli::RunConfig::hash)
        .def_property_readonly("sample_rate",
                               [](const cli::RunConfig& c) { return c.audio.sample_rate; })
        .def_property_readonly("hop", [](const cli::RunConfig& c) { return c.audio.hop; })
        .def_property_readonly("n_speakers",
                               [](const cli::RunConfig& c) { return c.synth.n_speakers; });

    m.def("read_wav", [](const std::string& path) {
        audio::Waveform w = audio::read_wav(path);
        return py::make_tuple(from_wave(w), w.sample_rate);
    });
    m.def(
        "write_wav",
        [](const std::string& path, const Eigen::VectorXd& samples, int sample_rate) {
            audio::write_wav(path, to_wave(samples, sample_rate));
        },
        py::arg("path"), py::arg("samples"), py::arg("sample_rate"));

    m.def(
        "compute_mel",
        [](const Eigen::VectorXd& samples, const cli::RunConfig& cfg) {
            return audio::compute_mel(to_wave(samples, cfg.audio.sample_rate), cfg.mel_config())
                .values;
        },
        py::arg("samples"), py::arg("config"));

    m.def(
        "extract_f0",
        [](const Eigen::VectorXd& samples, const cli::RunConfig& cfg) {
            auto c = audio::extract_f0(to_wave(samples, cfg.audio.sample_rate), cfg.f0_config());
            Eigen::VectorXd hz(c.frames());
            for (int i = 0; i < c.frames(); ++i)
                hz[i] = c.voiced[size_t(i)] ? c.hz[size_t(i)] : 0.0;
            return hz;
        },
        py::arg("samples"), py::arg("config"),
        "Per-frame F0 in Hz; 0 marks unvoiced frames.");

    m.def(
        "shift_f0",
        [](const Eigen::VectorXd& src, const Eigen::VectorXd& ref, int hop, int sample_rate) {
            auto out = audio::shift_f0(to_contour(src, hop, sample_rate),
                                       to_contour(ref, hop, sample_rate));
            Eigen::VectorXd hz(out.frames());
            for (int i = 0; i < out.frames(); ++i) hz[i] = out.hz[size_t(i)];
            return hz;
        },
        py::arg("source_hz"), py::arg("reference_hz"), py::arg("hop") = 256,
        py::arg("sample_rate") = 16000);

    m.def("kl_gaussians", &model::kl_gaussians, py::arg("mu1"), py::arg("sigma1"),
          py::arg("mu2"), py::arg("sigma2"));
    m.def("b_mos", &eval::b_mos, py::arg("mos"), py::arg("smos"));
    m.def(
        "f0_pcc",
        [](const Eigen::VectorXd& a, const Eigen::VectorXd& b, int hop, int sample_rate) {
            return eval::f0_pcc(to_contour(a, hop, sample_rate), to_contour(b, hop, sample_rate));
        },
        py::arg("a_hz"), py::arg("b_hz"), py::arg("hop") = 256, py::arg("sample_rate") = 16000);

    m.def(
        "align",
        [](const nn::Mat& a, const nn::Mat& b) {
            auto r = eval::align_features(a, b);
            return py::make_tuple(r.similarity, r.diagonal_fraction);
        },
        py::arg("features_a"), py::arg("features_b"));

    py::class_<synth::PairGenerator>(m, "PairGenerator")
        .def(py::init<const cli::RunConfig&>(), py::arg("config"))
        .def_property_readonly("n_speakers", &synth::PairGenerator::n_train_speakers)
        .def(
            "sample_text",
            [](const synth::PairGenerator& g, uint64_t seed) {
                Rng rng = make_rng(seed, "py-text");
                return g.sample_text(rng);
            },
            py::arg("seed"))
        .def(
            "generate_pair",
            [](const synth::PairGenerator& g, const std::vector<int>& text, int src, int tgt,
               uint64_t seed) {
                auto p = g.generate_pair(text, src, tgt, seed);
                return py::make_tuple(from_wave(p.source), from_wave(p.target));
            },
            py::arg("text"), py::arg("src"), py::arg("tgt"), py::arg("seed"))
        .def(
            "generate_single",
            [](const synth::PairGenerator& g, const std::vector<int>& text, int speaker,
               uint64_t seed) { return from_wave(g.generate_single(text, speaker, seed)); },
            py::arg("text"), py::arg("speaker"), py::arg("seed"));

    py::class_<infer::Converter>(m, "Converter")
        .def(py::init<const cli::RunConfig&, const std::string&, bool>(), py::arg("config"),
             py::arg("checkpoint"), py::arg("force") = false)
        .def(
            "convert",
            [](const infer::Converter& c, const Eigen::VectorXd& src, const Eigen::VectorXd& ref,
               int sample_rate, const std::string& eps, uint64_t seed) {
                infer::ConvertOptions opt;
                opt.eps_policy = eps;
                opt.seed = seed;
                auto r = c.convert(to_wave(src, sample_rate), to_wave(ref, sample_rate), opt);
                return py::make_tuple(from_wave(r.audio), r.warnings);
            },
            py::arg("source"), py::arg("reference"), py::arg("sample_rate") = 16000,
            py::arg("eps") = "zero", py::arg("seed") = 0)
        .def(
            "content_embedding",
            [](const infer::Converter& c, const Eigen::VectorXd& wav, int sample_rate) {
                return eval::content_embedding(c.vc(), to_wave(wav, sample_rate));
            },
            py::arg("samples"), py::arg("sample_rate") = 16000);

    m.def("run_cli", [](const std::vector<std::string>& args) {
        std::vector<std::string> full = args;
        full.insert(full.begin(), "pairvc");
        std::vector<char*> argv;
        for (auto& s : full) argv.push_back(s.data());
        return cli::run_cli(int(argv.size()), argv.data());
    });
}
