#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mltsf/ctc.hpp"
#include "mltsf/encoder.hpp"
#include "mltsf/feature_io.hpp"
#include "mltsf/metrics.hpp"
#include "mltsf/mltsf.hpp"
#include "mltsf/synth.hpp"
#include "mltsf/train.hpp"

namespace py = pybind11;
using namespace mltsf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
  const auto r = a.unchecked<2>();
  std::vector<double> v(a.data(), a.data() + a.size());
  return Tensor::from({static_cast<std::size_t>(r.shape(0)), static_cast<std::size_t>(r.shape(1))}, std::move(v));
}

FeatureSequence to_features(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("features must be T x C'");
  return FeatureSequence(a.shape(0), a.shape(1), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(std::span<const double> v, std::size_t rows, std::size_t cols) {
  Array out({rows, cols});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

SelectorMode parse_mode(const std::string& m) {
  if (m == "local") return SelectorMode::kLocalTopK;
  if (m == "center") return SelectorMode::kCenter;
  if (m == "global") return SelectorMode::kGlobal;
  throw py::value_error("mode must be local, center or global");
}

py::dict report_dict(const WerReport& r) {
  py::dict d;
  d["wer"] = r.wer;
  d["del_rate"] = r.del_rate;
  d["ins_rate"] = r.ins_rate;
  d["sub_rate"] = r.sub_rate;
  d["sentences"] = r.sentences;
  d["ref_len"] = r.stats.ref_len;
  return d;
}

}  // namespace

PYBIND11_MODULE(_mltsf, m) {
  m.doc() = "Multi-scale local-temporal similarity fusion for continuous sign recognition";

  static py::exception<Error> base(m, "MltsfError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  py::class_<EditStats>(m, "EditStats")
      .def(py::init<>())
      .def_readwrite("substitutions", &EditStats::substitutions)
      .def_readwrite("deletions", &EditStats::deletions)
      .def_readwrite("insertions", &EditStats::insertions)
      .def_readwrite("ref_len", &EditStats::ref_len)
      .def("total", &EditStats::total)
      .def("__repr__", [](const EditStats& s) {
        return "EditStats(sub=" + std::to_string(s.substitutions) + ", del=" + std::to_string(s.deletions) +
               ", ins=" + std::to_string(s.insertions) + ", ref_len=" + std::to_string(s.ref_len) + ")";
      });

  m.def("edit_stats", [](const GlossSequence& ref, const GlossSequence& hyp) { return edit_stats(ref, hyp); },
        py::arg("reference"), py::arg("hypothesis"));
  m.def("wer", &wer, py::arg("stats"));

  m.def("collapse", [](const AlignmentPath& p) { return collapse(p); }, py::arg("path"));
  m.def("greedy_decode", [](const Array& logits) { return greedy_decode(to_tensor(logits)); }, py::arg("logits"));
  m.def(
      "ctc_nll",
      [](const Array& logits, const GlossSequence& labels) {
        Tensor z = to_tensor(logits);
        z.set_requires_grad(true);
        const Tensor loss = ctc_nll(z, labels);
        loss.backward();
        return py::make_tuple(loss.item(), to_array(z.grad(), z.dim(0), z.dim(1)));
      },
      py::arg("logits"), py::arg("labels"), "Loss and its gradient with respect to the logits.");

  m.def(
      "similarity_matrix",
      [](const Array& features) {
        const SimilarityMatrix d = similarity_matrix(to_features(features));
        return to_array(d.values, d.size, d.size);
      },
      py::arg("features"));
  m.def(
      "select_neighbors",
      [](const std::vector<double>& scores, std::size_t t, std::size_t k, const std::string& mode) {
        return select_neighbors(scores, t, k, parse_mode(mode)).indices;
      },
      py::arg("scores"), py::arg("t"), py::arg("k"), py::arg("mode") = "local");
  m.def("level1_receptive_field", &level1_receptive_field, py::arg("filter"));

  m.def(
      "synth_sample",
      [](std::size_t num_glosses, std::uint64_t seed, std::size_t vocab_size, std::size_t channels, double sigma) {
        SynthConfig c;
        c.vocab_size = vocab_size;
        c.channels = channels;
        c.sigma = sigma;
        const LabeledSample s = synth_sample(c, num_glosses, seed);
        return py::make_tuple(to_array(s.features.values, s.features.frames, s.features.channels), s.labels);
      },
      py::arg("num_glosses"), py::arg("seed"), py::arg("vocab_size") = 13, py::arg("channels") = 16,
      py::arg("sigma") = 0.3);
  m.def(
      "temporal_rescale",
      [](const Array& features, double factor) {
        const FeatureSequence out = temporal_rescale(to_features(features), factor);
        return to_array(out.values, out.frames, out.channels);
      },
      py::arg("features"), py::arg("factor"));
  m.def(
      "write_features",
      [](const std::filesystem::path& path, const Array& features, const GlossSequence& labels) {
        write_features(path, LabeledSample{to_features(features), labels, 0});
      },
      py::arg("path"), py::arg("features"), py::arg("labels"));
  m.def(
      "read_features",
      [](const std::filesystem::path& path, std::size_t vocab_size) {
        const LabeledSample s = read_features(path, vocab_size);
        return py::make_tuple(to_array(s.features.values, s.features.frames, s.features.channels), s.labels);
      },
      py::arg("path"), py::arg("vocab_size"));

  m.def(
      "train",
      [](const std::filesystem::path& config, const std::filesystem::path& data_dir,
         const std::filesystem::path& out) {
        const TrainConfig c = load_config(config);
        const Dataset train_set = load_dataset(data_dir, "train");
        Dataset dev_set;
        if (std::filesystem::is_directory(data_dir / "dev")) dev_set = load_dataset(data_dir, "dev");
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(c, train_set, dev_set);
        }
        save_checkpoint(out, r.checkpoint);
        std::vector<double> losses;
        for (const auto& e : r.trace) losses.push_back(e.mean_loss);
        return losses;
      },
      py::arg("config"), py::arg("data_dir"), py::arg("out"), "Trains and writes a checkpoint; returns epoch losses.");
  m.def(
      "synthesize",
      [](const std::filesystem::path& config, std::size_t n, const std::filesystem::path& out) {
        TrainConfig c = load_config(config);
        c.train_samples = n;
        const SyntheticSplits s = make_synthetic_splits(c);
        write_dataset(out, "train", s.train);
        write_dataset(out, "dev", s.dev);
      },
      py::arg("config"), py::arg("n"), py::arg("out"));
  m.def(
      "evaluate",
      [](const std::filesystem::path& ckpt, const std::filesystem::path& data_dir, const std::string& split) {
        return report_dict(evaluate(load_checkpoint(ckpt), load_dataset(data_dir, split)));
      },
      py::arg("ckpt"), py::arg("data_dir"), py::arg("split") = "dev");
  m.def(
      "decode",
      [](const std::filesystem::path& ckpt, const Array& features) {
        const Checkpoint c = load_checkpoint(ckpt);
        return Model(c.config.model, c.params).decode(to_features(features));
      },
      py::arg("ckpt"), py::arg("features"));
  m.def(
      "gradcheck",
      [](const std::filesystem::path& config, double eps) {
        GradReport r;
        {
          py::gil_scoped_release release;
          r = model_gradcheck(load_config(config), eps);
        }
        py::dict d;
        d["passed"] = r.passed;
        d["global_max"] = r.global_max;
        d["worst_param"] = r.worst_param;
        py::dict per;
        for (const auto& [name, e] : r.per_param) per[py::str(name)] = e.max_rel_error;
        d["per_param"] = per;
        return d;
      },
      py::arg("config"), py::arg("eps") = 1e-4);
}
