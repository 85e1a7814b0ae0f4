#include "moralscope/corpus.hpp"
#include "moralscope/embeddings.hpp"
#include "moralscope/pipeline.hpp"
#include "moralscope/stats.hpp"
#include "moralscope/text.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace moralscope;

namespace {

py::array_t<float> as_array(std::span<const float> data, std::size_t rows, std::size_t cols) {
  py::array_t<float> out({rows, cols});
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

py::dict load_embeddings(const std::filesystem::path& path) {
  const auto f = embed::read_embedding_file(path);
  py::dict out;
  out["version"] = f.version;
  out["dim"] = f.dim;
  if (f.kind == embed::EmbeddingKind::kStatic) {
    out["kind"] = "static";
    const auto& t = f.table;
    py::array_t<float> vecs({t.size(), static_cast<std::size_t>(t.dim())});
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto row = t.row(i);
      std::copy(row.begin(), row.end(), vecs.mutable_data() + i * t.dim());
    }
    out["words"] = t.words();
    out["vectors"] = vecs;
  } else {
    out["kind"] = "contextual";
    py::dict records;
    for (const auto& r : f.contextual.records) {
      records[py::str(r.instance_id)] = as_array(r.data, r.token_count, f.dim);
    }
    out["records"] = records;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "moralscope native core";

  py::register_exception<embed::EmbeddingFormatError>(m, "EmbeddingFormatError", PyExc_ValueError);
  py::register_exception<stats::RankDeficientError>(m, "RankDeficientError", PyExc_ValueError);

  m.def("tokenize", [](const std::string& s) { return text::tokenize(s); });
  m.def(
      "extract_verdict",
      [](const std::string& body) -> std::optional<std::string> {
        const auto v = corpus::extract_verdict(body);
        if (!v) return std::nullopt;
        return std::string(corpus::to_string(*v));
      },
      py::arg("body"), "Verdict code (YTA, NTA, ESH, NAH, INFO) of a comment, or None.");

  py::class_<stats::OddsRatio>(m, "OddsRatio")
      .def_readonly("odds_ratio", &stats::OddsRatio::odds_ratio)
      .def_readonly("log_se", &stats::OddsRatio::log_se)
      .def_readonly("z", &stats::OddsRatio::z)
      .def_readonly("p_value", &stats::OddsRatio::p_value)
      .def_readonly("corrected", &stats::OddsRatio::corrected);
  m.def(
      "odds_ratio",
      [](std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
        return stats::odds_ratio({a, b, c, d});
      },
      py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"));

  py::class_<stats::RegressionResult>(m, "RegressionResult")
      .def_readonly("names", &stats::RegressionResult::names)
      .def_readonly("beta", &stats::RegressionResult::beta)
      .def_readonly("stderr", &stats::RegressionResult::stderr_)
      .def_readonly("t_stats", &stats::RegressionResult::t_stats)
      .def_readonly("p_values", &stats::RegressionResult::p_values)
      .def_readonly("sigma2", &stats::RegressionResult::sigma2)
      .def_readonly("n", &stats::RegressionResult::n);
  m.def("ols_fit", &stats::ols_fit, py::arg("X"), py::arg("y"), py::arg("names") = std::vector<std::string>{});
  m.def("p_band", &stats::p_band);

  m.def("load_embeddings", &load_embeddings, py::arg("path"));

  m.def("stages", &pipeline::stages);
  m.def(
      "run",
      [](const std::string& stage, const std::filesystem::path& config) {
        py::gil_scoped_release release;
        return pipeline::run(stage, config);
      },
      py::arg("stage"), py::arg("config"), "Runs one stage (or \"all\"); returns the CLI exit code.");
}
