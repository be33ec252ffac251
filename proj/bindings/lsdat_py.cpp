// Python bindings for the lsdat core. One flat module, re-exported by the
// lsdat package; ImageTensor converts to and from numpy (H, W, C) arrays.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <vector>

#include "lsdat/attack.hpp"
#include "lsdat/constraints.hpp"
#include "lsdat/dictionary.hpp"
#include "lsdat/errors.hpp"
#include "lsdat/harness.hpp"
#include "lsdat/image.hpp"
#include "lsdat/oracle.hpp"
#include "lsdat/rpca.hpp"

namespace py = pybind11;

namespace lsdat {
namespace {

ImageTensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2 && arr.ndim() != 3) {
    throw ConfigError("image array must have shape (H, W) or (H, W, C)");
  }
  const int h = static_cast<int>(arr.shape(0));
  const int w = static_cast<int>(arr.shape(1));
  const int c = arr.ndim() == 3 ? static_cast<int>(arr.shape(2)) : 1;
  ImageTensor out(h, w, c);
  std::copy(arr.data(), arr.data() + out.size(), out.data.begin());
  return out;
}

py::array_t<double> tensor_to_array(const ImageTensor& img) {
  py::array_t<double> arr({img.height, img.width, img.channels});
  std::copy(img.data.begin(), img.data.end(), arr.mutable_data());
  return arr;
}

// Lets Python classes implement the oracle interface directly.
class PyOracle : public Oracle {
 public:
  using Oracle::Oracle;

  int class_count() const override {
    PYBIND11_OVERRIDE_PURE(int, Oracle, class_count);
  }

 protected:
  Label classify(const ImageTensor& img) override {
    PYBIND11_OVERRIDE_PURE(Label, Oracle, classify, img);
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Low-rank/sparse decision-based attack core";

  // Exception translators run newest-first, so bases go in before their
  // derived classes.
  const auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  const auto oracle_error = py::register_exception<OracleError>(m, "OracleError", PyExc_RuntimeError);
  py::register_exception<OracleTransportError>(m, "OracleTransportError", oracle_error.ptr());
  py::register_exception<ReplayError>(m, "ReplayError", oracle_error.ptr());
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  // ---- images ----

  py::class_<ImageTensor>(m, "ImageTensor")
      .def(py::init(&tensor_from_array), py::arg("array"))
      .def(py::init<int, int, int, double>(), py::arg("height"), py::arg("width"),
           py::arg("channels"), py::arg("fill") = 0.0)
      .def_static("zeros", &ImageTensor::zeros, py::arg("height"), py::arg("width"),
                  py::arg("channels"))
      .def_static("constant", &ImageTensor::constant, py::arg("height"), py::arg("width"),
                  py::arg("channels"), py::arg("value"))
      .def_readonly("height", &ImageTensor::height)
      .def_readonly("width", &ImageTensor::width)
      .def_readonly("channels", &ImageTensor::channels)
      .def("numpy", &tensor_to_array)
      .def("__array__", [](const ImageTensor& t, py::args, const py::kwargs&) {
        return tensor_to_array(t);
      })
      .def("all_finite", &ImageTensor::all_finite)
      .def("validate", &ImageTensor::validate)
      .def(py::self == py::self)
      .def(py::self + py::self)
      .def(py::self - py::self)
      .def("__rmul__", [](const ImageTensor& t, double s) { return s * t; })
      .def("__repr__", [](const ImageTensor& t) {
        return "ImageTensor(" + std::to_string(t.height) + "x" + std::to_string(t.width) +
               "x" + std::to_string(t.channels) + ")";
      });

  m.def("channel_matrix", &channel_matrix, py::arg("image"), py::arg("channel"));
  m.def("set_channel", &set_channel, py::arg("image"), py::arg("channel"), py::arg("matrix"));
  m.def("content_hash", &content_hash, py::arg("image"));

  // ---- constraints ----

  py::enum_<NormKind>(m, "NormKind")
      .value("L0", NormKind::L0)
      .value("L2", NormKind::L2)
      .value("Linf", NormKind::Linf);

  py::class_<L0Budget>(m, "L0Budget")
      .def(py::init<std::size_t>(), py::arg("k"))
      .def_readwrite("k", &L0Budget::k);
  py::class_<L2Budget>(m, "L2Budget")
      .def(py::init<double>(), py::arg("epsilon"))
      .def_readwrite("epsilon", &L2Budget::epsilon);
  py::class_<LinfBudget>(m, "LinfBudget")
      .def(py::init<double>(), py::arg("sigma"))
      .def_readwrite("sigma", &LinfBudget::sigma);

  m.attr("DEFAULT_SUPPORT_EPS") = kDefaultSupportEps;

  m.def("norm_kind", &norm_kind, py::arg("constraint"));
  m.def("budget_value", &budget_value, py::arg("constraint"));
  m.def("validate_constraint", [](const PerturbationConstraint& c) { validate(c); },
        py::arg("constraint"));
  m.def("project_l0", &project_l0, py::arg("delta"), py::arg("k"));
  m.def("project_l2", &project_l2, py::arg("delta"), py::arg("epsilon"));
  m.def("project_linf", &project_linf, py::arg("delta"), py::arg("sigma"));
  m.def("project", &project, py::arg("delta"), py::arg("constraint"));
  m.def("measure", &measure, py::arg("delta"), py::arg("norm"),
        py::arg("support_eps") = kDefaultSupportEps);

  // ---- rpca ----

  py::class_<RpcaConfig>(m, "RpcaConfig")
      .def(py::init<>())
      .def_readwrite("lambda_", &RpcaConfig::lambda)
      .def_readwrite("tolerance", &RpcaConfig::tolerance)
      .def_readwrite("max_iterations", &RpcaConfig::max_iterations)
      .def_readwrite("support_eps", &RpcaConfig::support_eps)
      .def_readwrite("sparsity_cap", &RpcaConfig::sparsity_cap)
      .def("lambda_for", &RpcaConfig::lambda_for, py::arg("rows"), py::arg("cols"))
      .def("validate", &RpcaConfig::validate)
      .def(py::self == py::self);

  py::class_<LSDPair>(m, "LSDPair")
      .def_readonly("low_rank", &LSDPair::low_rank)
      .def_readonly("sparse", &LSDPair::sparse);

  py::class_<RpcaResult>(m, "RpcaResult")
      .def_readonly("pair", &RpcaResult::pair)
      .def_readonly("converged", &RpcaResult::converged)
      .def_readonly("iterations", &RpcaResult::iterations)
      .def_readonly("residual", &RpcaResult::residual)
      .def_readonly("sparse_fraction", &RpcaResult::sparse_fraction);

  py::class_<ImageLsd>(m, "ImageLsd")
      .def_readonly("height", &ImageLsd::height)
      .def_readonly("width", &ImageLsd::width)
      .def_readonly("channels", &ImageLsd::channels)
      .def("low_rank_image", &ImageLsd::low_rank_image)
      .def("sparse_image", &ImageLsd::sparse_image)
      .def("all_converged", &ImageLsd::all_converged);

  m.def("singular_value_threshold", &singular_value_threshold, py::arg("matrix"), py::arg("tau"));
  m.def("soft_threshold", &soft_threshold, py::arg("matrix"), py::arg("tau"));
  m.def("decompose", &decompose, py::arg("matrix"), py::arg("config") = RpcaConfig{},
        py::call_guard<py::gil_scoped_release>());
  m.def("decompose_image", &decompose_image, py::arg("image"), py::arg("config") = RpcaConfig{},
        py::call_guard<py::gil_scoped_release>());

  // ---- oracles ----

  py::class_<QueryCounter>(m, "QueryCounter")
      .def_readonly("total", &QueryCounter::total)
      .def_readonly("per_attack", &QueryCounter::per_attack);

  py::class_<Oracle, PyOracle>(m, "Oracle")
      .def(py::init<>())
      .def("query", &Oracle::query, py::arg("image"))
      .def("reset_counter", &Oracle::reset_counter)
      .def("read_counter", &Oracle::read_counter)
      .def("class_count", &Oracle::class_count);

  py::class_<LinearOracle, Oracle>(m, "LinearOracle")
      .def(py::init<std::vector<std::vector<double>>, std::vector<double>>(),
           py::arg("weights"), py::arg("biases"));

  py::class_<CentroidOracle, Oracle>(m, "CentroidOracle")
      .def(py::init<std::vector<ImageTensor>>(), py::arg("centroids"));

  py::class_<RemoteConfig>(m, "RemoteConfig")
      .def(py::init<>())
      .def_readwrite("url", &RemoteConfig::url)
      .def_readwrite("timeout_ms", &RemoteConfig::timeout_ms)
      .def_readwrite("retries", &RemoteConfig::retries)
      .def_readwrite("class_count", &RemoteConfig::class_count);

  py::class_<RemoteOracle, Oracle>(m, "RemoteOracle")
      .def(py::init<RemoteConfig>(), py::arg("config"));

  py::class_<ReplayEntry>(m, "ReplayEntry")
      .def(py::init<>())
      .def_readwrite("image_hash", &ReplayEntry::image_hash)
      .def_readwrite("label", &ReplayEntry::label);

  py::class_<ReplayOracle, Oracle>(m, "ReplayOracle")
      .def(py::init<std::vector<ReplayEntry>, int>(), py::arg("trace"), py::arg("class_count"))
      .def("position", &ReplayOracle::position);

  py::class_<RecordingOracle, Oracle>(m, "RecordingOracle")
      .def(py::init<Oracle&>(), py::arg("inner"), py::keep_alive<1, 2>())
      .def("trace", &RecordingOracle::trace);

  m.def("save_trace", &save_trace, py::arg("path"), py::arg("trace"), py::arg("class_count"));
  m.def("load_replay_oracle", &load_replay_oracle, py::arg("path"));

  // ---- attack ----

  py::class_<AttackParams>(m, "AttackParams")
      .def(py::init<>())
      .def_readwrite("alpha", &AttackParams::alpha)
      .def_readwrite("max_iter", &AttackParams::max_iter)
      .def_readwrite("constraint", &AttackParams::constraint)
      .def_readwrite("clip_pixels", &AttackParams::clip_pixels)
      .def("validate", &AttackParams::validate);

  py::class_<PerturbationNorms>(m, "PerturbationNorms")
      .def_readonly("l0", &PerturbationNorms::l0)
      .def_readonly("l2", &PerturbationNorms::l2)
      .def_readonly("linf", &PerturbationNorms::linf);

  py::class_<AttackOutcome>(m, "AttackOutcome")
      .def_readonly("success", &AttackOutcome::success)
      .def_readonly("perturbed", &AttackOutcome::perturbed)
      .def_readonly("queries_used", &AttackOutcome::queries_used)
      .def_readonly("achieved_norms", &AttackOutcome::achieved_norms)
      .def_readonly("norms_vs_input", &AttackOutcome::norms_vs_input)
      .def_readonly("initial_sample_id", &AttackOutcome::initial_sample_id)
      .def_readonly("unsuccessful_attempts", &AttackOutcome::unsuccessful_attempts)
      .def_readonly("lsd_warning", &AttackOutcome::lsd_warning)
      .def_readonly("error", &AttackOutcome::error);

  m.def("blend", &blend, py::arg("s_o"), py::arg("s_a"), py::arg("t"));
  m.def("clip_to_valid", &clip_to_valid, py::arg("image"));
  m.def("measure_norms", &measure_norms, py::arg("delta"),
        py::arg("support_eps") = kDefaultSupportEps);
  m.def("attack_single", &attack_single, py::arg("x_o"), py::arg("r"), py::arg("oracle"),
        py::arg("params"), py::arg("lsd_o"), py::arg("lsd_a"),
        py::arg("initial_sample_id") = std::string(),
        py::call_guard<py::gil_scoped_release>());

  py::class_<LsdCache>(m, "LsdCache")
      .def(py::init<RpcaConfig>(), py::arg("config") = RpcaConfig{})
      .def("get", [](LsdCache& cache, const ImageTensor& img) { return *cache.get(img); },
           py::arg("image"), py::call_guard<py::gil_scoped_release>())
      .def("compute_count", &LsdCache::compute_count)
      .def("size", &LsdCache::size)
      .def("config", &LsdCache::config);

  // ---- dictionary ----

  py::class_<DictionaryEntry>(m, "DictionaryEntry")
      .def_readonly("sample_id", &DictionaryEntry::sample_id)
      .def_readonly("label", &DictionaryEntry::label)
      .def_readonly("score", &DictionaryEntry::score)
      .def_readonly("first_used", &DictionaryEntry::first_used)
      .def_readonly("last_used", &DictionaryEntry::last_used);

  py::class_<CandidateRef>(m, "CandidateRef")
      .def_readonly("sample_id", &CandidateRef::sample_id)
      .def_readonly("label", &CandidateRef::label);

  py::class_<SamplePool>(m, "SamplePool");

  py::class_<HierarchicalDictionary>(m, "HierarchicalDictionary")
      .def(py::init<std::uint64_t, std::size_t>(), py::arg("rng_seed") = 0,
           py::arg("max_size") = 0)
      .def("next_candidates", &HierarchicalDictionary::next_candidates, py::arg("r"),
           py::arg("budget"), py::arg("pool"))
      .def("record_success", &HierarchicalDictionary::record_success, py::arg("sample_id"),
           py::arg("sample_label"), py::arg("target_class"))
      .def("top_global", &HierarchicalDictionary::top_global, py::arg("n"))
      .def("top_class", &HierarchicalDictionary::top_class, py::arg("r"), py::arg("n"))
      .def("global_size", &HierarchicalDictionary::global_size)
      .def("class_count", &HierarchicalDictionary::class_count)
      .def("check_invariants", &HierarchicalDictionary::check_invariants)
      .def("save", &HierarchicalDictionary::save, py::arg("path"))
      .def_static("load", &HierarchicalDictionary::load, py::arg("path"),
                  py::arg("rng_seed") = 0, py::arg("max_size") = 0)
      .def(py::self == py::self);

  // ---- harness ----

  py::class_<DatasetSample>(m, "DatasetSample")
      .def(py::init([](std::string sample_id, Label label, ImageTensor image) {
             return DatasetSample{std::move(sample_id), label, std::move(image)};
           }),
           py::arg("sample_id"), py::arg("label"), py::arg("image"))
      .def_readwrite("sample_id", &DatasetSample::sample_id)
      .def_readwrite("label", &DatasetSample::label)
      .def_readwrite("image", &DatasetSample::image);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("samples", &Dataset::samples)
      .def_readwrite("class_count", &Dataset::class_count);

  m.def("load_dataset", &load_dataset, py::arg("manifest_path"));
  m.def("make_oracle", &make_oracle, py::arg("descriptor"), py::arg("expected_class_count"));
  m.def("load_oracle_file", &load_oracle_file, py::arg("path"), py::arg("expected_class_count"));

  py::enum_<DictionaryMode>(m, "DictionaryMode")
      .value("Random", DictionaryMode::Random)
      .value("Dictionary", DictionaryMode::Dictionary);

  py::class_<CampaignConfig>(m, "CampaignConfig")
      .def(py::init<>())
      .def_readwrite("oracle_descriptor", &CampaignConfig::oracle_descriptor)
      .def_readwrite("constraint", &CampaignConfig::constraint)
      .def_readwrite("alpha", &CampaignConfig::alpha)
      .def_readwrite("max_iter", &CampaignConfig::max_iter)
      .def_readwrite("explore", &CampaignConfig::explore)
      .def_readwrite("mode", &CampaignConfig::mode)
      .def_readwrite("dictionary_path", &CampaignConfig::dictionary_path)
      .def_readwrite("seed", &CampaignConfig::seed)
      .def_readwrite("jobs", &CampaignConfig::jobs)
      .def_readwrite("verify_clean", &CampaignConfig::verify_clean)
      .def_readwrite("strict_errors", &CampaignConfig::strict_errors)
      .def_readwrite("clip_pixels", &CampaignConfig::clip_pixels)
      .def_readwrite("rpca", &CampaignConfig::rpca)
      .def("validate", &CampaignConfig::validate);

  py::class_<ReportRow>(m, "ReportRow")
      .def_readonly("sample_id", &ReportRow::sample_id)
      .def_readonly("success", &ReportRow::success)
      .def_readonly("queries", &ReportRow::queries)
      .def_readonly("j", &ReportRow::j)
      .def_readonly("norms", &ReportRow::norms)
      .def_readonly("norms_vs_input", &ReportRow::norms_vs_input)
      .def_readonly("initial_sample_id", &ReportRow::initial_sample_id)
      .def_readonly("lsd_warning", &ReportRow::lsd_warning)
      .def_readonly("error", &ReportRow::error);

  py::class_<NormStats>(m, "NormStats")
      .def_readonly("mean", &NormStats::mean)
      .def_readonly("max", &NormStats::max);

  py::class_<DictionaryStatsRow>(m, "DictionaryStatsRow")
      .def_readonly("sample_id", &DictionaryStatsRow::sample_id)
      .def_readonly("successes", &DictionaryStatsRow::successes)
      .def_readonly("mean_queries", &DictionaryStatsRow::mean_queries)
      .def_readonly("share", &DictionaryStatsRow::share);

  py::class_<CampaignReport>(m, "CampaignReport")
      .def_readonly("oracle", &CampaignReport::oracle)
      .def_readonly("mode", &CampaignReport::mode)
      .def_readonly("norm", &CampaignReport::norm)
      .def_readonly("budget", &CampaignReport::budget)
      .def_readonly("alpha", &CampaignReport::alpha)
      .def_readonly("max_iter", &CampaignReport::max_iter)
      .def_readonly("explore", &CampaignReport::explore)
      .def_readonly("seed", &CampaignReport::seed)
      .def_readonly("dataset_size", &CampaignReport::dataset_size)
      .def_readonly("fooling_rate", &CampaignReport::fooling_rate)
      .def_readonly("average_queries", &CampaignReport::average_queries)
      .def_readonly("total_queries", &CampaignReport::total_queries)
      .def_readonly("clean_queries", &CampaignReport::clean_queries)
      .def_readonly("clean_removed", &CampaignReport::clean_removed)
      .def_readonly("l0_stats", &CampaignReport::l0_stats)
      .def_readonly("l2_stats", &CampaignReport::l2_stats)
      .def_readonly("linf_stats", &CampaignReport::linf_stats)
      .def_readonly("dictionary_top", &CampaignReport::dictionary_top)
      .def_readonly("rows", &CampaignReport::rows);

  m.def("run_campaign",
        py::overload_cast<const CampaignConfig&, const Dataset&, Oracle&>(&run_campaign),
        py::arg("config"), py::arg("dataset"), py::arg("oracle"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_campaign",
        py::overload_cast<const CampaignConfig&, const Dataset&, Oracle&, LsdCache&>(
            &run_campaign),
        py::arg("config"), py::arg("dataset"), py::arg("oracle"), py::arg("cache"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<DatasetPool, SamplePool>(m, "DatasetPool")
      .def(py::init<const Dataset&, std::uint64_t>(), py::arg("dataset"), py::arg("seed"),
           py::keep_alive<1, 2>())
      .def("draw", &DatasetPool::draw, py::arg("exclude_label"), py::arg("used"));

  py::class_<SweepRate>(m, "SweepRate")
      .def_readonly("rate_percent", &SweepRate::rate_percent)
      .def_readonly("k", &SweepRate::k)
      .def_readonly("report", &SweepRate::report);

  py::class_<SweepReport>(m, "SweepReport")
      .def_readonly("rates", &SweepReport::rates)
      .def_readonly("fr_non_decreasing", &SweepReport::fr_non_decreasing);

  m.def("sweep_l0", &sweep_l0, py::arg("config"), py::arg("dataset"), py::arg("oracle"),
        py::arg("rates_percent"), py::call_guard<py::gil_scoped_release>());

  py::enum_<ReportFormat>(m, "ReportFormat")
      .value("Csv", ReportFormat::Csv)
      .value("Json", ReportFormat::Json);

  m.def("report_format_from_string", &report_format_from_string, py::arg("s"));
  m.def("emit_report", &emit_report, py::arg("report"), py::arg("format"), py::arg("path"));
  m.def("load_report_json", &load_report_json, py::arg("path"));
  m.def("emit_sweep", &emit_sweep, py::arg("report"), py::arg("format"), py::arg("path"));
  m.def("dictionary_stats", &dictionary_stats, py::arg("report"));
}

}  // namespace lsdat
