#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "greedytrap/analysis.hpp"
#include "greedytrap/continuum.hpp"
#include "greedytrap/core.hpp"
#include "greedytrap/dmso.hpp"
#include "greedytrap/experiments.hpp"
#include "greedytrap/greedy.hpp"
#include "greedytrap/instance_io.hpp"

namespace py = pybind11;
namespace gt = greedytrap;

namespace {

std::vector<std::vector<double>> rows_of(const gt::RewardTable& f) {
  std::vector<std::vector<double>> out;
  for (std::size_t x = 0; x < f.contexts(); ++x) out.emplace_back(f.row(x).begin(), f.row(x).end());
  return out;
}

gt::ProblemInstance make_instance(const std::vector<std::vector<std::vector<double>>>& members, std::size_t true_index,
                                  double sigma, std::vector<double> context_probs, std::size_t warmup_per_pair,
                                  bool bounded) {
  std::vector<gt::RewardTable> tables;
  for (const auto& m : members) tables.push_back(gt::RewardTable::from_rows(m));
  const std::size_t X = tables.front().contexts(), K = tables.front().arms();
  return gt::ProblemInstance(gt::FunctionClass(std::move(tables)), true_index, sigma, std::move(context_probs),
                             gt::uniform_warmup(X, K, warmup_per_pair), bounded);
}

bool has_ties(const gt::ProblemInstance& inst) {
  for (const auto& f : inst.function_class().members())
    for (const auto& s : gt::optimal_arm_sets(f))
      if (s.size() > 1) return true;
  return false;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Greedy self-identifiability toolkit";
  m.attr("__version__") = GREEDYTRAP_VERSION;

  py::register_exception<gt::PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<gt::ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<gt::TieError>(m, "TieError", PyExc_RuntimeError);
  py::register_exception<gt::SchemaError>(m, "SchemaError", PyExc_ValueError);

  py::class_<gt::RewardTable>(m, "RewardTable")
      .def(py::init([](const std::vector<std::vector<double>>& rows) { return gt::RewardTable::from_rows(rows); }),
           py::arg("rows"))
      .def_static("mab", &gt::RewardTable::mab, py::arg("values"))
      .def_property_readonly("contexts", &gt::RewardTable::contexts)
      .def_property_readonly("arms", &gt::RewardTable::arms)
      .def("rows", &rows_of)
      .def("__call__", [](const gt::RewardTable& f, std::size_t x, std::size_t a) { return f(x, a); })
      .def("__eq__", [](const gt::RewardTable& a, const gt::RewardTable& b) { return a == b; });

  py::class_<gt::ProblemInstance>(m, "ProblemInstance")
      .def(py::init(&make_instance), py::arg("members"), py::arg("true_index"), py::arg("sigma"),
           py::arg("context_probs") = std::vector<double>{}, py::arg("warmup_per_pair") = 1,
           py::arg("bounded_rewards") = true)
      .def_property_readonly("contexts", &gt::ProblemInstance::contexts)
      .def_property_readonly("arms", &gt::ProblemInstance::arms)
      .def_property_readonly("sigma", &gt::ProblemInstance::sigma)
      .def_property_readonly("true_index", &gt::ProblemInstance::true_index)
      .def_property_readonly("warmup_total", &gt::ProblemInstance::warmup_total)
      .def_property_readonly("truth", [](const gt::ProblemInstance& i) { return i.truth(); })
      .def_property_readonly("members", [](const gt::ProblemInstance& i) { return i.function_class().members(); })
      .def_readwrite("decoy_hint", &gt::ProblemInstance::decoy_hint)
      .def("with_sigma", &gt::ProblemInstance::with_sigma);

  py::class_<gt::DecoyCertificate>(m, "DecoyCertificate")
      .def_readonly("member", &gt::DecoyCertificate::member)
      .def_readonly("decoy", &gt::DecoyCertificate::decoy)
      .def_property_readonly("decoy_policy", [](const gt::DecoyCertificate& c) { return c.decoy_policy.arms; })
      .def_readonly("optimal_sets", &gt::DecoyCertificate::optimal_sets)
      .def_readonly("decoy_gap", &gt::DecoyCertificate::decoy_gap)
      .def_readonly("regret_per_round", &gt::DecoyCertificate::regret_per_round);

  m.def("function_gap", [](const gt::ProblemInstance& i) { return gt::function_gap(i.truth(), i.function_class()).gap; },
        "Function gap of the true member (inf for a singleton class).");
  m.def(
      "is_self_identifiable",
      [](const gt::ProblemInstance& i) {
        return gt::is_self_identifiable(i, has_ties(i) ? gt::TieHandling::Ties : gt::TieHandling::Strict)
            .self_identifiable;
      },
      py::arg("instance"));
  m.def(
      "find_decoys",
      [](const gt::ProblemInstance& i) { return has_ties(i) ? gt::find_decoys_with_ties(i) : gt::find_decoys(i); },
      py::arg("instance"));
  m.def("verify_certificate",
        [](const gt::ProblemInstance& i, const gt::DecoyCertificate& c) {
          return gt::verify_certificate(i, c, has_ties(i) ? gt::TieHandling::Ties : gt::TieHandling::Strict);
        });

  py::class_<gt::TieMode>(m, "TieMode")
      .def_static("strict", &gt::TieMode::strict)
      .def_static("randomized", &gt::TieMode::randomized, py::arg("q0"))
      .def_readonly("q0", &gt::TieMode::q0);

  py::class_<gt::ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("horizon", &gt::ExperimentConfig::horizon)
      .def_readwrite("trials", &gt::ExperimentConfig::trials)
      .def_readwrite("master_seed", &gt::ExperimentConfig::master_seed)
      .def_readwrite("tie_mode", &gt::ExperimentConfig::tie_mode)
      .def_readwrite("force_e1", &gt::ExperimentConfig::force_e1)
      .def_readwrite("threads", &gt::ExperimentConfig::threads)
      .def_readwrite("keep_curve", &gt::ExperimentConfig::keep_curve)
      .def_readwrite("checkpoints", &gt::ExperimentConfig::checkpoints);

  py::class_<gt::WilsonInterval>(m, "WilsonInterval")
      .def_readonly("lo", &gt::WilsonInterval::lo)
      .def_readonly("hi", &gt::WilsonInterval::hi);

  py::class_<gt::StuckEstimate>(m, "StuckEstimate")
      .def_readonly("p_hat", &gt::StuckEstimate::p_hat)
      .def_readonly("ci", &gt::StuckEstimate::ci)
      .def_readonly("trials", &gt::StuckEstimate::trials)
      .def_readonly("stuck", &gt::StuckEstimate::stuck)
      .def_readonly("e1e2_trials", &gt::StuckEstimate::e1e2_trials)
      .def_readonly("e1e2_stuck", &gt::StuckEstimate::e1e2_stuck)
      .def_readonly("conditional_check", &gt::StuckEstimate::conditional_check);

  py::class_<gt::TrialRecord>(m, "TrialRecord")
      .def_readonly("trial", &gt::TrialRecord::trial)
      .def_readonly("stuck", &gt::TrialRecord::stuck)
      .def_readonly("e1", &gt::TrialRecord::e1)
      .def_readonly("e2_through", &gt::TrialRecord::e2_through)
      .def_readonly("first_deviation", &gt::TrialRecord::first_deviation)
      .def_readonly("final_regret", &gt::TrialRecord::final_regret)
      .def_readonly("suboptimal_pulls", &gt::TrialRecord::suboptimal_pulls);

  py::class_<gt::ExperimentResult>(m, "ExperimentResult")
      .def_readonly("trials", &gt::ExperimentResult::trials)
      .def_property_readonly("mean_regret", [](const gt::ExperimentResult& r) { return r.curve.mean; })
      .def_property_readonly("stderr_regret", [](const gt::ExperimentResult& r) { return r.curve.stderr_; })
      .def_readonly("stuck", &gt::ExperimentResult::stuck)
      .def_readonly("warmup_rounds", &gt::ExperimentResult::warmup_rounds)
      .def_readonly("invariant_violations", &gt::ExperimentResult::invariant_violations);

  py::class_<gt::GrowthFit>(m, "GrowthFit")
      .def_readonly("r2_log", &gt::GrowthFit::r2_log)
      .def_readonly("r2_linear", &gt::GrowthFit::r2_linear)
      .def_readonly("ratio", &gt::GrowthFit::ratio)
      .def_readonly("sublinear", &gt::GrowthFit::sublinear);

  m.def("estimate_stuck_probability", &gt::estimate_stuck_probability, py::arg("instance"), py::arg("decoy"),
        py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "run_greedy",
      [](const gt::ProblemInstance& i, const gt::ExperimentConfig& c) { return gt::run_greedy_experiment(i, nullptr, c); },
      py::arg("instance"), py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("info_aware_baseline", &gt::info_aware_baseline, py::arg("instance"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("fit_growth", &gt::fit_growth, py::arg("curve"), py::arg("warmup_rounds"));
  m.def("wilson_interval", &gt::wilson_interval, py::arg("successes"), py::arg("trials"), py::arg("z") = 1.959964);
  m.def("e2_sigma", &gt::e2_sigma, py::arg("radius"), py::arg("pairs") = 1, py::arg("budget") = 0.1);
  m.def("beta", &gt::beta, py::arg("n"), py::arg("arms"), py::arg("contexts"), py::arg("delta"));
  m.def("kl_divergence", &gt::kl_divergence, py::arg("p"), py::arg("q"));

  m.def("fixture_mab_failure", [] {
    auto f = gt::fixture_mab_failure();
    return py::make_tuple(f.instance, f.decoy);
  });
  m.def("fixture_mab_success", [] { return gt::fixture_mab_success().instance; });

  m.def(
      "load_finite_instance",
      [](const std::string& path) {
        auto f = gt::load_instance(path);
        if (!f.finite) throw gt::PreconditionError("not a mab/cb instance");
        return *f.finite;
      },
      py::arg("path"));
  m.def(
      "roundtrip_instance_text",
      [](const std::string& text) { return gt::serialize_instance(gt::parse_instance_text(text)); },
      py::arg("text"), "Parse an instance document and serialize it again.");
}
