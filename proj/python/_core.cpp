#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "tnma/app.hpp"
#include "tnma/error.hpp"
#include "tnma/kernels.hpp"
#include "tnma/model.hpp"

namespace py = pybind11;
using namespace tnma;

namespace {

SamplerConfig sampler_config(std::size_t chains, std::size_t iters, std::size_t burnin, std::size_t thin,
                             std::uint64_t seed, const std::string& effect_update) {
  SamplerConfig s;
  s.n_chains = chains;
  s.n_iter = iters;
  s.burn_in = burnin;
  s.thin = thin;
  s.seed = seed;
  if (effect_update == "gibbs")
    s.effect_update = EffectUpdate::Gibbs;
  else if (effect_update == "random-walk")
    s.effect_update = EffectUpdate::RandomWalk;
  else
    throw UsageError("effect_update must be 'gibbs' or 'random-walk', got '" + effect_update + "'");
  return s;
}

ModelKind model_kind(const std::string& name) {
  const auto k = parse_model_kind(name);
  if (!k) throw UsageError("unknown model '" + name + "' (expected bnma, meta or tbnma)");
  return *k;
}

Scenario scenario_named(const std::string& name) {
  for (const auto& s : default_scenarios())
    if (s.name == name) return s;
  throw UsageError("unknown scenario '" + name + "' (expected constant, quadratic or sigmoid)");
}

py::dict network_dict(const Dataset& d) {
  py::dict out;
  out["studies"] = d.study_count();
  out["treatments"] = std::vector<std::string>(d.labels().begin(), d.labels().end());
  out["arms"] = d.arm_count();
  out["baseline"] = d.label(d.baseline());
  out["time_origin"] = d.time_origin();
  out["time_scale"] = d.time_scale();
  py::dict occ;
  for (std::size_t k = 0; k < d.treatment_count(); ++k)
    occ[py::str(d.label(TreatmentId{k}))] = d.summary().occurrences[k];
  out["occurrences"] = occ;
  py::list pairs;
  for (std::size_t a = 0; a < d.treatment_count(); ++a)
    for (std::size_t b = a + 1; b < d.treatment_count(); ++b)
      if (const auto n = d.summary().pair_counts[a][b])
        pairs.append(py::make_tuple(d.label(TreatmentId{a}), d.label(TreatmentId{b}), n));
  out["pairs"] = pairs;
  return out;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the tnma package";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.attr("summary_format_version") = kSummaryFormatVersion;

  m.def(
      "network",
      [](const std::filesystem::path& path, std::optional<std::string> baseline) {
        return network_dict(ingest(path, BuildOptions{std::move(baseline)}));
      },
      py::arg("path"), py::arg("baseline") = py::none());

  m.def(
      "run_analysis",
      [](const std::filesystem::path& input, const std::filesystem::path& out_dir, const std::string& model,
         std::optional<std::string> baseline, std::vector<std::string> time_varying, std::size_t chains,
         std::size_t iters, std::size_t burnin, std::size_t thin, std::uint64_t seed, std::size_t grid,
         bool samples, const std::string& effect_update) {
        RunConfig c;
        c.input = input;
        c.out_dir = out_dir;
        c.model = model_kind(model);
        c.baseline = std::move(baseline);
        c.time_varying = std::move(time_varying);
        c.sampler = sampler_config(chains, iters, burnin, thin, seed, effect_update);
        c.grid_size = grid;
        c.write_samples = samples;
        {
          py::gil_scoped_release release;
          run_analysis(c);
        }
        return read_text(out_dir / "summary.json");
      },
      py::arg("input"), py::arg("out_dir"), py::arg("model") = "tbnma", py::arg("baseline") = py::none(),
      py::arg("time_varying") = std::vector<std::string>{}, py::arg("chains") = 4, py::arg("iters") = 20000,
      py::arg("burnin") = 10000, py::arg("thin") = 10, py::arg("seed") = 1, py::arg("grid") = 101,
      py::arg("samples") = false, py::arg("effect_update") = "gibbs",
      "Fits one model, writes the report files into out_dir and returns summary.json as text.");

  m.def(
      "simulate",
      [](const std::filesystem::path& skeleton, const std::filesystem::path& out, const std::string& scenario,
         std::uint64_t seed, const std::string& target, std::optional<std::string> reference,
         std::optional<long> arm_size) {
        Scenario s = scenario_named(scenario);
        s.seed = seed;
        s.target = target;
        s.reference = std::move(reference);
        s.arm_size = arm_size;
        const auto sim = generate(ingest(skeleton), s);
        write_dataset_csv(sim.data, out);
        return network_dict(sim.data);
      },
      py::arg("skeleton"), py::arg("out"), py::arg("scenario") = "sigmoid", py::arg("seed") = 1,
      py::arg("target") = "VAN", py::arg("reference") = "LIN", py::arg("arm_size") = py::none());

  m.def(
      "run_simstudy",
      [](const std::filesystem::path& skeleton, std::optional<std::filesystem::path> out_dir, std::uint64_t seed,
         std::size_t chains, std::size_t iters, std::size_t burnin, std::size_t thin, std::size_t grid) {
        SimStudyConfig c;
        c.skeleton = skeleton;
        c.out_dir = std::move(out_dir);
        c.seed = seed;
        c.sampler = sampler_config(chains, iters, burnin, thin, seed, "gibbs");
        c.grid_size = grid;
        py::gil_scoped_release release;
        return run_simstudy(c).to_json().dump();
      },
      py::arg("skeleton"), py::arg("out_dir") = py::none(), py::arg("seed") = 1, py::arg("chains") = 4,
      py::arg("iters") = 20000, py::arg("burnin") = 10000, py::arg("thin") = 10, py::arg("grid") = 101);

  m.def(
      "kernel_matrix",
      [](double psi, double s_b, double s_l, double phi, double rho, std::vector<double> times) {
        return kernel_matrix(KernelParams{psi, s_b, s_l, phi, rho}, times);
      },
      py::arg("psi"), py::arg("s_b"), py::arg("s_l"), py::arg("phi"), py::arg("rho"), py::arg("times"));

  m.def(
      "gp_condition",
      [](std::vector<double> train_times, std::vector<double> train_values, double mean_level, double psi,
         double s_b, double s_l, double phi, double rho, std::vector<double> query_times) {
        const auto g = gp_condition(train_times, train_values, mean_level, KernelParams{psi, s_b, s_l, phi, rho},
                                    query_times);
        return py::make_tuple(g.mean, g.cov);
      },
      py::arg("train_times"), py::arg("train_values"), py::arg("mean_level"), py::arg("psi"), py::arg("s_b"),
      py::arg("s_l"), py::arg("phi"), py::arg("rho"), py::arg("query_times"));

  m.def(
      "contrast_logprior",
      [](std::vector<double> delta, std::vector<double> means, double sigma2) {
        return contrast_logprior(delta, means, sigma2);
      },
      py::arg("delta"), py::arg("means"), py::arg("sigma2"));
}
