// Command-line front end: simulate pedigrees, compute genotype posteriors,
// fit penetrance curves by EM, run log-rank tests and baseline comparisons.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pedsurv/em.hpp"
#include "pedsurv/errors.hpp"
#include "pedsurv/inference.hpp"
#include "pedsurv/pedigree.hpp"
#include "pedsurv/simulate.hpp"
#include "pedsurv/svg.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace pedsurv;

namespace {

constexpr const char* kVersion = "1.0.0";

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// temp file + rename, so partial output never lands under the final name
void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
  }
  fs::rename(tmp, path);
}

struct ManifestWriter {
  json m;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  ManifestWriter(const std::string& command) {
    m["command"] = command;
    m["tool_version"] = kVersion;
    m["config"] = json::object();
    m["input_digests"] = json::object();
  }
  void input(const std::string& path) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(read_file(path))));
    m["input_digests"][path] = buf;
  }
  void finish(const fs::path& path) {
    m["timing_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    write_atomic(path, m.dump(2) + "\n");
  }
};

// --- shared dataset/covariate handling --------------------------------------

int ensure_sex_column(Dataset& ds) {
  for (size_t c = 0; c < ds.covariate_names.size(); ++c)
    if (ds.covariate_names[c] == "female") return static_cast<int>(c);
  ds.covariate_names.push_back("female");
  for (auto& fam : ds.families)
    for (auto& ind : fam.individuals)
      ind.covariates.push_back(ind.sex == Sex::female ? 1.0 : 0.0);
  return static_cast<int>(ds.covariate_names.size()) - 1;
}

int column_index(Dataset& ds, const std::string& name) {
  if (name == "sex" || name == "female") return ensure_sex_column(ds);
  for (size_t c = 0; c < ds.covariate_names.size(); ++c)
    if (ds.covariate_names[c] == name) return static_cast<int>(c);
  throw UnknownColumn("unknown covariate column '" + name + "'");
}

struct FitFlags {
  std::string data_path;
  double q = -1.0;
  std::string mstep = "cox";
  std::vector<std::string> covariates;
  std::string strata;
  std::uint64_t seed = 0;
  double tol = 1e-5;
  int max_iter = 100;
  bool no_proband_exclusion = false;
  bool keep_proband_carrier = false;
  bool allow_nonconverged = false;
  std::string out_dir = ".";

  void attach(CLI::App* cmd, bool with_out = true) {
    cmd->add_option("--data", data_path, "pedigree TSV file")->required();
    cmd->add_option("--q", q, "disease allele frequency (required)")->required();
    cmd->add_option("--mstep", mstep, "M-step kind: cox or weibull")
        ->check(CLI::IsMember({"cox", "weibull"}));
    cmd->add_option("--covariates", covariates,
                    "covariate column names (use 'sex' for a female indicator)")
        ->delimiter(',');
    cmd->add_option("--strata", strata, "stratify baseline on this column");
    cmd->add_option("--seed", seed, "RNG seed for weight initialization");
    cmd->add_option("--tol", tol, "checkpoint-survival convergence tolerance");
    cmd->add_option("--max-iter", max_iter, "maximum EM iterations");
    cmd->add_flag("--no-proband-exclusion", no_proband_exclusion,
                  "keep proband phenotypes (no ascertainment correction)");
    cmd->add_flag("--keep-proband-carrier", keep_proband_carrier,
                  "retain the affected-implies-carrier constraint on excluded probands");
    cmd->add_flag("--allow-nonconverged", allow_nonconverged,
                  "exit 0 even when EM hits the iteration cap");
    if (with_out) cmd->add_option("--out", out_dir, "output directory");
  }

  EMConfig config(Dataset& ds) const {
    EMConfig cfg;
    cfg.m_step_kind = mstep == "weibull" ? EMConfig::MStep::weibull
                                         : EMConfig::MStep::semiparametric_cox;
    cfg.tolerance = tol;
    cfg.max_iterations = max_iter;
    cfg.rng_seed = seed;
    cfg.exclude_proband_phenotype = !no_proband_exclusion;
    cfg.retain_proband_carrier_constraint = keep_proband_carrier;
    for (const auto& name : covariates)
      cfg.covariate_indices.push_back(column_index(ds, name));
    if (!strata.empty()) {
      if (strata == "sex")
        cfg.stratify_by_sex = true;
      else
        cfg.stratum_covariate = column_index(ds, strata);
    }
    return cfg;
  }

  json to_json() const {
    return {{"data", data_path},       {"q", q},
            {"mstep", mstep},          {"covariates", covariates},
            {"strata", strata},        {"seed", seed},
            {"tol", tol},              {"max_iter", max_iter},
            {"no_proband_exclusion", no_proband_exclusion},
            {"keep_proband_carrier", keep_proband_carrier}};
  }
};

json model_to_json(const SurvivalModel& m) {
  json j;
  j["beta"] = std::vector<double>(m.beta.begin(), m.beta.end());
  j["kind"] = m.kind == BaselineKind::piecewise ? "piecewise" : "weibull";
  j["strata"] = json::array();
  for (int s = 0; s < m.n_strata(); ++s) {
    if (m.kind == BaselineKind::piecewise) {
      const auto& b = m.piecewise[s];
      j["strata"].push_back({{"times", b.times},
                             {"increments", b.increments},
                             {"var_increments", b.var_increments}});
    } else {
      const auto& b = m.weibull[s];
      j["strata"].push_back({{"shape", b.shape}, {"scale", b.scale}});
    }
  }
  return j;
}

std::string curves_csv(const std::vector<SurvivalCurve>& curves) {
  std::ostringstream os;
  os.precision(12);
  os << "time,estimate,lower,upper,stratum\n";
  for (size_t s = 0; s < curves.size(); ++s)
    for (size_t i = 0; i < curves[s].times.size(); ++i)
      os << curves[s].times[i] << ',' << curves[s].survival[i] << ','
         << curves[s].lower[i] << ',' << curves[s].upper[i] << ',' << s << '\n';
  return os.str();
}

std::string weights_csv(const Dataset& ds, const std::vector<double>& w) {
  std::ostringstream os;
  os.precision(12);
  os << "family_id,individual_id,weight\n";
  size_t k = 0;
  for (const auto& fam : ds.families)
    for (const auto& ind : fam.individuals)
      os << fam.family_id << ',' << ind.individual_id << ',' << w[k++] << '\n';
  return os.str();
}

const char* kPalette[] = {"#000000", "#cc0000", "#0044cc", "#007700",
                          "#aa5500", "#7700aa"};

// --- subcommands ------------------------------------------------------------

int cmd_validate(const std::string& path, bool require_probands, bool strict) {
  ParseOptions opts;
  Dataset ds = parse_dataset(path, {});
  auto diags = validate(ds, require_probands);
  for (const auto& d : diags) std::cout << d.message << '\n';
  std::cout << ds.families.size() << " families, " << ds.total_individuals()
            << " individuals, " << diags.size() << " diagnostics\n";
  return diags.empty() || !strict ? 0 : 2;
}

int cmd_posteriors(const std::string& path, double q, const std::string& out) {
  Dataset ds = parse_dataset(path, {});
  GeneticModel gm{q, 0.0};
  std::ostringstream os;
  os.precision(6);
  os << "family_id\tindividual_id\tP00\tP10\tP01\tP11\tcarrier\n";
  for (const auto& fam : ds.families) {
    auto post = genotype_posteriors(fam, gm);
    for (int i = 0; i < fam.size(); ++i) {
      const auto& p = post.marginals[i];
      os << fam.family_id << '\t' << fam.individuals[i].individual_id;
      for (int s = 0; s < 4; ++s) os << '\t' << p[s];
      os << '\t' << 1.0 - p[g00] << '\n';
    }
  }
  if (out.empty())
    std::cout << os.str();
  else
    write_atomic(out, os.str());
  return 0;
}

int cmd_fit(const FitFlags& flags) {
  Dataset ds = parse_dataset(flags.data_path, {});
  FitFlags f = flags;
  EMConfig cfg = f.config(ds);
  GeneticModel gm{f.q, 0.0};

  ManifestWriter manifest("fit");
  manifest.m["config"] = f.to_json();
  manifest.input(f.data_path);

  EMResult res = run_em(ds, gm, cfg);

  fs::path out(f.out_dir);
  json mj = model_to_json(res.state.model);
  mj["converged"] = res.state.converged;
  mj["iterations"] = res.state.iteration;
  if (res.std_errors.size()) {
    mj["std_errors"] = std::vector<double>(res.std_errors.begin(), res.std_errors.end());
    mj["p_values"] = std::vector<double>(res.p_values.begin(), res.p_values.end());
  }
  write_atomic(out / "model.json", mj.dump(2) + "\n");
  write_atomic(out / "weights.csv", weights_csv(ds, res.state.weights));
  write_atomic(out / "curves.csv", curves_csv(res.curves));

  std::vector<PlotSeries> series;
  for (size_t s = 0; s < res.curves.size(); ++s)
    series.push_back({"stratum " + std::to_string(s), res.curves[s],
                      kPalette[s % 6], true});
  write_atomic(out / "curves.svg",
               render_survival_svg(series, "Estimated carrier survival"));

  std::ostringstream trace;
  trace.precision(10);
  for (size_t it = 0; it < res.trace.size(); ++it) {
    trace << "iter " << it + 1 << ":";
    for (double v : res.trace[it]) trace << ' ' << v;
    trace << '\n';
  }
  trace << (res.state.converged ? "converged" : "NOT converged") << " after "
        << res.state.iteration << " iterations\n";
  write_atomic(out / "trace.log", trace.str());
  manifest.finish(out / "manifest.json");

  std::cout << (res.state.converged ? "converged" : "not converged") << " in "
            << res.state.iteration << " iterations\n";
  if (res.state.model.beta.size()) {
    std::cout << "beta:";
    for (double b : res.state.model.beta) std::cout << ' ' << b;
    std::cout << '\n';
  }
  return res.state.converged || f.allow_nonconverged ? 0 : 1;
}

int cmd_logrank(const FitFlags& flags, const std::string& group_col,
                const std::string& out) {
  Dataset ds = parse_dataset(flags.data_path, {});
  FitFlags f = flags;
  EMConfig cfg = f.config(ds);
  int gcol = column_index(ds, group_col);
  cfg.stratify_by_sex = false;
  cfg.stratum_covariate = gcol;  // group-stratified baselines during EM
  GeneticModel gm{f.q, 0.0};

  EMResult res = run_em(ds, gm, cfg);
  auto obs = build_mstep_observations(ds, res.state.weights, cfg);
  int ngroups = 0;
  for (const auto& o : obs) ngroups = std::max(ngroups, o.stratum + 1);
  if (ngroups < 2)
    throw UnknownGroupVariation("grouping column '" + group_col +
                                "' takes a single value");
  std::vector<std::vector<WeightedObservation>> groups(ngroups);
  for (const auto& o : obs) groups[o.stratum].push_back(o);
  auto r = logrank_test(groups);

  json j = {{"statistic", r.statistic}, {"df", r.df}, {"p", r.p_value},
            {"groups", ngroups},        {"group_column", group_col},
            {"em_converged", res.state.converged}};
  if (out.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_atomic(out, j.dump(2) + "\n");
  return res.state.converged || f.allow_nonconverged ? 0 : 1;
}

int cmd_compare_baselines(const FitFlags& flags) {
  FitFlags f = flags;
  Dataset ds = parse_dataset(f.data_path, {});
  EMConfig cfg = f.config(ds);
  GeneticModel gm{f.q, 0.0};

  ManifestWriter manifest("compare-baselines");
  manifest.m["config"] = f.to_json();
  manifest.input(f.data_path);

  cfg.m_step_kind = EMConfig::MStep::semiparametric_cox;
  EMResult cox = run_em(ds, gm, cfg);
  cfg.m_step_kind = EMConfig::MStep::weibull;
  EMResult wb = run_em(ds, gm, cfg);

  double max_disc = 0.0;
  json per_age = json::array();
  for (double age : cfg.checkpoint_ages) {
    double a = std::exp(-cox.state.model.cum_hazard(age, 0));
    double b = std::exp(-wb.state.model.cum_hazard(age, 0));
    per_age.push_back({{"age", age}, {"cox", a}, {"weibull", b}});
    max_disc = std::max(max_disc, std::abs(a - b));
  }

  fs::path out(f.out_dir);
  std::vector<PlotSeries> series;
  series.push_back({"non-parametric", cox.curves.at(0), kPalette[0], true});
  series.push_back({"Weibull", wb.curves.at(0), kPalette[1], false});
  write_atomic(out / "compare.svg",
               render_survival_svg(series, "Non-parametric vs Weibull baseline"));
  std::vector<SurvivalCurve> both = {cox.curves.at(0), wb.curves.at(0)};
  write_atomic(out / "compare.csv", curves_csv(both));
  json j = {{"max_checkpoint_discrepancy", max_disc}, {"checkpoints", per_age}};
  write_atomic(out / "compare.json", j.dump(2) + "\n");
  manifest.finish(out / "manifest.json");
  std::cout << "max checkpoint discrepancy: " << max_disc << '\n';
  return 0;
}

HazardSpec hazard_from_json(const json& j) {
  HazardSpec h;
  h.breakpoints = j.at("breakpoints").get<std::vector<double>>();
  h.rates = j.at("rates").get<std::vector<double>>();
  if (h.rates.size() != h.breakpoints.size() + 1)
    throw Error("hazard needs one more rate than breakpoints");
  return h;
}

int cmd_simulate(const std::string& config_path, const std::string& prefix) {
  json j = json::parse(read_file(config_path));
  SimulationConfig cfg;
  std::string tmpl = j.value("template", "builtin");
  cfg.tmpl = tmpl == "builtin" ? synthetic_template() : parse_dataset(tmpl, {});
  cfg.duplication = j.value("duplication", 1);
  cfg.allele_frequency = j.at("q").get<double>();
  cfg.hazard = hazard_from_json(j.at("hazard"));
  if (j.contains("female_hazard"))
    cfg.female_hazard = hazard_from_json(j["female_hazard"]);
  cfg.beta_female = j.value("beta_female", 0.0);
  if (j.contains("censoring")) {
    cfg.censor_min = j["censoring"].at(0).get<double>();
    cfg.censor_max = j["censoring"].at(1).get<double>();
  }
  cfg.rng_seed = j.value("seed", 0);
  cfg.mask_genotypes = j.value("mask_genotypes", true);

  ManifestWriter manifest("simulate");
  manifest.m["config"] = j;
  manifest.input(config_path);

  auto sim = simulate(cfg);
  write_atomic(prefix + ".tsv", serialize_dataset(sim.data));
  write_atomic(prefix + ".truth.tsv", serialize_truth(sim.truth));
  manifest.finish(prefix + ".manifest.json");
  std::cout << sim.data.families.size() << " families, "
            << sim.data.total_individuals() << " individuals\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penetrance estimation from partially genotyped pedigrees"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // validate
  auto* v = app.add_subcommand("validate", "check a pedigree file");
  std::string v_data;
  bool v_probands = false, v_strict = false;
  v->add_option("--data", v_data)->required();
  v->add_flag("--require-probands", v_probands);
  v->add_flag("--strict", v_strict, "nonzero exit on any diagnostic");

  // posteriors
  auto* p = app.add_subcommand("posteriors",
                               "genotype posteriors from affection status and tests");
  std::string p_data, p_out;
  double p_q = -1.0;
  p->add_option("--data", p_data)->required();
  p->add_option("--q", p_q, "disease allele frequency")->required();
  p->add_option("--out", p_out, "output path (default stdout)");

  // fit
  auto* fit = app.add_subcommand("fit", "EM penetrance fit");
  FitFlags fit_flags;
  fit_flags.attach(fit);

  // logrank
  auto* lr = app.add_subcommand("logrank", "weighted log-rank test between groups");
  FitFlags lr_flags;
  lr_flags.attach(lr, false);
  std::string lr_group, lr_out;
  lr->add_option("--group", lr_group, "grouping column")->required();
  lr->add_option("--out", lr_out, "report path (default stdout)");

  // compare-baselines
  auto* cb = app.add_subcommand("compare-baselines",
                                "overlay non-parametric and Weibull baselines");
  FitFlags cb_flags;
  cb_flags.attach(cb);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a pedigree dataset");
  std::string sim_config, sim_prefix = "simulated";
  sim->add_option("--config", sim_config, "JSON simulation config")->required();
  sim->add_option("--out-prefix", sim_prefix, "output file prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*v) return cmd_validate(v_data, v_probands, v_strict);
    if (*p) return cmd_posteriors(p_data, p_q, p_out);
    if (*fit) return cmd_fit(fit_flags);
    if (*lr) return cmd_logrank(lr_flags, lr_group, lr_out);
    if (*cb) return cmd_compare_baselines(cb_flags);
    if (*sim) return cmd_simulate(sim_config, sim_prefix);
  } catch (const MalformedRow& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const UnknownParent& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const SexInconsistentParent& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const AncestryCycle& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DuplicateIndividualId& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const UnknownColumn& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const UnknownGroupVariation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
