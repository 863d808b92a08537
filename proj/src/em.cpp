#include "pedsurv/em.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pedsurv/errors.hpp"

namespace pedsurv {

Eigen::VectorXd covariate_vector(const IndividualRecord& ind, const EMConfig& cfg) {
  Eigen::VectorXd z(cfg.covariate_indices.size());
  for (size_t c = 0; c < cfg.covariate_indices.size(); ++c)
    z[c] = ind.covariates.at(cfg.covariate_indices[c]);
  return z;
}

int stratum_of(const IndividualRecord& ind, const EMConfig& cfg) {
  if (cfg.stratify_by_sex) return ind.sex == Sex::female ? 1 : 0;
  if (cfg.stratum_covariate >= 0)
    return static_cast<int>(std::lround(ind.covariates.at(cfg.stratum_covariate)));
  return 0;
}

namespace {

std::vector<Geno4> family_evidence(const Pedigree& fam, const SurvivalModel* model,
                                   const EMConfig& cfg) {
  std::vector<Geno4> ev(fam.size());
  for (int i = 0; i < fam.size(); ++i) {
    const auto& ind = fam.individuals[i];
    double s = 1.0;
    if (model && ind.status == Status::unaffected && ind.age > 0.0)
      s = model->survival(ind.age, covariate_vector(ind, cfg), stratum_of(ind, cfg));
    EvidenceOptions opts;
    opts.exclude_phenotype = ind.is_proband && cfg.exclude_proband_phenotype;
    opts.retain_carrier_constraint = cfg.retain_proband_carrier_constraint;
    ev[i] = build_evidence(ind, s, opts);
  }
  return ev;
}

std::vector<double> e_step(const Dataset& ds, const SurvivalModel* model,
                           const GeneticModel& gm, const EMConfig& cfg,
                           const std::vector<JunctionTree>* trees, bool parallel) {
  std::vector<int> offsets(ds.families.size());
  int total = 0;
  for (size_t f = 0; f < ds.families.size(); ++f) {
    offsets[f] = total;
    total += ds.families[f].size();
  }
  std::vector<double> w(total, 0.0);
  std::exception_ptr err;

  const int nf = static_cast<int>(ds.families.size());
#ifdef PEDSURV_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
  for (int f = 0; f < nf; ++f) {
    if (err) continue;
    try {
      const auto& fam = ds.families[f];
      auto ev = family_evidence(fam, model, cfg);
      PosteriorTable post;
      try {
        if (trees) {
          post = propagate((*trees)[f], ev);
        } else {
          auto jt = build_junction_tree(fam, gm);
          post = propagate(jt, ev);
        }
      } catch (const InconsistentEvidence& e) {
        throw InconsistentEvidence(std::string(e.what()) + " (family " +
                                   fam.family_id + ")");
      }
      for (int i = 0; i < fam.size(); ++i)
        w[offsets[f] + i] = 1.0 - post.marginals[i][g00];
    } catch (...) {
#ifdef PEDSURV_HAVE_OPENMP
#pragma omp critical
#endif
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return w;
}

std::vector<double> baseline_checkpoints(const SurvivalModel& model,
                                         const EMConfig& cfg) {
  std::vector<double> out;
  for (int s = 0; s < model.n_strata(); ++s)
    for (double t : cfg.checkpoint_ages)
      out.push_back(std::exp(-model.cum_hazard(t, s)));
  return out;
}

}  // namespace

std::vector<double> compute_weights(const Dataset& ds, const SurvivalModel* model,
                                    const GeneticModel& gm, const EMConfig& cfg) {
  return e_step(ds, model, gm, cfg, nullptr, cfg.parallel_e_step);
}

std::vector<double> compute_weights_serial(const Dataset& ds,
                                           const SurvivalModel* model,
                                           const GeneticModel& gm,
                                           const EMConfig& cfg) {
  return e_step(ds, model, gm, cfg, nullptr, false);
}

std::vector<WeightedObservation> build_mstep_observations(
    const Dataset& ds, const std::vector<double>& weights, const EMConfig& cfg) {
  std::vector<WeightedObservation> obs;
  int k = 0;
  for (const auto& fam : ds.families) {
    for (const auto& ind : fam.individuals) {
      double w = weights.at(k++);
      if (ind.is_proband && cfg.exclude_proband_phenotype) continue;
      if (!ind.has_phenotype()) continue;
      bool event = ind.status == Status::affected;
      if (w <= 0.0 && !event) continue;  // limit of the weighted formula
      if (w <= 0.0) continue;            // tested-negative affected cannot occur
      WeightedObservation o;
      o.time = ind.age;
      o.event = event;
      o.z = covariate_vector(ind, cfg);
      o.weight = w;
      o.stratum = stratum_of(ind, cfg);
      obs.push_back(std::move(o));
    }
  }
  return obs;
}

SurvivalModel m_step(const Dataset& ds, const std::vector<double>& weights,
                     const EMConfig& cfg, const SurvivalModel* warm_start) {
  auto obs = build_mstep_observations(ds, weights, cfg);
  if (cfg.m_step_kind == EMConfig::MStep::weibull)
    return fit_weibull(obs, cfg.fit, warm_start).model;
  return fit_cox(obs, cfg.fit).model;
}

EMResult run_em(const Dataset& ds, const GeneticModel& gm, const EMConfig& cfg) {
  if (cfg.exclude_proband_phenotype) {
    for (const auto& fam : ds.families) {
      int probands = 0;
      for (const auto& ind : fam.individuals) probands += ind.is_proband ? 1 : 0;
      if (probands != 1)
        throw Error("family " + fam.family_id + " has " +
                    std::to_string(probands) +
                    " probands; proband exclusion needs exactly one");
    }
  }

  std::vector<JunctionTree> trees;
  trees.reserve(ds.families.size());
  for (const auto& fam : ds.families)
    trees.push_back(build_junction_tree(fam, gm));

  // random weight initialization; the first M-step runs on these directly
  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> w(ds.total_individuals());
  for (double& x : w) x = unif(rng);

  EMResult res;
  std::vector<double> prev_ckpt;
  bool converged = false;
  int it = 0;
  SurvivalModel model;
  while (it < cfg.max_iterations) {
    ++it;
    model = m_step(ds, w, cfg, it > 1 ? &model : nullptr);
    auto ckpt = baseline_checkpoints(model, cfg);
    res.trace.push_back(ckpt);
    auto w_new = e_step(ds, &model, gm, cfg, &trees, cfg.parallel_e_step);
    double dw = 0.0;
    for (size_t i = 0; i < w.size(); ++i) dw = std::max(dw, std::abs(w_new[i] - w[i]));
    w = std::move(w_new);
    if (!prev_ckpt.empty() && prev_ckpt.size() == ckpt.size()) {
      double dc = 0.0;
      for (size_t i = 0; i < ckpt.size(); ++i)
        dc = std::max(dc, std::abs(ckpt[i] - prev_ckpt[i]));
      if (dc <= cfg.tolerance) converged = true;
    }
    prev_ckpt = ckpt;
    // stable weights imply a stable next model: stop early
    if (it > 1 && dw <= cfg.tolerance) converged = true;
    if (converged) break;
  }

  res.state.iteration = it;
  res.state.model = model;
  res.state.weights = w;
  res.state.checkpoint_survival = prev_ckpt;
  res.state.converged = converged;

  Eigen::VectorXd zero = Eigen::VectorXd::Zero(cfg.covariate_indices.size());
  for (int s = 0; s < model.n_strata(); ++s)
    res.curves.push_back(survival_curve(model, zero, s));

  if (cfg.m_step_kind == EMConfig::MStep::semiparametric_cox &&
      !cfg.covariate_indices.empty()) {
    auto fit = fit_cox(build_mstep_observations(ds, w, cfg), cfg.fit);
    res.std_errors = fit.std_errors;
    res.p_values = fit.p_values;
    res.state.model = fit.model;  // consistent with the final weights
  }
  return res;
}

}  // namespace pedsurv
