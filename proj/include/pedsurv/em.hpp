#pragma once

#include <cstdint>
#include <vector>

#include "pedsurv/genetic.hpp"
#include "pedsurv/inference.hpp"
#include "pedsurv/pedigree.hpp"
#include "pedsurv/survival.hpp"

namespace pedsurv {

struct EMConfig {
  enum class MStep { semiparametric_cox, weibull };
  MStep m_step_kind = MStep::semiparametric_cox;
  std::vector<double> checkpoint_ages = {20, 40, 60, 80};
  double tolerance = 1e-5;
  int max_iterations = 100;
  std::uint64_t rng_seed = 0;
  bool exclude_proband_phenotype = true;
  bool retain_proband_carrier_constraint = false;

  std::vector<int> covariate_indices;  // columns of IndividualRecord::covariates
  bool stratify_by_sex = false;
  int stratum_covariate = -1;          // covariate column used as stratum, -1 none
  bool parallel_e_step = true;
  FitOptions fit;
};

struct EMState {
  int iteration = 0;
  SurvivalModel model;
  std::vector<double> weights;              // dataset order, flattened
  std::vector<double> checkpoint_survival;  // stratum-major
  bool converged = false;
};

struct EMResult {
  EMState state;
  std::vector<SurvivalCurve> curves;  // baseline (Z=0) per stratum
  std::vector<std::vector<double>> trace;  // checkpoint survival per iteration
  // last M-step regression report (Cox M-step only)
  Eigen::VectorXd std_errors;
  Eigen::VectorXd p_values;
};

Eigen::VectorXd covariate_vector(const IndividualRecord& ind, const EMConfig& cfg);
int stratum_of(const IndividualRecord& ind, const EMConfig& cfg);

/// E-step: per family, build evidence (proband phenotype excluded per config),
/// run belief propagation and return w_i = 1 - P(X_i = 00 | ev).
/// Pass model = nullptr for the no-survival-information evidence.
std::vector<double> compute_weights(const Dataset& ds, const SurvivalModel* model,
                                    const GeneticModel& gm, const EMConfig& cfg);

/// Serial reference implementation of the E-step (no OpenMP); used by tests
/// and the benchmark to validate the parallel path.
std::vector<double> compute_weights_serial(const Dataset& ds,
                                           const SurvivalModel* model,
                                           const GeneticModel& gm,
                                           const EMConfig& cfg);

/// The weighted sample the M-step fits: carrier-possible phenotyped
/// individuals, probands dropped when exclusion is on, zero-weight censored
/// observations dropped.
std::vector<WeightedObservation> build_mstep_observations(
    const Dataset& ds, const std::vector<double>& weights, const EMConfig& cfg);

SurvivalModel m_step(const Dataset& ds, const std::vector<double>& weights,
                     const EMConfig& cfg,
                     const SurvivalModel* warm_start = nullptr);

EMResult run_em(const Dataset& ds, const GeneticModel& gm, const EMConfig& cfg);

}  // namespace pedsurv
