#pragma once

#include <Eigen/Dense>
#include <vector>

namespace pedsurv {

struct WeightedObservation {
  double time = 0.0;
  bool event = false;
  Eigen::VectorXd z;       // covariates, may be empty
  double weight = 1.0;     // carrier probability in [0,1]
  int stratum = 0;
};

/// Non-parametric cumulative hazard: jumps at distinct event times,
/// constant between jumps and beyond the last one.
struct PiecewiseBaseline {
  std::vector<double> times;            // ascending
  std::vector<double> increments;       // dLambda >= 0
  std::vector<double> var_increments;   // variance of each jump

  double cum_hazard(double t) const;
  double cum_hazard_var(double t) const;
};

struct WeibullBaseline {
  double shape = 1.0;  // k
  double scale = 1.0;  // rho
  double cum_hazard(double t) const;
  double hazard(double t) const;
};

enum class BaselineKind { piecewise, weibull };

struct SurvivalModel {
  Eigen::VectorXd beta;
  BaselineKind kind = BaselineKind::piecewise;
  std::vector<PiecewiseBaseline> piecewise;  // one per stratum
  std::vector<WeibullBaseline> weibull;      // one per stratum

  int n_strata() const {
    return static_cast<int>(kind == BaselineKind::piecewise ? piecewise.size()
                                                            : weibull.size());
  }
  double cum_hazard(double t, int stratum = 0) const;
  /// P(T > t | Z, stratum) = exp(-Lambda(t) e^{Z beta})
  double survival(double t, const Eigen::VectorXd& z, int stratum = 0) const;
};

struct FitOptions {
  int max_iterations = 50;
  double gradient_tol = 1e-8;
  int max_halvings = 20;
};

struct CoxFit {
  SurvivalModel model;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd p_values;
  double loglik = 0.0;
  int iterations = 0;
  bool monotone_warning = false;
};

struct WeibullFit {
  SurvivalModel model;
  double loglik = 0.0;
  int iterations = 0;
};

/// Weighted Breslow increments for one stratum at fixed beta:
/// dLambda(t_j) = sum_{T_i = t_j, event} w_i / sum_{T_i >= t_j} w_i e^{z_i beta}.
PiecewiseBaseline fit_breslow_baseline(const std::vector<WeightedObservation>& obs,
                                       const Eigen::VectorXd& beta);

/// Per-stratum baselines (stratum field of the observations).
std::vector<PiecewiseBaseline> fit_breslow_baselines(
    const std::vector<WeightedObservation>& obs, const Eigen::VectorXd& beta);

/// Weighted Cox partial likelihood, Breslow ties, damped Newton.
CoxFit fit_cox(const std::vector<WeightedObservation>& obs,
               const FitOptions& opts = {});

/// Weighted Weibull PH regression; per-stratum (shape, scale), shared beta.
WeibullFit fit_weibull(const std::vector<WeightedObservation>& obs,
                       const FitOptions& opts = {},
                       const SurvivalModel* warm_start = nullptr);

/// Weighted log-likelihood of a fitted model on a sample (the EM Q function
/// when the weights are the carrier posteriors).
double weighted_loglik(const std::vector<WeightedObservation>& obs,
                       const SurvivalModel& model);

struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> survival;
  std::vector<double> variance;  // of the cumulative hazard
  std::vector<double> lower, upper;  // 95% log-transformed bands

  double survival_at(double t) const;
  double lower_at(double t) const;
  double upper_at(double t) const;
};

SurvivalCurve survival_curve(const SurvivalModel& model,
                             const Eigen::VectorXd& z, int stratum = 0);

struct LogrankResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

LogrankResult logrank_test(const std::vector<std::vector<WeightedObservation>>& groups);

// small numeric utilities
double chisq_sf(double x, int df);   // upper tail of chi-square
double norm_sf(double z);            // upper tail of standard normal

}  // namespace pedsurv
