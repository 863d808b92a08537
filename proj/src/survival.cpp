#include "pedsurv/survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "pedsurv/errors.hpp"

namespace pedsurv {

double PiecewiseBaseline::cum_hazard(double t) const {
  double acc = 0.0;
  for (size_t j = 0; j < times.size() && times[j] <= t; ++j) acc += increments[j];
  return acc;
}

double PiecewiseBaseline::cum_hazard_var(double t) const {
  double acc = 0.0;
  for (size_t j = 0; j < times.size() && times[j] <= t; ++j)
    acc += var_increments[j];
  return acc;
}

double WeibullBaseline::cum_hazard(double t) const {
  return t <= 0.0 ? 0.0 : std::pow(t / scale, shape);
}

double WeibullBaseline::hazard(double t) const {
  return shape / scale * std::pow(t / scale, shape - 1.0);
}

double SurvivalModel::cum_hazard(double t, int stratum) const {
  return kind == BaselineKind::piecewise ? piecewise.at(stratum).cum_hazard(t)
                                         : weibull.at(stratum).cum_hazard(t);
}

double SurvivalModel::survival(double t, const Eigen::VectorXd& z,
                               int stratum) const {
  double eta = beta.size() ? z.dot(beta) : 0.0;
  return std::exp(-cum_hazard(t, stratum) * std::exp(eta));
}

namespace {

int count_strata(const std::vector<WeightedObservation>& obs) {
  int s = 0;
  for (const auto& o : obs) s = std::max(s, o.stratum + 1);
  return s;
}

// indices of obs in one stratum, sorted by descending time
std::vector<int> stratum_order(const std::vector<WeightedObservation>& obs,
                               int stratum) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(obs.size()); ++i)
    if (obs[i].stratum == stratum) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return obs[a].time > obs[b].time;
  });
  return idx;
}

double linear_predictor(const WeightedObservation& o, const Eigen::VectorXd& beta) {
  return beta.size() ? o.z.dot(beta) : 0.0;
}

}  // namespace

PiecewiseBaseline fit_breslow_baseline(const std::vector<WeightedObservation>& obs,
                                       const Eigen::VectorXd& beta) {
  // map event time -> weighted event count
  std::map<double, double> ev;
  for (const auto& o : obs)
    if (o.event && o.weight > 0.0) ev[o.time] += o.weight;
  if (ev.empty()) throw NoEvents("no events with positive weight");

  PiecewiseBaseline b;
  for (auto it = ev.rbegin(); it != ev.rend(); ++it) {
    double t = it->first;
    double risk = 0.0;
    for (const auto& o : obs)
      if (o.time >= t) risk += o.weight * std::exp(linear_predictor(o, beta));
    double d = it->second;
    b.times.push_back(t);
    b.increments.push_back(d / risk);
    // Greenwood form; falls back to the Poisson form when the event
    // exhausts the risk set
    double rem = risk - d;
    b.var_increments.push_back(rem > 0.0 ? d / (risk * rem) : d / (risk * risk));
  }
  std::reverse(b.times.begin(), b.times.end());
  std::reverse(b.increments.begin(), b.increments.end());
  std::reverse(b.var_increments.begin(), b.var_increments.end());
  return b;
}

std::vector<PiecewiseBaseline> fit_breslow_baselines(
    const std::vector<WeightedObservation>& obs, const Eigen::VectorXd& beta) {
  const int S = count_strata(obs);
  std::vector<PiecewiseBaseline> out;
  for (int s = 0; s < S; ++s) {
    std::vector<WeightedObservation> sub;
    for (const auto& o : obs)
      if (o.stratum == s) sub.push_back(o);
    out.push_back(fit_breslow_baseline(sub, beta));
  }
  return out;
}

namespace {

// weighted Cox partial log-likelihood, gradient and information (Breslow ties)
void cox_derivs(const std::vector<WeightedObservation>& obs,
                const Eigen::VectorXd& beta, double* loglik,
                Eigen::VectorXd* grad, Eigen::MatrixXd* info) {
  const int p = static_cast<int>(beta.size());
  const int S = count_strata(obs);
  if (loglik) *loglik = 0.0;
  if (grad) grad->setZero(p);
  if (info) info->setZero(p, p);
  for (int s = 0; s < S; ++s) {
    auto idx = stratum_order(obs, s);
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    size_t i = 0;
    while (i < idx.size()) {
      double t = obs[idx[i]].time;
      // add everyone tied at t to the risk set
      size_t j = i;
      while (j < idx.size() && obs[idx[j]].time == t) {
        const auto& o = obs[idx[j]];
        double r = o.weight * std::exp(linear_predictor(o, beta));
        s0 += r;
        if (p) {
          s1 += r * o.z;
          s2 += r * o.z * o.z.transpose();
        }
        ++j;
      }
      // process events at t
      double d = 0.0;
      for (size_t k = i; k < j; ++k) {
        const auto& o = obs[idx[k]];
        if (!o.event || o.weight <= 0.0) continue;
        d += o.weight;
        if (loglik) *loglik += o.weight * linear_predictor(o, beta);
        if (grad && p) *grad += o.weight * o.z;
      }
      if (d > 0.0) {
        if (loglik) *loglik -= d * std::log(s0);
        if (p) {
          Eigen::VectorXd m = s1 / s0;
          if (grad) *grad -= d * m;
          if (info) *info += d * (s2 / s0 - m * m.transpose());
        }
      }
      i = j;
    }
  }
}

void check_design(const std::vector<WeightedObservation>& obs, int p) {
  for (int c = 0; c < p; ++c) {
    double wsum = 0.0, mean = 0.0;
    for (const auto& o : obs)
      if (o.weight > 0.0) {
        wsum += o.weight;
        mean += o.weight * o.z[c];
      }
    if (wsum <= 0.0) throw NoEvents("no positive weights");
    mean /= wsum;
    double var = 0.0;
    for (const auto& o : obs)
      if (o.weight > 0.0) var += o.weight * (o.z[c] - mean) * (o.z[c] - mean);
    if (var / wsum < 1e-12)
      throw Singular("covariate " + std::to_string(c) +
                     " has zero variance on the weighted sample");
  }
}

}  // namespace

CoxFit fit_cox(const std::vector<WeightedObservation>& obs, const FitOptions& opts) {
  CoxFit fit;
  int p = 0;
  for (const auto& o : obs) p = std::max(p, static_cast<int>(o.z.size()));
  for (const auto& o : obs)
    if (static_cast<int>(o.z.size()) != p)
      throw Error("inconsistent covariate dimensions");
  check_design(obs, p);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll;
  Eigen::VectorXd grad(p);
  Eigen::MatrixXd info(p, p);
  cox_derivs(obs, beta, &ll, &grad, &info);

  bool converged = p == 0;
  int iter = 0;
  // the gradient norm at the optimum floors at a level that grows with the
  // sample size, so the tolerance is relative to the likelihood scale
  auto grad_tol = [&](double cur_ll) {
    return opts.gradient_tol * std::max(1.0, std::abs(cur_ll));
  };
  if (p && grad.norm() <= grad_tol(ll)) converged = true;
  while (!converged && iter < opts.max_iterations) {
    ++iter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw Singular("observed information is not positive definite");
    Eigen::VectorXd step = ldlt.solve(grad);
    if (step.norm() <= 1e-8 * (1.0 + beta.norm())) {  // resolved to precision
      converged = true;
      break;
    }
    double scale = 1.0;
    double new_ll = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd cand;
    for (int h = 0; h <= opts.max_halvings; ++h) {
      cand = beta + scale * step;
      cox_derivs(obs, cand, &new_ll, nullptr, nullptr);
      if (new_ll >= ll) break;
      scale *= 0.5;
    }
    if (!(new_ll >= ll)) {  // no ascent possible at double precision
      converged = scale * step.norm() <= 1e-6 * (1.0 + beta.norm());
      break;
    }
    beta = cand;
    ll = new_ll;
    cox_derivs(obs, beta, nullptr, &grad, &info);
    if (grad.norm() <= grad_tol(ll)) converged = true;
    if (beta.norm() > 50.0) {  // diverging coefficient: monotone likelihood
      fit.monotone_warning = true;
      break;
    }
  }
  if (!converged && !fit.monotone_warning)
    throw NonConvergence("Cox fit did not converge in " +
                         std::to_string(opts.max_iterations) + " iterations");

  fit.model.beta = beta;
  fit.model.kind = BaselineKind::piecewise;
  fit.model.piecewise = fit_breslow_baselines(obs, beta);
  fit.loglik = ll;
  fit.iterations = iter;
  fit.std_errors.resize(p);
  fit.p_values.resize(p);
  if (p) {
    Eigen::MatrixXd cov = info.inverse();
    for (int c = 0; c < p; ++c) {
      fit.std_errors[c] = std::sqrt(std::max(cov(c, c), 0.0));
      double zstat = fit.std_errors[c] > 0 ? beta[c] / fit.std_errors[c] : 0.0;
      fit.p_values[c] = 2.0 * norm_sf(std::abs(zstat));
    }
  }
  return fit;
}

namespace {

// Weibull PH parameters: per-stratum (log shape, log scale), then beta.
struct WeibullPack {
  int n_strata, p;
  double shape(const Eigen::VectorXd& x, int s) const { return std::exp(x[2 * s]); }
  double scale(const Eigen::VectorXd& x, int s) const { return std::exp(x[2 * s + 1]); }
  Eigen::VectorXd beta(const Eigen::VectorXd& x) const {
    return x.segment(2 * n_strata, p);
  }
  int dim() const { return 2 * n_strata + p; }
};

double weibull_loglik_at(const std::vector<WeightedObservation>& obs,
                         const WeibullPack& pk, const Eigen::VectorXd& x) {
  Eigen::VectorXd beta = pk.beta(x);
  double ll = 0.0;
  for (const auto& o : obs) {
    if (o.weight <= 0.0) continue;
    double k = pk.shape(x, o.stratum), rho = pk.scale(x, o.stratum);
    double eta = pk.p ? o.z.dot(beta) : 0.0;
    double H = o.time > 0.0 ? std::pow(o.time / rho, k) : 0.0;
    ll -= o.weight * H * std::exp(eta);
    if (o.event) {
      double logh = std::log(k / rho) + (k - 1.0) * std::log(o.time / rho);
      ll += o.weight * (logh + eta);
    }
  }
  return ll;
}

Eigen::VectorXd weibull_grad_at(const std::vector<WeightedObservation>& obs,
                                const WeibullPack& pk, const Eigen::VectorXd& x) {
  Eigen::VectorXd beta = pk.beta(x);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(pk.dim());
  for (const auto& o : obs) {
    if (o.weight <= 0.0) continue;
    int s = o.stratum;
    double k = pk.shape(x, s), rho = pk.scale(x, s);
    double eta = pk.p ? o.z.dot(beta) : 0.0;
    double eeta = std::exp(eta);
    double u = o.time > 0.0 ? std::log(o.time / rho) : 0.0;
    double H = o.time > 0.0 ? std::exp(k * u) : 0.0;
    // d/d(log k), d/d(log rho)
    g[2 * s] += o.weight * ((o.event ? 1.0 + k * u : 0.0) - k * u * H * eeta);
    g[2 * s + 1] += o.weight * ((o.event ? -k : 0.0) + k * H * eeta);
    if (pk.p) {
      double c = o.weight * ((o.event ? 1.0 : 0.0) - H * eeta);
      g.segment(2 * pk.n_strata, pk.p) += c * o.z;
    }
  }
  return g;
}

}  // namespace

WeibullFit fit_weibull(const std::vector<WeightedObservation>& obs,
                       const FitOptions& opts, const SurvivalModel* warm_start) {
  WeibullPack pk;
  pk.n_strata = count_strata(obs);
  pk.p = 0;
  for (const auto& o : obs) pk.p = std::max(pk.p, static_cast<int>(o.z.size()));
  check_design(obs, pk.p);
  for (int s = 0; s < pk.n_strata; ++s) {
    std::map<double, double> ev;
    for (const auto& o : obs)
      if (o.stratum == s && o.event && o.weight > 0.0) ev[o.time] += o.weight;
    if (ev.empty()) throw NoEvents("stratum " + std::to_string(s) + " has no events");
    if (ev.size() < 2)
      throw DegenerateData("stratum " + std::to_string(s) +
                           " has all events at a single time");
    for (const auto& [t, w] : ev)
      if (t <= 0.0) throw DegenerateData("event at time 0");
  }

  Eigen::VectorXd x(pk.dim());
  if (warm_start && warm_start->kind == BaselineKind::weibull &&
      warm_start->n_strata() == pk.n_strata &&
      warm_start->beta.size() == pk.p) {
    for (int s = 0; s < pk.n_strata; ++s) {
      x[2 * s] = std::log(warm_start->weibull[s].shape);
      x[2 * s + 1] = std::log(warm_start->weibull[s].scale);
    }
    x.segment(2 * pk.n_strata, pk.p) = warm_start->beta;
  } else {
    for (int s = 0; s < pk.n_strata; ++s) {
      double wt = 0.0, wd = 0.0;
      for (const auto& o : obs)
        if (o.stratum == s) {
          wt += o.weight * o.time;
          wd += o.weight * (o.event ? 1.0 : 0.0);
        }
      x[2 * s] = 0.0;                         // shape 1 (exponential)
      x[2 * s + 1] = std::log(wt / wd);       // exponential MLE scale
    }
    x.segment(2 * pk.n_strata, pk.p).setZero();
  }

  double ll = weibull_loglik_at(obs, pk, x);
  int iter = 0;
  bool converged = false;
  const int d = pk.dim();
  // gradient tolerance relative to the likelihood scale: the absolute norm
  // grows with the sample size even at the optimum
  auto grad_tol = [&](double cur_ll) {
    return opts.gradient_tol * std::max(1.0, std::abs(cur_ll));
  };
  while (iter < opts.max_iterations) {
    Eigen::VectorXd g = weibull_grad_at(obs, pk, x);
    if (g.norm() <= grad_tol(ll)) {
      converged = true;
      break;
    }
    ++iter;
    // numeric Hessian of the gradient
    Eigen::MatrixXd H(d, d);
    for (int c = 0; c < d; ++c) {
      double h = 1e-6 * std::max(1.0, std::abs(x[c]));
      Eigen::VectorXd xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      H.col(c) = (weibull_grad_at(obs, pk, xp) - weibull_grad_at(obs, pk, xm)) /
                 (2.0 * h);
    }
    H = 0.5 * (H + H.transpose());
    Eigen::VectorXd step = (-H).ldlt().solve(g);
    bool fallback = !step.allFinite() || step.dot(g) <= 0.0;
    if (fallback) step = g;  // fall back to ascent
    // a vanishing Newton step means the optimum is resolved to machine
    // precision even when the gradient norm floor sits above the tolerance
    if (!fallback && step.norm() <= 1e-8 * (1.0 + x.norm())) {
      converged = true;
      break;
    }
    double scale = 1.0;
    double new_ll = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd cand = x;
    for (int hlv = 0; hlv <= opts.max_halvings; ++hlv) {
      cand = x + scale * step;
      new_ll = weibull_loglik_at(obs, pk, cand);
      if (std::isfinite(new_ll) && new_ll >= ll) break;
      scale *= 0.5;
    }
    if (!(new_ll >= ll)) {  // no ascent possible at double precision
      converged = !fallback && scale * step.norm() <= 1e-6 * (1.0 + x.norm());
      break;
    }
    x = cand;
    ll = new_ll;
  }
  if (!converged && weibull_grad_at(obs, pk, x).norm() > grad_tol(ll))
    throw NonConvergence("Weibull fit did not converge in " +
                         std::to_string(opts.max_iterations) + " iterations");

  WeibullFit fit;
  fit.model.kind = BaselineKind::weibull;
  fit.model.beta = pk.beta(x);
  for (int s = 0; s < pk.n_strata; ++s)
    fit.model.weibull.push_back({pk.shape(x, s), pk.scale(x, s)});
  fit.loglik = ll;
  fit.iterations = iter;
  return fit;
}

double weighted_loglik(const std::vector<WeightedObservation>& obs,
                       const SurvivalModel& model) {
  if (model.kind != BaselineKind::weibull)
    throw Error("weighted_loglik requires a parametric (Weibull) baseline");
  WeibullPack pk;
  pk.n_strata = model.n_strata();
  pk.p = static_cast<int>(model.beta.size());
  Eigen::VectorXd x(pk.dim());
  for (int s = 0; s < pk.n_strata; ++s) {
    x[2 * s] = std::log(model.weibull[s].shape);
    x[2 * s + 1] = std::log(model.weibull[s].scale);
  }
  x.segment(2 * pk.n_strata, pk.p) = model.beta;
  return weibull_loglik_at(obs, pk, x);
}

namespace {

double step_lookup(const std::vector<double>& times,
                   const std::vector<double>& values, double t, double before) {
  double out = before;
  for (size_t j = 0; j < times.size() && times[j] <= t; ++j) out = values[j];
  return out;
}

}  // namespace

double SurvivalCurve::survival_at(double t) const {
  return step_lookup(times, survival, t, 1.0);
}
double SurvivalCurve::lower_at(double t) const {
  return step_lookup(times, lower, t, 1.0);
}
double SurvivalCurve::upper_at(double t) const {
  return step_lookup(times, upper, t, 1.0);
}

SurvivalCurve survival_curve(const SurvivalModel& model, const Eigen::VectorXd& z,
                             int stratum) {
  SurvivalCurve c;
  const double eeta =
      std::exp(model.beta.size() ? z.dot(model.beta) : 0.0);
  if (model.kind == BaselineKind::piecewise) {
    const auto& b = model.piecewise.at(stratum);
    double lam = 0.0, var = 0.0;
    for (size_t j = 0; j < b.times.size(); ++j) {
      lam += b.increments[j];
      var += b.var_increments[j];
      double lam_z = lam * eeta;
      double var_z = var * eeta * eeta;
      c.times.push_back(b.times[j]);
      c.survival.push_back(std::exp(-lam_z));
      c.variance.push_back(var_z);
      if (lam_z > 0.0 && var_z > 0.0) {
        double f = std::exp(1.959963984540054 * std::sqrt(var_z) / lam_z);
        c.lower.push_back(std::exp(-lam_z * f));
        c.upper.push_back(std::exp(-lam_z / f));
      } else {
        c.lower.push_back(std::exp(-lam_z));
        c.upper.push_back(std::exp(-lam_z));
      }
    }
  } else {
    const auto& b = model.weibull.at(stratum);
    double t_max = b.scale * std::pow(-std::log(1e-3), 1.0 / b.shape);
    const int npts = 200;
    for (int j = 1; j <= npts; ++j) {
      double t = t_max * j / npts;
      double s = std::exp(-b.cum_hazard(t) * eeta);
      c.times.push_back(t);
      c.survival.push_back(s);
      c.variance.push_back(0.0);
      c.lower.push_back(s);
      c.upper.push_back(s);
    }
  }
  return c;
}

LogrankResult logrank_test(const std::vector<std::vector<WeightedObservation>>& groups) {
  const int k = static_cast<int>(groups.size());
  if (k < 2) throw Error("log-rank test needs at least two groups");

  std::map<double, std::vector<double>> events;  // time -> weighted d per group
  for (int g = 0; g < k; ++g)
    for (const auto& o : groups[g])
      if (o.event && o.weight > 0.0) {
        auto& d = events[o.time];
        d.resize(k, 0.0);
        d[g] += o.weight;
      }
  if (events.empty()) throw NoEvents("no events in any group");

  Eigen::VectorXd oe = Eigen::VectorXd::Zero(k - 1);
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(k - 1, k - 1);
  for (const auto& [t, d] : events) {
    std::vector<double> n(k, 0.0);
    double N = 0.0, D = 0.0;
    for (int g = 0; g < k; ++g) {
      for (const auto& o : groups[g])
        if (o.time >= t) n[g] += o.weight;
      N += n[g];
      D += d[g];
    }
    if (N <= 0.0) continue;
    for (int g = 0; g < k - 1; ++g) oe[g] += d[g] - n[g] * D / N;
    if (N > 1.0) {
      double f = D * (N - D) / (N - 1.0);
      for (int g = 0; g < k - 1; ++g)
        for (int h = 0; h < k - 1; ++h) {
          double vg = (g == h ? n[g] * N : 0.0) - n[g] * n[h];
          V(g, h) += f * vg / (N * N);
        }
    }
  }

  LogrankResult r;
  r.df = k - 1;
  if (oe.norm() < 1e-12) {
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(V);
  r.statistic = oe.dot(cod.pseudoInverse() * oe);
  r.p_value = chisq_sf(r.statistic, r.df);
  return r;
}

// --- tail probabilities -----------------------------------------------------

namespace {

double gamma_q(double a, double x) {  // regularized upper incomplete gamma
  if (x <= 0.0) return 1.0;
  if (x < a + 1.0) {  // series for P, then complement (P is small here only
                      // when x is small, where the complement is benign)
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  // Lentz continued fraction for Q
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chisq_sf(double x, int df) {
  if (x <= 0.0) return 1.0;
  return gamma_q(df / 2.0, x / 2.0);
}

double norm_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace pedsurv
