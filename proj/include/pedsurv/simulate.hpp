#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "pedsurv/genetic.hpp"
#include "pedsurv/pedigree.hpp"

namespace pedsurv {

/// Piecewise-constant hazard: rates[j] applies on [breakpoints[j-1],
/// breakpoints[j]), with one more rate than interior breakpoints.
struct HazardSpec {
  std::vector<double> breakpoints;
  std::vector<double> rates;

  double cum_hazard(double t) const;
  /// Inverse-transform draw: smallest t with Lambda(t) * e^lp >= e, exact on
  /// each constant piece. Returns +inf when the total mass is exhausted.
  double invert(double e, double lp) const;
};

struct SimulationConfig {
  Dataset tmpl;                 // structures, sexes, ages, proband slots reused
  int duplication = 1;          // k
  double allele_frequency = 0.004;
  HazardSpec hazard;
  HazardSpec female_hazard;     // used for females when non-empty (stratified truth)
  double beta_female = 0.0;     // proportional effect of the female indicator
  double censor_min = 15.0;
  double censor_max = 130.0;
  std::uint64_t rng_seed = 0;
  bool mask_genotypes = true;
  int max_attempts_per_family = 100000;  // rejection for >=1 affected
};

struct TrueRecord {
  std::string family_id;
  std::string individual_id;
  int genotype = 0;  // Genotype enum value
  double event_time = std::numeric_limits<double>::infinity();
};

struct SimulatedDataset {
  Dataset data;
  std::vector<TrueRecord> truth;
};

/// Founders from the Hardy-Weinberg prior, non-founders by Mendelian
/// transmission; deterministic per rng state.
std::vector<int> gene_drop(const Pedigree& p, double allele_frequency,
                           std::mt19937_64& rng);

double draw_event_time(const HazardSpec& h, double linear_predictor,
                       std::mt19937_64& rng);

/// Duplicate the template, gene-drop, draw event times for carriers, censor,
/// redraw each family until it contains an affected member (the ascertainment
/// rule), designate the proband, and mask genotypes when configured.
SimulatedDataset simulate(const SimulationConfig& cfg);

/// The synthetic 35-family template shipped with the tool: a mix of nuclear,
/// three-generation and looped structures with recorded follow-up ages,
/// sexes and proband slots. Carries one covariate column "female".
Dataset synthetic_template();

std::string serialize_truth(const std::vector<TrueRecord>& truth);

}  // namespace pedsurv
