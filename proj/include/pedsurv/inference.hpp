#pragma once

#include <utility>
#include <vector>

#include "pedsurv/genetic.hpp"
#include "pedsurv/pedigree.hpp"

namespace pedsurv {

/// Per-individual genotype posteriors plus the family log-evidence log P(ev).
struct PosteriorTable {
  std::vector<Geno4> marginals;
  double log_evidence = 0.0;
};

struct Clique {
  std::vector<int> vars;        // sorted individual indices
  std::vector<double> pot;      // 4^vars.size() table, var j strides by 4^j
};

/// Clique tree over the moralized, triangulated pedigree graph. Structural
/// factors (founder priors, transmission tables) are folded into the clique
/// potentials at build time; unary evidence is injected at propagation time.
struct JunctionTree {
  int n_vars = 0;
  std::vector<Clique> cliques;
  std::vector<std::pair<int, int>> edges;  // spanning forest
  std::vector<int> evidence_clique;        // per individual

  bool running_intersection_ok() const;
};

/// Moralize, triangulate (min-fill, lexicographic tie-break), extract maximal
/// cliques and connect them by a maximum spanning forest on separator sizes.
JunctionTree build_junction_tree(const Pedigree& p, const GeneticModel& gm);

/// Two-pass sum-product over the clique tree; exact marginals for every
/// individual. Throws InconsistentEvidence when P(ev) = 0.
PosteriorTable propagate(const JunctionTree& jt, const std::vector<Geno4>& ev);

/// Test oracle: marginals by explicit summation over all 4^n joint genotype
/// vectors. Throws TooLarge above 12 individuals.
PosteriorTable brute_force_marginals(const Pedigree& p, const GeneticModel& gm,
                                     const std::vector<Geno4>& ev);

/// Convenience: build evidence from affection status and molecular tests only
/// ("all affected are carriers, no other information") and run propagate.
PosteriorTable genotype_posteriors(const Pedigree& p, const GeneticModel& gm);

}  // namespace pedsurv
