#pragma once

#include <array>
#include <string>

#include "pedsurv/pedigree.hpp"

namespace pedsurv {

// Genotype states are ordered-allele pairs (paternal, maternal):
// index 0 = 00, 1 = 10, 2 = 01, 3 = 11. Carrier <=> state != 0.
enum Genotype : int { g00 = 0, g10 = 1, g01 = 2, g11 = 3 };

inline int paternal_allele(int g) { return g & 1; }
inline int maternal_allele(int g) { return g >> 1; }
inline bool is_carrier(int g) { return g != g00; }

using Geno4 = std::array<double, 4>;

struct GeneticModel {
  double allele_frequency = 0.0;  // q, required in (0,1)
  double de_novo_rate = 0.0;      // fixed 0
};

/// Hardy-Weinberg founder genotype distribution over (00, 10, 01, 11).
Geno4 founder_prior(const GeneticModel& m);

/// Mendelian P(child | father, mother); each parent transmits each of
/// its two alleles with probability 1/2.
double transmission_prob(int child, int father, int mother);

/// Per-individual likelihood vector over genotypes. `carrier_censored_survival`
/// is P(T, delta=0 | carrier) = exp(-Lambda(T) e^{Z beta}) under the current
/// model iterate; pass 1.0 when no survival model is in play.
/// With exclude_phenotype, status and age contribute nothing and only the
/// molecular test compatibility remains (optionally also the
/// affection-implies-carrier constraint).
struct EvidenceOptions {
  bool exclude_phenotype = false;
  bool retain_carrier_constraint = false;  // only meaningful when excluding
};

Geno4 build_evidence(const IndividualRecord& ind,
                     double carrier_censored_survival,
                     const EvidenceOptions& opts = {});

}  // namespace pedsurv
