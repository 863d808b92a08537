#include "pedsurv/genetic.hpp"

#include "pedsurv/errors.hpp"

namespace pedsurv {

Geno4 founder_prior(const GeneticModel& m) {
  const double q = m.allele_frequency;
  return {(1 - q) * (1 - q), q * (1 - q), (1 - q) * q, q * q};
}

double transmission_prob(int child, int father, int mother) {
  auto transmits = [](int parent, int allele) {
    double p = 0.0;
    if (paternal_allele(parent) == allele) p += 0.5;
    if (maternal_allele(parent) == allele) p += 0.5;
    return p;
  };
  return transmits(father, paternal_allele(child)) *
         transmits(mother, maternal_allele(child));
}

Geno4 build_evidence(const IndividualRecord& ind,
                     double carrier_censored_survival,
                     const EvidenceOptions& opts) {
  Geno4 ev = {1.0, 1.0, 1.0, 1.0};

  // molecular test compatibility (100% sensitivity/specificity)
  if (ind.genotype_test == GenotypeTest::negative)
    ev[g10] = ev[g01] = ev[g11] = 0.0;
  else if (ind.genotype_test == GenotypeTest::positive)
    ev[g00] = 0.0;

  if (!opts.exclude_phenotype) {
    if (ind.status == Status::affected) {
      ev[g00] = 0.0;  // affected individuals are carriers; T_i adds nothing
    } else if (ind.age > 0.0) {
      const double s = carrier_censored_survival;
      ev[g10] *= s;
      ev[g01] *= s;
      ev[g11] *= s;
    }
  } else if (opts.retain_carrier_constraint &&
             ind.status == Status::affected) {
    ev[g00] = 0.0;
  }

  if (ev[0] == 0.0 && ev[1] == 0.0 && ev[2] == 0.0 && ev[3] == 0.0)
    throw ContradictoryEvidence("all genotypes excluded for individual '" +
                                ind.individual_id + "' in family " +
                                ind.family_id);
  return ev;
}

}  // namespace pedsurv
