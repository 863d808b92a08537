#include <doctest.h>

#include <cmath>
#include <set>

#include "pedsurv/errors.hpp"
#include "pedsurv/simulate.hpp"

using namespace pedsurv;

namespace {

SimulationConfig base_cfg(std::uint64_t seed) {
  SimulationConfig cfg;
  cfg.tmpl = synthetic_template();
  cfg.duplication = 1;
  cfg.allele_frequency = 0.004;
  cfg.hazard.breakpoints = {20, 40, 60};
  cfg.hazard.rates = {0.0, 0.02, 0.10, 0.05};
  cfg.rng_seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("piecewise hazard integrates the rate table") {
  HazardSpec h;
  h.breakpoints = {20, 40, 60};
  h.rates = {0.0, 0.02, 0.10, 0.05};
  CHECK(h.cum_hazard(10) == 0.0);
  CHECK(h.cum_hazard(20) == 0.0);
  CHECK(h.cum_hazard(40) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(h.cum_hazard(60) == doctest::Approx(2.4).epsilon(1e-14));
  CHECK(h.cum_hazard(80) == doctest::Approx(3.4).epsilon(1e-14));
}

TEST_CASE("invert is the exact inverse of the cumulative hazard") {
  HazardSpec h;
  h.breakpoints = {20, 40, 60};
  h.rates = {0.0, 0.02, 0.10, 0.05};
  for (double e : {0.05, 0.3, 0.41, 1.0, 2.41, 3.0}) {
    double t = h.invert(e, 0.0);
    CHECK(h.cum_hazard(t) == doctest::Approx(e).epsilon(1e-10));
  }
  // the linear predictor rescales the time axis
  double t0 = h.invert(0.8, 0.0);
  double t1 = h.invert(0.8 * std::exp(0.5), 0.5);
  CHECK(t0 == doctest::Approx(t1).epsilon(1e-12));
}

TEST_CASE("event time draws match the target survival function") {
  HazardSpec h;
  h.breakpoints = {20, 40, 60};
  h.rates = {0.0, 0.02, 0.10, 0.05};
  std::mt19937_64 rng(99);
  const int n = 100000;
  int beyond40 = 0, before20 = 0;
  for (int i = 0; i < n; ++i) {
    double t = draw_event_time(h, 0.0, rng);
    if (t < 20.0) ++before20;
    if (t > 40.0) ++beyond40;
  }
  CHECK(before20 == 0);
  double p = std::exp(-0.4);
  double se = std::sqrt(p * (1 - p) / n);
  CHECK(std::abs(static_cast<double>(beyond40) / n - p) <= 4 * se);
}

TEST_CASE("gene drop respects the allele frequency in founders") {
  auto tmpl = synthetic_template();
  const auto& fam = tmpl.families[0];
  std::mt19937_64 rng(7);
  const int n = 100000;
  const double q = 0.05;
  int carrier_alleles = 0, founder_alleles = 0;
  for (int i = 0; i < n; ++i) {
    auto g = gene_drop(fam, q, rng);
    for (int j = 0; j < fam.size(); ++j) {
      if (!fam.is_founder(j)) continue;
      carrier_alleles += (g[j] & 1) + (g[j] >> 1);
      founder_alleles += 2;
    }
  }
  double freq = static_cast<double>(carrier_alleles) / founder_alleles;
  double se = std::sqrt(q * (1 - q) / founder_alleles);
  CHECK(std::abs(freq - q) <= 4 * se);
}

TEST_CASE("gene drop degenerate frequencies") {
  auto tmpl = synthetic_template();
  std::mt19937_64 rng(3);
  auto g0 = gene_drop(tmpl.families[0], 0.0, rng);
  for (int x : g0) CHECK(x == 0);
  auto g1 = gene_drop(tmpl.families[0], 1.0, rng);
  for (int x : g1) CHECK(x == 3);
}

TEST_CASE("the shipped template has 35 families with probands and covariates") {
  auto tmpl = synthetic_template();
  CHECK(tmpl.families.size() == 35);
  CHECK(tmpl.covariate_names == std::vector<std::string>{"female"});
  for (const auto& fam : tmpl.families) {
    int probands = 0;
    for (const auto& ind : fam.individuals) {
      probands += ind.is_proband ? 1 : 0;
      REQUIRE(ind.covariates.size() == 1);
      CHECK((ind.covariates[0] == 0.0 || ind.covariates[0] == 1.0));
      CHECK(ind.covariates[0] == (ind.sex == Sex::female ? 1.0 : 0.0));
    }
    CHECK(probands == 1);
  }
}

TEST_CASE("simulation yields k x 35 ascertained families with probands") {
  auto cfg = base_cfg(42);
  cfg.duplication = 3;
  auto sim = simulate(cfg);
  CHECK(sim.data.families.size() == 105);
  std::set<std::string> ids;
  for (const auto& fam : sim.data.families) {
    CHECK(ids.insert(fam.family_id).second);
    int affected = 0, probands = 0;
    for (const auto& ind : fam.individuals) {
      affected += ind.status == Status::affected ? 1 : 0;
      probands += ind.is_proband ? 1 : 0;
      if (ind.is_proband) CHECK(ind.status == Status::affected);
    }
    CHECK(affected >= 1);
    CHECK(probands == 1);
  }
  CHECK(sim.truth.size() == static_cast<size_t>(sim.data.total_individuals()));
}

TEST_CASE("same seed reproduces the dataset byte for byte") {
  auto a = simulate(base_cfg(1234));
  auto b = simulate(base_cfg(1234));
  CHECK(serialize_dataset(a.data) == serialize_dataset(b.data));
  CHECK(serialize_truth(a.truth) == serialize_truth(b.truth));
  auto c = simulate(base_cfg(1235));
  CHECK(serialize_dataset(a.data) != serialize_dataset(c.data));
}

TEST_CASE("unmasked genotypes expose carriers consistently with affection") {
  auto cfg = base_cfg(8);
  cfg.mask_genotypes = false;
  auto sim = simulate(cfg);
  size_t k = 0;
  for (const auto& fam : sim.data.families)
    for (const auto& ind : fam.individuals) {
      const auto& tr = sim.truth[k++];
      CHECK(tr.individual_id == ind.individual_id);
      bool carrier = tr.genotype != 0;
      CHECK(ind.genotype_test ==
            (carrier ? GenotypeTest::positive : GenotypeTest::negative));
      if (ind.status == Status::affected) CHECK(carrier);
    }
}

TEST_CASE("masked genotypes leave everyone untested") {
  auto sim = simulate(base_cfg(8));
  for (const auto& fam : sim.data.families)
    for (const auto& ind : fam.individuals)
      CHECK(ind.genotype_test == GenotypeTest::untested);
}

TEST_CASE("affected ages are event times and censored ages respect the window") {
  auto sim = simulate(base_cfg(55));
  size_t k = 0;
  for (const auto& fam : sim.data.families)
    for (const auto& ind : fam.individuals) {
      const auto& tr = sim.truth[k++];
      if (ind.status == Status::affected) {
        CHECK(ind.age == doctest::Approx(tr.event_time).epsilon(1e-12));
        CHECK(ind.age >= 20.0);
      } else if (ind.age > 0.0) {
        // capped by the template follow-up age (oldest slot 99 plus +-6 jitter)
        CHECK(ind.age <= 105.0);
        if (std::isfinite(tr.event_time)) CHECK(ind.age < tr.event_time);
      }
    }
}

TEST_CASE("impossible ascertainment raises") {
  auto cfg = base_cfg(1);
  cfg.allele_frequency = 0.0;  // no carriers, no affected, ever
  cfg.max_attempts_per_family = 50;
  CHECK_THROWS_AS(simulate(cfg), NoFamiliesAscertained);
}

TEST_CASE("a protective covariate effect reduces female affection rates") {
  auto cfg = base_cfg(17);
  cfg.allele_frequency = 0.05;  // plenty of carriers
  cfg.duplication = 20;
  cfg.beta_female = -2.0;
  auto sim = simulate(cfg);
  size_t k = 0;
  int aff_f = 0, n_f = 0, aff_m = 0, n_m = 0;
  for (const auto& fam : sim.data.families)
    for (const auto& ind : fam.individuals) {
      const auto& tr = sim.truth[k++];
      if (tr.genotype == 0) continue;
      if (ind.sex == Sex::female) {
        ++n_f;
        aff_f += ind.status == Status::affected ? 1 : 0;
      } else {
        ++n_m;
        aff_m += ind.status == Status::affected ? 1 : 0;
      }
    }
  REQUIRE(n_f > 50);
  REQUIRE(n_m > 50);
  CHECK(static_cast<double>(aff_f) / n_f < static_cast<double>(aff_m) / n_m);
}
