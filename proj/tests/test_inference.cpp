#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "pedsurv/errors.hpp"
#include "pedsurv/inference.hpp"

using namespace pedsurv;
using fixtures::person;

namespace {

std::vector<Geno4> uniform_evidence(int n) {
  return std::vector<Geno4>(n, Geno4{1, 1, 1, 1});
}

}  // namespace

TEST_CASE("nuclear family yields a single clique") {
  Pedigree p;
  p.family_id = "1";
  p.individuals = {person("f", "0", "0", Sex::male),
                   person("m", "0", "0", Sex::female),
                   person("c", "f", "m", Sex::male)};
  p.resolve_links();
  auto jt = build_junction_tree(p, {0.01, 0.0});
  REQUIRE(jt.cliques.size() == 1);
  CHECK(jt.cliques[0].vars == std::vector<int>{0, 1, 2});
  CHECK(jt.running_intersection_ok());
}

TEST_CASE("mating loop pedigree builds a valid multi-clique tree") {
  auto p = fixtures::mating_loop_pedigree();
  auto jt = build_junction_tree(p, {0.01, 0.0});
  CHECK(jt.cliques.size() >= 4);  // several overlapping family nuclei
  CHECK(jt.edges.size() == jt.cliques.size() - 1);
  CHECK(jt.running_intersection_ok());
  for (const auto& c : jt.cliques) CHECK(c.vars.size() <= 4);
}

TEST_CASE("three-generation chain keeps bounded cliques") {
  Pedigree p;
  p.family_id = "1";
  p.individuals = {person("1", "0", "0", Sex::male),
                   person("2", "0", "0", Sex::female),
                   person("3", "1", "2", Sex::female),
                   person("4", "0", "0", Sex::male),
                   person("5", "4", "3", Sex::male),
                   person("6", "0", "0", Sex::female),
                   person("7", "5", "6", Sex::female)};
  p.resolve_links();
  auto jt = build_junction_tree(p, {0.01, 0.0});
  CHECK(jt.running_intersection_ok());
  for (const auto& c : jt.cliques) CHECK(c.vars.size() <= 3);
}

TEST_CASE("propagate matches the published mating-loop posteriors") {
  auto p = fixtures::mating_loop_pedigree();
  auto post = genotype_posteriors(p, {0.01, 0.0});
  auto expected = fixtures::mating_loop_posteriors();
  for (int i = 0; i < 10; ++i)
    for (int s = 0; s < 4; ++s)
      CHECK(std::abs(post.marginals[i][s] - expected[i][s]) <= 0.0005);
}

TEST_CASE("single affected founder posterior is the carrier-restricted prior") {
  Pedigree p;
  p.family_id = "1";
  p.individuals = {person("1", "0", "0", Sex::male, Status::affected)};
  p.resolve_links();
  auto post = genotype_posteriors(p, {0.01, 0.0});
  CHECK(post.marginals[0][g00] == 0.0);
  CHECK(post.marginals[0][g10] == doctest::Approx(0.49749).epsilon(1e-4));
  CHECK(post.marginals[0][g01] == doctest::Approx(0.49749).epsilon(1e-4));
  CHECK(post.marginals[0][g11] == doctest::Approx(0.00503).epsilon(1e-3));
}

TEST_CASE("uniform evidence recovers gene-dropping priors for founders") {
  auto p = fixtures::mating_loop_pedigree();
  GeneticModel gm{0.02, 0.0};
  auto jt = build_junction_tree(p, gm);
  auto post = propagate(jt, uniform_evidence(p.size()));
  auto prior = founder_prior(gm);
  for (int i = 0; i < p.size(); ++i) {
    if (!p.is_founder(i)) continue;
    for (int s = 0; s < 4; ++s)
      CHECK(post.marginals[i][s] == doctest::Approx(prior[s]).epsilon(1e-12));
  }
  CHECK(post.log_evidence == doctest::Approx(0.0).scale(1).epsilon(1e-12));
}

TEST_CASE("brute force equals founder prior on a childless couple") {
  Pedigree p;
  p.family_id = "1";
  p.individuals = {person("1", "0", "0", Sex::male),
                   person("2", "0", "0", Sex::female)};
  p.resolve_links();
  GeneticModel gm{0.004, 0.0};
  auto post = brute_force_marginals(p, gm, uniform_evidence(2));
  auto prior = founder_prior(gm);
  for (int i = 0; i < 2; ++i)
    for (int s = 0; s < 4; ++s)
      CHECK(post.marginals[i][s] == doctest::Approx(prior[s]).epsilon(1e-14));
}

TEST_CASE("propagate vs brute force on random pedigrees and evidence") {
  std::mt19937_64 rng(20240901);
  for (int rep = 0; rep < 100; ++rep) {
    auto p = fixtures::random_pedigree(rng, 10);
    auto ev = fixtures::random_evidence(rng, p.size());
    GeneticModel gm{0.05, 0.0};
    PosteriorTable a, b;
    try {
      auto jt = build_junction_tree(p, gm);
      REQUIRE(jt.running_intersection_ok());
      a = propagate(jt, ev);
      b = brute_force_marginals(p, gm, ev);
    } catch (const InconsistentEvidence&) {
      // both routes must agree on impossibility
      CHECK_THROWS_AS(brute_force_marginals(p, gm, ev), InconsistentEvidence);
      continue;
    }
    CHECK(std::abs(a.log_evidence - b.log_evidence) <= 1e-10);
    for (int i = 0; i < p.size(); ++i)
      for (int s = 0; s < 4; ++s)
        CHECK(std::abs(a.marginals[i][s] - b.marginals[i][s]) <= 1e-10);
  }
}

TEST_CASE("affected individuals get zero mass on the non-carrier state") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = fixtures::random_pedigree(rng, 8);
    for (auto& ind : p.individuals)
      if (std::uniform_real_distribution<>(0, 1)(rng) < 0.3)
        ind.status = Status::affected;
    auto post = genotype_posteriors(p, {0.05, 0.0});
    for (int i = 0; i < p.size(); ++i) {
      if (p.individuals[i].status != Status::affected) continue;
      CHECK(post.marginals[i][g00] == 0.0);
    }
  }
}

TEST_CASE("posterior rows sum to one") {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = fixtures::random_pedigree(rng, 12);
    auto ev = fixtures::random_evidence(rng, p.size());
    try {
      auto jt = build_junction_tree(p, {0.01, 0.0});
      auto post = propagate(jt, ev);
      for (const auto& m : post.marginals)
        CHECK(m[0] + m[1] + m[2] + m[3] == doctest::Approx(1.0).epsilon(1e-12));
    } catch (const InconsistentEvidence&) {
    }
  }
}

TEST_CASE("relabeling individuals leaves posteriors unchanged") {
  auto p = fixtures::mating_loop_pedigree();
  auto post1 = genotype_posteriors(p, {0.01, 0.0});

  Pedigree q = p;
  for (auto& ind : q.individuals) {
    auto rename = [](std::optional<std::string>& id) {
      if (id) *id = "x" + *id;
    };
    ind.individual_id = "x" + ind.individual_id;
    rename(ind.father_id);
    rename(ind.mother_id);
  }
  q.resolve_links();
  auto post2 = genotype_posteriors(q, {0.01, 0.0});
  for (int i = 0; i < p.size(); ++i)
    for (int s = 0; s < 4; ++s)
      CHECK(post1.marginals[i][s] == doctest::Approx(post2.marginals[i][s]).epsilon(1e-14));
}

TEST_CASE("inconsistent and oversized inputs raise") {
  Pedigree p;
  p.family_id = "1";
  p.individuals = {person("1", "0", "0", Sex::male)};
  p.resolve_links();
  auto jt = build_junction_tree(p, {0.01, 0.0});
  CHECK_THROWS_AS(propagate(jt, {Geno4{0, 0, 0, 0}}), InconsistentEvidence);

  Pedigree big;
  big.family_id = "big";
  for (int i = 0; i < 13; ++i)
    big.individuals.push_back(person(std::to_string(i), "0", "0", Sex::male));
  big.resolve_links();
  CHECK_THROWS_AS(brute_force_marginals(big, {0.01, 0.0}, uniform_evidence(13)),
                  TooLarge);
}
