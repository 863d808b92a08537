#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "pedsurv/genetic.hpp"
#include "pedsurv/pedigree.hpp"

namespace fixtures {

using namespace pedsurv;

inline IndividualRecord person(const std::string& id, const std::string& fa,
                               const std::string& mo, Sex sex,
                               Status status = Status::unaffected,
                               double age = 50.0) {
  IndividualRecord r;
  r.family_id = "1";
  r.individual_id = id;
  if (fa != "0") r.father_id = fa;
  if (mo != "0") r.mother_id = mo;
  r.sex = sex;
  r.status = status;
  r.age = age;
  return r;
}

/// The ten-individual mating-loop pedigree: two founder couples whose
/// children intermarried (5 x 7 -> 9, 6 x 8 -> 10). Affected: 1, 4, 6, 7, 9.
inline Pedigree mating_loop_pedigree() {
  const Sex M = Sex::male, F = Sex::female;
  const Status A = Status::affected;
  Pedigree p;
  p.family_id = "1";
  p.individuals = {
      person("1", "0", "0", M, A),  person("2", "0", "0", F),
      person("3", "0", "0", M),     person("4", "0", "0", F, A),
      person("5", "1", "2", M),     person("6", "1", "2", M, A),
      person("7", "3", "4", F, A),  person("8", "3", "4", F),
      person("9", "5", "7", F, A),  person("10", "6", "8", M),
  };
  p.resolve_links();
  return p;
}

/// Published posteriors for the mating-loop pedigree at q = 1% with
/// affected-implies-carrier evidence only (3-decimal rounded).
inline std::vector<std::array<double, 4>> mating_loop_posteriors() {
  return {{0.000, 0.494, 0.494, 0.012}, {0.965, 0.017, 0.017, 0.000},
          {0.965, 0.017, 0.017, 0.000}, {0.000, 0.495, 0.495, 0.010},
          {0.389, 0.591, 0.009, 0.012}, {0.000, 0.977, 0.012, 0.012},
          {0.000, 0.010, 0.975, 0.016}, {0.486, 0.009, 0.496, 0.009},
          {0.000, 0.203, 0.590, 0.207}, {0.365, 0.374, 0.129, 0.132}};
}

/// Random pedigree with up to max_size individuals; parents always precede
/// children so ancestry is acyclic by construction. Mating across existing
/// couples creates loops occasionally.
inline Pedigree random_pedigree(std::mt19937_64& rng, int max_size = 12) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Pedigree p;
  p.family_id = "r";
  auto add = [&](const std::string& fa, const std::string& mo, Sex sex) {
    auto r = person(std::to_string(p.individuals.size() + 1), fa, mo, sex);
    p.individuals.push_back(r);
    return static_cast<int>(p.individuals.size()) - 1;
  };
  int size = 2 + static_cast<int>(unif(rng) * (max_size - 1));
  size = std::min(size, max_size);
  add("0", "0", Sex::male);
  add("0", "0", Sex::female);
  while (static_cast<int>(p.individuals.size()) < size) {
    // pick a father and mother among existing individuals, or new founders
    std::vector<int> males, females;
    for (size_t i = 0; i < p.individuals.size(); ++i)
      (p.individuals[i].sex == Sex::male ? males : females).push_back(i);
    bool new_founder = unif(rng) < 0.25 &&
                       static_cast<int>(p.individuals.size()) + 2 <= size;
    if (new_founder) {
      add("0", "0", Sex::male);
      add("0", "0", Sex::female);
      continue;
    }
    if (males.empty() || females.empty()) {
      add("0", "0", males.empty() ? Sex::male : Sex::female);
      continue;
    }
    int fa = males[static_cast<size_t>(unif(rng) * males.size()) % males.size()];
    int mo = females[static_cast<size_t>(unif(rng) * females.size()) % females.size()];
    add(p.individuals[fa].individual_id, p.individuals[mo].individual_id,
        unif(rng) < 0.5 ? Sex::male : Sex::female);
  }
  p.resolve_links();
  return p;
}

inline std::vector<Geno4> random_evidence(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Geno4> ev(n);
  for (auto& e : ev) {
    for (double& x : e) x = 0.05 + 0.95 * unif(rng);
    double u = unif(rng);
    if (u < 0.2) e[0] = 0.0;                      // affected-style
    else if (u < 0.3) e[1] = e[2] = e[3] = 0.0;   // tested-negative-style
  }
  return ev;
}

}  // namespace fixtures
