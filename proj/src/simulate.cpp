#include "pedsurv/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "pedsurv/errors.hpp"
#include "pedsurv/rng.hpp"

namespace pedsurv {

double HazardSpec::cum_hazard(double t) const {
  double acc = 0.0, lo = 0.0;
  for (size_t j = 0; j < rates.size(); ++j) {
    double hi = j < breakpoints.size() ? breakpoints[j]
                                       : std::numeric_limits<double>::infinity();
    if (t <= lo) break;
    acc += rates[j] * (std::min(t, hi) - lo);
    lo = hi;
  }
  return acc;
}

double HazardSpec::invert(double e, double lp) const {
  double target = e / std::exp(lp);  // solve Lambda(t) = target
  double acc = 0.0, lo = 0.0;
  for (size_t j = 0; j < rates.size(); ++j) {
    double hi = j < breakpoints.size() ? breakpoints[j]
                                       : std::numeric_limits<double>::infinity();
    double piece = rates[j] * (hi - lo);
    if (rates[j] > 0.0 && (target <= acc + piece || !std::isfinite(hi)))
      return lo + (target - acc) / rates[j];
    acc += piece;
    lo = hi;
  }
  return std::numeric_limits<double>::infinity();
}

std::vector<int> gene_drop(const Pedigree& p, double allele_frequency,
                           std::mt19937_64& rng) {
  GeneticModel gm{allele_frequency, 0.0};
  const Geno4 prior = founder_prior(gm);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = p.size();
  std::vector<int> geno(n, -1);

  // parents precede children only by convention, so resolve recursively
  std::vector<int> order;
  std::vector<int> mark(n, 0);
  std::function<void(int)> visit = [&](int i) {
    if (mark[i]) return;
    mark[i] = 1;
    if (!p.is_founder(i)) {
      visit(p.father_idx[i]);
      visit(p.mother_idx[i]);
    }
    order.push_back(i);
  };
  for (int i = 0; i < n; ++i) visit(i);

  auto draw4 = [&](const Geno4& probs) {
    double u = unif(rng), acc = 0.0;
    for (int s = 0; s < 4; ++s) {
      acc += probs[s];
      if (u <= acc) return s;
    }
    return 3;
  };
  for (int i : order) {
    if (p.is_founder(i)) {
      geno[i] = draw4(prior);
    } else {
      int f = geno[p.father_idx[i]], m = geno[p.mother_idx[i]];
      int pat = unif(rng) < 0.5 ? paternal_allele(f) : maternal_allele(f);
      int mat = unif(rng) < 0.5 ? paternal_allele(m) : maternal_allele(m);
      geno[i] = pat + 2 * mat;
    }
  }
  return geno;
}

double draw_event_time(const HazardSpec& h, double linear_predictor,
                       std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  return h.invert(expo(rng), linear_predictor);
}

SimulatedDataset simulate(const SimulationConfig& cfg) {
  SimulatedDataset out;
  out.data.covariate_names = {"female"};
  const int nf = static_cast<int>(cfg.tmpl.families.size());
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int rep = 0; rep < cfg.duplication; ++rep) {
    for (int f = 0; f < nf; ++f) {
      const Pedigree& tp = cfg.tmpl.families[f];
      auto rng = child_rng(cfg.rng_seed, static_cast<std::uint64_t>(rep) * nf + f);
      const int n = tp.size();

      std::vector<int> geno;
      std::vector<double> event_time(n), age(n);
      std::vector<bool> affected(n);
      bool ascertained = false;
      for (int attempt = 0; attempt < cfg.max_attempts_per_family; ++attempt) {
        geno = gene_drop(tp, cfg.allele_frequency, rng);
        ascertained = false;
        for (int i = 0; i < n; ++i) {
          const auto& ind = tp.individuals[i];
          bool female = ind.sex == Sex::female;
          event_time[i] = std::numeric_limits<double>::infinity();
          if (is_carrier(geno[i])) {
            const HazardSpec& h =
                (female && !cfg.female_hazard.rates.empty()) ? cfg.female_hazard
                                                             : cfg.hazard;
            double lp = cfg.beta_female * (female ? 1.0 : 0.0);
            event_time[i] = draw_event_time(h, lp, rng);
          }
          if (ind.age > 0.0) {
            double u = cfg.censor_min +
                       (cfg.censor_max - cfg.censor_min) * unif(rng);
            double censor = std::min(ind.age, u);
            if (event_time[i] <= censor) {
              affected[i] = true;
              age[i] = event_time[i];
            } else {
              affected[i] = false;
              age[i] = censor;
            }
          } else {
            affected[i] = false;  // no recorded follow-up
            age[i] = 0.0;
          }
          ascertained = ascertained || affected[i];
        }
        if (ascertained) break;
      }
      if (!ascertained) continue;  // family cannot be ascertained

      // proband: the template slot when affected in this replicate, otherwise
      // a uniformly random affected member
      int proband = -1;
      for (int i = 0; i < n; ++i)
        if (tp.individuals[i].is_proband && affected[i]) proband = i;
      if (proband < 0) {
        std::vector<int> aff;
        for (int i = 0; i < n; ++i)
          if (affected[i]) aff.push_back(i);
        proband = aff[static_cast<size_t>(unif(rng) * aff.size()) % aff.size()];
      }

      Pedigree fam;
      fam.family_id = tp.family_id + "_" + std::to_string(rep + 1);
      for (int i = 0; i < n; ++i) {
        IndividualRecord r = tp.individuals[i];
        r.family_id = fam.family_id;
        r.age = age[i];
        r.status = affected[i] ? Status::affected : Status::unaffected;
        r.is_proband = i == proband;
        r.genotype_test = cfg.mask_genotypes
                              ? GenotypeTest::untested
                              : (is_carrier(geno[i]) ? GenotypeTest::positive
                                                     : GenotypeTest::negative);
        r.covariates = {r.sex == Sex::female ? 1.0 : 0.0};
        fam.individuals.push_back(std::move(r));
        out.truth.push_back({fam.family_id, tp.individuals[i].individual_id,
                             geno[i], event_time[i]});
      }
      fam.resolve_links();
      out.data.families.push_back(std::move(fam));
    }
  }
  if (out.data.families.empty())
    throw NoFamiliesAscertained(
        "no replicate family acquired an affected member");
  return out;
}

std::string serialize_truth(const std::vector<TrueRecord>& truth) {
  std::ostringstream os;
  os << "family_id\tindividual_id\ttrue_genotype\ttrue_event_time\n";
  os.precision(17);
  for (const auto& t : truth) {
    os << t.family_id << '\t' << t.individual_id << '\t' << t.genotype << '\t';
    if (std::isfinite(t.event_time))
      os << t.event_time;
    else
      os << "inf";
    os << '\n';
  }
  return os.str();
}

namespace {

// deterministic age jitter in [-spread, spread)
double jitter(std::uint64_t key, double spread) {
  return (static_cast<double>(splitmix64(key) >> 11) / 9007199254740992.0 * 2.0 -
          1.0) * spread;
}

struct TemplateBuilder {
  Pedigree fam;
  int fam_index;

  void add(const std::string& id, const std::string& fa, const std::string& mo,
           Sex sex, double age, bool proband = false) {
    IndividualRecord r;
    r.family_id = fam.family_id;
    r.individual_id = id;
    if (fa != "0") r.father_id = fa;
    if (mo != "0") r.mother_id = mo;
    r.sex = sex;
    r.age = std::max(1.0, age + jitter(fam_index * 131 + fam.individuals.size(), 6.0));
    r.is_proband = proband;
    r.covariates = {sex == Sex::female ? 1.0 : 0.0};
    fam.individuals.push_back(std::move(r));
  }
};

}  // namespace

Dataset synthetic_template() {
  Dataset ds;
  ds.covariate_names = {"female"};
  for (int f = 0; f < 35; ++f) {
    TemplateBuilder b;
    b.fam.family_id = "fam" + std::to_string(f + 1);
    b.fam_index = f;
    const Sex M = Sex::male, F = Sex::female;
    switch (f % 5) {
      case 0:  // three generations, three sibships
        b.add("91", "0", "0", M, 98);
        b.add("92", "0", "0", F, 96);
        b.add("1", "91", "92", M, 85);
        b.add("2", "0", "0", F, 83);
        b.add("3", "1", "2", M, 62, true);
        b.add("4", "0", "0", F, 60);
        b.add("5", "1", "2", F, 58);
        b.add("6", "0", "0", M, 61);
        b.add("7", "1", "2", M, 55);
        b.add("8", "0", "0", F, 54);
        b.add("9", "3", "4", M, 38);
        b.add("10", "3", "4", F, 35);
        b.add("11", "3", "4", M, 33);
        b.add("12", "6", "5", F, 36);
        b.add("13", "6", "5", M, 31);
        b.add("14", "7", "8", F, 30);
        b.add("15", "7", "8", M, 28);
        b.add("16", "7", "8", F, 25);
        b.add("17", "1", "2", M, 78);
        b.add("18", "1", "2", F, 75);
        b.add("19", "0", "0", F, 74);
        b.add("20", "17", "19", M, 52);
        b.add("21", "17", "19", F, 49);
        b.add("22", "17", "19", M, 46);
        b.add("26", "17", "19", F, 43);
        b.add("23", "0", "0", M, 77);
        b.add("24", "23", "18", F, 51);
        b.add("25", "23", "18", M, 48);
        b.add("27", "23", "18", F, 45);
        break;
      case 1:  // four generations through two lines
        b.add("91", "0", "0", M, 99);
        b.add("92", "0", "0", F, 97);
        b.add("1", "91", "92", M, 90);
        b.add("2", "0", "0", F, 88);
        b.add("3", "1", "2", M, 68, true);
        b.add("4", "0", "0", F, 66);
        b.add("5", "1", "2", F, 64);
        b.add("6", "0", "0", M, 67);
        b.add("7", "3", "4", M, 45);
        b.add("8", "0", "0", F, 44);
        b.add("9", "3", "4", F, 42);
        b.add("10", "3", "4", M, 40);
        b.add("11", "6", "5", F, 43);
        b.add("12", "6", "5", M, 39);
        b.add("13", "0", "0", M, 45);
        b.add("14", "7", "8", M, 24);
        b.add("15", "7", "8", F, 21);
        b.add("16", "13", "11", F, 22);
        b.add("17", "13", "11", M, 19);
        b.add("18", "6", "5", F, 37);
        b.add("19", "0", "0", M, 38);
        b.add("20", "19", "18", M, 16);
        b.add("21", "1", "2", F, 79);
        b.add("22", "1", "2", M, 76);
        b.add("23", "0", "0", M, 78);
        b.add("24", "23", "21", F, 54);
        b.add("25", "23", "21", M, 51);
        b.add("26", "23", "21", F, 47);
        b.add("30", "23", "21", M, 44);
        b.add("27", "0", "0", F, 73);
        b.add("28", "22", "27", M, 50);
        b.add("29", "22", "27", F, 46);
        b.add("31", "22", "27", M, 43);
        break;
      case 2:  // large three-generation kindred, four sibships
        b.add("91", "0", "0", M, 97);
        b.add("92", "0", "0", F, 95);
        b.add("2", "91", "92", F, 89);
        b.add("1", "0", "0", M, 92);
        b.add("3", "1", "2", F, 70, true);
        b.add("4", "0", "0", M, 71);
        b.add("5", "1", "2", M, 67);
        b.add("6", "0", "0", F, 64);
        b.add("7", "1", "2", F, 62);
        b.add("8", "0", "0", M, 65);
        b.add("9", "1", "2", M, 60);
        b.add("10", "0", "0", F, 58);
        b.add("11", "4", "3", F, 48);
        b.add("12", "4", "3", M, 45);
        b.add("13", "4", "3", F, 42);
        b.add("14", "5", "6", M, 44);
        b.add("15", "5", "6", F, 40);
        b.add("16", "8", "7", F, 39);
        b.add("17", "8", "7", M, 36);
        b.add("18", "8", "7", F, 34);
        b.add("19", "9", "10", M, 33);
        b.add("20", "9", "10", F, 30);
        b.add("21", "0", "0", M, 49);
        b.add("22", "21", "11", M, 26);
        b.add("23", "21", "11", F, 23);
        b.add("24", "9", "10", M, 28);
        b.add("25", "1", "2", M, 77);
        b.add("26", "1", "2", F, 74);
        b.add("27", "0", "0", F, 72);
        b.add("28", "25", "27", M, 52);
        b.add("29", "25", "27", F, 49);
        b.add("33", "25", "27", M, 46);
        b.add("30", "0", "0", M, 75);
        b.add("31", "30", "26", F, 47);
        b.add("32", "30", "26", M, 44);
        b.add("34", "30", "26", F, 41);
        break;
      case 3:  // mating loop: two sibships intermarried, with offspring
        b.add("91", "0", "0", M, 99);
        b.add("92", "0", "0", F, 95);
        b.add("1", "0", "0", M, 87);
        b.add("2", "0", "0", F, 84);
        b.add("3", "91", "92", M, 86);
        b.add("4", "0", "0", F, 82);
        b.add("5", "1", "2", M, 60, true);
        b.add("6", "1", "2", M, 57);
        b.add("7", "1", "2", F, 55);
        b.add("8", "3", "4", F, 58);
        b.add("9", "3", "4", F, 54);
        b.add("10", "3", "4", M, 56);
        b.add("11", "5", "8", F, 35);
        b.add("12", "5", "8", M, 32);
        b.add("13", "6", "9", M, 31);
        b.add("14", "6", "9", F, 28);
        b.add("15", "0", "0", F, 53);
        b.add("16", "10", "15", M, 30);
        b.add("17", "10", "15", F, 27);
        b.add("18", "0", "0", M, 34);
        b.add("19", "18", "11", F, 14);
        b.add("20", "1", "2", F, 76);
        b.add("21", "3", "4", M, 78);
        b.add("22", "0", "0", M, 79);
        b.add("23", "22", "20", F, 51);
        b.add("24", "22", "20", M, 48);
        b.add("28", "22", "20", F, 45);
        b.add("25", "0", "0", F, 71);
        b.add("26", "21", "25", M, 49);
        b.add("27", "21", "25", F, 45);
        b.add("29", "21", "25", M, 42);
        break;
      default:  // four generations, broad top sibship
        b.add("91", "0", "0", M, 98);
        b.add("92", "0", "0", F, 96);
        b.add("1", "91", "92", M, 94);
        b.add("2", "0", "0", F, 91);
        b.add("3", "1", "2", F, 72);
        b.add("4", "0", "0", M, 74);
        b.add("5", "1", "2", M, 69);
        b.add("6", "0", "0", F, 66);
        b.add("7", "1", "2", F, 65);
        b.add("8", "4", "3", M, 50, true);
        b.add("9", "0", "0", F, 48);
        b.add("10", "4", "3", F, 46);
        b.add("11", "5", "6", M, 44);
        b.add("12", "0", "0", F, 42);
        b.add("13", "5", "6", F, 41);
        b.add("14", "8", "9", F, 26);
        b.add("15", "8", "9", M, 23);
        b.add("16", "11", "12", M, 21);
        b.add("17", "11", "12", F, 18);
        b.add("18", "0", "0", M, 47);
        b.add("19", "18", "10", F, 24);
        b.add("20", "18", "10", M, 20);
        b.add("21", "0", "0", M, 43);
        b.add("22", "21", "13", F, 17);
        b.add("23", "1", "2", M, 78);
        b.add("24", "1", "2", F, 74);
        b.add("25", "0", "0", F, 76);
        b.add("26", "23", "25", M, 53);
        b.add("27", "23", "25", F, 50);
        b.add("31", "23", "25", M, 47);
        b.add("28", "0", "0", M, 72);
        b.add("29", "28", "24", F, 49);
        b.add("30", "28", "24", M, 45);
        b.add("32", "28", "24", F, 42);
        break;
    }
    b.fam.resolve_links();
    ds.families.push_back(std::move(b.fam));
  }
  return ds;
}

}  // namespace pedsurv
