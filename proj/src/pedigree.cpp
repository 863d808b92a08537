#include "pedsurv/pedigree.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "pedsurv/errors.hpp"

namespace pedsurv {

int Pedigree::find(const std::string& individual_id) const {
  for (int i = 0; i < size(); ++i)
    if (individuals[i].individual_id == individual_id) return i;
  return -1;
}

void Pedigree::resolve_links() {
  const int n = size();
  father_idx.assign(n, -1);
  mother_idx.assign(n, -1);
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < n; ++i) {
    auto [it, inserted] = index.emplace(individuals[i].individual_id, i);
    if (!inserted)
      throw DuplicateIndividualId("duplicate individual id '" +
                                  individuals[i].individual_id +
                                  "' in family " + family_id);
  }
  for (int i = 0; i < n; ++i) {
    const auto& ind = individuals[i];
    if (ind.father_id.has_value() != ind.mother_id.has_value())
      throw MalformedRow("individual '" + ind.individual_id + "' in family " +
                         family_id + " has exactly one parent");
    if (!ind.father_id) continue;
    auto fit = index.find(*ind.father_id);
    auto mit = index.find(*ind.mother_id);
    if (fit == index.end())
      throw UnknownParent("unknown father '" + *ind.father_id +
                          "' of individual '" + ind.individual_id +
                          "' in family " + family_id);
    if (mit == index.end())
      throw UnknownParent("unknown mother '" + *ind.mother_id +
                          "' of individual '" + ind.individual_id +
                          "' in family " + family_id);
    if (individuals[fit->second].sex != Sex::male)
      throw SexInconsistentParent("father '" + *ind.father_id +
                                  "' of individual '" + ind.individual_id +
                                  "' is not male (family " + family_id + ")");
    if (individuals[mit->second].sex != Sex::female)
      throw SexInconsistentParent("mother '" + *ind.mother_id +
                                  "' of individual '" + ind.individual_id +
                                  "' is not female (family " + family_id + ")");
    father_idx[i] = fit->second;
    mother_idx[i] = mit->second;
  }
}

// Returns an individual lying on an ancestry cycle, if any. Mating loops are
// fine; the parent relation itself must be acyclic.
std::optional<std::string> find_ancestry_cycle(const Pedigree& p) {
  const int n = p.size();
  std::vector<int> state(n, 0);  // 0 unvisited, 1 on stack, 2 done
  std::vector<int> stack;
  for (int start = 0; start < n; ++start) {
    if (state[start]) continue;
    stack.push_back(start);
    while (!stack.empty()) {
      int v = stack.back();
      if (state[v] == 0) {
        state[v] = 1;
        for (int par : {p.father_idx[v], p.mother_idx[v]}) {
          if (par < 0) continue;
          if (state[par] == 1) return p.individuals[par].individual_id;
          if (state[par] == 0) stack.push_back(par);
        }
      } else {
        state[v] = 2;
        stack.pop_back();
      }
    }
  }
  return std::nullopt;
}

int Dataset::total_individuals() const {
  int n = 0;
  for (const auto& f : families) n += f.size();
  return n;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& s, int lineno, const char* what) {
  try {
    size_t idx = 0;
    double v = std::stod(s, &idx);
    if (idx != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw MalformedRow("line " + std::to_string(lineno) + ": bad " +
                       std::string(what) + " '" + s + "'");
  }
}

int parse_int(const std::string& s, int lineno, const char* what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw MalformedRow("line " + std::to_string(lineno) + ": bad " +
                       std::string(what) + " '" + s + "'");
  return v;
}

}  // namespace

Dataset parse_dataset_text(const std::string& text, const ParseOptions& opts) {
  Dataset ds;
  std::map<std::string, int> family_index;  // ordered by first appearance? use vector
  std::vector<std::string> family_order;
  std::unordered_map<std::string, std::vector<IndividualRecord>> rows;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  int ncov = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto cols = split_tabs(line.substr(1));
      ds.covariate_names.assign(cols.begin(), cols.end());
      continue;
    }
    auto cols = split_tabs(line);
    if (cols.size() < 9)
      throw MalformedRow("line " + std::to_string(lineno) + ": expected >= 9 columns, got " +
                         std::to_string(cols.size()));
    IndividualRecord r;
    r.family_id = cols[0];
    r.individual_id = cols[1];
    if (cols[2] != "0") r.father_id = cols[2];
    if (cols[3] != "0") r.mother_id = cols[3];
    int sex = parse_int(cols[4], lineno, "sex");
    if (sex != 1 && sex != 2)
      throw MalformedRow("line " + std::to_string(lineno) + ": sex must be 1 or 2");
    r.sex = static_cast<Sex>(sex);
    r.age = parse_double(cols[5], lineno, "age");
    if (!(r.age >= 0.0) || !std::isfinite(r.age))
      throw MalformedRow("line " + std::to_string(lineno) + ": age must be finite and >= 0");
    int status = parse_int(cols[6], lineno, "status");
    if (status != 0 && status != 1)
      throw MalformedRow("line " + std::to_string(lineno) + ": status must be 0 or 1");
    r.status = static_cast<Status>(status);
    int gt = parse_int(cols[7], lineno, "genotype_test");
    if (gt < 0 || gt > 2)
      throw MalformedRow("line " + std::to_string(lineno) + ": genotype_test must be 0, 1 or 2");
    r.genotype_test = static_cast<GenotypeTest>(gt);
    int pb = parse_int(cols[8], lineno, "proband");
    if (pb != 0 && pb != 1)
      throw MalformedRow("line " + std::to_string(lineno) + ": proband must be 0 or 1");
    r.is_proband = pb == 1;
    for (size_t c = 9; c < cols.size(); ++c)
      r.covariates.push_back(parse_double(cols[c], lineno, "covariate"));
    if (ncov < 0) ncov = static_cast<int>(r.covariates.size());
    if (static_cast<int>(r.covariates.size()) != ncov)
      throw MalformedRow("line " + std::to_string(lineno) +
                         ": covariate count differs from previous rows");
    if (rows.find(r.family_id) == rows.end()) family_order.push_back(r.family_id);
    rows[r.family_id].push_back(std::move(r));
  }
  if (ncov > 0 && ds.covariate_names.empty())
    for (int c = 0; c < ncov; ++c)
      ds.covariate_names.push_back("cov" + std::to_string(c + 1));
  if (ncov >= 0 && static_cast<int>(ds.covariate_names.size()) != ncov)
    throw MalformedRow("covariate header names " +
                       std::to_string(ds.covariate_names.size()) +
                       " columns but rows carry " + std::to_string(ncov));

  for (const auto& fid : family_order) {
    Pedigree p;
    p.family_id = fid;
    p.individuals = std::move(rows[fid]);
    p.resolve_links();
    if (auto cyc = find_ancestry_cycle(p))
      throw AncestryCycle("individual '" + *cyc +
                          "' is its own ancestor in family " + p.family_id);
    ds.families.push_back(std::move(p));
  }
  if (opts.strict) {
    auto diags = validate(ds, false);
    if (!diags.empty()) throw Error("strict mode: " + diags.front().message);
  }
  return ds;
}

Dataset parse_dataset(const std::string& path, const ParseOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset_text(buf.str(), opts);
}

std::string serialize_dataset(const Dataset& ds) {
  std::ostringstream out;
  out.precision(17);
  if (!ds.covariate_names.empty()) {
    out << '#';
    for (size_t i = 0; i < ds.covariate_names.size(); ++i)
      out << (i ? "\t" : "") << ds.covariate_names[i];
    out << '\n';
  }
  for (const auto& fam : ds.families) {
    for (const auto& r : fam.individuals) {
      out << r.family_id << '\t' << r.individual_id << '\t'
          << (r.father_id ? *r.father_id : "0") << '\t'
          << (r.mother_id ? *r.mother_id : "0") << '\t'
          << static_cast<int>(r.sex) << '\t' << r.age << '\t'
          << static_cast<int>(r.status) << '\t'
          << static_cast<int>(r.genotype_test) << '\t'
          << (r.is_proband ? 1 : 0);
      for (double z : r.covariates) out << '\t' << z;
      out << '\n';
    }
  }
  return out.str();
}

std::vector<Diagnostic> validate(const Dataset& ds, bool require_probands) {
  std::vector<Diagnostic> out;
  std::unordered_set<std::string> seen_families;
  size_t ncov = ds.covariate_names.size();
  for (const auto& fam : ds.families) {
    if (!seen_families.insert(fam.family_id).second)
      out.push_back({DiagnosticCode::ancestry_cycle, fam.family_id, "",
                     "duplicate family id '" + fam.family_id + "'"});
    int probands = 0;
    for (const auto& r : fam.individuals) {
      if (r.is_proband) ++probands;
      if (r.covariates.size() != ncov)
        out.push_back({DiagnosticCode::covariate_length_mismatch, fam.family_id,
                       r.individual_id, "covariate vector length mismatch for '" +
                       r.individual_id + "'"});
      if (!(r.age >= 0.0))
        out.push_back({DiagnosticCode::negative_age, fam.family_id,
                       r.individual_id, "negative age for '" + r.individual_id + "'"});
    }
    if (auto cyc = find_ancestry_cycle(fam))
      out.push_back({DiagnosticCode::ancestry_cycle, fam.family_id, *cyc,
                     "individual '" + *cyc + "' is its own ancestor"});
    if (probands > 1)
      out.push_back({DiagnosticCode::multiple_probands, fam.family_id, "",
                     "family " + fam.family_id + " has " +
                     std::to_string(probands) + " probands"});
    if (require_probands && probands != 1)
      out.push_back({DiagnosticCode::missing_proband, fam.family_id, "",
                     "family " + fam.family_id + " needs exactly one proband, has " +
                     std::to_string(probands)});
  }
  return out;
}

}  // namespace pedsurv
