#pragma once

#include <optional>
#include <string>
#include <vector>

namespace pedsurv {

enum class Sex { male = 1, female = 2 };
enum class Status { unaffected = 0, affected = 1 };
enum class GenotypeTest { untested = 0, positive = 1, negative = 2 };

/// One row of a pedigree file. `age` is the age at diagnosis for affected
/// individuals and the age at last follow-up otherwise; age 0 on an
/// unaffected, untested individual means "no phenotype recorded".
struct IndividualRecord {
  std::string family_id;
  std::string individual_id;
  std::optional<std::string> father_id;
  std::optional<std::string> mother_id;
  Sex sex = Sex::male;
  double age = 0.0;
  Status status = Status::unaffected;
  GenotypeTest genotype_test = GenotypeTest::untested;
  bool is_proband = false;
  std::vector<double> covariates;

  bool is_founder() const { return !father_id.has_value(); }
  bool has_phenotype() const {
    return status == Status::affected || age > 0.0;
  }
};

/// One family: individuals plus parent links resolved to indices (-1 = none).
struct Pedigree {
  std::string family_id;
  std::vector<IndividualRecord> individuals;
  std::vector<int> father_idx;
  std::vector<int> mother_idx;

  int size() const { return static_cast<int>(individuals.size()); }
  bool is_founder(int i) const { return father_idx[i] < 0; }
  int find(const std::string& individual_id) const;

  /// Resolve ids to indices and check structural invariants.
  void resolve_links();
};

struct Dataset {
  std::vector<Pedigree> families;
  std::vector<std::string> covariate_names;

  int total_individuals() const;
};

struct ParseOptions {
  bool strict = false;  // promote validation diagnostics to errors
};

enum class DiagnosticCode {
  missing_proband,
  multiple_probands,
  ancestry_cycle,
  sex_inconsistent_parent,
  half_parent,
  covariate_length_mismatch,
  negative_age,
};

struct Diagnostic {
  DiagnosticCode code;
  std::string family_id;
  std::string individual_id;
  std::string message;
};

/// Parse the TSV pedigree format. Columns: family_id, individual_id,
/// father_id, mother_id (0 = absent), sex (1/2), age, status (0/1),
/// genotype_test (0/1/2), proband (0/1), then covariate columns.
/// A leading line starting with '#' names the covariate columns.
Dataset parse_dataset(const std::string& path, const ParseOptions& opts = {});
Dataset parse_dataset_text(const std::string& text, const ParseOptions& opts = {});

std::string serialize_dataset(const Dataset& ds);

std::vector<Diagnostic> validate(const Dataset& ds, bool require_probands);

/// Id of an individual on an ancestry cycle, or nullopt when acyclic.
std::optional<std::string> find_ancestry_cycle(const Pedigree& p);

}  // namespace pedsurv
