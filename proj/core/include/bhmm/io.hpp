#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bhmm/model.hpp"

namespace bhmm {

/// One row of a methylation table: a genomic bin with counts for every column pair.
struct MethylationRecord {
  std::string chrom;
  std::uint64_t bin_start = 0;
  std::string context;
  std::vector<Observation> counts;

  friend bool operator==(const MethylationRecord&, const MethylationRecord&) = default;
};

struct LoadOptions {
  std::optional<std::string> context_filter;
  /// Sum column pairs whose labels share the prefix before the first '.'.
  bool merge_replicates = false;
  /// bin_start must be a multiple of this; 0 disables the check.
  std::uint64_t bin_size = 100;
};

struct MethylationData {
  std::vector<std::string> cells;  ///< label per cell after merging
  Sequence sequence;
  std::size_t rows_read = 0;  ///< data rows before filtering
  std::string digest;         ///< FNV-1a 64 of the raw input, hex
};

/// Tab-separated, header `chrom bin_start context cov_<a> meth_<a> [cov_<b> meth_<b> ...]`.
/// Blank lines and lines starting with '#' are skipped. Throws DataError with the line number.
MethylationData read_methylation_tsv(std::istream& in, const LoadOptions& opts = {});
MethylationData load_methylation_tsv(const std::filesystem::path& path, const LoadOptions& opts = {});

void write_methylation_tsv(std::ostream& out, const std::vector<std::string>& cells,
                           const std::vector<MethylationRecord>& records);

/// Records for consecutive bins of one chromosome.
std::vector<MethylationRecord> records_from_sequence(const Sequence& seq, const std::string& chrom,
                                                     std::uint64_t bin_size,
                                                     const std::string& context);

std::string fnv1a_hex(std::uint64_t hash);

inline constexpr int kModelSchemaVersion = 1;

struct Provenance {
  std::uint64_t seed = 0;
  std::string input_digest;
  std::string algorithm;
  std::optional<std::string> timestamp;
  std::map<std::string, std::string> config;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ModelFile {
  int schema_version = kModelSchemaVersion;
  int granularity = 0;  ///< 0 when no feature map was used
  std::vector<std::string> cells;
  HmmParams params;
  Eigen::VectorXd a_hat;
  std::map<std::string, std::vector<double>> diagnostics;
  Provenance provenance;

  int num_states() const noexcept { return params.num_states(); }
  int num_cells() const noexcept { return params.num_cells(); }

  friend bool operator==(const ModelFile& a, const ModelFile& b) {
    return a.schema_version == b.schema_version && a.granularity == b.granularity &&
           a.cells == b.cells && a.params == b.params && a.a_hat == b.a_hat &&
           a.diagnostics == b.diagnostics && a.provenance == b.provenance;
  }
};

std::string serialize(const ModelFile& model);
/// Throws DataError on malformed text or a schema version other than kModelSchemaVersion.
ModelFile parse_model(const std::string& text);

void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace bhmm
