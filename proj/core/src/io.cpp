#include "bhmm/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "bhmm/error.hpp"

namespace bhmm {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv1a(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) return out;
    start = tab + 1;
  }
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_uint(std::string_view s, std::size_t line, const char* field) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    fail(line, std::string("invalid ") + field + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string fnv1a_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

MethylationData read_methylation_tsv(std::istream& in, const LoadOptions& opts) {
  std::uint64_t hash = kFnvOffset;
  std::string line;
  std::size_t line_no = 0;

  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    fnv1a(hash, line);
    fnv1a(hash, "\n");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  auto skippable = [&] { return line.empty() || line.front() == '#'; };

  bool have_header = false;
  while (next_line()) {
    if (!skippable()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw DataError("missing header line");

  const auto header = split_tabs(line);
  if (header.size() < 5 || (header.size() - 3) % 2 != 0 || header[0] != "chrom" ||
      header[1] != "bin_start" || header[2] != "context") {
    fail(line_no, "header must be 'chrom bin_start context cov_<cell> meth_<cell> ...'");
  }
  const std::size_t pairs = (header.size() - 3) / 2;
  MethylationData data;
  std::vector<std::size_t> cell_of_pair(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto cov = header[3 + 2 * i], meth = header[4 + 2 * i];
    if (!cov.starts_with("cov_") || !meth.starts_with("meth_") || cov.substr(4) != meth.substr(5) ||
        cov.size() == 4) {
      fail(line_no, "columns " + std::to_string(4 + 2 * i) + "-" + std::to_string(5 + 2 * i) +
                        " must be cov_<cell> meth_<cell>");
    }
    std::string label(cov.substr(4));
    if (opts.merge_replicates) label = label.substr(0, label.find('.'));
    std::size_t cell = data.cells.size();
    for (std::size_t c = 0; c < data.cells.size(); ++c) {
      if (data.cells[c] == label) cell = c;
    }
    if (cell == data.cells.size()) {
      data.cells.push_back(label);
    } else if (!opts.merge_replicates) {
      fail(line_no, "duplicate cell label '" + label + "'");
    }
    cell_of_pair[i] = cell;
  }

  data.sequence = Sequence(data.cells.size());
  std::vector<Observation> pos(data.cells.size());
  while (next_line()) {
    if (skippable()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != header.size()) {
      fail(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    ++data.rows_read;
    if (fields[0].empty()) fail(line_no, "empty chrom");
    const auto bin = parse_uint<std::uint64_t>(fields[1], line_no, "bin_start");
    if (opts.bin_size != 0 && bin % opts.bin_size != 0) {
      fail(line_no, "bin_start " + std::to_string(bin) + " is not a multiple of " +
                        std::to_string(opts.bin_size));
    }
    std::fill(pos.begin(), pos.end(), Observation{});
    for (std::size_t i = 0; i < pairs; ++i) {
      const auto c = parse_uint<std::uint32_t>(fields[3 + 2 * i], line_no, "coverage");
      const auto mu = parse_uint<std::uint32_t>(fields[4 + 2 * i], line_no, "methylation count");
      if (mu > c) {
        fail(line_no, "methylation count " + std::to_string(mu) + " exceeds coverage " +
                          std::to_string(c));
      }
      auto& o = pos[cell_of_pair[i]];
      if (o.coverage > std::numeric_limits<std::uint32_t>::max() - c) fail(line_no, "coverage overflow");
      o.coverage += c;
      o.meth += mu;
    }
    if (opts.context_filter && fields[2] != *opts.context_filter) continue;
    data.sequence.push_back(std::span<const Observation>(pos));
  }
  if (in.bad()) throw DataError("read error after line " + std::to_string(line_no));
  data.digest = fnv1a_hex(hash);
  return data;
}

MethylationData load_methylation_tsv(const std::filesystem::path& path, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_methylation_tsv(in, opts);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_methylation_tsv(std::ostream& out, const std::vector<std::string>& cells,
                           const std::vector<MethylationRecord>& records) {
  out << "chrom\tbin_start\tcontext";
  for (const auto& c : cells) out << "\tcov_" << c << "\tmeth_" << c;
  out << '\n';
  for (const auto& r : records) {
    if (r.counts.size() != cells.size()) {
      throw ValidationError("record has " + std::to_string(r.counts.size()) + " cells, header has " +
                            std::to_string(cells.size()));
    }
    out << r.chrom << '\t' << r.bin_start << '\t' << r.context;
    for (auto o : r.counts) out << '\t' << o.coverage << '\t' << o.meth;
    out << '\n';
  }
}

std::vector<MethylationRecord> records_from_sequence(const Sequence& seq, const std::string& chrom,
                                                     std::uint64_t bin_size,
                                                     const std::string& context) {
  std::vector<MethylationRecord> out;
  out.reserve(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    auto pos = seq[t];
    out.push_back({chrom, t * bin_size, context, {pos.begin(), pos.end()}});
  }
  return out;
}

namespace {

using nlohmann::json;

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

double number(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

Eigen::VectorXd vector_from(const json& j, Eigen::Index n, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
    throw DataError(std::string("model file: '") + what + "' must be an array of length " +
                    std::to_string(n));
  }
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = number(j[static_cast<std::size_t>(i)]);
  return v;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw DataError(std::string("model file: '") + what + "' must have " + std::to_string(rows) +
                    " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) m.row(i) = vector_from(j[static_cast<std::size_t>(i)], cols, what);
  return m;
}

}  // namespace

std::string serialize(const ModelFile& model) {
  json j;
  j["schema_version"] = model.schema_version;
  j["m"] = model.num_states();
  j["D"] = model.granularity;
  j["k"] = model.num_cells();
  j["cells"] = model.cells;
  j["initial"] = to_json(model.params.initial);
  j["transition"] = to_json(model.params.transition);
  j["meth_probs"] = to_json(model.params.meth_probs);
  j["a_hat"] = to_json(model.a_hat);
  j["diagnostics"] = json::object();
  for (const auto& [k, v] : model.diagnostics) j["diagnostics"][k] = v;
  const auto& p = model.provenance;
  j["provenance"] = {{"seed", p.seed},
                     {"input_digest", p.input_digest},
                     {"algorithm", p.algorithm},
                     {"timestamp", p.timestamp ? json(*p.timestamp) : json(nullptr)},
                     {"config", p.config}};
  return j.dump(2) + "\n";
}

ModelFile parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("model file parse error: ") + e.what());
  }
  try {
    ModelFile model;
    model.schema_version = j.at("schema_version").get<int>();
    if (model.schema_version != kModelSchemaVersion) {
      throw DataError("model file schema version " + std::to_string(model.schema_version) +
                      " is not supported (expected " + std::to_string(kModelSchemaVersion) + ")");
    }
    const int m = j.at("m").get<int>();
    const int k = j.at("k").get<int>();
    if (m < 1 || k < 1) throw DataError("model file: m and k must be positive");
    model.granularity = j.at("D").get<int>();
    model.cells = j.at("cells").get<std::vector<std::string>>();
    model.params.initial = vector_from(j.at("initial"), m, "initial");
    model.params.transition = matrix_from(j.at("transition"), m, m, "transition");
    model.params.meth_probs = matrix_from(j.at("meth_probs"), k, m, "meth_probs");
    model.a_hat = vector_from(j.at("a_hat"), j.at("a_hat").size(), "a_hat");
    for (const auto& [key, val] : j.at("diagnostics").items()) {
      std::vector<double> v;
      for (const auto& x : val) v.push_back(number(x));
      model.diagnostics[key] = std::move(v);
    }
    const auto& p = j.at("provenance");
    model.provenance.seed = p.at("seed").get<std::uint64_t>();
    model.provenance.input_digest = p.at("input_digest").get<std::string>();
    model.provenance.algorithm = p.at("algorithm").get<std::string>();
    if (!p.at("timestamp").is_null()) model.provenance.timestamp = p.at("timestamp").get<std::string>();
    model.provenance.config = p.at("config").get<std::map<std::string, std::string>>();
    if (auto v = first_violation(model.params)) throw DataError("model file: " + *v);
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file parse error: ") + e.what());
  }
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize(model);
  if (!out) throw DataError("write failed: " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace bhmm
