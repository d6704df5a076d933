#include "bhmm/moments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include <Eigen/Sparse>

namespace bhmm {

namespace {

constexpr std::size_t kFlushDoubles = std::size_t{1} << 22;
constexpr std::size_t kMaxPendingTriples = std::size_t{1} << 20;

Eigen::MatrixXd as_matrix(const std::vector<double>& v, int rows, int cols, double scale) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols) * scale;
}

}  // namespace

std::optional<std::string> moment_violation(const MomentSet& m) {
  const int d = m.dim;
  const double k = m.num_cells;
  const Eigen::MatrixXd* mats[] = {&m.P12, &m.P21, &m.P13, &m.P31, &m.P23, &m.P32};
  const char* names[] = {"P12", "P21", "P13", "P31", "P23", "P32"};
  for (int i = 0; i < 6; ++i) {
    const auto& p = *mats[i];
    if (p.rows() != d || p.cols() != d) return std::string(names[i]) + " has wrong shape";
    if ((p.array() < 0.0).any()) return std::string(names[i]) + " has a negative entry";
    if (std::abs(p.sum() - k * k) > kMomentMassTolerance) {
      return std::string(names[i]) + " sums to " + std::to_string(p.sum());
    }
  }
  if (m.P21 != m.P12.transpose() || m.P31 != m.P13.transpose() || m.P32 != m.P23.transpose()) {
    return "transposed pair moments disagree";
  }
  if (m.T123.dim(0) != d || m.T123.dim(1) != d || m.T123.dim(2) != d) {
    return "T123 has wrong shape";
  }
  for (double v : m.T123.data()) {
    if (v < 0.0) return "T123 has a negative entry";
  }
  if (std::abs(m.T123.sum() - k * k * k) > kMomentMassTolerance) {
    return "T123 sums to " + std::to_string(m.T123.sum());
  }
  return std::nullopt;
}

MomentSet merge(const MomentSet& a, const MomentSet& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  if (a.dim != b.dim || a.num_cells != b.num_cells) {
    throw ValidationError("merge: moment dimensions differ (" + std::to_string(a.dim) + " vs " +
                          std::to_string(b.dim) + ")");
  }
  const double n = static_cast<double>(a.count) + static_cast<double>(b.count);
  const double wa = static_cast<double>(a.count) / n;
  const double wb = static_cast<double>(b.count) / n;
  MomentSet out;
  out.dim = a.dim;
  out.num_cells = a.num_cells;
  out.count = a.count + b.count;
  out.P12 = wa * a.P12 + wb * b.P12;
  out.P13 = wa * a.P13 + wb * b.P13;
  out.P23 = wa * a.P23 + wb * b.P23;
  out.P21 = out.P12.transpose();
  out.P31 = out.P13.transpose();
  out.P32 = out.P23.transpose();
  out.T123 = Tensor3::cube(a.dim);
  auto dst = out.T123.data();
  auto sa = a.T123.data();
  auto sb = b.T123.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = wa * sa[i] + wb * sb[i];
  return out;
}

std::size_t FeatureInterner::KeyHash::operator()(
    const std::vector<std::uint32_t>& key) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto v : key) {
    h ^= v;
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  }
  return static_cast<std::size_t>(h);
}

FeatureInterner::FeatureInterner(const BetaMapTable& table, std::size_t num_cells)
    : table_(&table),
      num_cells_(num_cells),
      dim_(static_cast<int>(num_cells) * table.granularity()),
      scratch_key_(2 * num_cells) {
  if (num_cells == 0) throw ValidationError("feature interner needs at least one cell");
}

int FeatureInterner::intern(std::span<const Observation> obs) {
  if (obs.size() != num_cells_) {
    throw ValidationError("expected " + std::to_string(num_cells_) + " cells per position, got " +
                          std::to_string(obs.size()));
  }
  ++lookups_;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    scratch_key_[2 * k] = obs[k].coverage;
    scratch_key_[2 * k + 1] = obs[k].meth;
  }
  if (auto it = ids_.find(scratch_key_); it != ids_.end()) return it->second;
  const int id = static_cast<int>(ids_.size());
  const auto old = features_.size();
  features_.resize(old + static_cast<std::size_t>(dim_));
  table_->concat(obs, std::span<double>(features_.data() + old, static_cast<std::size_t>(dim_)));
  ids_.emplace(scratch_key_, id);
  return id;
}

MomentAccumulator::MomentAccumulator(const BetaMapTable& table, std::size_t num_cells)
    : interner_(table, num_cells) {
  const auto d = static_cast<std::size_t>(interner_.dim());
  max_keys_ = std::max<std::size_t>(16, kFlushDoubles / (d * d));
  max_pending_ = kMaxPendingTriples;
  p12_ = CompensatedArray(d * d);
  p13_ = CompensatedArray(d * d);
  p23_ = CompensatedArray(d * d);
  t123_ = CompensatedArray(d * d * d);
}

int MomentAccumulator::intern(std::span<const Observation> obs) {
  const int id = interner_.intern(obs);
  if (static_cast<std::size_t>(id) >= local_.size()) local_.resize(interner_.size(), -1);
  return id;
}

void MomentAccumulator::push(int a, int b, int c) {
  auto& slot = local_[static_cast<std::size_t>(a)];
  if (slot < 0) {
    slot = static_cast<int>(keys_.size());
    keys_.push_back(a);
  }
  pending_.push_back(slot);
  pending_.push_back(b);
  pending_.push_back(c);
  ++count_;
  if (keys_.size() >= max_keys_ || pending_.size() / 3 >= max_pending_) flush();
}

void MomentAccumulator::add(const Triple& triple) {
  const int a = intern(triple.x1);
  const int b = intern(triple.x2);
  const int c = intern(triple.x3);
  push(a, b, c);
}

void MomentAccumulator::add_triples(const Sequence& seq, std::size_t first, std::size_t last) {
  if (seq.num_cells() != num_cells()) {
    throw ValidationError("sequence has " + std::to_string(seq.num_cells()) +
                          " cells, accumulator expects " + std::to_string(num_cells()));
  }
  if (first >= last) return;
  if (last + 2 > seq.size()) throw std::out_of_range("add_triples: triple index past the end");
  int a = intern(seq[first]);
  int b = intern(seq[first + 1]);
  for (std::size_t k = first; k < last; ++k) {
    const int c = intern(seq[k + 2]);
    push(a, b, c);
    a = b;
    b = c;
  }
}

void MomentAccumulator::add_sequence(const Sequence& seq) {
  if (seq.size() < 3) {
    throw ValidationError("insufficient length: triples need at least 3 positions, got " +
                          std::to_string(seq.size()));
  }
  add_triples(seq, 0, seq.size() - 2);
}

void MomentAccumulator::flush() {
  const std::size_t n = pending_.size() / 3;
  if (n == 0) return;
  const int d = dim();
  const auto dd = static_cast<Eigen::Index>(d) * d;

  const auto k1 = static_cast<Eigen::Index>(keys_.size());

  Eigen::MatrixXd f1(d, k1);
  for (Eigen::Index r = 0; r < k1; ++r) {
    f1.col(r) = Eigen::Map<const Eigen::VectorXd>(
        interner_.feature(keys_[static_cast<std::size_t>(r)]), d);
  }
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(dd, k1);  // vec(phi2 phi3^T) per x1 id
  Eigen::MatrixXd y2 = Eigen::MatrixXd::Zero(d, k1);
  Eigen::MatrixXd y3 = Eigen::MatrixXd::Zero(d, k1);

  for (std::size_t t = 0; t < n; ++t) {
    const auto r = pending_[3 * t];
    Eigen::Map<const Eigen::VectorXd> phi2(
        interner_.feature(pending_[3 * t + 1]), d);
    Eigen::Map<const Eigen::VectorXd> phi3(
        interner_.feature(pending_[3 * t + 2]), d);
    double* col = z.col(r).data();
    for (int l = 0; l < d; ++l) {
      const double w = phi3(l);
      if (w == 0.0) continue;
      Eigen::Map<Eigen::VectorXd>(col + static_cast<std::size_t>(l) * d, d) += w * phi2;
    }
    y2.col(r) += phi2;
    y3.col(r) += phi3;
  }
  for (int a : keys_) local_[static_cast<std::size_t>(a)] = -1;
  keys_.clear();

  Eigen::MatrixXd t_chunk(d, dd);
  t_chunk.noalias() = f1 * z.transpose();
  Eigen::MatrixXd p12(d, d), p13(d, d);
  p12.noalias() = f1 * y2.transpose();
  p13.noalias() = f1 * y3.transpose();
  Eigen::VectorXd p23 = z.rowwise().sum();

  p12_.add(std::span<const double>(p12.data(), static_cast<std::size_t>(p12.size())));
  p13_.add(std::span<const double>(p13.data(), static_cast<std::size_t>(p13.size())));
  p23_.add(std::span<const double>(p23.data(), static_cast<std::size_t>(p23.size())));
  t123_.add(std::span<const double>(t_chunk.data(), static_cast<std::size_t>(t_chunk.size())));
  pending_.clear();
}

void MomentAccumulator::merge(MomentAccumulator& other) {
  if (other.dim() != dim() || other.num_cells() != num_cells()) {
    throw ValidationError("merge: accumulator dimensions differ (" + std::to_string(dim()) +
                          " vs " + std::to_string(other.dim()) + ")");
  }
  flush();
  other.flush();
  p12_.add(other.p12_);
  p13_.add(other.p13_);
  p23_.add(other.p23_);
  t123_.add(other.t123_);
  count_ += other.count_;
  merged_lookups_ += other.feature_lookups();
}

MomentSet MomentAccumulator::finalize() {
  if (count_ == 0) throw ValidationError("no data: moment accumulator is empty");
  flush();
  const double inv = 1.0 / static_cast<double>(count_);
  MomentSet m;
  const int d = dim();
  m.dim = d;
  m.num_cells = static_cast<int>(num_cells());
  m.count = count_;
  m.P12 = as_matrix(p12_.values(), d, d, inv);
  m.P13 = as_matrix(p13_.values(), d, d, inv);
  m.P23 = as_matrix(p23_.values(), d, d, inv);
  m.P21 = m.P12.transpose();
  m.P31 = m.P13.transpose();
  m.P32 = m.P23.transpose();
  m.T123 = Tensor3::cube(d);
  auto dst = m.T123.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = t123_.value(i) * inv;
  if (auto why = moment_violation(m)) {
    throw std::logic_error("moment invariant violated after finalize: " + *why);
  }
  return m;
}

MomentSet estimate_moments(const Sequence& seq, const BetaMapTable& table, int threads,
                           std::size_t* feature_lookups) {
  if (seq.size() < 3) {
    throw ValidationError("insufficient length: triples need at least 3 positions, got " +
                          std::to_string(seq.size()));
  }
  const std::size_t total = seq.size() - 2;
  const std::size_t shards =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, total);

  std::vector<MomentAccumulator> acc;
  acc.reserve(shards);
  for (std::size_t s = 0; s < shards; ++s) acc.emplace_back(table, seq.num_cells());

  auto range = [&](std::size_t s) {
    return std::pair{total * s / shards, total * (s + 1) / shards};
  };
  if (shards == 1) {
    acc[0].add_triples(seq, 0, total);
  } else {
    std::vector<std::exception_ptr> errors(shards);
    {
      std::vector<std::jthread> workers;
      for (std::size_t s = 0; s < shards; ++s) {
        workers.emplace_back([&, s] {
          try {
            auto [lo, hi] = range(s);
            acc[s].add_triples(seq, lo, hi);
          } catch (...) {
            errors[s] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (std::size_t s = 1; s < shards; ++s) acc[0].merge(acc[s]);
  }
  if (feature_lookups) *feature_lookups = acc[0].feature_lookups();
  return acc[0].finalize();
}

IndexedSequence index_sequence(const Sequence& seq, const BetaMapTable& table) {
  FeatureInterner interner(table, seq.num_cells());
  IndexedSequence out;
  out.dim = interner.dim();
  out.num_cells = static_cast<int>(seq.num_cells());
  out.ids.reserve(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) out.ids.push_back(interner.intern(seq[t]));
  out.features = interner.features();
  out.feature_lookups = interner.lookups();
  return out;
}

namespace {

void check_triples(const IndexedSequence& seq) {
  if (seq.ids.size() < 3) {
    throw ValidationError("insufficient length: triples need at least 3 positions, got " +
                          std::to_string(seq.ids.size()));
  }
}

/// Phi N Phi^T / n with N(a, b) = #{t < n : ids[t + da] = a, ids[t + db] = b}.
Eigen::MatrixXd pair_from_counts(const IndexedSequence& seq, std::size_t da, std::size_t db) {
  const std::size_t n = seq.ids.size() - 2;
  const auto k = static_cast<Eigen::Index>(seq.features.cols());
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(n);
  for (std::size_t t = 0; t < n; ++t) entries.emplace_back(seq.ids[t + da], seq.ids[t + db], 1.0);
  Eigen::SparseMatrix<double> counts(k, k);
  counts.setFromTriplets(entries.begin(), entries.end());
  const Eigen::MatrixXd left = seq.features * counts;
  Eigen::MatrixXd out = left * seq.features.transpose();
  return out / static_cast<double>(n);
}

}  // namespace

MomentSet pair_moments(const IndexedSequence& seq) {
  check_triples(seq);
  MomentSet m;
  m.dim = seq.dim;
  m.num_cells = seq.num_cells;
  m.count = seq.ids.size() - 2;
  m.P12 = pair_from_counts(seq, 0, 1);
  m.P13 = pair_from_counts(seq, 0, 2);
  m.P23 = pair_from_counts(seq, 1, 2);
  m.P21 = m.P12.transpose();
  m.P31 = m.P13.transpose();
  m.P32 = m.P23.transpose();
  return m;
}

Tensor3 projected_tensor(const IndexedSequence& seq, const Eigen::MatrixXd& a1,
                         const Eigen::MatrixXd& a2, const Eigen::MatrixXd& a3, int threads) {
  check_triples(seq);
  const auto k = seq.features.cols();
  if (a1.cols() != k || a2.cols() != k || a3.cols() != k) {
    throw ValidationError("projected_tensor: factors need one column per observation id");
  }
  const auto m1 = static_cast<int>(a1.rows());
  const auto m2 = static_cast<int>(a2.rows());
  const auto m3 = static_cast<int>(a3.rows());
  const std::size_t total = seq.ids.size() - 2;
  const std::size_t size = static_cast<std::size_t>(m1) * m2 * m3;
  constexpr std::size_t kBlock = 4096;

  auto run = [&](std::size_t lo, std::size_t hi, CompensatedArray& acc) {
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(m1, static_cast<Eigen::Index>(m2) * m3);
    Eigen::VectorXd v(static_cast<Eigen::Index>(m2) * m3);
    for (std::size_t start = lo; start < hi; start += kBlock) {
      const std::size_t stop = std::min(hi, start + kBlock);
      for (std::size_t t = start; t < stop; ++t) {
        const auto u2 = a2.col(seq.ids[t + 1]);
        const auto u3 = a3.col(seq.ids[t + 2]);
        for (int c = 0; c < m3; ++c) v.segment(static_cast<Eigen::Index>(c) * m2, m2) = u3(c) * u2;
        block.noalias() += a1.col(seq.ids[t]) * v.transpose();
      }
      acc.add(std::span<const double>(block.data(), size));
      block.setZero();
    }
  };

  const std::size_t shards =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, total);
  std::vector<CompensatedArray> acc(shards, CompensatedArray(size));
  if (shards == 1) {
    run(0, total, acc[0]);
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t s = 0; s < shards; ++s) {
      workers.emplace_back([&, s] { run(total * s / shards, total * (s + 1) / shards, acc[s]); });
    }
  }
  for (std::size_t s = 1; s < shards; ++s) acc[0].add(acc[s]);

  Tensor3 out(m1, m2, m3);
  auto dst = out.data();
  const double inv = 1.0 / static_cast<double>(total);
  for (std::size_t i = 0; i < size; ++i) dst[i] = acc[0].value(i) * inv;
  return out;
}

}  // namespace bhmm
