#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace bhmm {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double s = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - s) + v : (v - s) + sum_;
    sum_ = s;
  }
  void add(const CompensatedSum& other) noexcept {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Element-wise CompensatedSum over a fixed-length array.
class CompensatedArray {
 public:
  explicit CompensatedArray(std::size_t n = 0) : sum_(n, 0.0), comp_(n, 0.0) {}

  std::size_t size() const noexcept { return sum_.size(); }

  void add(std::span<const double> v) {
    if (v.size() != sum_.size()) throw std::invalid_argument("CompensatedArray size mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) add_at(i, v[i]);
  }

  void add(const CompensatedArray& other) {
    if (other.size() != size()) throw std::invalid_argument("CompensatedArray size mismatch");
    for (std::size_t i = 0; i < size(); ++i) {
      add_at(i, other.sum_[i]);
      add_at(i, other.comp_[i]);
    }
  }

  double value(std::size_t i) const noexcept { return sum_[i] + comp_[i]; }

  std::vector<double> values() const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = value(i);
    return out;
  }

 private:
  void add_at(std::size_t i, double v) noexcept {
    const double s = sum_[i] + v;
    comp_[i] += std::abs(sum_[i]) >= std::abs(v) ? (sum_[i] - s) + v : (v - s) + sum_[i];
    sum_[i] = s;
  }

  std::vector<double> sum_;
  std::vector<double> comp_;
};

}  // namespace bhmm
