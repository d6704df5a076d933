#include "bhmm/model.hpp"

#include <cmath>
#include <sstream>

namespace bhmm {

namespace {

void check_observation(Observation obs, std::size_t index) {
  if (!is_valid(obs)) {
    throw ValidationError("observation " + std::to_string(index) + " has meth count " +
                          std::to_string(obs.meth) + " above coverage " +
                          std::to_string(obs.coverage));
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

Sequence::Sequence(std::size_t num_cells) : num_cells_(num_cells) {
  if (num_cells_ == 0) throw ValidationError("a sequence needs at least one cell");
}

Sequence::Sequence(std::vector<Observation> flat, std::size_t num_cells)
    : num_cells_(num_cells), data_(std::move(flat)) {
  if (num_cells_ == 0) throw ValidationError("a sequence needs at least one cell");
  if (data_.size() % num_cells_ != 0) {
    throw ValidationError("observation count " + std::to_string(data_.size()) +
                          " is not a multiple of the cell count " +
                          std::to_string(num_cells_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) check_observation(data_[i], i / num_cells_);
}

void Sequence::push_back(Observation obs) {
  if (num_cells_ != 1) {
    throw ValidationError("push_back(Observation) on a " + std::to_string(num_cells_) +
                          "-cell sequence");
  }
  check_observation(obs, size());
  data_.push_back(obs);
}

void Sequence::push_back(std::span<const Observation> position) {
  if (position.size() != num_cells_) {
    throw ValidationError("position carries " + std::to_string(position.size()) +
                          " observations, expected " + std::to_string(num_cells_));
  }
  for (auto obs : position) check_observation(obs, size());
  data_.insert(data_.end(), position.begin(), position.end());
}

Observation Sequence::at(std::size_t t, std::size_t cell) const {
  if (t >= size() || cell >= num_cells_) throw std::out_of_range("Sequence::at");
  return data_[t * num_cells_ + cell];
}

Sequence Sequence::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw std::out_of_range("Sequence::slice");
  return Sequence(std::vector<Observation>(data_.begin() + begin * num_cells_,
                                           data_.begin() + end * num_cells_),
                  num_cells_);
}

std::optional<std::string> first_violation(const HmmParams& params) {
  const auto m = params.initial.size();
  if (m == 0) return "num_states must be positive";
  if (params.transition.rows() != m || params.transition.cols() != m) {
    return "transition is " + std::to_string(params.transition.rows()) + "x" +
           std::to_string(params.transition.cols()) + ", expected " + std::to_string(m) +
           "x" + std::to_string(m);
  }
  if (params.meth_probs.rows() < 1 || params.meth_probs.cols() != m) {
    return "meth_probs has " + std::to_string(params.meth_probs.cols()) +
           " columns, expected " + std::to_string(m);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    const double v = params.initial(i);
    if (!(v >= 0.0) || !std::isfinite(v)) return "pi[" + std::to_string(i) + "] = " + fmt(v);
  }
  if (const double s = params.initial.sum(); std::abs(s - 1.0) > kStochasticTolerance) {
    return "pi sums to " + fmt(s);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double v = params.transition(i, j);
      if (!(v >= 0.0) || !std::isfinite(v)) {
        return "transition(" + std::to_string(i) + ", " + std::to_string(j) + ") = " + fmt(v);
      }
    }
    if (const double s = params.transition.col(j).sum();
        std::abs(s - 1.0) > kStochasticTolerance) {
      return "column " + std::to_string(j) + " sums to " + fmt(s);
    }
  }
  for (Eigen::Index c = 0; c < params.meth_probs.rows(); ++c) {
    for (Eigen::Index h = 0; h < m; ++h) {
      const double v = params.meth_probs(c, h);
      if (!(v >= 0.0 && v <= 1.0)) {
        return "p[" + std::to_string(c) + "][" + std::to_string(h) + "] = " + fmt(v) +
               " outside [0, 1]";
      }
    }
  }
  return std::nullopt;
}

HmmParams validate_params(HmmParams params) {
  if (auto why = first_violation(params)) throw ValidationError(*why);
  return params;
}

}  // namespace bhmm
