#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace moralscope::num {

// Every tensor in the library is a dense row-major matrix of doubles.
// Vectors are 1 x n (row) unless stated otherwise; token matrices are T x d.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline std::vector<std::size_t> shape_of(const Tensor& t) {
  return {static_cast<std::size_t>(t.rows()), static_cast<std::size_t>(t.cols())};
}

inline bool all_finite(const Tensor& t) { return t.allFinite(); }

inline Tensor row_vector(std::span<const double> values) {
  Tensor t(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) t(0, static_cast<Eigen::Index>(i)) = values[i];
  return t;
}

inline std::vector<double> to_std(const Tensor& t) {
  return std::vector<double>(t.data(), t.data() + t.size());
}

/// Numerically stable softmax over all elements (max-subtracted).
std::vector<double> softmax(std::span<const double> logits);

/// -ln(probs[gold]); probs[gold] == 0 is clamped to 1e-12 and `clamped` is set.
double cross_entropy(std::span<const double> probs, std::size_t gold, bool* clamped = nullptr);

/// Seeded generator whose streams do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double normal();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n);  // uniform in [0, n)

  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[below(i)]);
    }
  }

 private:
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace moralscope::num
