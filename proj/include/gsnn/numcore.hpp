#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace gsnn {

// Dense carriers. Row-major so that sample i of a batch is a contiguous row.
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// Floor/ceiling used whenever a probability enters a logarithm.
inline constexpr double kProbEps = 1e-6;

template <typename Derived>
std::string shape_of(const Eigen::EigenBase<Derived>& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

/// Checked product. Eigen only asserts on shape mismatch in debug builds.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_of(a) + " * " + shape_of(b));
  }
  return a * b;
}

template <typename Scalar>
  requires std::is_arithmetic_v<Scalar>
Scalar sigmoid(Scalar x) {
  // Split on sign so exp never overflows.
  if (x >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return sigmoid(v); });
}

template <typename Scalar>
  requires std::is_arithmetic_v<Scalar>
Scalar relu(Scalar x) {
  return x > Scalar(0) ? x : Scalar(0);
}

/// Softmax with max-subtraction.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) {
    throw std::invalid_argument("softmax: empty vector");
  }
  const Scalar shift = v.maxCoeff();
  VectorX<Scalar> p = (v.derived().template cast<Scalar>().array() - shift).exp().matrix();
  p /= p.sum();
  return p;
}

template <typename Scalar>
Scalar clamp_prob(Scalar p, Scalar eps = Scalar(kProbEps)) {
  return std::min(std::max(p, eps), Scalar(1) - eps);
}

/// Named activation functions shared by the autoencoder and convolution paths.
enum class Activation { Sigmoid, Linear, Relu };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "linear") return Activation::Linear;
  if (s == "relu") return Activation::Relu;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

template <typename Scalar>
  requires std::is_arithmetic_v<Scalar>
Scalar activate(Activation a, Scalar x) {
  switch (a) {
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Relu: return relu(x);
    case Activation::Linear: break;
  }
  return x;
}

/// Derivative expressed through the activation output y (and pre-activation x for ReLU).
template <typename Scalar>
Scalar activation_slope(Activation a, Scalar x, Scalar y) {
  switch (a) {
    case Activation::Sigmoid: return y * (Scalar(1) - y);
    case Activation::Relu: return x > Scalar(0) ? Scalar(1) : Scalar(0);
    case Activation::Linear: break;
  }
  return Scalar(1);
}

template <typename Derived>
MatrixX<typename Derived::Scalar> activate(Activation a, const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([a](Scalar v) { return activate(a, v); });
}

/// Deterministic generator: std::mt19937_64 (its output sequence is fixed by the
/// C++ standard). All derived draws are computed here rather than through
/// <random> distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), unbiased by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Box-Muller; the spare value is cached.
  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + stddev * r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Independent child stream; used so that adding draws in one subsystem
  /// does not perturb another.
  Rng fork() { return Rng(next_u64()); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

template <typename Scalar>
MatrixX<Scalar> uniform_matrix(Eigen::Index rows, Eigen::Index cols, Scalar lo, Scalar hi, Rng& rng) {
  MatrixX<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<Scalar>(rng.uniform(lo, hi));
  }
  return m;
}

/// Central-difference gradient of f at x.
template <typename Scalar>
VectorX<Scalar> finite_diff_grad(const std::function<Scalar(const VectorX<Scalar>&)>& f,
                                 const VectorX<Scalar>& x, Scalar h) {
  if (!(h > Scalar(0))) {
    throw std::invalid_argument("finite_diff_grad: step must be positive");
  }
  VectorX<Scalar> g(x.size());
  VectorX<Scalar> probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const Scalar fp = f(probe);
    probe[i] = x[i] - h;
    const Scalar fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::domain_error("finite_diff_grad: non-finite value at coordinate " + std::to_string(i));
    }
    g[i] = (fp - fm) / (Scalar(2) * h);
  }
  return g;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace gsnn
