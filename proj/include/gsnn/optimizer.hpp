#pragma once

#include "gsnn/numcore.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace gsnn {

enum class OptimizerKind { Momentum, Adam };

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "momentum" || s == "sgd") return OptimizerKind::Momentum;
  if (s == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + s + "'");
}

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "momentum"; }

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::Momentum;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First-order optimizer over a fixed set of parameter slots. Each slot keeps
/// its own state; callers feed the same slot index for the same tensor every
/// step. Parameters are addressed as flat vectors (row-major storage).
template <typename Scalar>
class Optimizer {
 public:
  explicit Optimizer(OptimizerSettings settings) : settings_(settings) {}

  const OptimizerSettings& settings() const { return settings_; }

  /// Must be called once per minibatch before the slot updates.
  void begin_step() { ++step_; }

  template <typename ParamDerived, typename GradDerived>
  void update(std::size_t slot, Eigen::MatrixBase<ParamDerived>& param,
              const Eigen::MatrixBase<GradDerived>& grad) {
    Eigen::Map<VectorX<Scalar>> p(param.derived().data(), param.size());
    Eigen::Map<const VectorX<Scalar>> g(grad.derived().data(), grad.size());
    if (slot >= first_.size()) {
      first_.resize(slot + 1);
      second_.resize(slot + 1);
    }
    VectorX<Scalar>& m = first_[slot];
    VectorX<Scalar>& v = second_[slot];
    if (m.size() != p.size()) {
      m = VectorX<Scalar>::Zero(p.size());
      if (settings_.kind == OptimizerKind::Adam) v = VectorX<Scalar>::Zero(p.size());
    }
    const Scalar lr = static_cast<Scalar>(settings_.learning_rate);
    if (settings_.kind == OptimizerKind::Momentum) {
      m = static_cast<Scalar>(settings_.momentum) * m - lr * g;
      p += m;
      return;
    }
    const Scalar b1 = static_cast<Scalar>(settings_.beta1);
    const Scalar b2 = static_cast<Scalar>(settings_.beta2);
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(step_));
    const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(step_));
    const Scalar eps = static_cast<Scalar>(settings_.epsilon);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }

 private:
  OptimizerSettings settings_;
  long step_ = 0;
  std::vector<VectorX<Scalar>> first_;
  std::vector<VectorX<Scalar>> second_;
};

}  // namespace gsnn
