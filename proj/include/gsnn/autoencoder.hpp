#pragma once

// Basic, sparse and group-sparse autoencoders.
//
// Shapes: a batch Z is m x d (one sample per row), the encoder weight W is
// s x d (one row per hidden unit), hidden activations H are m x s. Hidden
// unit j belongs to group j / g, so rows [p*g, p*g + g) of W form group p.

#include "gsnn/batching.hpp"
#include "gsnn/kmeans.hpp"
#include "gsnn/numcore.hpp"
#include "gsnn/optimizer.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace gsnn {

enum class ReconKind { Mse, CrossEntropy };

inline std::string to_string(ReconKind k) { return k == ReconKind::Mse ? "mse" : "cross_entropy"; }

inline ReconKind recon_kind_from_string(const std::string& s) {
  if (s == "mse") return ReconKind::Mse;
  if (s == "cross_entropy" || s == "ce") return ReconKind::CrossEntropy;
  throw std::invalid_argument("unknown reconstruction loss '" + s + "'");
}

template <typename Scalar>
struct SparsityConfig {
  Scalar rho = Scalar(0.3);    ///< target mean activation per hidden unit
  Scalar eta = Scalar(0.2);    ///< target mean activation per group
  Scalar alpha = Scalar(1);    ///< weight of the per-unit KL penalty
  Scalar beta = Scalar(1);     ///< weight of the per-group KL penalty
  int groups = 10;             ///< G
  int group_size = 50;         ///< g
  Scalar corruption = Scalar(0);  ///< denoising mask probability

  int hidden_size() const { return groups * group_size; }

  void validate() const {
    auto open_unit = [](Scalar v) { return v > Scalar(0) && v < Scalar(1); };
    if (!open_unit(rho)) throw std::invalid_argument("rho must lie in (0,1)");
    if (!open_unit(eta)) throw std::invalid_argument("eta must lie in (0,1)");
    if (alpha < Scalar(0) || beta < Scalar(0)) throw std::invalid_argument("alpha and beta must be nonnegative");
    if (groups < 1 || group_size < 1) throw std::invalid_argument("groups and group_size must be at least 1");
    if (corruption < Scalar(0) || corruption >= Scalar(1)) throw std::invalid_argument("corruption rate must lie in [0,1)");
  }
};

template <typename Scalar>
struct GsaModel {
  MatrixX<Scalar> W;      // s x d
  VectorX<Scalar> b;      // s
  VectorX<Scalar> c;      // d
  MatrixX<Scalar> W_dec;  // d x s, only used when !tied
  bool tied = true;
  Activation encoder = Activation::Sigmoid;
  Activation decoder = Activation::Sigmoid;

  Eigen::Index input_dim() const { return W.cols(); }
  Eigen::Index hidden_dim() const { return W.rows(); }

  /// Glorot-uniform weights, zero biases.
  static GsaModel random(Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng, bool tied_decoder = true) {
    GsaModel m;
    const double r = std::sqrt(6.0 / static_cast<double>(input_dim + hidden_dim));
    m.W = uniform_matrix<Scalar>(hidden_dim, input_dim, Scalar(-r), Scalar(r), rng);
    m.b = VectorX<Scalar>::Zero(hidden_dim);
    m.c = VectorX<Scalar>::Zero(input_dim);
    m.tied = tied_decoder;
    if (!tied_decoder) {
      m.W_dec = uniform_matrix<Scalar>(input_dim, hidden_dim, Scalar(-r), Scalar(r), rng);
    }
    return m;
  }

  void validate(const SparsityConfig<Scalar>& cfg) const {
    if (W.rows() != cfg.hidden_size()) {
      throw std::invalid_argument("GsaModel: W has " + std::to_string(W.rows()) + " rows but G*g = " +
                                  std::to_string(cfg.hidden_size()));
    }
    if (b.size() != W.rows() || c.size() != W.cols()) throw std::invalid_argument("GsaModel: bias sizes do not match W");
    if (!tied && (W_dec.rows() != W.cols() || W_dec.cols() != W.rows())) {
      throw std::invalid_argument("GsaModel: untied decoder must be d x s");
    }
    if (!W.allFinite() || !b.allFinite() || !c.allFinite()) throw std::invalid_argument("GsaModel: non-finite parameters");
  }
};

enum class GsaInit { Random, Grouped };

inline std::string to_string(GsaInit i) { return i == GsaInit::Random ? "random" : "grouped"; }

inline GsaInit gsa_init_from_string(const std::string& s) {
  if (s == "random") return GsaInit::Random;
  if (s == "grouped") return GsaInit::Grouped;
  throw std::invalid_argument("unknown autoencoder init '" + s + "' (expected random or grouped)");
}

/// Glorot model whose encoder rows are then replaced by a grouped k-means
/// dictionary of `data` (G coarse clusters, g centroids each), centred on the
/// data mean and scaled to row norm `scale`.
template <typename Scalar>
GsaModel<Scalar> grouped_model(const MatrixX<Scalar>& data, const SparsityConfig<Scalar>& cfg, Rng& rng,
                               bool tied_decoder = true, Scalar scale = Scalar(1), int restarts = 10) {
  cfg.validate();
  GsaModel<Scalar> m = GsaModel<Scalar>::random(data.cols(), cfg.hidden_size(), rng, tied_decoder);
  const GroupedDictionary<Scalar> dict = grouped_dictionary(data, cfg.groups, cfg.group_size, rng, restarts);
  const VectorX<Scalar> center = data.colwise().mean().transpose();
  install_atoms(m.W, m.b, dict.atoms, center, scale);
  return m;
}

template <typename Scalar>
MatrixX<Scalar> encode(const GsaModel<Scalar>& model, const MatrixX<Scalar>& Z) {
  if (Z.cols() != model.input_dim()) {
    throw std::invalid_argument("encode: input has " + std::to_string(Z.cols()) + " columns, model expects " +
                                std::to_string(model.input_dim()));
  }
  MatrixX<Scalar> pre = Z * model.W.transpose();
  pre.rowwise() += model.b.transpose();
  return activate(model.encoder, pre);
}

template <typename Scalar>
MatrixX<Scalar> decode(const GsaModel<Scalar>& model, const MatrixX<Scalar>& H) {
  if (H.cols() != model.hidden_dim()) {
    throw std::invalid_argument("decode: hidden has " + std::to_string(H.cols()) + " columns, model expects " +
                                std::to_string(model.hidden_dim()));
  }
  MatrixX<Scalar> pre = model.tied ? MatrixX<Scalar>(H * model.W) : MatrixX<Scalar>(H * model.W_dec.transpose());
  pre.rowwise() += model.c.transpose();
  return activate(model.decoder, pre);
}

template <typename Scalar>
void require_unit_interval(const MatrixX<Scalar>& Z, const char* who) {
  if ((Z.array() < Scalar(0)).any() || (Z.array() > Scalar(1)).any()) {
    throw std::invalid_argument(std::string(who) + ": cross-entropy targets must lie in [0,1]");
  }
}

/// Mean over samples of the per-sample reconstruction loss.
template <typename Scalar>
Scalar recon_loss(const MatrixX<Scalar>& Z, const MatrixX<Scalar>& Zhat, ReconKind kind) {
  if (Z.rows() != Zhat.rows() || Z.cols() != Zhat.cols()) {
    throw std::invalid_argument("recon_loss: shape mismatch " + shape_of(Z) + " vs " + shape_of(Zhat));
  }
  const Scalar m = static_cast<Scalar>(Z.rows());
  if (kind == ReconKind::Mse) {
    return (Z - Zhat).squaredNorm() / m;
  }
  require_unit_interval(Z, "recon_loss");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < Z.size(); ++i) {
    const Scalar z = Z.data()[i];
    const Scalar p = clamp_prob(Zhat.data()[i]);
    total -= z * std::log(p) + (Scalar(1) - z) * std::log(Scalar(1) - p);
  }
  return total / m;
}

/// Per-unit batch means before clamping.
template <typename Scalar>
VectorX<Scalar> unit_mean_activation_raw(const MatrixX<Scalar>& H) {
  if (H.rows() == 0 || H.cols() == 0) throw std::invalid_argument("unit_mean_activation: empty activations");
  return H.colwise().mean().transpose();
}

template <typename Scalar>
VectorX<Scalar> unit_mean_activation(const MatrixX<Scalar>& H) {
  return unit_mean_activation_raw(H).unaryExpr([](Scalar v) { return clamp_prob(v); });
}

/// Per-group mean magnitude before clamping: (1/(m g)) sum_i sum_l |H[i][p*g+l]|.
template <typename Scalar>
VectorX<Scalar> group_mean_activation_raw(const MatrixX<Scalar>& H, const SparsityConfig<Scalar>& cfg) {
  if (H.rows() == 0) throw std::invalid_argument("group_mean_activation: empty activations");
  if (H.cols() != static_cast<Eigen::Index>(cfg.groups) * cfg.group_size) {
    throw std::invalid_argument("group_mean_activation: " + std::to_string(H.cols()) +
                                " hidden units cannot form " + std::to_string(cfg.groups) + " groups of " +
                                std::to_string(cfg.group_size));
  }
  const VectorX<Scalar> col = H.cwiseAbs().colwise().sum().transpose();
  VectorX<Scalar> eta(cfg.groups);
  const Scalar norm = static_cast<Scalar>(H.rows()) * static_cast<Scalar>(cfg.group_size);
  for (int p = 0; p < cfg.groups; ++p) {
    eta[p] = col.segment(static_cast<Eigen::Index>(p) * cfg.group_size, cfg.group_size).sum() / norm;
  }
  return eta;
}

template <typename Scalar>
VectorX<Scalar> group_mean_activation(const MatrixX<Scalar>& H, const SparsityConfig<Scalar>& cfg) {
  return group_mean_activation_raw(H, cfg).unaryExpr([](Scalar v) { return clamp_prob(v); });
}

/// KL divergence between Bernoulli(target) and Bernoulli(actual), natural log.
template <typename Scalar>
Scalar kl_bernoulli(Scalar target, Scalar actual) {
  auto inside = [](Scalar v) { return v > Scalar(0) && v < Scalar(1); };
  if (!inside(target) || !inside(actual)) {
    throw std::domain_error("kl_bernoulli: arguments must lie in (0,1)");
  }
  return target * std::log(target / actual) + (Scalar(1) - target) * std::log((Scalar(1) - target) / (Scalar(1) - actual));
}

/// d KL(target || a) / d a
template <typename Scalar>
Scalar kl_bernoulli_slope(Scalar target, Scalar actual) {
  return -target / actual + (Scalar(1) - target) / (Scalar(1) - actual);
}

template <typename Scalar>
struct LossTerms {
  Scalar reconstruction = 0;  ///< J (unweighted)
  Scalar unit_kl = 0;         ///< sum_j KL(rho || rho_hat_j)
  Scalar group_kl = 0;        ///< sum_p KL(eta || eta_hat_p)
  Scalar recon_weight = 1;
  Scalar alpha = 0;
  Scalar beta = 0;
  Scalar total = 0;

  Scalar weighted_reconstruction() const { return recon_weight * reconstruction; }
  Scalar weighted_unit_kl() const { return alpha * unit_kl; }
  Scalar weighted_group_kl() const { return beta * group_kl; }
};

template <typename Scalar>
struct GsaGradients {
  MatrixX<Scalar> W;
  VectorX<Scalar> b;
  VectorX<Scalar> c;
  MatrixX<Scalar> W_dec;

  static GsaGradients zeros_like(const GsaModel<Scalar>& m) {
    GsaGradients g;
    g.W = MatrixX<Scalar>::Zero(m.W.rows(), m.W.cols());
    g.b = VectorX<Scalar>::Zero(m.b.size());
    g.c = VectorX<Scalar>::Zero(m.c.size());
    if (!m.tied) g.W_dec = MatrixX<Scalar>::Zero(m.W_dec.rows(), m.W_dec.cols());
    return g;
  }
};

/// One forward evaluation of the group-sparse objective
///   w_r * J + alpha * sum_j KL(rho || rho_hat_j) + beta * sum_p KL(eta || eta_hat_p)
/// with cached intermediates for backward(). `input` is what the encoder sees
/// (possibly corrupted), `target` what the decoder must reproduce. The pass
/// keeps references to model, config, input and target.
template <typename Scalar>
class GsaPass {
 public:
  GsaPass(const GsaModel<Scalar>& model, const SparsityConfig<Scalar>& cfg, const MatrixX<Scalar>& input,
          const MatrixX<Scalar>& target, ReconKind kind, Scalar recon_weight = Scalar(1))
      : model_(model), cfg_(cfg), input_(input), target_(target), kind_(kind) {
    if (input.rows() != target.rows() || input.cols() != model.input_dim() || target.cols() != model.input_dim()) {
      throw std::invalid_argument("GsaPass: input " + shape_of(input) + " / target " + shape_of(target) +
                                  " inconsistent with model input dimension " + std::to_string(model.input_dim()));
    }
    if (kind == ReconKind::CrossEntropy) require_unit_interval(target, "GsaPass");
    pre_h_ = input * model.W.transpose();
    pre_h_.rowwise() += model.b.transpose();
    h_ = activate(model.encoder, pre_h_);
    terms_.recon_weight = recon_weight;
    terms_.alpha = cfg.alpha;
    terms_.beta = cfg.beta;
    if (recon_weight != Scalar(0)) {
      pre_out_ = model.tied ? MatrixX<Scalar>(h_ * model.W) : MatrixX<Scalar>(h_ * model.W_dec.transpose());
      pre_out_.rowwise() += model.c.transpose();
      out_ = activate(model.decoder, pre_out_);
      terms_.reconstruction = recon_loss(target, out_, kind);
    }
    rho_raw_ = unit_mean_activation_raw(h_);
    eta_raw_ = group_mean_activation_raw(h_, cfg);
    for (Eigen::Index j = 0; j < rho_raw_.size(); ++j) terms_.unit_kl += kl_bernoulli(cfg.rho, clamp_prob(rho_raw_[j]));
    for (Eigen::Index p = 0; p < eta_raw_.size(); ++p) terms_.group_kl += kl_bernoulli(cfg.eta, clamp_prob(eta_raw_[p]));
    terms_.total = terms_.weighted_reconstruction() + terms_.weighted_unit_kl() + terms_.weighted_group_kl();
  }

  const LossTerms<Scalar>& terms() const { return terms_; }
  const MatrixX<Scalar>& hidden() const { return h_; }
  const MatrixX<Scalar>& output() const { return out_; }

  /// Accumulates parameter gradients into `grads` (which must be sized like the
  /// model). `dh_upstream`, when given, is an extra dL/dH term from layers
  /// stacked on H. `d_input`, when given, receives dL/d input; if
  /// `target_is_input` the reconstruction target's dependence is included.
  void backward(GsaGradients<Scalar>& grads, const MatrixX<Scalar>* dh_upstream = nullptr,
                MatrixX<Scalar>* d_input = nullptr, bool target_is_input = false) const {
    const Eigen::Index m = h_.rows();
    const Scalar inv_m = Scalar(1) / static_cast<Scalar>(m);
    MatrixX<Scalar> dh = dh_upstream ? *dh_upstream : MatrixX<Scalar>::Zero(h_.rows(), h_.cols());
    MatrixX<Scalar> dtarget;

    if (terms_.recon_weight != Scalar(0)) {
      MatrixX<Scalar> dout(out_.rows(), out_.cols());
      if (target_is_input) dtarget.resize(out_.rows(), out_.cols());
      const Scalar w = terms_.recon_weight * inv_m;
      for (Eigen::Index i = 0; i < out_.size(); ++i) {
        const Scalar z = target_.data()[i];
        const Scalar y = out_.data()[i];
        Scalar dy;
        Scalar dz;
        if (kind_ == ReconKind::Mse) {
          dy = Scalar(2) * (y - z);
          dz = -dy;
        } else {
          const Scalar p = clamp_prob(y);
          const bool interior = y > Scalar(kProbEps) && y < Scalar(1) - Scalar(kProbEps);
          dy = interior ? (-z / p + (Scalar(1) - z) / (Scalar(1) - p)) : Scalar(0);
          dz = -std::log(p) + std::log(Scalar(1) - p);
        }
        dout.data()[i] = w * dy * activation_slope(model_.decoder, pre_out_.data()[i], y);
        if (target_is_input) dtarget.data()[i] = w * dz;
      }
      if (model_.tied) {
        dh.noalias() += dout * model_.W.transpose();
        grads.W.noalias() += h_.transpose() * dout;
      } else {
        dh.noalias() += dout * model_.W_dec;
        grads.W_dec.noalias() += dout.transpose() * h_;
      }
      grads.c += dout.colwise().sum().transpose();
    }

    // Sparsity penalties act on H through the batch means; the clamp passes
    // gradient only strictly inside (eps, 1 - eps).
    auto interior = [](Scalar v) { return v > Scalar(kProbEps) && v < Scalar(1) - Scalar(kProbEps); };
    if (cfg_.alpha != Scalar(0)) {
      for (Eigen::Index j = 0; j < rho_raw_.size(); ++j) {
        if (!interior(rho_raw_[j])) continue;
        const Scalar s = cfg_.alpha * kl_bernoulli_slope(cfg_.rho, rho_raw_[j]) * inv_m;
        dh.col(j).array() += s;
      }
    }
    if (cfg_.beta != Scalar(0)) {
      const Scalar inv_mg = inv_m / static_cast<Scalar>(cfg_.group_size);
      for (int p = 0; p < cfg_.groups; ++p) {
        if (!interior(eta_raw_[p])) continue;
        const Scalar s = cfg_.beta * kl_bernoulli_slope(cfg_.eta, eta_raw_[p]) * inv_mg;
        const Eigen::Index begin = static_cast<Eigen::Index>(p) * cfg_.group_size;
        for (Eigen::Index i = 0; i < m; ++i) {
          for (Eigen::Index l = 0; l < cfg_.group_size; ++l) {
            const Scalar v = h_(i, begin + l);
            dh(i, begin + l) += v > Scalar(0) ? s : (v < Scalar(0) ? -s : Scalar(0));
          }
        }
      }
    }

    MatrixX<Scalar> dpre(h_.rows(), h_.cols());
    for (Eigen::Index i = 0; i < h_.size(); ++i) {
      dpre.data()[i] = dh.data()[i] * activation_slope(model_.encoder, pre_h_.data()[i], h_.data()[i]);
    }
    grads.W.noalias() += dpre.transpose() * input_;
    grads.b += dpre.colwise().sum().transpose();
    if (d_input) {
      *d_input = dpre * model_.W;
      if (target_is_input && terms_.recon_weight != Scalar(0)) *d_input += dtarget;
    }
  }

 private:
  const GsaModel<Scalar>& model_;
  const SparsityConfig<Scalar>& cfg_;
  const MatrixX<Scalar>& input_;
  const MatrixX<Scalar>& target_;
  ReconKind kind_;
  MatrixX<Scalar> pre_h_, h_, pre_out_, out_;
  VectorX<Scalar> rho_raw_, eta_raw_;
  LossTerms<Scalar> terms_;
};

/// Objective value and its breakdown on a clean batch.
template <typename Scalar>
LossTerms<Scalar> total_loss(const GsaModel<Scalar>& model, const SparsityConfig<Scalar>& cfg,
                             const MatrixX<Scalar>& Z, ReconKind kind) {
  return GsaPass<Scalar>(model, cfg, Z, Z, kind).terms();
}

template <typename Scalar>
GsaGradients<Scalar> gradients(const GsaModel<Scalar>& model, const SparsityConfig<Scalar>& cfg,
                               const MatrixX<Scalar>& Z, ReconKind kind) {
  GsaGradients<Scalar> g = GsaGradients<Scalar>::zeros_like(model);
  GsaPass<Scalar>(model, cfg, Z, Z, kind).backward(g);
  return g;
}

/// Masking noise: each entry zeroed independently with probability `rate`.
template <typename Scalar>
MatrixX<Scalar> corrupt(const MatrixX<Scalar>& Z, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("corrupt: rate must lie in [0,1)");
  MatrixX<Scalar> out = Z;
  if (rate == 0.0) return out;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (rng.bernoulli(rate)) out.data()[i] = Scalar(0);
  }
  return out;
}

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int epoch, const std::string& what)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

struct GsaTrainSettings {
  int epochs = 20;
  std::size_t batch_size = 100;
  OptimizerSettings optimizer;
  ReconKind recon = ReconKind::CrossEntropy;
  std::uint64_t seed = 1;
};

template <typename Scalar>
struct GsaEpochRecord {
  int epoch = 0;
  LossTerms<Scalar> eval;    ///< batch-averaged terms on clean data after the epoch
  Scalar train_total = 0;    ///< mean minibatch objective seen during the epoch
};

/// Batch-averaged objective over the whole dataset, batches in index order.
template <typename Scalar>
LossTerms<Scalar> evaluate_dataset(const GsaModel<Scalar>& model, const SparsityConfig<Scalar>& cfg,
                                   const MatrixX<Scalar>& data, ReconKind kind, std::size_t batch_size) {
  std::vector<std::size_t> order(static_cast<std::size_t>(data.rows()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto batches = BatchSchedule::chunk(order, batch_size);
  LossTerms<Scalar> acc;
  acc.alpha = cfg.alpha;
  acc.beta = cfg.beta;
  for (const auto& b : batches) {
    const MatrixX<Scalar> Z = gather_rows(data, b);
    const auto t = total_loss(model, cfg, Z, kind);
    acc.reconstruction += t.reconstruction;
    acc.unit_kl += t.unit_kl;
    acc.group_kl += t.group_kl;
    acc.total += t.total;
  }
  const Scalar n = static_cast<Scalar>(batches.size());
  acc.reconstruction /= n;
  acc.unit_kl /= n;
  acc.group_kl /= n;
  acc.total /= n;
  return acc;
}

template <typename Scalar>
struct GsaTrainResult {
  GsaModel<Scalar> model;
  std::vector<GsaEpochRecord<Scalar>> trace;  ///< trace[0] is the untrained model
};

/// Minibatch training. Sparsity statistics are computed per minibatch; when
/// cfg.corruption > 0 the encoder sees masked inputs and reconstructs the clean
/// ones. `on_epoch` (optional) is invoked after every record is appended.
template <typename Scalar>
GsaTrainResult<Scalar> train(GsaModel<Scalar> model, const SparsityConfig<Scalar>& cfg, const MatrixX<Scalar>& data,
                             const GsaTrainSettings& settings,
                             const std::type_identity_t<std::function<void(const GsaEpochRecord<Scalar>&)>>& on_epoch = {}) {
  cfg.validate();
  model.validate(cfg);
  if (data.rows() == 0) throw std::invalid_argument("train: empty dataset");
  if (data.cols() != model.input_dim()) throw std::invalid_argument("train: data dimension does not match model");

  Rng rng(settings.seed);
  BatchSchedule schedule(static_cast<std::size_t>(data.rows()), settings.batch_size, rng.fork());
  Rng noise = rng.fork();
  Optimizer<Scalar> opt(settings.optimizer);

  GsaTrainResult<Scalar> result;
  GsaEpochRecord<Scalar> initial;
  initial.eval = evaluate_dataset(model, cfg, data, settings.recon, settings.batch_size);
  initial.train_total = initial.eval.total;
  result.trace.push_back(initial);
  if (on_epoch) on_epoch(initial);

  for (int epoch = 1; epoch <= settings.epochs; ++epoch) {
    Scalar running = 0;
    const auto batches = schedule.next_epoch();
    for (const auto& b : batches) {
      const MatrixX<Scalar> clean = gather_rows(data, b);
      const MatrixX<Scalar> noisy = cfg.corruption > Scalar(0) ? corrupt(clean, static_cast<double>(cfg.corruption), noise) : clean;
      GsaPass<Scalar> pass(model, cfg, noisy, clean, settings.recon);
      if (!std::isfinite(pass.terms().total)) throw DivergenceError(epoch, "non-finite minibatch objective");
      running += pass.terms().total;
      GsaGradients<Scalar> g = GsaGradients<Scalar>::zeros_like(model);
      pass.backward(g);
      opt.begin_step();
      opt.update(0, model.W, g.W);
      opt.update(1, model.b, g.b);
      opt.update(2, model.c, g.c);
      if (!model.tied) opt.update(3, model.W_dec, g.W_dec);
    }
    GsaEpochRecord<Scalar> rec;
    rec.epoch = epoch;
    rec.train_total = running / static_cast<Scalar>(batches.size());
    rec.eval = evaluate_dataset(model, cfg, data, settings.recon, settings.batch_size);
    if (!std::isfinite(rec.eval.total)) throw DivergenceError(epoch, "non-finite objective");
    result.trace.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.model = std::move(model);
  return result;
}

/// Share of hidden activation mass per group for each row of H (rows sum to 1).
template <typename Scalar>
MatrixX<Scalar> group_mass(const MatrixX<Scalar>& H, int groups, int group_size) {
  if (H.cols() != static_cast<Eigen::Index>(groups) * group_size) throw std::invalid_argument("group_mass: width mismatch");
  MatrixX<Scalar> out(H.rows(), groups);
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    for (int p = 0; p < groups; ++p) {
      out(i, p) = H.row(i).segment(static_cast<Eigen::Index>(p) * group_size, group_size).cwiseAbs().sum();
    }
    const Scalar total = out.row(i).sum();
    if (total > Scalar(0)) out.row(i) /= total;
  }
  return out;
}

}  // namespace gsnn
