#pragma once

// Group sparse CNN: a sentence CNN whose pooled representation z passes
// through a group-sparse dictionary layer h = sigmoid(W z + b) before the
// classifier. The layer's sparsity penalties (and, with weight lambda, the
// reconstruction of z through the tied decoder) are trained jointly with the
// classification loss.

#include "gsnn/autoencoder.hpp"
#include "gsnn/hierarchy.hpp"
#include "gsnn/kmeans.hpp"
#include "gsnn/textcnn.hpp"

#include <string>
#include <vector>

namespace gsnn {

enum class InitStrategy { Random, Questions, Answers };

std::string to_string(InitStrategy s);
InitStrategy init_strategy_from_string(const std::string& s);

struct GscnnConfig {
  CnnConfig cnn;
  SparsityConfig<double> sparsity{0.2, 0.1, 1.0, 1.0, 6, 10, 0.0};
  double recon_weight = 0.1;
  InitStrategy init = InitStrategy::Random;
  int random_init_count = 0;  ///< 0 means 10 * G * g
  int pretrain_epochs = 5;
  double atom_scale = 1.0;    ///< L2 norm of each installed dictionary row
};

struct GscnnModel {
  Vocab vocab;
  FilterBank bank;
  GsaModel<double> dict;  // s = G*g hidden units over d = N inputs
  ClassifierHead head;    // over h
  SparsityConfig<double> cfg;
  double recon_weight = 0.1;
  std::vector<std::string> label_names;

  struct Forward {
    Vector z;
    Vector h;
    Vector probs;
  };
  Forward forward(const Tokens& sentence) const;
  Prediction predict(const Tokens& sentence) const;
  void validate() const;
};

/// Random-vector dictionary: `count` vectors uniform in [-0.5, 0.5]^dim are
/// clustered into G categories, then g centroids are taken per category.
GroupedDictionary<double> init_random(const SparsityConfig<double>& cfg, int dim, Rng& rng, int count = 0);

enum class CorpusSource { Questions, Answers };

/// Dictionary from sentence representations of a pretrained CNN: the G
/// categories with the most sentences (ties broken by label name), g k-means
/// centroids each. `mean_repr`, when given, receives the mean representation
/// over the sentences used.
GroupedDictionary<double> init_from_corpus(const CnnModel& pretrained, const LabeledCorpus& corpus,
                                           const SparsityConfig<double>& cfg, CorpusSource source, Rng& rng,
                                           Vector* mean_repr = nullptr);

struct JointTerms {
  double classification = 0;
  double reconstruction = 0;  // lambda * J
  double unit_kl = 0;         // alpha * sum KL
  double group_kl = 0;        // beta * sum KL
  double total = 0;
  double raw_group_kl = 0;    // unweighted sum KL(eta || eta_hat_p)
};

struct GscnnGradients {
  BankGradients bank;
  GsaGradients<double> dict;
  HeadGradients head;
  static GscnnGradients zeros_like(const GscnnModel& model);
};

/// Joint objective of one batch (m >= 2). `mask` is an optional dropout mask
/// on z (m x N).
JointTerms joint_loss(const GscnnModel& model, const std::vector<std::vector<int>>& ids,
                      const std::vector<std::vector<int>>& gold, GscnnGradients* grads = nullptr,
                      const Matrix* mask = nullptr);

/// Hidden activations (rows) for a list of sentences.
Matrix hidden_activations(const GscnnModel& model, const std::vector<Tokens>& sentences);

/// Builds an untrained model under the configured initialization strategy,
/// pretraining a CNN first for the corpus-based strategies.
GscnnModel build_gscnn(const LabeledCorpus& train, const GscnnConfig& config, const EpochCallback& on_pretrain_epoch = {});

/// Joint minibatch training of embeddings, filters, dictionary and head.
GscnnModel train_joint(GscnnModel model, const LabeledCorpus& train, const LabeledCorpus* validation,
                       const GscnnConfig& config, const EpochCallback& on_epoch = {});

/// Accuracy (top-1 among gold) of `model` on `corpus`.
double evaluate_gscnn(const GscnnModel& model, const LabeledCorpus& corpus);

const std::string& map_to_toplevel(const std::string& sub_label, const LabelHierarchy& hierarchy);

}  // namespace gsnn
