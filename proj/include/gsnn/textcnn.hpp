#pragma once

// Sequential sentence CNN: word embeddings, one-dimensional convolution with
// right zero-padding, max-over-time pooling, and softmax/sigmoid heads.

#include "gsnn/data.hpp"
#include "gsnn/numcore.hpp"
#include "gsnn/optimizer.hpp"

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace gsnn {

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab();

  int add(const std::string& token);
  int index(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<int> indices(const Tokens& sentence) const;

  static Vocab build(const std::vector<Tokens>& sentences);
  /// Rebuilds from the serialized token list (index order, specials first).
  static Vocab from_tokens(const std::vector<std::string>& tokens);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// All filters of one window size, one flattened n x e filter per row.
struct FilterGroup {
  int window = 3;
  Matrix weights;  // count x (window * e)
  Vector bias;     // count
};

struct FilterBank {
  Matrix embedding;  // |vocab| x e; row Vocab::kPad stays zero
  std::vector<FilterGroup> groups;
  Activation activation = Activation::Relu;

  int embedding_dim() const { return static_cast<int>(embedding.cols()); }
  int filter_count() const;
  int max_window() const;
  /// Filter k (bank order) reshaped to n x e.
  Matrix filter(int k, int* window = nullptr, double* bias = nullptr) const;

  static FilterBank random(std::size_t vocab_size, int embedding_dim, const std::vector<int>& windows,
                           int per_window, Activation activation, Rng& rng);
  void validate() const;
};

enum class HeadKind { Softmax, Sigmoid };

inline std::string to_string(HeadKind k) { return k == HeadKind::Softmax ? "softmax" : "sigmoid"; }
HeadKind head_kind_from_string(const std::string& s);

struct ClassifierHead {
  Matrix weight;  // C x inputDim
  Vector bias;    // C
  HeadKind kind = HeadKind::Softmax;

  int classes() const { return static_cast<int>(weight.rows()); }
  static ClassifierHead random(int classes, int input_dim, HeadKind kind, Rng& rng);
};

/// Embedding rows for `ids`, right-padded with zero rows up to `min_length`.
Matrix encode_sentence(const std::vector<int>& ids, const Matrix& embedding, int min_length = 1);
Matrix encode_sentence(const Tokens& tokens, const Vocab& vocab, const Matrix& embedding, int min_length = 1);

/// Feature map a_i = act(<w, X[i..i+n-1]> + b) for i = 0..L-1; rows past the
/// end of X are zero.
Vector convolve(const Matrix& X, const Matrix& w, double bias, Activation activation);
double max_pool(const Vector& a);
/// First index of the maximum.
Eigen::Index argmax_first(const Vector& a);

/// z_k = max_pool(convolve(X, filter_k)), bank order.
Vector sentence_repr(const Matrix& X, const FilterBank& bank);

Vector classify(const Vector& features, const ClassifierHead& head);

/// Softmax: -ln p[gold] (lower-clamped). Sigmoid: independent binary
/// cross-entropy summed over classes with clamped probabilities.
double cnn_loss(const Vector& probs, const std::vector<int>& gold, HeadKind kind);

struct BankGradients {
  Matrix embedding;
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
  static BankGradients zeros_like(const FilterBank& bank);
};

struct HeadGradients {
  Matrix weight;
  Vector bias;
  static HeadGradients zeros_like(const ClassifierHead& head);
};

/// Forward cache of one sentence through the filter bank. Trailing pad ids
/// are not part of the sentence, so the feature maps have one entry per
/// remaining token.
class SentenceEncoding {
 public:
  SentenceEncoding(const FilterBank& bank, std::vector<int> ids);

  const Vector& z() const { return z_; }
  /// Routes dz through each filter's first argmax position.
  void backward(const FilterBank& bank, const Eigen::Ref<const Vector>& dz, BankGradients& grads) const;

 private:
  std::vector<int> ids_;
  std::vector<Matrix> unfolded_;  // per group: L x (n e)
  std::vector<Matrix> pre_;       // per group: L x count
  std::vector<std::vector<Eigen::Index>> argmax_;
  Vector z_;
};

/// Mean per-sample classification loss over a batch of feature rows, computed
/// from logits. Optionally accumulates head gradients, dL/dfeatures and the
/// probabilities.
double head_loss(const ClassifierHead& head, const Matrix& features, const std::vector<std::vector<int>>& gold,
                 HeadGradients* grads = nullptr, Matrix* d_features = nullptr, Matrix* probs = nullptr);

/// Ranked prediction: top-1 always, plus every class at or above 0.5 for
/// sigmoid heads.
struct Prediction {
  int top1 = 0;
  std::vector<int> labels;
};
Prediction decide(const Vector& probs, HeadKind kind);

/// Fraction of samples whose top-1 class is among the gold labels.
double top1_accuracy(const std::vector<Prediction>& predictions, const std::vector<std::vector<int>>& gold);
/// Fraction of samples whose predicted label set equals the gold set.
double exact_match(const std::vector<Prediction>& predictions, const std::vector<std::vector<int>>& gold);

struct CnnConfig {
  int embedding_dim = 128;
  std::vector<int> windows{3, 4, 5};
  int filters_per_window = 100;
  Activation conv_activation = Activation::Relu;
  HeadKind head = HeadKind::Softmax;
  double dropout = 0.5;
  int epochs = 10;
  std::size_t batch_size = 50;
  OptimizerSettings optimizer{OptimizerKind::Adam, 1e-3};
  std::uint64_t seed = 1;
};

struct CnnModel {
  Vocab vocab;
  FilterBank bank;
  ClassifierHead head;
  std::vector<std::string> label_names;

  Vector features(const Tokens& sentence) const;
  Vector probabilities(const Tokens& sentence) const;
  Prediction predict(const Tokens& sentence) const;
};

struct EpochMetrics {
  int epoch = 0;
  double total = 0;
  double classification = 0;
  double reconstruction = 0;  // weighted
  double unit_kl = 0;         // weighted
  double group_kl = 0;        // weighted
  double train_accuracy = 0;
  double val_accuracy = -1;   // -1 when there is no validation split
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Dropout mask scaled by 1/(1-rate) (inverted dropout); all ones for rate 0.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

/// Mean cross-entropy and top-1 accuracy of `model` on `corpus`.
std::pair<double, double> evaluate_cnn(const CnnModel& model, const LabeledCorpus& corpus);

/// Minibatch training of embeddings, filters and head. `extra_vocab` lets the
/// vocabulary cover sentences that are not training samples (e.g. answers).
CnnModel train_cnn(const LabeledCorpus& train, const LabeledCorpus* validation, const CnnConfig& config,
                   const EpochCallback& on_epoch = {}, const std::vector<Tokens>& extra_vocab = {});

/// Loss of a fixed batch (no dropout) and its gradients; used by the trainer
/// and by gradient checks.
double cnn_batch_loss(const CnnModel& model, const std::vector<std::vector<int>>& ids,
                      const std::vector<std::vector<int>>& gold, BankGradients* bank_grads,
                      HeadGradients* head_grads, const Matrix* mask = nullptr);

}  // namespace gsnn
