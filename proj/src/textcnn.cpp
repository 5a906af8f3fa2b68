#include "gsnn/textcnn.hpp"

#include "gsnn/batching.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsnn {

Vocab::Vocab() {
  add("<pad>");
  add("<unk>");
}

int Vocab::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocab::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::indices(const Tokens& sentence) const {
  std::vector<int> ids;
  ids.reserve(sentence.size());
  for (const auto& t : sentence) ids.push_back(index(t));
  return ids;
}

Vocab Vocab::build(const std::vector<Tokens>& sentences) {
  Vocab v;
  for (const auto& s : sentences) {
    for (const auto& t : s) v.add(t);
  }
  return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
    throw std::invalid_argument("vocabulary must start with <pad>, <unk>");
  }
  Vocab v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.add(tokens[i]) != static_cast<int>(i)) throw std::invalid_argument("duplicate vocabulary token '" + tokens[i] + "'");
  }
  return v;
}

int FilterBank::filter_count() const {
  int n = 0;
  for (const auto& g : groups) n += static_cast<int>(g.weights.rows());
  return n;
}

int FilterBank::max_window() const {
  int n = 1;
  for (const auto& g : groups) n = std::max(n, g.window);
  return n;
}

Matrix FilterBank::filter(int k, int* window, double* bias) const {
  for (const auto& g : groups) {
    if (k < g.weights.rows()) {
      if (window) *window = g.window;
      if (bias) *bias = g.bias[k];
      Matrix w(g.window, embedding_dim());
      for (int r = 0; r < g.window; ++r) w.row(r) = g.weights.row(k).segment(static_cast<Eigen::Index>(r) * embedding_dim(), embedding_dim());
      return w;
    }
    k -= static_cast<int>(g.weights.rows());
  }
  throw std::out_of_range("filter index out of range");
}

FilterBank FilterBank::random(std::size_t vocab_size, int embedding_dim, const std::vector<int>& windows, int per_window,
                              Activation activation, Rng& rng) {
  if (windows.empty() || per_window < 1) throw std::invalid_argument("filter bank needs at least one filter");
  if (embedding_dim < 1) throw std::invalid_argument("embedding dimension must be positive");
  FilterBank bank;
  bank.activation = activation;
  bank.embedding = uniform_matrix<double>(static_cast<Eigen::Index>(vocab_size), embedding_dim, -0.25, 0.25, rng);
  bank.embedding.row(Vocab::kPad).setZero();
  for (int n : windows) {
    if (n < 1) throw std::invalid_argument("window sizes must be positive");
    FilterGroup g;
    g.window = n;
    const double r = std::sqrt(6.0 / static_cast<double>(n * embedding_dim + per_window));
    g.weights = uniform_matrix<double>(per_window, static_cast<Eigen::Index>(n) * embedding_dim, -r, r, rng);
    g.bias = Vector::Zero(per_window);
    bank.groups.push_back(std::move(g));
  }
  return bank;
}

void FilterBank::validate() const {
  if (groups.empty()) throw std::invalid_argument("filter bank is empty");
  for (const auto& g : groups) {
    if (g.window < 1) throw std::invalid_argument("filter window must be positive");
    if (g.weights.cols() != static_cast<Eigen::Index>(g.window) * embedding_dim()) {
      throw std::invalid_argument("filter width inconsistent with embedding dimension");
    }
    if (g.bias.size() != g.weights.rows()) throw std::invalid_argument("filter bias count mismatch");
  }
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "softmax") return HeadKind::Softmax;
  if (s == "sigmoid") return HeadKind::Sigmoid;
  throw std::invalid_argument("unknown head '" + s + "'");
}

ClassifierHead ClassifierHead::random(int classes, int input_dim, HeadKind kind, Rng& rng) {
  if (kind == HeadKind::Softmax && classes < 2) throw std::invalid_argument("softmax head needs at least 2 classes");
  if (classes < 1) throw std::invalid_argument("head needs at least 1 class");
  ClassifierHead h;
  h.kind = kind;
  const double r = std::sqrt(6.0 / static_cast<double>(classes + input_dim));
  h.weight = uniform_matrix<double>(classes, input_dim, -r, r, rng);
  h.bias = Vector::Zero(classes);
  return h;
}

Matrix encode_sentence(const std::vector<int>& ids, const Matrix& embedding, int min_length) {
  if (ids.empty()) throw std::invalid_argument("encode_sentence: empty sentence");
  const Eigen::Index length = std::max<Eigen::Index>(static_cast<Eigen::Index>(ids.size()), min_length);
  Matrix X = Matrix::Zero(length, embedding.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= embedding.rows()) throw std::out_of_range("encode_sentence: token id out of range");
    X.row(static_cast<Eigen::Index>(i)) = embedding.row(ids[i]);
  }
  return X;
}

Matrix encode_sentence(const Tokens& tokens, const Vocab& vocab, const Matrix& embedding, int min_length) {
  return encode_sentence(vocab.indices(tokens), embedding, min_length);
}

Vector convolve(const Matrix& X, const Matrix& w, double bias, Activation activation) {
  if (X.rows() < 1) throw std::invalid_argument("convolve: empty input");
  if (w.rows() < 1) throw std::invalid_argument("convolve: window must be at least 1");
  if (w.cols() != X.cols()) {
    throw std::invalid_argument("convolve: filter width " + std::to_string(w.cols()) + " does not match embedding " +
                                std::to_string(X.cols()));
  }
  const Eigen::Index L = X.rows();
  Vector a(L);
  for (Eigen::Index i = 0; i < L; ++i) {
    double s = bias;
    for (Eigen::Index r = 0; r < w.rows() && i + r < L; ++r) s += w.row(r).dot(X.row(i + r));
    a[i] = activate(activation, s);
  }
  return a;
}

Eigen::Index argmax_first(const Vector& a) {
  if (a.size() == 0) throw std::invalid_argument("argmax of empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < a.size(); ++i) {
    if (a[i] > a[best]) best = i;
  }
  return best;
}

double max_pool(const Vector& a) { return a[argmax_first(a)]; }

Vector sentence_repr(const Matrix& X, const FilterBank& bank) {
  bank.validate();
  Vector z(bank.filter_count());
  for (int k = 0; k < z.size(); ++k) {
    int n = 0;
    double b = 0;
    const Matrix w = bank.filter(k, &n, &b);
    z[k] = max_pool(convolve(X, w, b, bank.activation));
  }
  return z;
}

Vector classify(const Vector& features, const ClassifierHead& head) {
  if (features.size() != head.weight.cols()) {
    throw std::invalid_argument("classify: " + std::to_string(features.size()) + " features, head expects " +
                                std::to_string(head.weight.cols()));
  }
  const Vector logits = head.weight * features + head.bias;
  if (head.kind == HeadKind::Softmax) return softmax(logits);
  return sigmoid(logits);
}

namespace {

void check_gold(const std::vector<int>& gold, Eigen::Index classes, HeadKind kind) {
  if (gold.empty()) throw std::invalid_argument("gold label set is empty");
  if (kind == HeadKind::Softmax && gold.size() != 1) {
    throw std::invalid_argument("softmax head requires exactly one gold label");
  }
  for (int g : gold) {
    if (g < 0 || g >= classes) throw std::invalid_argument("gold label " + std::to_string(g) + " out of range");
  }
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

double cnn_loss(const Vector& probs, const std::vector<int>& gold, HeadKind kind) {
  check_gold(gold, probs.size(), kind);
  if (kind == HeadKind::Softmax) return -std::log(std::max(probs[gold[0]], kProbEps));
  double loss = 0;
  for (Eigen::Index c = 0; c < probs.size(); ++c) {
    const bool positive = std::find(gold.begin(), gold.end(), static_cast<int>(c)) != gold.end();
    const double p = clamp_prob(probs[c]);
    loss -= positive ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

BankGradients BankGradients::zeros_like(const FilterBank& bank) {
  BankGradients g;
  g.embedding = Matrix::Zero(bank.embedding.rows(), bank.embedding.cols());
  for (const auto& grp : bank.groups) {
    g.weights.push_back(Matrix::Zero(grp.weights.rows(), grp.weights.cols()));
    g.bias.push_back(Vector::Zero(grp.bias.size()));
  }
  return g;
}

HeadGradients HeadGradients::zeros_like(const ClassifierHead& head) {
  return {Matrix::Zero(head.weight.rows(), head.weight.cols()), Vector::Zero(head.bias.size())};
}

SentenceEncoding::SentenceEncoding(const FilterBank& bank, std::vector<int> ids) : ids_(std::move(ids)) {
  while (ids_.size() > 1 && ids_.back() == Vocab::kPad) ids_.pop_back();
  const Matrix X = encode_sentence(ids_, bank.embedding);
  const Eigen::Index L = X.rows();
  const Eigen::Index e = X.cols();
  z_.resize(bank.filter_count());
  Eigen::Index offset = 0;
  for (const auto& g : bank.groups) {
    Matrix U = Matrix::Zero(L, static_cast<Eigen::Index>(g.window) * e);
    for (Eigen::Index i = 0; i < L; ++i) {
      for (Eigen::Index r = 0; r < g.window && i + r < L; ++r) U.block(i, r * e, 1, e) = X.row(i + r);
    }
    Matrix pre = U * g.weights.transpose();
    pre.rowwise() += g.bias.transpose();
    std::vector<Eigen::Index> arg(static_cast<std::size_t>(g.weights.rows()));
    for (Eigen::Index k = 0; k < pre.cols(); ++k) {
      // Activations are monotone, so the argmax of pre is the argmax of a.
      Eigen::Index best = 0;
      double best_a = activate(bank.activation, pre(0, k));
      for (Eigen::Index i = 1; i < L; ++i) {
        const double a = activate(bank.activation, pre(i, k));
        if (a > best_a) {
          best_a = a;
          best = i;
        }
      }
      arg[static_cast<std::size_t>(k)] = best;
      z_[offset + k] = best_a;
    }
    offset += pre.cols();
    unfolded_.push_back(std::move(U));
    pre_.push_back(std::move(pre));
    argmax_.push_back(std::move(arg));
  }
}

void SentenceEncoding::backward(const FilterBank& bank, const Eigen::Ref<const Vector>& dz, BankGradients& grads) const {
  const Eigen::Index e = bank.embedding.cols();
  const Eigen::Index L = unfolded_.empty() ? 0 : unfolded_.front().rows();
  Matrix dX = Matrix::Zero(L, e);
  Eigen::Index offset = 0;
  for (std::size_t gi = 0; gi < bank.groups.size(); ++gi) {
    const auto& g = bank.groups[gi];
    const Matrix& U = unfolded_[gi];
    for (Eigen::Index k = 0; k < g.weights.rows(); ++k) {
      const double upstream = dz[offset + k];
      if (upstream == 0.0) continue;
      const Eigen::Index i = argmax_[gi][static_cast<std::size_t>(k)];
      const double x = pre_[gi](i, k);
      const double d = upstream * activation_slope(bank.activation, x, activate(bank.activation, x));
      if (d == 0.0) continue;
      grads.weights[gi].row(k) += d * U.row(i);
      grads.bias[gi][k] += d;
      for (Eigen::Index r = 0; r < g.window && i + r < L; ++r) {
        dX.row(i + r) += d * g.weights.row(k).segment(r * e, e);
      }
    }
    offset += g.weights.rows();
  }
  for (std::size_t t = 0; t < ids_.size(); ++t) {
    if (ids_[t] == Vocab::kPad) continue;
    grads.embedding.row(ids_[t]) += dX.row(static_cast<Eigen::Index>(t));
  }
}

double head_loss(const ClassifierHead& head, const Matrix& features, const std::vector<std::vector<int>>& gold,
                 HeadGradients* grads, Matrix* d_features, Matrix* probs) {
  if (features.cols() != head.weight.cols()) {
    throw std::invalid_argument("head_loss: " + std::to_string(features.cols()) + " features, head expects " +
                                std::to_string(head.weight.cols()));
  }
  if (static_cast<std::size_t>(features.rows()) != gold.size()) throw std::invalid_argument("head_loss: batch/gold size mismatch");
  const Eigen::Index m = features.rows();
  const Eigen::Index C = head.weight.rows();
  Matrix logits = features * head.weight.transpose();
  logits.rowwise() += head.bias.transpose();
  Matrix dlogits(m, C);
  if (probs) probs->resize(m, C);
  double total = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& g = gold[static_cast<std::size_t>(i)];
    check_gold(g, C, head.kind);
    const Vector row = logits.row(i).transpose();
    if (head.kind == HeadKind::Softmax) {
      const double shift = row.maxCoeff();
      const double lse = shift + std::log((row.array() - shift).exp().sum());
      total += lse - row[g[0]];
      const Vector p = (row.array() - lse).exp().matrix();
      dlogits.row(i) = p.transpose();
      dlogits(i, g[0]) -= 1.0;
      if (probs) probs->row(i) = p.transpose();
    } else {
      for (Eigen::Index c = 0; c < C; ++c) {
        const bool positive = std::find(g.begin(), g.end(), static_cast<int>(c)) != g.end();
        const double x = row[c];
        total += softplus(x) - (positive ? x : 0.0);
        const double p = sigmoid(x);
        dlogits(i, c) = p - (positive ? 1.0 : 0.0);
        if (probs) (*probs)(i, c) = p;
      }
    }
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  dlogits *= inv_m;
  if (grads) {
    grads->weight.noalias() += dlogits.transpose() * features;
    grads->bias += dlogits.colwise().sum().transpose();
  }
  if (d_features) *d_features = dlogits * head.weight;
  return total * inv_m;
}

Prediction decide(const Vector& probs, HeadKind kind) {
  Prediction p;
  p.top1 = static_cast<int>(argmax_first(probs));
  if (kind == HeadKind::Softmax) {
    p.labels = {p.top1};
  } else {
    for (Eigen::Index c = 0; c < probs.size(); ++c) {
      if (probs[c] >= 0.5) p.labels.push_back(static_cast<int>(c));
    }
  }
  return p;
}

double top1_accuracy(const std::vector<Prediction>& predictions, const std::vector<std::vector<int>>& gold) {
  if (predictions.size() != gold.size() || gold.empty()) throw std::invalid_argument("top1_accuracy: size mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (std::find(gold[i].begin(), gold[i].end(), predictions[i].top1) != gold[i].end()) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

double exact_match(const std::vector<Prediction>& predictions, const std::vector<std::vector<int>>& gold) {
  if (predictions.size() != gold.size() || gold.empty()) throw std::invalid_argument("exact_match: size mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::vector<int> a = predictions[i].labels;
    std::vector<int> b = gold[i];
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a == b) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must lie in [0,1)");
  Matrix mask = Matrix::Ones(rows, cols);
  if (rate == 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.bernoulli(rate) ? 0.0 : keep;
  return mask;
}

Vector CnnModel::features(const Tokens& sentence) const { return SentenceEncoding(bank, vocab.indices(sentence)).z(); }

Vector CnnModel::probabilities(const Tokens& sentence) const { return classify(features(sentence), head); }

Prediction CnnModel::predict(const Tokens& sentence) const { return decide(probabilities(sentence), head.kind); }

double cnn_batch_loss(const CnnModel& model, const std::vector<std::vector<int>>& ids,
                      const std::vector<std::vector<int>>& gold, BankGradients* bank_grads, HeadGradients* head_grads,
                      const Matrix* mask) {
  std::vector<SentenceEncoding> enc;
  enc.reserve(ids.size());
  Matrix Z(static_cast<Eigen::Index>(ids.size()), model.bank.filter_count());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    enc.emplace_back(model.bank, ids[i]);
    Z.row(static_cast<Eigen::Index>(i)) = enc.back().z().transpose();
  }
  if (mask) Z.array() *= mask->array();
  Matrix dZ;
  const double loss = head_loss(model.head, Z, gold, head_grads, bank_grads ? &dZ : nullptr);
  if (bank_grads) {
    if (mask) dZ.array() *= mask->array();
    for (std::size_t i = 0; i < enc.size(); ++i) {
      enc[i].backward(model.bank, dZ.row(static_cast<Eigen::Index>(i)).transpose(), *bank_grads);
    }
  }
  return loss;
}

std::pair<double, double> evaluate_cnn(const CnnModel& model, const LabeledCorpus& corpus) {
  std::vector<Prediction> preds;
  double loss = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Vector p = model.probabilities(corpus.sentences[i]);
    loss += cnn_loss(p, corpus.labels[i], model.head.kind);
    preds.push_back(decide(p, model.head.kind));
  }
  return {loss / static_cast<double>(corpus.size()), top1_accuracy(preds, corpus.labels)};
}

CnnModel train_cnn(const LabeledCorpus& train, const LabeledCorpus* validation, const CnnConfig& config,
                   const EpochCallback& on_epoch, const std::vector<Tokens>& extra_vocab) {
  train.validate();
  if (train.size() == 0) throw std::invalid_argument("train_cnn: empty corpus");
  Rng rng(config.seed);
  Rng init = rng.fork();
  BatchSchedule schedule(train.size(), config.batch_size, rng.fork());
  Rng drop = rng.fork();

  CnnModel model;
  std::vector<Tokens> all = train.sentences;
  all.insert(all.end(), extra_vocab.begin(), extra_vocab.end());
  model.vocab = Vocab::build(all);
  model.label_names = train.label_names;
  model.bank = FilterBank::random(model.vocab.size(), config.embedding_dim, config.windows, config.filters_per_window,
                                  config.conv_activation, init);
  model.head = ClassifierHead::random(static_cast<int>(train.label_names.size()), model.bank.filter_count(), config.head, init);

  std::vector<std::vector<int>> ids;
  for (const auto& s : train.sentences) ids.push_back(model.vocab.indices(s));
  Optimizer<double> opt(config.optimizer);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double running = 0;
    const auto batches = schedule.next_epoch();
    for (const auto& b : batches) {
      std::vector<std::vector<int>> bid, bgold;
      for (std::size_t i : b) {
        bid.push_back(ids[i]);
        bgold.push_back(train.labels[i]);
      }
      const Matrix mask = dropout_mask(static_cast<Eigen::Index>(b.size()), model.bank.filter_count(), config.dropout, drop);
      BankGradients bg = BankGradients::zeros_like(model.bank);
      HeadGradients hg = HeadGradients::zeros_like(model.head);
      const double loss = cnn_batch_loss(model, bid, bgold, &bg, &hg, &mask);
      if (!std::isfinite(loss)) throw std::runtime_error("train_cnn: diverged at epoch " + std::to_string(epoch));
      running += loss;
      opt.begin_step();
      std::size_t slot = 0;
      opt.update(slot++, model.bank.embedding, bg.embedding);
      for (std::size_t gi = 0; gi < model.bank.groups.size(); ++gi) {
        opt.update(slot++, model.bank.groups[gi].weights, bg.weights[gi]);
        opt.update(slot++, model.bank.groups[gi].bias, bg.bias[gi]);
      }
      opt.update(slot++, model.head.weight, hg.weight);
      opt.update(slot++, model.head.bias, hg.bias);
      model.bank.embedding.row(Vocab::kPad).setZero();
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.classification = running / static_cast<double>(batches.size());
    m.total = m.classification;
    m.train_accuracy = evaluate_cnn(model, train).second;
    if (validation && validation->size() > 0) m.val_accuracy = evaluate_cnn(model, *validation).second;
    if (on_epoch) on_epoch(m);
  }
  return model;
}

}  // namespace gsnn
