#include "gsnn/gscnn.hpp"

#include "gsnn/batching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <map>
#include <stdexcept>

namespace gsnn {

std::string to_string(InitStrategy s) {
  switch (s) {
    case InitStrategy::Random: return "random";
    case InitStrategy::Questions: return "questions";
    case InitStrategy::Answers: return "answers";
  }
  return "random";
}

InitStrategy init_strategy_from_string(const std::string& s) {
  if (s == "random") return InitStrategy::Random;
  if (s == "questions") return InitStrategy::Questions;
  if (s == "answers") return InitStrategy::Answers;
  throw std::invalid_argument("unknown init strategy '" + s + "' (expected random, questions or answers)");
}

GscnnModel::Forward GscnnModel::forward(const Tokens& sentence) const {
  Forward f;
  f.z = SentenceEncoding(bank, vocab.indices(sentence)).z();
  if (f.z.size() != dict.input_dim()) throw std::invalid_argument("forward: representation size does not match dictionary");
  f.h = sigmoid(Vector(dict.W * f.z + dict.b));
  f.probs = classify(f.h, head);
  return f;
}

Prediction GscnnModel::predict(const Tokens& sentence) const { return decide(forward(sentence).probs, head.kind); }

void GscnnModel::validate() const {
  bank.validate();
  cfg.validate();
  dict.validate(cfg);
  if (dict.input_dim() != bank.filter_count()) {
    throw std::invalid_argument("dictionary expects " + std::to_string(dict.input_dim()) + " inputs but the filter bank yields " +
                                std::to_string(bank.filter_count()));
  }
  if (head.weight.cols() != dict.hidden_dim()) throw std::invalid_argument("head input width must equal G*g");
  if (static_cast<std::size_t>(head.classes()) != label_names.size()) throw std::invalid_argument("head classes do not match label table");
  if (static_cast<std::size_t>(bank.embedding.rows()) != vocab.size()) throw std::invalid_argument("embedding rows do not match vocabulary");
  if (recon_weight < 0) throw std::invalid_argument("reconstruction weight must be nonnegative");
}

GroupedDictionary<double> init_random(const SparsityConfig<double>& cfg, int dim, Rng& rng, int count) {
  if (dim < 1) throw std::invalid_argument("init_random: dimension must be at least 1");
  cfg.validate();
  if (count == 0) count = 10 * cfg.groups * cfg.group_size;
  if (count < cfg.groups) throw std::invalid_argument("init_random: need at least G random vectors");
  const Matrix points = uniform_matrix<double>(count, dim, -0.5, 0.5, rng);
  return grouped_dictionary(points, cfg.groups, cfg.group_size, rng);
}

GroupedDictionary<double> init_from_corpus(const CnnModel& pretrained, const LabeledCorpus& corpus,
                                           const SparsityConfig<double>& cfg, CorpusSource source, Rng& rng,
                                           Vector* mean_repr) {
  cfg.validate();
  std::map<int, std::vector<const Tokens*>> by_label;
  if (source == CorpusSource::Questions) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      for (int l : corpus.labels[i]) by_label[l].push_back(&corpus.sentences[i]);
    }
  } else {
    for (const auto& [l, answers] : corpus.answers) {
      for (const auto& a : answers) by_label[l].push_back(&a);
    }
  }
  std::vector<int> ranked;
  for (const auto& [l, s] : by_label) {
    if (!s.empty()) ranked.push_back(l);
  }
  if (static_cast<int>(ranked.size()) < cfg.groups) {
    throw std::invalid_argument("init_from_corpus: " + std::to_string(ranked.size()) + " nonempty categories, need G = " +
                                std::to_string(cfg.groups));
  }
  auto name = [&](int l) -> const std::string& { return corpus.label_names.at(static_cast<std::size_t>(l)); };
  std::sort(ranked.begin(), ranked.end(), [&](int a, int b) {
    if (by_label[a].size() != by_label[b].size()) return by_label[a].size() > by_label[b].size();
    return name(a) < name(b);
  });
  ranked.resize(static_cast<std::size_t>(cfg.groups));

  std::vector<Matrix> grouped;
  Vector sum = Vector::Zero(pretrained.bank.filter_count());
  std::size_t used = 0;
  for (int l : ranked) {
    const auto& sentences = by_label[l];
    Matrix Z(static_cast<Eigen::Index>(sentences.size()), pretrained.bank.filter_count());
    for (std::size_t i = 0; i < sentences.size(); ++i) Z.row(static_cast<Eigen::Index>(i)) = pretrained.features(*sentences[i]).transpose();
    sum += Z.colwise().sum().transpose();
    used += sentences.size();
    grouped.push_back(std::move(Z));
  }
  if (mean_repr) *mean_repr = sum / static_cast<double>(used);
  return build_dictionary(grouped, cfg.group_size, rng);
}

GscnnGradients GscnnGradients::zeros_like(const GscnnModel& model) {
  return {BankGradients::zeros_like(model.bank), GsaGradients<double>::zeros_like(model.dict),
          HeadGradients::zeros_like(model.head)};
}

JointTerms joint_loss(const GscnnModel& model, const std::vector<std::vector<int>>& ids,
                      const std::vector<std::vector<int>>& gold, GscnnGradients* grads, const Matrix* mask) {
  if (ids.size() < 2) throw std::invalid_argument("joint_loss: batch needs at least 2 sentences");
  if (ids.size() != gold.size()) throw std::invalid_argument("joint_loss: batch/gold size mismatch");
  std::vector<SentenceEncoding> enc;
  enc.reserve(ids.size());
  Matrix Z(static_cast<Eigen::Index>(ids.size()), model.bank.filter_count());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    enc.emplace_back(model.bank, ids[i]);
    Z.row(static_cast<Eigen::Index>(i)) = enc.back().z().transpose();
  }
  if (mask) Z.array() *= mask->array();

  GsaPass<double> pass(model.dict, model.cfg, Z, Z, ReconKind::Mse, model.recon_weight);
  Matrix dH;
  JointTerms t;
  t.classification = head_loss(model.head, pass.hidden(), gold, grads ? &grads->head : nullptr, grads ? &dH : nullptr);
  t.reconstruction = pass.terms().weighted_reconstruction();
  t.unit_kl = pass.terms().weighted_unit_kl();
  t.group_kl = pass.terms().weighted_group_kl();
  t.raw_group_kl = pass.terms().group_kl;
  t.total = t.classification + t.reconstruction + t.unit_kl + t.group_kl;

  if (grads) {
    Matrix dZ;
    pass.backward(grads->dict, &dH, &dZ, true);
    if (mask) dZ.array() *= mask->array();
    for (std::size_t i = 0; i < enc.size(); ++i) {
      enc[i].backward(model.bank, dZ.row(static_cast<Eigen::Index>(i)).transpose(), grads->bank);
    }
  }
  return t;
}

Matrix hidden_activations(const GscnnModel& model, const std::vector<Tokens>& sentences) {
  Matrix H(static_cast<Eigen::Index>(sentences.size()), model.dict.hidden_dim());
  for (std::size_t i = 0; i < sentences.size(); ++i) H.row(static_cast<Eigen::Index>(i)) = model.forward(sentences[i]).h.transpose();
  return H;
}

namespace {

LabeledCorpus answer_corpus(const LabeledCorpus& corpus) {
  LabeledCorpus out;
  out.label_names = corpus.label_names;
  for (const auto& [l, answers] : corpus.answers) {
    for (const auto& a : answers) {
      out.sentences.push_back(a);
      out.labels.push_back({l});
    }
  }
  if (out.size() == 0) throw std::invalid_argument("answer initialization needs answer sentences");
  return out;
}

}  // namespace

GscnnModel build_gscnn(const LabeledCorpus& train, const GscnnConfig& config, const EpochCallback& on_pretrain_epoch) {
  train.validate();
  config.sparsity.validate();
  if (train.size() == 0) throw std::invalid_argument("build_gscnn: empty corpus");
  Rng rng(config.cnn.seed);
  Rng init = rng.fork();
  Rng cluster = rng.fork();

  GscnnModel model;
  model.cfg = config.sparsity;
  model.recon_weight = config.recon_weight;
  model.label_names = train.label_names;
  const int hidden = config.sparsity.hidden_size();

  GroupedDictionary<double> atoms;
  Vector center;
  if (config.init == InitStrategy::Random) {
    std::vector<Tokens> all = train.sentences;
    for (const auto& [l, answers] : train.answers) all.insert(all.end(), answers.begin(), answers.end());
    model.vocab = Vocab::build(all);
    model.bank = FilterBank::random(model.vocab.size(), config.cnn.embedding_dim, config.cnn.windows,
                                    config.cnn.filters_per_window, config.cnn.conv_activation, init);
    atoms = init_random(config.sparsity, model.bank.filter_count(), cluster, config.random_init_count);
    center = Vector::Zero(model.bank.filter_count());
  } else {
    CnnConfig pre = config.cnn;
    pre.epochs = config.pretrain_epochs;
    pre.head = HeadKind::Softmax;
    CnnModel pretrained;
    if (config.init == InitStrategy::Questions) {
      std::vector<Tokens> extra;
      for (const auto& [l, answers] : train.answers) extra.insert(extra.end(), answers.begin(), answers.end());
      LabeledCorpus single = train;
      if (train.multi_label) {
        // Softmax pretraining uses each question's first label.
        for (auto& ls : single.labels) ls.resize(1);
        single.multi_label = false;
      }
      pretrained = train_cnn(single, nullptr, pre, on_pretrain_epoch, extra);
      atoms = init_from_corpus(pretrained, train, config.sparsity, CorpusSource::Questions, cluster, &center);
    } else {
      pretrained = train_cnn(answer_corpus(train), nullptr, pre, on_pretrain_epoch, train.sentences);
      atoms = init_from_corpus(pretrained, train, config.sparsity, CorpusSource::Answers, cluster, &center);
    }
    model.vocab = pretrained.vocab;
    model.bank = pretrained.bank;
  }

  model.dict = GsaModel<double>::random(model.bank.filter_count(), hidden, init, true);
  model.dict.encoder = Activation::Sigmoid;
  model.dict.decoder = Activation::Linear;
  install_atoms(model.dict.W, model.dict.b, atoms.atoms, center, config.atom_scale);
  model.head = ClassifierHead::random(static_cast<int>(train.label_names.size()), hidden, config.cnn.head, init);
  model.validate();
  return model;
}

double evaluate_gscnn(const GscnnModel& model, const LabeledCorpus& corpus) {
  if (corpus.size() == 0) throw std::invalid_argument("evaluate_gscnn: empty corpus");
  std::vector<Prediction> preds;
  preds.reserve(corpus.size());
  for (const auto& s : corpus.sentences) preds.push_back(model.predict(s));
  return top1_accuracy(preds, corpus.labels);
}

GscnnModel train_joint(GscnnModel model, const LabeledCorpus& train, const LabeledCorpus* validation,
                       const GscnnConfig& config, const EpochCallback& on_epoch) {
  train.validate();
  model.validate();
  if (train.label_names != model.label_names) throw std::invalid_argument("train_joint: corpus label table differs from the model's");
  Rng rng(config.cnn.seed);
  rng.fork();  // dictionary initialization stream
  rng.fork();
  BatchSchedule schedule(train.size(), config.cnn.batch_size, rng.fork());
  Rng drop = rng.fork();

  std::vector<std::vector<int>> ids;
  ids.reserve(train.size());
  for (const auto& s : train.sentences) ids.push_back(model.vocab.indices(s));
  Optimizer<double> opt(config.cnn.optimizer);

  for (int epoch = 1; epoch <= config.cnn.epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    const auto batches = schedule.next_epoch();
    for (const auto& b : batches) {
      std::vector<std::vector<int>> bid, bgold;
      for (std::size_t i : b) {
        bid.push_back(ids[i]);
        bgold.push_back(train.labels[i]);
      }
      const Matrix mask = dropout_mask(static_cast<Eigen::Index>(b.size()), model.bank.filter_count(), config.cnn.dropout, drop);
      GscnnGradients g = GscnnGradients::zeros_like(model);
      const JointTerms t = joint_loss(model, bid, bgold, &g, &mask);
      if (!std::isfinite(t.total)) throw DivergenceError(epoch, "non-finite joint objective");
      m.total += t.total;
      m.classification += t.classification;
      m.reconstruction += t.reconstruction;
      m.unit_kl += t.unit_kl;
      m.group_kl += t.group_kl;
      opt.begin_step();
      std::size_t slot = 0;
      opt.update(slot++, model.bank.embedding, g.bank.embedding);
      for (std::size_t gi = 0; gi < model.bank.groups.size(); ++gi) {
        opt.update(slot++, model.bank.groups[gi].weights, g.bank.weights[gi]);
        opt.update(slot++, model.bank.groups[gi].bias, g.bank.bias[gi]);
      }
      opt.update(slot++, model.dict.W, g.dict.W);
      opt.update(slot++, model.dict.b, g.dict.b);
      opt.update(slot++, model.dict.c, g.dict.c);
      opt.update(slot++, model.head.weight, g.head.weight);
      opt.update(slot++, model.head.bias, g.head.bias);
      model.bank.embedding.row(Vocab::kPad).setZero();
    }
    const double n = static_cast<double>(batches.size());
    m.total /= n;
    m.classification /= n;
    m.reconstruction /= n;
    m.unit_kl /= n;
    m.group_kl /= n;
    m.train_accuracy = evaluate_gscnn(model, train);
    if (validation && validation->size() > 0) m.val_accuracy = evaluate_gscnn(model, *validation);
    if (on_epoch) on_epoch(m);
  }
  return model;
}

const std::string& map_to_toplevel(const std::string& sub_label, const LabelHierarchy& hierarchy) {
  return hierarchy.parent(sub_label);
}

}  // namespace gsnn
