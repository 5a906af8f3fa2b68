#include "gsnn/commands.hpp"

#include "gsnn/autoencoder.hpp"
#include "gsnn/checkpoint.hpp"
#include "gsnn/gscnn.hpp"
#include "gsnn/textcnn.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gsnn {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_cell(const std::string& s) {
  if (s.empty()) return kNaN;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || (errno == ERANGE && std::isinf(v))) throw std::runtime_error("metrics: bad number '" + s + "'");
  return v;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::string out_file(const RunConfig& c, const std::string& name) { return (fs::path(c.out_dir) / name).string(); }

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::uint64_t init_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

ImageDataset load_images(const RunConfig& c) {
  if (c.mnist_images.empty() || c.mnist_labels.empty()) throw std::invalid_argument("data.mnist_images and data.mnist_labels are required");
  ImageDataset data = load_mnist_idx(c.mnist_images, c.mnist_labels);
  if (c.limit > 0 && c.limit < static_cast<std::size_t>(data.images.rows())) {
    data.images.conservativeResize(static_cast<Eigen::Index>(c.limit), Eigen::NoChange);
    data.labels.resize(c.limit);
  }
  return data;
}

std::vector<std::string> names_of(const std::vector<int>& ids, const std::vector<std::string>& table) {
  std::vector<std::string> out;
  for (int id : ids) out.push_back(table.at(static_cast<std::size_t>(id)));
  return out;
}

int top_level_count(const LabeledCorpus& corpus) {
  std::set<std::string> tops;
  const auto counts = corpus.label_counts();
  for (std::size_t l = 0; l < corpus.label_names.size(); ++l) {
    if (counts[l] == 0) continue;
    const auto& name = corpus.label_names[l];
    tops.insert(corpus.hierarchy && corpus.hierarchy->contains(name) ? corpus.hierarchy->parent(name) : name);
  }
  return static_cast<int>(tops.size());
}

MetricsRow row_from(const EpochMetrics& m, const std::string& phase) {
  MetricsRow r;
  r.phase = phase;
  r.epoch = m.epoch;
  r.total = m.total;
  r.classification = m.classification;
  r.reconstruction = m.reconstruction;
  r.unit_kl = m.unit_kl;
  r.group_kl = m.group_kl;
  r.train_accuracy = m.train_accuracy;
  r.val_accuracy = m.val_accuracy < 0 ? kNaN : m.val_accuracy;
  return r;
}

TrainOutcome train_gsa(const RunConfig& c, Checkpoint& ck) {
  const ImageDataset data = load_images(c);
  Rng init(init_seed(*c.seed));
  GsaModel<double> model = c.gsa_init == GsaInit::Grouped
                               ? grouped_model(data.images, c.sparsity, init, c.tied, c.gsa_init_scale, c.gsa_init_restarts)
                               : GsaModel<double>::random(data.images.cols(), c.sparsity.hidden_size(), init, c.tied);
  model.encoder = Activation::Sigmoid;
  model.decoder = c.recon == ReconKind::CrossEntropy ? Activation::Sigmoid : Activation::Linear;
  const auto result = train(model, c.sparsity, data.images, c.gsa_settings());

  TrainOutcome out;
  for (const auto& rec : result.trace) {
    MetricsRow r;
    r.epoch = rec.epoch;
    r.total = rec.eval.total;
    r.reconstruction = rec.eval.weighted_reconstruction();
    r.unit_kl = rec.eval.weighted_unit_kl();
    r.group_kl = rec.eval.weighted_group_kl();
    out.metrics.push_back(r);
  }
  const auto& first = result.trace.front().eval;
  const auto& last = result.trace.back().eval;
  out.summary = {{"task", "gsa"},
                 {"seed", std::to_string(*c.seed)},
                 {"samples", std::to_string(data.images.rows())},
                 {"input_dim", std::to_string(data.images.cols())},
                 {"hidden_units", std::to_string(c.sparsity.hidden_size())},
                 {"epochs", std::to_string(c.epochs)},
                 {"initial_total", fmt(first.total)},
                 {"final_total", fmt(last.total)},
                 {"initial_group_kl", fmt(first.group_kl)},
                 {"final_group_kl", fmt(last.group_kl)},
                 {"group_kl_ratio", fmt(first.group_kl > 0 ? last.group_kl / first.group_kl : kNaN)},
                 {"final_reconstruction", fmt(last.reconstruction)}};
  store(ck, result.model, c.sparsity, c.recon);
  return out;
}

double top_level_accuracy(const std::vector<Prediction>& preds, const LabeledCorpus& corpus,
                          const std::vector<std::string>& model_labels) {
  if (!corpus.hierarchy) return kNaN;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::string& pred = model_labels.at(static_cast<std::size_t>(preds[i].top1));
    if (!corpus.hierarchy->contains(pred)) return kNaN;
    const std::string& top = corpus.hierarchy->parent(pred);
    for (int g : corpus.labels[i]) {
      if (corpus.hierarchy->parent(corpus.label_names[static_cast<std::size_t>(g)]) == top) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(corpus.size());
}

/// Re-expresses `corpus` labels in the model's label table (unknown labels are
/// dropped; samples left without labels are skipped).
LabeledCorpus relabel(const LabeledCorpus& corpus, const std::vector<std::string>& model_labels) {
  LabeledCorpus out;
  out.label_names = model_labels;
  out.hierarchy = corpus.hierarchy;
  out.multi_label = corpus.multi_label;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::vector<int> ids;
    for (int g : corpus.labels[i]) {
      const auto& name = corpus.label_names[static_cast<std::size_t>(g)];
      auto it = std::find(model_labels.begin(), model_labels.end(), name);
      if (it != model_labels.end()) ids.push_back(static_cast<int>(it - model_labels.begin()));
    }
    if (ids.empty()) continue;
    out.sentences.push_back(corpus.sentences[i]);
    out.labels.push_back(ids);
  }
  return out;
}

TrainOutcome train_text(const RunConfig& c, Checkpoint& ck) {
  LabeledCorpus full = *load_text_corpus(c, false);
  if (!c.holdout_labels.empty()) full = hold_out(full, c.holdout_labels);
  if (full.size() < 2) throw std::invalid_argument("training corpus needs at least 2 samples");
  RunConfig cfg = c;
  if (cfg.head_auto) cfg.cnn.head = full.multi_label ? HeadKind::Sigmoid : HeadKind::Softmax;
  if (cfg.groups_auto) cfg.sparsity.groups = top_level_count(full);

  Rng split_rng(init_seed(*c.seed) + 1);
  LabeledCorpus train_set = full;
  std::optional<LabeledCorpus> val;
  if (c.validation_fraction > 0) {
    const auto [tr, va] = split_indices(full.size(), c.validation_fraction, split_rng);
    train_set = full.subset(tr);
    val = full.subset(va);
  }
  const std::optional<LabeledCorpus> test = load_text_corpus(c, true);

  TrainOutcome out;
  std::vector<std::string> labels;
  std::function<Prediction(const Tokens&)> predict;
  CnnModel cnn;
  GscnnModel gscnn;
  const GscnnConfig gc = cfg.gscnn_config();
  if (c.task == TaskKind::Cnn) {
    cnn = train_cnn(train_set, val ? &*val : nullptr, gc.cnn, [&](const EpochMetrics& m) { out.metrics.push_back(row_from(m, "train")); });
    labels = cnn.label_names;
    predict = [&](const Tokens& s) { return cnn.predict(s); };
    store(ck, cnn);
  } else {
    GscnnModel init = build_gscnn(train_set, gc, [&](const EpochMetrics& m) { out.metrics.push_back(row_from(m, "pretrain")); });
    gscnn = train_joint(std::move(init), train_set, val ? &*val : nullptr, gc,
                        [&](const EpochMetrics& m) { out.metrics.push_back(row_from(m, "train")); });
    labels = gscnn.label_names;
    predict = [&](const Tokens& s) { return gscnn.predict(s); };
    store(ck, gscnn);
  }
  if (full.hierarchy) store_hierarchy(ck, *full.hierarchy);

  out.summary = {{"task", to_string(c.task)},
                 {"seed", std::to_string(*c.seed)},
                 {"train_samples", std::to_string(train_set.size())},
                 {"validation_samples", std::to_string(val ? val->size() : 0)},
                 {"labels", std::to_string(labels.size())},
                 {"head", to_string(cfg.cnn.head)},
                 {"epochs", std::to_string(c.epochs)}};
  if (c.task == TaskKind::Gscnn) {
    out.summary.push_back({"init", to_string(c.init)});
    out.summary.push_back({"groups", std::to_string(cfg.sparsity.groups)});
    out.summary.push_back({"group_size", std::to_string(cfg.sparsity.group_size)});
  }
  const MetricsRow& last = out.metrics.back();
  out.summary.push_back({"final_train_accuracy", fmt(last.train_accuracy)});
  out.summary.push_back({"final_val_accuracy", fmt(last.val_accuracy)});
  if (test) {
    const LabeledCorpus known = relabel(*test, labels);
    std::vector<Prediction> preds;
    for (const auto& s : test->sentences) preds.push_back(predict(s));
    std::vector<Prediction> known_preds;
    for (const auto& s : known.sentences) known_preds.push_back(predict(s));
    out.summary.push_back({"test_samples", std::to_string(test->size())});
    out.summary.push_back({"test_accuracy", known.size() ? fmt(top1_accuracy(known_preds, known.labels)) : ""});
    out.summary.push_back({"test_top_accuracy", fmt(top_level_accuracy(preds, *test, labels))});
  }
  return out;
}

}  // namespace

MetricsRow::MetricsRow()
    : total(kNaN), classification(kNaN), reconstruction(kNaN), unit_kl(kNaN), group_kl(kNaN), train_accuracy(kNaN),
      val_accuracy(kNaN) {}

bool MetricsRow::operator==(const MetricsRow& o) const {
  return phase == o.phase && epoch == o.epoch && same(total, o.total) && same(classification, o.classification) &&
         same(reconstruction, o.reconstruction) && same(unit_kl, o.unit_kl) && same(group_kl, o.group_kl) &&
         same(train_accuracy, o.train_accuracy) && same(val_accuracy, o.val_accuracy);
}

std::string metrics_header() {
  return "phase,epoch,total,classification,reconstruction,unit_kl,group_kl,train_accuracy,val_accuracy";
}

std::string format_metrics_row(const MetricsRow& r) {
  return r.phase + "," + std::to_string(r.epoch) + "," + fmt(r.total) + "," + fmt(r.classification) + "," +
         fmt(r.reconstruction) + "," + fmt(r.unit_kl) + "," + fmt(r.group_kl) + "," + fmt(r.train_accuracy) + "," +
         fmt(r.val_accuracy);
}

MetricsRow parse_metrics_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  if (cells.size() != 9) throw std::runtime_error("metrics: expected 9 columns, got " + std::to_string(cells.size()));
  MetricsRow r;
  r.phase = cells[0];
  std::size_t pos = 0;
  r.epoch = std::stoi(cells[1], &pos);
  if (pos != cells[1].size()) throw std::runtime_error("metrics: bad epoch '" + cells[1] + "'");
  r.total = parse_cell(cells[2]);
  r.classification = parse_cell(cells[3]);
  r.reconstruction = parse_cell(cells[4]);
  r.unit_kl = parse_cell(cells[5]);
  r.group_kl = parse_cell(cells[6]);
  r.train_accuracy = parse_cell(cells[7]);
  r.val_accuracy = parse_cell(cells[8]);
  return r;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::string text = metrics_header() + "\n";
  for (const auto& r : rows) text += format_metrics_row(r) + "\n";
  write_text(path, text);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read metrics '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != metrics_header()) throw std::runtime_error("metrics: unexpected header in '" + path + "'");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(parse_metrics_row(line));
  }
  return rows;
}

void write_summary(const std::string& path, const Summary& summary) {
  std::string text;
  for (const auto& [k, v] : summary) text += k + "=" + v + "\n";
  write_text(path, text);
}

Summary read_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read summary '" + path + "'");
  Summary s;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("summary: malformed line '" + line + "'");
    s.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return s;
}

std::string summary_value(const Summary& summary, const std::string& key) {
  for (const auto& [k, v] : summary) {
    if (k == key) return v;
  }
  throw std::out_of_range("summary has no '" + key + "'");
}

std::optional<LabeledCorpus> load_text_corpus(const RunConfig& c, bool test) {
  LabeledCorpus corpus;
  if (!test) {
    if (!c.trec_train.empty()) {
      corpus = load_trec(c.trec_train);
    } else if (!c.questions.empty()) {
      corpus = load_qa_corpus(c.questions, c.answers, c.hierarchy);
    } else {
      throw std::invalid_argument("no training corpus configured");
    }
    if (c.limit > 0 && c.limit < corpus.size()) {
      std::vector<std::size_t> first(c.limit);
      for (std::size_t i = 0; i < c.limit; ++i) first[i] = i;
      corpus = corpus.subset(first);
    }
  } else {
    if (!c.trec_test.empty()) {
      corpus = load_trec(c.trec_test);
    } else if (!c.test_questions.empty()) {
      corpus = load_qa_corpus(c.test_questions, "", c.hierarchy);
    } else {
      return std::nullopt;
    }
  }
  if (c.label_level == "top") corpus = corpus.coarsened();
  return corpus;
}

LabeledCorpus hold_out(const LabeledCorpus& corpus, const std::vector<std::string>& labels) {
  std::set<int> drop;
  for (const auto& l : labels) {
    const int id = corpus.label_id(l);
    if (id < 0) throw std::invalid_argument("held-out label '" + l + "' does not occur in the corpus");
    drop.insert(id);
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    bool ok = true;
    for (int id : corpus.labels[i]) ok = ok && !drop.count(id);
    if (ok) keep.push_back(i);
  }
  std::vector<bool> used(corpus.label_names.size(), false);
  for (std::size_t i : keep) {
    for (int id : corpus.labels[i]) used[static_cast<std::size_t>(id)] = true;
  }
  LabeledCorpus out;
  out.hierarchy = corpus.hierarchy;
  out.multi_label = corpus.multi_label;
  for (std::size_t l = 0; l < used.size(); ++l) {
    if (used[l]) out.intern_label(corpus.label_names[l]);
  }
  for (std::size_t i : keep) out.add(corpus.sentences[i], names_of(corpus.labels[i], corpus.label_names));
  for (const auto& [id, list] : corpus.answers) {
    if (used[static_cast<std::size_t>(id)]) out.answers[out.label_id(corpus.label_names[static_cast<std::size_t>(id)])] = list;
  }
  return out;
}

TrainOutcome cmd_train(const RunConfig& config) {
  const RunConfig c = config.resolved();
  c.validate("train");
  fs::create_directories(c.out_dir);
  Checkpoint ck;
  TrainOutcome out = c.task == TaskKind::Gsa ? train_gsa(c, ck) : train_text(c, ck);
  std::vector<std::string> lines;
  std::istringstream dumped(c.dump());
  for (std::string l; std::getline(dumped, l);) {
    if (l.rfind("out =", 0) != 0 && l.rfind("checkpoint =", 0) != 0) lines.push_back(l);
  }
  ck.set_strings("config", lines);
  ck.save(out_file(c, "model.gsnn1"));
  write_metrics_csv(out_file(c, "metrics.csv"), out.metrics);
  write_summary(out_file(c, "summary.txt"), out.summary);
  write_text(out_file(c, "config.txt"), c.dump());
  return out;
}

LabelReport::LabelReport() : unseen_top_accuracy(kNaN) {}

LabelReport score_labels(const std::vector<std::string>& predicted,
                         const std::vector<std::vector<std::string>>& predicted_sets,
                         const std::vector<std::vector<std::string>>& gold, const std::vector<std::string>& known,
                         const std::optional<LabelHierarchy>& hierarchy) {
  if (predicted.size() != gold.size() || predicted_sets.size() != gold.size()) {
    throw std::invalid_argument("score_labels: prediction/gold count mismatch");
  }
  if (gold.empty()) throw std::invalid_argument("score_labels: nothing to score");
  const std::set<std::string> known_set(known.begin(), known.end());
  LabelHierarchy h;
  if (hierarchy) {
    h = *hierarchy;
  } else {
    for (const auto& g : gold) {
      for (const auto& l : g) {
        if (!known_set.count(l)) throw std::invalid_argument("label '" + l + "' is not in the model's label space and no hierarchy is available");
      }
    }
    h = LabelHierarchy::flat(known);
  }
  LabelReport r;
  r.count = gold.size();
  std::size_t sub = 0, exact = 0, top = 0, unseen_top = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto& g = gold[i];
    if (g.empty()) throw std::invalid_argument("score_labels: sample " + std::to_string(i) + " has no gold label");
    if (std::find(g.begin(), g.end(), predicted[i]) != g.end()) ++sub;
    std::set<std::string> a(predicted_sets[i].begin(), predicted_sets[i].end());
    std::set<std::string> b(g.begin(), g.end());
    if (a == b) ++exact;
    const std::string& ptop = map_to_toplevel(predicted[i], h);
    bool top_hit = false;
    for (const auto& l : g) top_hit = top_hit || map_to_toplevel(l, h) == ptop;
    if (top_hit) ++top;
    bool unseen = false;
    for (const auto& l : g) unseen = unseen || !known_set.count(l);
    if (unseen) {
      ++r.unseen_count;
      if (top_hit) ++unseen_top;
    }
  }
  const double n = static_cast<double>(r.count);
  r.sub_accuracy = static_cast<double>(sub) / n;
  r.exact_match = static_cast<double>(exact) / n;
  r.top_accuracy = static_cast<double>(top) / n;
  if (r.unseen_count > 0) r.unseen_top_accuracy = static_cast<double>(unseen_top) / static_cast<double>(r.unseen_count);
  return r;
}

EvalReport cmd_eval(const RunConfig& config) {
  const RunConfig c = config.resolved();
  c.validate("eval");
  const Checkpoint ck = Checkpoint::load(c.checkpoint_path());
  EvalReport report;
  const TaskKind kind = checkpoint_kind(ck);
  report.kind = to_string(kind);
  if (kind == TaskKind::Gsa) {
    const GsaBundle b = restore_gsa(ck);
    const ImageDataset data = load_images(c);
    const auto t = evaluate_dataset(b.model, b.cfg, data.images, b.recon, std::max<std::size_t>(c.batch_size, 2));
    report.metrics = {{"samples", std::to_string(data.images.rows())},
                      {"reconstruction", fmt(t.weighted_reconstruction())},
                      {"unit_kl", fmt(t.weighted_unit_kl())},
                      {"group_kl", fmt(t.weighted_group_kl())},
                      {"total", fmt(t.total)}};
  } else {
    std::optional<LabeledCorpus> corpus = load_text_corpus(c, true);
    if (!corpus) corpus = load_text_corpus(c, false);
    std::vector<std::string> labels;
    std::function<Prediction(const Tokens&)> predict;
    CnnModel cnn;
    GscnnModel gscnn;
    if (kind == TaskKind::Cnn) {
      cnn = restore_cnn(ck);
      labels = cnn.label_names;
      predict = [&](const Tokens& s) { return cnn.predict(s); };
    } else {
      gscnn = restore_gscnn(ck);
      labels = gscnn.label_names;
      predict = [&](const Tokens& s) { return gscnn.predict(s); };
    }
    std::optional<LabelHierarchy> h = restore_hierarchy(ck);
    if (corpus->hierarchy) {
      if (h) {
        h->merge(*corpus->hierarchy);
      } else {
        h = corpus->hierarchy;
      }
    }
    std::vector<std::string> predicted;
    std::vector<std::vector<std::string>> predicted_sets, gold;
    for (std::size_t i = 0; i < corpus->size(); ++i) {
      const Prediction p = predict(corpus->sentences[i]);
      predicted.push_back(labels.at(static_cast<std::size_t>(p.top1)));
      predicted_sets.push_back(names_of(p.labels, labels));
      gold.push_back(names_of(corpus->labels[i], corpus->label_names));
    }
    const LabelReport r = score_labels(predicted, predicted_sets, gold, labels, h);
    report.labels = r;
    report.metrics = {{"samples", std::to_string(r.count)},
                      {"sub_accuracy", fmt(r.sub_accuracy)},
                      {"exact_match", fmt(r.exact_match)},
                      {"top_accuracy", fmt(r.top_accuracy)},
                      {"unseen_samples", std::to_string(r.unseen_count)},
                      {"unseen_top_accuracy", fmt(r.unseen_top_accuracy)}};
  }
  fs::create_directories(c.out_dir);
  std::string text = "metric,value\n";
  for (const auto& [k, v] : report.metrics) text += k + "," + v + "\n";
  write_text(out_file(c, "eval.csv"), text);
  return report;
}

std::vector<std::uint8_t> normalize_tile(const Vector& values) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(values.size()), 128);
  if (values.size() == 0) return out;
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  if (!(hi > lo)) return out;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(255.0 * (values[i] - lo) / (hi - lo)));
  }
  return out;
}

GrayImage tile_grid(const std::vector<Vector>& tiles, int tile_h, int tile_w, int grid_rows, int grid_cols) {
  if (tile_h < 1 || tile_w < 1 || grid_rows < 1 || grid_cols < 1) throw std::invalid_argument("tile_grid: dimensions must be positive");
  if (static_cast<int>(tiles.size()) > grid_rows * grid_cols) throw std::invalid_argument("tile_grid: more tiles than cells");
  GrayImage img;
  img.width = tile_w * grid_cols;
  img.height = tile_h * grid_rows;
  img.pixels.assign(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height), 0);
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    if (tiles[t].size() != static_cast<Eigen::Index>(tile_h) * tile_w) throw std::invalid_argument("tile_grid: tile size mismatch");
    const auto px = normalize_tile(tiles[t]);
    const int gr = static_cast<int>(t) / grid_cols;
    const int gc = static_cast<int>(t) % grid_cols;
    for (int y = 0; y < tile_h; ++y) {
      for (int x = 0; x < tile_w; ++x) {
        img.pixels[static_cast<std::size_t>((gr * tile_h + y) * img.width + gc * tile_w + x)] =
            px[static_cast<std::size_t>(y * tile_w + x)];
      }
    }
  }
  return img;
}

void write_pgm(const std::string& path, const GrayImage& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height)) {
    throw std::invalid_argument("write_pgm: pixel count does not match dimensions");
  }
  std::string text = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  text.append(image.pixels.begin(), image.pixels.end());
  write_text(path, text);
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::string magic;
  int maxval = 0;
  GrayImage img;
  in >> magic >> img.width >> img.height >> maxval;
  if (magic != "P5" || maxval != 255 || img.width < 1 || img.height < 1) throw std::runtime_error("'" + path + "' is not an 8-bit P5 image");
  in.get();
  img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) throw std::runtime_error("'" + path + "' is truncated");
  return img;
}

namespace {

void write_activations(const std::string& path, const Vector& values, const std::vector<int>& group_of_unit) {
  std::string text = "unit,group,activation\n";
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    text += std::to_string(j) + "," + std::to_string(group_of_unit[static_cast<std::size_t>(j)]) + "," + fmt(values[j]) + "\n";
  }
  write_text(path, text);
}

Tokens probe_sentence(const RunConfig& c) {
  if (!c.probe_sentence.empty()) return tokenize(c.probe_sentence);
  std::optional<LabeledCorpus> corpus = load_text_corpus(c, true);
  if (!corpus && (!c.trec_train.empty() || !c.questions.empty())) corpus = load_text_corpus(c, false);
  if (!corpus || corpus->size() == 0) throw std::invalid_argument("visualize needs visualize.sentence or a text corpus for the probe");
  const std::size_t idx = c.probe_index >= 0 ? static_cast<std::size_t>(c.probe_index) : 0;
  if (idx >= corpus->size()) throw std::invalid_argument("visualize.probe_index is out of range");
  return corpus->sentences[idx];
}

}  // namespace

std::vector<std::string> cmd_visualize(const RunConfig& config) {
  const RunConfig c = config.resolved();
  c.validate("visualize");
  const Checkpoint ck = Checkpoint::load(c.checkpoint_path());
  fs::create_directories(c.out_dir);
  std::vector<std::string> written;
  const TaskKind kind = checkpoint_kind(ck);
  if (kind == TaskKind::Gsa) {
    const GsaBundle b = restore_gsa(ck);
    const int side = 28;
    if (b.model.input_dim() != side * side) {
      throw std::invalid_argument("image visualization needs 784-dimensional W rows, got " + std::to_string(b.model.input_dim()));
    }
    const int G = b.cfg.groups;
    const int g = b.cfg.group_size;
    const int cols = std::min(c.columns, g);
    std::vector<Vector> composite;
    for (int p = 0; p < G; ++p) {
      std::vector<Vector> tiles;
      for (int l = 0; l < g; ++l) tiles.push_back(b.model.W.row(static_cast<Eigen::Index>(p) * g + l).transpose());
      for (int l = 0; l < cols; ++l) composite.push_back(tiles[static_cast<std::size_t>(l)]);
      const int rows = (g + cols - 1) / cols;
      const std::string name = out_file(c, "W_group_" + std::to_string(p) + ".pgm");
      write_pgm(name, tile_grid(tiles, side, side, rows, cols));
      written.push_back(name);
    }
    const std::string comp = out_file(c, "W_composite.pgm");
    write_pgm(comp, tile_grid(composite, side, side, G, cols));
    written.push_back(comp);
    if (!c.mnist_images.empty() && !c.mnist_labels.empty()) {
      const ImageDataset data = load_images(c);
      Eigen::Index idx = -1;
      if (c.probe_index >= 0) {
        idx = c.probe_index;
        if (idx >= data.images.rows()) throw std::invalid_argument("visualize.probe_index is out of range");
      } else {
        for (std::size_t i = 0; i < data.labels.size(); ++i) {
          if (data.labels[i] == c.probe_label) {
            idx = static_cast<Eigen::Index>(i);
            break;
          }
        }
        if (idx < 0) throw std::invalid_argument("no sample with label " + std::to_string(c.probe_label) + " for the probe");
      }
      const Matrix H = encode(b.model, Matrix(data.images.row(idx)));
      std::vector<int> group_of(static_cast<std::size_t>(H.cols()));
      for (std::size_t j = 0; j < group_of.size(); ++j) group_of[j] = static_cast<int>(j) / g;
      const std::string name = out_file(c, "activations.csv");
      write_activations(name, H.row(0).transpose(), group_of);
      written.push_back(name);
    }
  } else if (kind == TaskKind::Gscnn) {
    const GscnnModel m = restore_gscnn(ck);
    const Vector h = m.forward(probe_sentence(c)).h;
    std::vector<int> group_of(static_cast<std::size_t>(h.size()));
    for (std::size_t j = 0; j < group_of.size(); ++j) group_of[j] = static_cast<int>(j) / m.cfg.group_size;
    const std::string name = out_file(c, "activations.csv");
    write_activations(name, h, group_of);
    written.push_back(name);
  } else {
    const CnnModel m = restore_cnn(ck);
    const Vector z = m.features(probe_sentence(c));
    std::vector<int> group_of;
    for (std::size_t gi = 0; gi < m.bank.groups.size(); ++gi) {
      group_of.insert(group_of.end(), static_cast<std::size_t>(m.bank.groups[gi].weights.rows()), static_cast<int>(gi));
    }
    const std::string name = out_file(c, "activations.csv");
    write_activations(name, z, group_of);
    written.push_back(name);
  }
  return written;
}

}  // namespace gsnn
