#include "gsnn/run_config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace gsnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(d)) {
    throw std::invalid_argument("'" + v + "' is not a number");
  }
  return d;
}

long long to_int(const std::string& v) {
  std::size_t pos = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (v.empty() || pos != v.size()) throw std::invalid_argument("'" + v + "' is not an integer");
  return n;
}

std::size_t to_count(const std::string& v) {
  const long long n = to_int(v);
  if (n < 0) throw std::invalid_argument("'" + v + "' must be nonnegative");
  return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("'" + v + "' is not a boolean");
}

std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"task", [](RunConfig& c, const std::string& v) { c.task = task_kind_from_string(v); },
       [](const RunConfig& c) { return to_string(c.task); }},
      {"seed",
       [](RunConfig& c, const std::string& v) {
         const long long n = to_int(v);
         if (n < 0) throw std::invalid_argument("seed must be nonnegative");
         c.seed = static_cast<std::uint64_t>(n);
       },
       [](const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); }},
      {"out", [](RunConfig& c, const std::string& v) { c.out_dir = v; }, [](const RunConfig& c) { return c.out_dir; }},
      {"checkpoint", [](RunConfig& c, const std::string& v) { c.checkpoint = v; }, [](const RunConfig& c) { return c.checkpoint; }},
      {"data.mnist_images", [](RunConfig& c, const std::string& v) { c.mnist_images = v; }, [](const RunConfig& c) { return c.mnist_images; }},
      {"data.mnist_labels", [](RunConfig& c, const std::string& v) { c.mnist_labels = v; }, [](const RunConfig& c) { return c.mnist_labels; }},
      {"data.trec_train", [](RunConfig& c, const std::string& v) { c.trec_train = v; }, [](const RunConfig& c) { return c.trec_train; }},
      {"data.trec_test", [](RunConfig& c, const std::string& v) { c.trec_test = v; }, [](const RunConfig& c) { return c.trec_test; }},
      {"data.questions", [](RunConfig& c, const std::string& v) { c.questions = v; }, [](const RunConfig& c) { return c.questions; }},
      {"data.answers", [](RunConfig& c, const std::string& v) { c.answers = v; }, [](const RunConfig& c) { return c.answers; }},
      {"data.hierarchy", [](RunConfig& c, const std::string& v) { c.hierarchy = v; }, [](const RunConfig& c) { return c.hierarchy; }},
      {"data.test_questions", [](RunConfig& c, const std::string& v) { c.test_questions = v; },
       [](const RunConfig& c) { return c.test_questions; }},
      {"data.limit", [](RunConfig& c, const std::string& v) { c.limit = to_count(v); },
       [](const RunConfig& c) { return std::to_string(c.limit); }},
      {"data.validation_fraction", [](RunConfig& c, const std::string& v) { c.validation_fraction = to_double(v); },
       [](const RunConfig& c) { return num(c.validation_fraction); }},
      {"data.label_level", [](RunConfig& c, const std::string& v) { c.label_level = v; }, [](const RunConfig& c) { return c.label_level; }},
      {"data.holdout_labels", [](RunConfig& c, const std::string& v) { c.holdout_labels = to_list(v); },
       [](const RunConfig& c) { return join(c.holdout_labels); }},
      {"sparsity.rho", [](RunConfig& c, const std::string& v) { c.sparsity.rho = to_double(v); },
       [](const RunConfig& c) { return num(c.sparsity.rho); }},
      {"sparsity.eta", [](RunConfig& c, const std::string& v) { c.sparsity.eta = to_double(v); },
       [](const RunConfig& c) { return num(c.sparsity.eta); }},
      {"sparsity.alpha", [](RunConfig& c, const std::string& v) { c.sparsity.alpha = to_double(v); },
       [](const RunConfig& c) { return num(c.sparsity.alpha); }},
      {"sparsity.beta", [](RunConfig& c, const std::string& v) { c.sparsity.beta = to_double(v); },
       [](const RunConfig& c) { return num(c.sparsity.beta); }},
      {"sparsity.groups",
       [](RunConfig& c, const std::string& v) {
         c.groups_auto = v == "auto";
         if (!c.groups_auto) c.sparsity.groups = static_cast<int>(to_int(v));
       },
       [](const RunConfig& c) { return c.groups_auto ? std::string("auto") : std::to_string(c.sparsity.groups); }},
      {"sparsity.group_size", [](RunConfig& c, const std::string& v) { c.sparsity.group_size = static_cast<int>(to_int(v)); },
       [](const RunConfig& c) { return std::to_string(c.sparsity.group_size); }},
      {"sparsity.corruption", [](RunConfig& c, const std::string& v) { c.sparsity.corruption = to_double(v); },
       [](const RunConfig& c) { return num(c.sparsity.corruption); }},
      {"gsa.recon", [](RunConfig& c, const std::string& v) { c.recon = recon_kind_from_string(v); },
       [](const RunConfig& c) { return to_string(c.recon); }},
      {"gsa.tied", [](RunConfig& c, const std::string& v) { c.tied = to_bool(v); },
       [](const RunConfig& c) { return std::string(c.tied ? "true" : "false"); }},
      {"gsa.init", [](RunConfig& c, const std::string& v) { c.gsa_init = gsa_init_from_string(v); },
       [](const RunConfig& c) { return to_string(c.gsa_init); }},
      {"gsa.init_scale", [](RunConfig& c, const std::string& v) { c.gsa_init_scale = to_double(v); },
       [](const RunConfig& c) { return num(c.gsa_init_scale); }},
      {"gsa.init_restarts", [](RunConfig& c, const std::string& v) { c.gsa_init_restarts = static_cast<int>(to_int(v)); },
       [](const RunConfig& c) { return std::to_string(c.gsa_init_restarts); }},
      {"cnn.embedding_dim", [](RunConfig& c, const std::string& v) { c.cnn.embedding_dim = static_cast<int>(to_int(v)); },
       [](const RunConfig& c) { return std::to_string(c.cnn.embedding_dim); }},
      {"cnn.windows",
       [](RunConfig& c, const std::string& v) {
         c.cnn.windows.clear();
         for (const auto& w : to_list(v)) c.cnn.windows.push_back(static_cast<int>(to_int(w)));
       },
       [](const RunConfig& c) {
         std::vector<std::string> w;
         for (int n : c.cnn.windows) w.push_back(std::to_string(n));
         return join(w);
       }},
      {"cnn.filters", [](RunConfig& c, const std::string& v) { c.cnn.filters_per_window = static_cast<int>(to_int(v)); },
       [](const RunConfig& c) { return std::to_string(c.cnn.filters_per_window); }},
      {"cnn.activation", [](RunConfig& c, const std::string& v) { c.cnn.conv_activation = activation_from_string(v); },
       [](const RunConfig& c) { return to_string(c.cnn.conv_activation); }},
      {"cnn.head",
       [](RunConfig& c, const std::string& v) {
         c.head_auto = v == "auto";
         if (!c.head_auto) c.cnn.head = head_kind_from_string(v);
       },
       [](const RunConfig& c) { return c.head_auto ? std::string("auto") : to_string(c.cnn.head); }},
      {"cnn.dropout", [](RunConfig& c, const std::string& v) { c.cnn.dropout = to_double(v); },
       [](const RunConfig& c) { return num(c.cnn.dropout); }},
      {"gscnn.init", [](RunConfig& c, const std::string& v) { c.init = init_strategy_from_string(v); },
       [](const RunConfig& c) { return to_string(c.init); }},
      {"gscnn.recon_weight", [](RunConfig& c, const std::string& v) { c.recon_weight = to_double(v); },
       [](const RunConfig& c) { return num(c.recon_weight); }},
      {"gscnn.pretrain_epochs", [](RunConfig& c, const std::string& v) { c.pretrain_epochs = static_cast<int>(to_int(v)); },
       [](const RunConfig& c) { return std::to_string(c.pretrain_epochs); }},
      {"gscnn.random_init_count", [](RunConfig& c, const std::string& v) { c.random_init_count = static_cast<int>(to_int(v)); },
       [](const RunConfig& c) { return std::to_string(c.random_init_count); }},
      {"gscnn.atom_scale", [](RunConfig& c, const std::string& v) { c.atom_scale = to_double(v); },
       [](const RunConfig& c) { return num(c.atom_scale); }},
      {"train.epochs", [](RunConfig& c, const std::string& v) { c.epochs = static_cast<int>(to_int(v)); },
       [](const RunConfig& c) { return std::to_string(c.epochs); }},
      {"train.batch_size", [](RunConfig& c, const std::string& v) { c.batch_size = to_count(v); },
       [](const RunConfig& c) { return std::to_string(c.batch_size); }},
      {"train.optimizer", [](RunConfig& c, const std::string& v) { c.optimizer.kind = optimizer_from_string(v); },
       [](const RunConfig& c) { return to_string(c.optimizer.kind); }},
      {"train.learning_rate", [](RunConfig& c, const std::string& v) { c.optimizer.learning_rate = to_double(v); },
       [](const RunConfig& c) { return num(c.optimizer.learning_rate); }},
      {"train.momentum", [](RunConfig& c, const std::string& v) { c.optimizer.momentum = to_double(v); },
       [](const RunConfig& c) { return num(c.optimizer.momentum); }},
      {"train.beta1", [](RunConfig& c, const std::string& v) { c.optimizer.beta1 = to_double(v); },
       [](const RunConfig& c) { return num(c.optimizer.beta1); }},
      {"train.beta2", [](RunConfig& c, const std::string& v) { c.optimizer.beta2 = to_double(v); },
       [](const RunConfig& c) { return num(c.optimizer.beta2); }},
      {"train.epsilon", [](RunConfig& c, const std::string& v) { c.optimizer.epsilon = to_double(v); },
       [](const RunConfig& c) { return num(c.optimizer.epsilon); }},
      {"visualize.columns", [](RunConfig& c, const std::string& v) { c.columns = static_cast<int>(to_int(v)); },
       [](const RunConfig& c) { return std::to_string(c.columns); }},
      {"visualize.probe_index", [](RunConfig& c, const std::string& v) { c.probe_index = static_cast<int>(to_int(v)); },
       [](const RunConfig& c) { return std::to_string(c.probe_index); }},
      {"visualize.probe_label", [](RunConfig& c, const std::string& v) { c.probe_label = static_cast<int>(to_int(v)); },
       [](const RunConfig& c) { return std::to_string(c.probe_label); }},
      {"visualize.sentence", [](RunConfig& c, const std::string& v) { c.probe_sentence = v; },
       [](const RunConfig& c) { return c.probe_sentence; }},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

bool missing(const std::string& path) { return !path.empty() && !std::filesystem::exists(path); }

}  // namespace

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got '" + text + "'");
  std::string key = trim(text.substr(0, eq));
  if (key.empty()) throw std::invalid_argument("empty key in '" + text + "'");
  return {key, trim(text.substr(eq + 1))};
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> list = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return list;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const Field& f = field(key);
  try {
    f.set(*this, value);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("config key '" + key + "': " + e.what());
  }
  assigned_.insert(key);
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file '" + path + "'");
  std::vector<std::string> errors;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    try {
      const auto [k, v] = split_assignment(line);
      set(k, v);
    } catch (const std::invalid_argument& e) {
      errors.push_back(path + ":" + std::to_string(no) + ": " + e.what());
    }
  }
  if (!errors.empty()) throw std::invalid_argument(join(errors, "; "));
}

RunConfig RunConfig::resolved() const {
  RunConfig r = *this;
  if (task != TaskKind::Gsa) {
    if (!assigned("sparsity.groups")) r.groups_auto = true;
    if (!assigned("sparsity.group_size")) r.sparsity.group_size = 10;
    if (!assigned("train.epochs")) r.epochs = 10;
    if (!assigned("train.batch_size")) r.batch_size = 50;
    if (!assigned("train.optimizer")) r.optimizer.kind = OptimizerKind::Adam;
    if (!assigned("train.learning_rate")) r.optimizer.learning_rate = 1e-3;
  }
  return r;
}

std::vector<std::string> RunConfig::problems(const std::string& command) const {
  std::vector<std::string> p;
  if (!seed) p.push_back("seed is required (set seed=N or pass --seed)");
  if (out_dir.empty()) p.push_back("output directory is empty");
  const std::vector<std::pair<const char*, const std::string*>> paths = {
      {"data.mnist_images", &mnist_images}, {"data.mnist_labels", &mnist_labels}, {"data.trec_train", &trec_train},
      {"data.trec_test", &trec_test},       {"data.questions", &questions},       {"data.answers", &answers},
      {"data.hierarchy", &hierarchy},       {"data.test_questions", &test_questions}};
  for (const auto& [key, path] : paths) {
    if (missing(*path)) p.push_back(std::string(key) + ": file '" + *path + "' does not exist");
  }
  if (command == "train") {
    if (task == TaskKind::Gsa) {
      if (mnist_images.empty() || mnist_labels.empty()) p.push_back("gsa training needs data.mnist_images and data.mnist_labels");
      if (!groups_auto) {
        try {
          sparsity.validate();
        } catch (const std::invalid_argument& e) {
          p.push_back(std::string("sparsity: ") + e.what());
        }
      } else {
        p.push_back("sparsity.groups=auto is only meaningful for text tasks");
      }
    } else {
      if (trec_train.empty() == questions.empty()) p.push_back("text training needs exactly one of data.trec_train or data.questions");
      if (task == TaskKind::Gscnn && init == InitStrategy::Answers && answers.empty()) {
        p.push_back("gscnn.init=answers needs data.answers");
      }
      SparsityConfig<double> s = sparsity;
      if (groups_auto) s.groups = 1;
      try {
        s.validate();
      } catch (const std::invalid_argument& e) {
        p.push_back(std::string("sparsity: ") + e.what());
      }
    }
    if (epochs < 1) p.push_back("train.epochs must be at least 1");
    if (batch_size < 2) p.push_back("train.batch_size must be at least 2");
    if (!(optimizer.learning_rate > 0)) p.push_back("train.learning_rate must be positive");
    if (optimizer.momentum < 0 || optimizer.momentum >= 1) p.push_back("train.momentum must lie in [0,1)");
    if (validation_fraction < 0 || validation_fraction >= 1) p.push_back("data.validation_fraction must lie in [0,1)");
    if (cnn.dropout < 0 || cnn.dropout >= 1) p.push_back("cnn.dropout must lie in [0,1)");
    if (cnn.embedding_dim < 1) p.push_back("cnn.embedding_dim must be positive");
    if (cnn.filters_per_window < 1) p.push_back("cnn.filters must be positive");
    if (cnn.windows.empty()) p.push_back("cnn.windows must list at least one window size");
    for (int w : cnn.windows) {
      if (w < 1) p.push_back("cnn.windows entries must be positive");
    }
    if (recon_weight < 0) p.push_back("gscnn.recon_weight must be nonnegative");
    if (pretrain_epochs < 1) p.push_back("gscnn.pretrain_epochs must be at least 1");
    if (random_init_count < 0) p.push_back("gscnn.random_init_count must be nonnegative");
    if (!(atom_scale > 0)) p.push_back("gscnn.atom_scale must be positive");
    if (!(gsa_init_scale > 0)) p.push_back("gsa.init_scale must be positive");
    if (gsa_init_restarts < 1) p.push_back("gsa.init_restarts must be at least 1");
  } else if (command == "eval" || command == "visualize") {
    if (!std::filesystem::exists(checkpoint_path())) p.push_back("checkpoint '" + checkpoint_path() + "' does not exist");
    if (command == "visualize" && columns < 1) p.push_back("visualize.columns must be positive");
  } else {
    p.push_back("unknown command '" + command + "'");
  }
  if (label_level != "sub" && label_level != "top") p.push_back("data.label_level must be sub or top");
  return p;
}

void RunConfig::validate(const std::string& command) const {
  const auto p = problems(command);
  if (!p.empty()) throw std::invalid_argument("invalid configuration: " + join(p, "; "));
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

std::string RunConfig::checkpoint_path() const {
  return checkpoint.empty() ? (std::filesystem::path(out_dir) / "model.gsnn1").string() : checkpoint;
}

GsaTrainSettings RunConfig::gsa_settings() const {
  GsaTrainSettings s;
  s.epochs = epochs;
  s.batch_size = batch_size;
  s.optimizer = optimizer;
  s.recon = recon;
  s.seed = seed.value_or(0);
  return s;
}

GscnnConfig RunConfig::gscnn_config() const {
  GscnnConfig g;
  g.cnn = cnn;
  g.cnn.epochs = epochs;
  g.cnn.batch_size = batch_size;
  g.cnn.optimizer = optimizer;
  g.cnn.seed = seed.value_or(0);
  g.sparsity = sparsity;
  g.recon_weight = recon_weight;
  g.init = init;
  g.random_init_count = random_init_count;
  g.pretrain_epochs = pretrain_epochs;
  g.atom_scale = atom_scale;
  return g;
}

}  // namespace gsnn
