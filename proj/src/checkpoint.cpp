#include "gsnn/checkpoint.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gsnn {

namespace {

void check_key(const std::string& key) {
  if (key.empty() || key.find_first_of(" \t\r\n") != std::string::npos) {
    throw std::invalid_argument("checkpoint key '" + key + "' must be nonempty and contain no whitespace");
  }
}

void check_line(const std::string& v, const std::string& key) {
  if (v.find_first_of("\r\n") != std::string::npos) {
    throw std::invalid_argument("checkpoint value for '" + key + "' spans multiple lines");
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  // strtod also sets ERANGE for subnormals.
  if (s.empty() || end != s.c_str() + s.size() || (errno == ERANGE && std::isinf(v))) {
    throw std::runtime_error("checkpoint line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& s, std::size_t line) {
  std::size_t pos = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (s.empty() || pos != s.size()) throw std::runtime_error("checkpoint line " + std::to_string(line) + ": bad integer '" + s + "'");
  return v;
}

const char* type_name(std::size_t index) {
  static const char* names[] = {"scalar", "int", "text", "matrix", "strings"};
  return names[index];
}

}  // namespace

void Checkpoint::put(const std::string& key, Value v) {
  check_key(key);
  if (index_.count(key) == 0) order_.push_back(key);
  index_[key] = std::move(v);
}

void Checkpoint::set_scalar(const std::string& key, double v) { put(key, v); }
void Checkpoint::set_int(const std::string& key, std::int64_t v) { put(key, v); }

void Checkpoint::set_text(const std::string& key, const std::string& v) {
  check_line(v, key);
  put(key, v);
}

void Checkpoint::set_matrix(const std::string& key, const Matrix& m) { put(key, m); }

void Checkpoint::set_vector(const std::string& key, const Vector& v) { put(key, Matrix(v)); }

void Checkpoint::set_strings(const std::string& key, const std::vector<std::string>& v) {
  for (const auto& s : v) check_line(s, key);
  put(key, v);
}

const Checkpoint::Value& Checkpoint::get(const std::string& key, const char* type) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw std::runtime_error("checkpoint has no entry '" + key + "'");
  if (std::string(type_name(it->second.index())) != type) {
    throw std::runtime_error("checkpoint entry '" + key + "' is " + type_name(it->second.index()) + ", expected " + type);
  }
  return it->second;
}

double Checkpoint::scalar(const std::string& key) const { return std::get<double>(get(key, "scalar")); }
std::int64_t Checkpoint::integer(const std::string& key) const { return std::get<std::int64_t>(get(key, "int")); }
const std::string& Checkpoint::text(const std::string& key) const { return std::get<std::string>(get(key, "text")); }
const Matrix& Checkpoint::matrix(const std::string& key) const { return std::get<Matrix>(get(key, "matrix")); }

Vector Checkpoint::vector(const std::string& key) const {
  const Matrix& m = matrix(key);
  if (m.cols() != 1) throw std::runtime_error("checkpoint entry '" + key + "' is not a column vector");
  return m.col(0);
}

const std::vector<std::string>& Checkpoint::strings(const std::string& key) const {
  return std::get<std::vector<std::string>>(get(key, "strings"));
}

std::string Checkpoint::serialize() const {
  std::ostringstream out;
  out << kMagic << '\n';
  for (const auto& key : order_) {
    const Value& v = index_.at(key);
    out << key << ' ' << type_name(v.index());
    switch (v.index()) {
      case 0: out << ' ' << format_double(std::get<double>(v)) << '\n'; break;
      case 1: out << ' ' << std::get<std::int64_t>(v) << '\n'; break;
      case 2: out << ' ' << std::get<std::string>(v) << '\n'; break;
      case 3: {
        const Matrix& m = std::get<Matrix>(v);
        out << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
          for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_double(m(r, c));
          out << '\n';
        }
        break;
      }
      default: {
        const auto& list = std::get<std::vector<std::string>>(v);
        out << ' ' << list.size() << '\n';
        for (const auto& s : list) out << s << '\n';
      }
    }
  }
  out << "end\n";
  return out.str();
}

Checkpoint Checkpoint::parse(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  std::size_t no = 0;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw std::runtime_error(std::string("checkpoint truncated: expected ") + what);
    ++no;
    return line;
  };
  if (next("header") != kMagic) throw std::runtime_error("not a GSNN1 checkpoint (bad header)");
  Checkpoint ck;
  for (;;) {
    const std::string head = next("record or end");
    if (head == "end") break;
    const auto sp1 = head.find(' ');
    if (sp1 == std::string::npos) throw std::runtime_error("checkpoint line " + std::to_string(no) + ": malformed record");
    const std::string key = head.substr(0, sp1);
    const auto sp2 = head.find(' ', sp1 + 1);
    const std::string type = head.substr(sp1 + 1, sp2 == std::string::npos ? std::string::npos : sp2 - sp1 - 1);
    const std::string rest = sp2 == std::string::npos ? std::string() : head.substr(sp2 + 1);
    const std::size_t at = no;
    if (type == "scalar") {
      ck.set_scalar(key, parse_double(rest, at));
    } else if (type == "int") {
      ck.set_int(key, parse_int(rest, at));
    } else if (type == "text") {
      ck.set_text(key, rest);
    } else if (type == "matrix") {
      std::istringstream dims(rest);
      std::string rs, cs, extra;
      dims >> rs >> cs;
      if (dims >> extra) throw std::runtime_error("checkpoint line " + std::to_string(at) + ": malformed matrix header");
      const std::int64_t rows = parse_int(rs, at);
      const std::int64_t cols = parse_int(cs, at);
      if (rows < 0 || cols < 0) throw std::runtime_error("checkpoint line " + std::to_string(at) + ": negative matrix shape");
      Matrix m(rows, cols);
      for (std::int64_t r = 0; r < rows; ++r) {
        std::istringstream row(next("matrix row"));
        std::string tok;
        std::int64_t c = 0;
        while (row >> tok) {
          if (c >= cols) throw std::runtime_error("checkpoint line " + std::to_string(no) + ": too many values in row");
          m(r, c++) = parse_double(tok, no);
        }
        if (c != cols) throw std::runtime_error("checkpoint line " + std::to_string(no) + ": expected " + std::to_string(cols) + " values");
      }
      ck.set_matrix(key, m);
    } else if (type == "strings") {
      const std::int64_t n = parse_int(rest, at);
      if (n < 0) throw std::runtime_error("checkpoint line " + std::to_string(at) + ": negative string count");
      std::vector<std::string> list;
      for (std::int64_t i = 0; i < n; ++i) list.push_back(next("string entry"));
      ck.set_strings(key, list);
    } else {
      throw std::runtime_error("checkpoint line " + std::to_string(at) + ": unknown record type '" + type + "'");
    }
  }
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << serialize();
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Gsa: return "gsa";
    case TaskKind::Cnn: return "cnn";
    case TaskKind::Gscnn: return "gscnn";
  }
  return "gsa";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "gsa") return TaskKind::Gsa;
  if (s == "cnn") return TaskKind::Cnn;
  if (s == "gscnn") return TaskKind::Gscnn;
  throw std::invalid_argument("unknown task '" + s + "' (expected gsa, cnn or gscnn)");
}

TaskKind checkpoint_kind(const Checkpoint& ck) { return task_kind_from_string(ck.text("kind")); }

namespace {

void store_sparsity(Checkpoint& ck, const SparsityConfig<double>& cfg) {
  ck.set_scalar("sparsity.rho", cfg.rho);
  ck.set_scalar("sparsity.eta", cfg.eta);
  ck.set_scalar("sparsity.alpha", cfg.alpha);
  ck.set_scalar("sparsity.beta", cfg.beta);
  ck.set_int("sparsity.groups", cfg.groups);
  ck.set_int("sparsity.group_size", cfg.group_size);
  ck.set_scalar("sparsity.corruption", cfg.corruption);
}

SparsityConfig<double> restore_sparsity(const Checkpoint& ck) {
  SparsityConfig<double> cfg;
  cfg.rho = ck.scalar("sparsity.rho");
  cfg.eta = ck.scalar("sparsity.eta");
  cfg.alpha = ck.scalar("sparsity.alpha");
  cfg.beta = ck.scalar("sparsity.beta");
  cfg.groups = static_cast<int>(ck.integer("sparsity.groups"));
  cfg.group_size = static_cast<int>(ck.integer("sparsity.group_size"));
  cfg.corruption = ck.scalar("sparsity.corruption");
  cfg.validate();
  return cfg;
}

void store_dict(Checkpoint& ck, const std::string& p, const GsaModel<double>& m) {
  ck.set_int(p + "tied", m.tied ? 1 : 0);
  ck.set_text(p + "encoder", to_string(m.encoder));
  ck.set_text(p + "decoder", to_string(m.decoder));
  ck.set_matrix(p + "W", m.W);
  ck.set_vector(p + "b", m.b);
  ck.set_vector(p + "c", m.c);
  if (!m.tied) ck.set_matrix(p + "W_dec", m.W_dec);
}

GsaModel<double> restore_dict(const Checkpoint& ck, const std::string& p) {
  GsaModel<double> m;
  m.tied = ck.integer(p + "tied") != 0;
  m.encoder = activation_from_string(ck.text(p + "encoder"));
  m.decoder = activation_from_string(ck.text(p + "decoder"));
  m.W = ck.matrix(p + "W");
  m.b = ck.vector(p + "b");
  m.c = ck.vector(p + "c");
  if (!m.tied) m.W_dec = ck.matrix(p + "W_dec");
  return m;
}

void store_text_model(Checkpoint& ck, const Vocab& vocab, const FilterBank& bank, const ClassifierHead& head,
                      const std::vector<std::string>& labels) {
  ck.set_strings("labels", labels);
  ck.set_strings("vocab", vocab.tokens());
  ck.set_text("bank.activation", to_string(bank.activation));
  ck.set_matrix("bank.embedding", bank.embedding);
  ck.set_int("bank.groups", static_cast<std::int64_t>(bank.groups.size()));
  for (std::size_t i = 0; i < bank.groups.size(); ++i) {
    const std::string p = "bank.group" + std::to_string(i) + ".";
    ck.set_int(p + "window", bank.groups[i].window);
    ck.set_matrix(p + "weights", bank.groups[i].weights);
    ck.set_vector(p + "bias", bank.groups[i].bias);
  }
  ck.set_text("head.kind", to_string(head.kind));
  ck.set_matrix("head.weight", head.weight);
  ck.set_vector("head.bias", head.bias);
}

void restore_text_model(const Checkpoint& ck, Vocab& vocab, FilterBank& bank, ClassifierHead& head,
                        std::vector<std::string>& labels) {
  labels = ck.strings("labels");
  vocab = Vocab::from_tokens(ck.strings("vocab"));
  bank.activation = activation_from_string(ck.text("bank.activation"));
  bank.embedding = ck.matrix("bank.embedding");
  const std::int64_t groups = ck.integer("bank.groups");
  bank.groups.clear();
  for (std::int64_t i = 0; i < groups; ++i) {
    const std::string p = "bank.group" + std::to_string(i) + ".";
    FilterGroup g;
    g.window = static_cast<int>(ck.integer(p + "window"));
    g.weights = ck.matrix(p + "weights");
    g.bias = ck.vector(p + "bias");
    bank.groups.push_back(std::move(g));
  }
  bank.validate();
  if (static_cast<std::size_t>(bank.embedding.rows()) != vocab.size()) throw std::runtime_error("checkpoint: embedding rows do not match vocabulary");
  head.kind = head_kind_from_string(ck.text("head.kind"));
  head.weight = ck.matrix("head.weight");
  head.bias = ck.vector("head.bias");
  if (head.bias.size() != head.weight.rows() || static_cast<std::size_t>(head.weight.rows()) != labels.size()) {
    throw std::runtime_error("checkpoint: head shape does not match label table");
  }
}

void require_kind(const Checkpoint& ck, TaskKind k) {
  if (checkpoint_kind(ck) != k) {
    throw std::runtime_error("checkpoint holds a " + ck.text("kind") + " model, expected " + to_string(k));
  }
}

}  // namespace

void store(Checkpoint& ck, const GsaModel<double>& model, const SparsityConfig<double>& cfg, ReconKind recon) {
  ck.set_text("kind", "gsa");
  store_sparsity(ck, cfg);
  ck.set_text("gsa.recon", to_string(recon));
  store_dict(ck, "gsa.", model);
}

void store(Checkpoint& ck, const CnnModel& model) {
  ck.set_text("kind", "cnn");
  store_text_model(ck, model.vocab, model.bank, model.head, model.label_names);
}

void store(Checkpoint& ck, const GscnnModel& model) {
  ck.set_text("kind", "gscnn");
  store_sparsity(ck, model.cfg);
  ck.set_scalar("recon_weight", model.recon_weight);
  store_text_model(ck, model.vocab, model.bank, model.head, model.label_names);
  store_dict(ck, "dict.", model.dict);
}

void store_hierarchy(Checkpoint& ck, const LabelHierarchy& h) {
  std::vector<std::string> rows;
  for (const auto& [sub, top] : h.pairs()) {
    if (sub.find('\t') != std::string::npos) throw std::invalid_argument("label '" + sub + "' contains a tab");
    rows.push_back(sub + "\t" + top);
  }
  ck.set_strings("hierarchy", rows);
}

GsaBundle restore_gsa(const Checkpoint& ck) {
  require_kind(ck, TaskKind::Gsa);
  GsaBundle b;
  b.cfg = restore_sparsity(ck);
  b.recon = recon_kind_from_string(ck.text("gsa.recon"));
  b.model = restore_dict(ck, "gsa.");
  b.model.validate(b.cfg);
  return b;
}

CnnModel restore_cnn(const Checkpoint& ck) {
  require_kind(ck, TaskKind::Cnn);
  CnnModel m;
  restore_text_model(ck, m.vocab, m.bank, m.head, m.label_names);
  if (m.head.weight.cols() != m.bank.filter_count()) throw std::runtime_error("checkpoint: head width does not match filter count");
  return m;
}

GscnnModel restore_gscnn(const Checkpoint& ck) {
  require_kind(ck, TaskKind::Gscnn);
  GscnnModel m;
  m.cfg = restore_sparsity(ck);
  m.recon_weight = ck.scalar("recon_weight");
  restore_text_model(ck, m.vocab, m.bank, m.head, m.label_names);
  m.dict = restore_dict(ck, "dict.");
  m.validate();
  return m;
}

std::optional<LabelHierarchy> restore_hierarchy(const Checkpoint& ck) {
  if (!ck.has("hierarchy")) return std::nullopt;
  LabelHierarchy h;
  for (const auto& row : ck.strings("hierarchy")) {
    const auto tab = row.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("checkpoint: malformed hierarchy row '" + row + "'");
    h.add(row.substr(0, tab), row.substr(tab + 1));
  }
  return h;
}

}  // namespace gsnn
