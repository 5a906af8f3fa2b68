#include "gsnn/data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gsnn {

namespace {

bool is_punct(unsigned char ch) { return ch < 128 && std::ispunct(ch); }

std::string lower_ascii(std::string s) {
  for (char& ch : s) {
    const auto u = static_cast<unsigned char>(ch);
    if (u < 128) ch = static_cast<char>(std::tolower(u));
  }
  return s;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string join(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

std::uint32_t read_be32(std::istream& in, const std::string& path, std::streamoff offset) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (in.gcount() != 4) {
    throw std::runtime_error(path + ": truncated header at offset " + std::to_string(offset));
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>((v >> 24) & 0xff), static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
  out.write(b.data(), 4);
}

}  // namespace

Tokens tokenize(const std::string& text) {
  Tokens out;
  std::istringstream is(lower_ascii(text));
  std::string word;
  while (is >> word) {
    const bool all_punct = std::all_of(word.begin(), word.end(), [](unsigned char c) { return is_punct(c); });
    if (all_punct) {
      out.push_back(word);
      continue;
    }
    std::size_t begin = 0;
    std::size_t end = word.size();
    while (begin < end && is_punct(static_cast<unsigned char>(word[begin]))) {
      out.emplace_back(1, word[begin]);
      ++begin;
    }
    std::vector<std::string> tail;
    while (end > begin && is_punct(static_cast<unsigned char>(word[end - 1]))) {
      tail.emplace_back(1, word[end - 1]);
      --end;
    }
    out.push_back(word.substr(begin, end - begin));
    out.insert(out.end(), tail.rbegin(), tail.rend());
  }
  return out;
}

int LabeledCorpus::label_id(const std::string& name) const {
  auto it = std::find(label_names.begin(), label_names.end(), name);
  return it == label_names.end() ? -1 : static_cast<int>(it - label_names.begin());
}

int LabeledCorpus::intern_label(const std::string& name) {
  const int id = label_id(name);
  if (id >= 0) return id;
  label_names.push_back(name);
  return static_cast<int>(label_names.size()) - 1;
}

void LabeledCorpus::add(Tokens sentence, const std::vector<std::string>& label_set) {
  std::vector<int> ids;
  for (const auto& l : label_set) {
    const int id = intern_label(l);
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  }
  sentences.push_back(std::move(sentence));
  labels.push_back(std::move(ids));
}

void LabeledCorpus::validate() const {
  if (sentences.size() != labels.size()) throw std::invalid_argument("corpus: sentence/label count mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].empty()) throw std::invalid_argument("corpus: sample " + std::to_string(i) + " has no label");
    for (int id : labels[i]) {
      if (id < 0 || static_cast<std::size_t>(id) >= label_names.size()) {
        throw std::invalid_argument("corpus: sample " + std::to_string(i) + " has unregistered label id");
      }
    }
  }
}

LabeledCorpus LabeledCorpus::subset(const std::vector<std::size_t>& indices) const {
  LabeledCorpus out;
  out.label_names = label_names;
  out.hierarchy = hierarchy;
  out.answers = answers;
  out.multi_label = multi_label;
  for (std::size_t i : indices) {
    out.sentences.push_back(sentences.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

LabeledCorpus LabeledCorpus::coarsened() const {
  if (!hierarchy) throw std::invalid_argument("corpus: coarsening requires a label hierarchy");
  LabeledCorpus out;
  out.multi_label = multi_label;
  for (std::size_t i = 0; i < size(); ++i) {
    std::vector<std::string> tops;
    for (int id : labels[i]) tops.push_back(hierarchy->parent(label_names[static_cast<std::size_t>(id)]));
    out.add(sentences[i], tops);
  }
  for (const auto& [id, list] : answers) {
    const int top = out.intern_label(hierarchy->parent(label_names[static_cast<std::size_t>(id)]));
    auto& dst = out.answers[top];
    dst.insert(dst.end(), list.begin(), list.end());
  }
  out.hierarchy = LabelHierarchy::flat(out.label_names);
  return out;
}

std::vector<std::size_t> LabeledCorpus::label_counts() const {
  std::vector<std::size_t> counts(label_names.size(), 0);
  for (const auto& set : labels) {
    for (int id : set) ++counts[static_cast<std::size_t>(id)];
  }
  return counts;
}

bool LabeledCorpus::operator==(const LabeledCorpus& o) const {
  if (sentences != o.sentences || multi_label != o.multi_label || size() != o.size()) return false;
  // Compare by label name so interning order does not matter.
  for (std::size_t i = 0; i < size(); ++i) {
    std::set<std::string> a, b;
    for (int id : labels[i]) a.insert(label_names[static_cast<std::size_t>(id)]);
    for (int id : o.labels[i]) b.insert(o.label_names[static_cast<std::size_t>(id)]);
    if (a != b) return false;
  }
  if (hierarchy.has_value() != o.hierarchy.has_value()) return false;
  if (hierarchy && !(*hierarchy == *o.hierarchy)) return false;
  std::map<std::string, std::vector<Tokens>> aa, bb;
  for (const auto& [id, list] : answers) aa[label_names[static_cast<std::size_t>(id)]] = list;
  for (const auto& [id, list] : o.answers) bb[o.label_names[static_cast<std::size_t>(id)]] = list;
  return aa == bb;
}

ImageDataset load_mnist_idx(const std::string& image_path, const std::string& label_path) {
  std::ifstream img = open_input(image_path);
  std::ifstream lab = open_input(label_path);
  const std::uint32_t magic_img = read_be32(img, image_path, 0);
  if (magic_img != 2051) {
    throw std::runtime_error(image_path + ": bad magic " + std::to_string(magic_img) + " at offset 0 (expected 2051)");
  }
  const std::uint32_t n = read_be32(img, image_path, 4);
  const std::uint32_t rows = read_be32(img, image_path, 8);
  const std::uint32_t cols = read_be32(img, image_path, 12);
  const std::uint32_t magic_lab = read_be32(lab, label_path, 0);
  if (magic_lab != 2049) {
    throw std::runtime_error(label_path + ": bad magic " + std::to_string(magic_lab) + " at offset 0 (expected 2049)");
  }
  const std::uint32_t n_lab = read_be32(lab, label_path, 4);
  if (n != n_lab) {
    throw std::runtime_error("image/label count mismatch: " + std::to_string(n) + " vs " + std::to_string(n_lab) +
                             " (offset 4)");
  }
  if (rows == 0 || cols == 0) throw std::runtime_error(image_path + ": zero image size at offset 8");

  ImageDataset ds;
  ds.rows = static_cast<int>(rows);
  ds.cols = static_cast<int>(cols);
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  ds.images.resize(n, static_cast<Eigen::Index>(pixels));
  std::vector<unsigned char> buf(pixels);
  for (std::uint32_t i = 0; i < n; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (static_cast<std::size_t>(img.gcount()) != pixels) {
      throw std::runtime_error(image_path + ": truncated at offset " + std::to_string(16 + i * pixels + img.gcount()));
    }
    for (std::size_t p = 0; p < pixels; ++p) ds.images(i, static_cast<Eigen::Index>(p)) = buf[p] / 255.0;
  }
  ds.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const int ch = lab.get();
    if (ch == std::char_traits<char>::eof()) {
      throw std::runtime_error(label_path + ": truncated at offset " + std::to_string(8 + i));
    }
    ds.labels[i] = ch;
  }
  return ds;
}

void write_mnist_idx(const ImageDataset& data, const std::string& image_path, const std::string& label_path) {
  if (data.images.cols() != static_cast<Eigen::Index>(data.rows) * data.cols) {
    throw std::invalid_argument("write_mnist_idx: image width does not match rows*cols");
  }
  std::ofstream img = open_output(image_path);
  write_be32(img, 2051);
  write_be32(img, static_cast<std::uint32_t>(data.images.rows()));
  write_be32(img, static_cast<std::uint32_t>(data.rows));
  write_be32(img, static_cast<std::uint32_t>(data.cols));
  for (Eigen::Index i = 0; i < data.images.size(); ++i) {
    const double v = std::clamp(data.images.data()[i], 0.0, 1.0);
    img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  std::ofstream lab = open_output(label_path);
  write_be32(lab, 2049);
  write_be32(lab, static_cast<std::uint32_t>(data.labels.size()));
  for (int l : data.labels) lab.put(static_cast<char>(l));
}

LabeledCorpus load_trec(const std::string& path) {
  std::ifstream in = open_input(path);
  LabeledCorpus corpus;
  LabelHierarchy hierarchy;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (blank(line)) continue;
    const std::size_t space = line.find(' ');
    const std::string label = line.substr(0, space);
    const std::size_t colon = label.find(':');
    if (space == std::string::npos || colon == std::string::npos || colon == 0 || colon + 1 == label.size()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed label prefix '" + label + "'");
    }
    Tokens tokens = tokenize(line.substr(space + 1));
    if (tokens.empty()) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty question");
    hierarchy.add(label, label.substr(0, colon));
    corpus.add(std::move(tokens), {label});
  }
  corpus.hierarchy = std::move(hierarchy);
  return corpus;
}

void write_trec(const LabeledCorpus& corpus, const std::string& path) {
  std::ofstream out = open_output(path);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.labels[i].size() != 1) throw std::invalid_argument("write_trec: TREC samples carry exactly one label");
    out << corpus.label_names[static_cast<std::size_t>(corpus.labels[i][0])] << ' ' << join(corpus.sentences[i]) << '\n';
  }
}

LabeledCorpus load_qa_corpus(const std::string& question_path, const std::string& answer_path,
                             const std::string& hierarchy_path) {
  LabeledCorpus corpus;
  LabelHierarchy hierarchy;
  std::string line;

  if (!hierarchy_path.empty()) {
    std::ifstream in = open_input(hierarchy_path);
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      strip_cr(line);
      if (blank(line)) continue;
      const auto parts = split(line, '\t');
      if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
        throw std::runtime_error(hierarchy_path + ":" + std::to_string(lineno) + ": expected 'sub<TAB>top'");
      }
      hierarchy.add(parts[0], parts[1]);
    }
  }

  {
    std::ifstream in = open_input(question_path);
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      strip_cr(line);
      if (blank(line)) continue;
      const std::size_t tab = line.rfind('\t');
      if (tab == std::string::npos) {
        throw std::runtime_error(question_path + ":" + std::to_string(lineno) + ": expected 'question<TAB>labels'");
      }
      Tokens tokens = tokenize(line.substr(0, tab));
      if (tokens.empty()) throw std::runtime_error(question_path + ":" + std::to_string(lineno) + ": empty question");
      std::vector<std::string> labels;
      for (auto& l : split(line.substr(tab + 1), '|')) {
        if (l.empty()) throw std::runtime_error(question_path + ":" + std::to_string(lineno) + ": empty label");
        labels.push_back(l);
      }
      if (labels.empty()) throw std::runtime_error(question_path + ":" + std::to_string(lineno) + ": no labels");
      if (labels.size() > 1) corpus.multi_label = true;
      corpus.add(std::move(tokens), labels);
    }
  }
  for (const auto& name : corpus.label_names) {
    if (!hierarchy.contains(name)) hierarchy.add(name, name);
  }

  if (!answer_path.empty()) {
    std::ifstream in = open_input(answer_path);
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      strip_cr(line);
      if (blank(line)) continue;
      const std::size_t tab = line.find('\t');
      if (tab == std::string::npos) {
        throw std::runtime_error(answer_path + ":" + std::to_string(lineno) + ": expected 'label<TAB>answer'");
      }
      const std::string label = line.substr(0, tab);
      if (corpus.label_id(label) < 0 && !hierarchy.contains(label)) {
        throw std::runtime_error(answer_path + ":" + std::to_string(lineno) + ": unknown label '" + label + "'");
      }
      Tokens tokens = tokenize(line.substr(tab + 1));
      if (tokens.empty()) throw std::runtime_error(answer_path + ":" + std::to_string(lineno) + ": empty answer");
      corpus.answers[corpus.intern_label(label)].push_back(std::move(tokens));
    }
  }
  if (!hierarchy_path.empty()) corpus.hierarchy = std::move(hierarchy);
  return corpus;
}

void write_qa_corpus(const LabeledCorpus& corpus, const std::string& question_path, const std::string& answer_path,
                     const std::string& hierarchy_path) {
  {
    std::ofstream out = open_output(question_path);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      out << join(corpus.sentences[i]) << '\t';
      for (std::size_t k = 0; k < corpus.labels[i].size(); ++k) {
        if (k) out << '|';
        out << corpus.label_names[static_cast<std::size_t>(corpus.labels[i][k])];
      }
      out << '\n';
    }
  }
  if (!answer_path.empty()) {
    std::ofstream out = open_output(answer_path);
    for (const auto& [id, list] : corpus.answers) {
      for (const auto& a : list) out << corpus.label_names[static_cast<std::size_t>(id)] << '\t' << join(a) << '\n';
    }
  }
  if (!hierarchy_path.empty()) {
    std::ofstream out = open_output(hierarchy_path);
    if (corpus.hierarchy) {
      for (const auto& [sub, top] : corpus.hierarchy->pairs()) out << sub << '\t' << top << '\n';
    }
  }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count, double fraction, Rng& rng) {
  if (fraction < 0.0 || fraction >= 1.0) throw std::invalid_argument("split fraction must lie in [0,1)");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  rng.shuffle(order);
  const auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(count)));
  std::vector<std::size_t> second(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  std::vector<std::size_t> first(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {first, second};
}

std::vector<bool> flag_unseen(const LabeledCorpus& corpus, const std::vector<std::string>& known_labels) {
  const std::set<std::string> known(known_labels.begin(), known_labels.end());
  std::vector<bool> out(corpus.size(), false);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (int id : corpus.labels[i]) {
      if (!known.count(corpus.label_names[static_cast<std::size_t>(id)])) out[i] = true;
    }
  }
  return out;
}

}  // namespace gsnn
