#pragma once

#include "gsnn/autoencoder.hpp"
#include "gsnn/data.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace fixture {

namespace fs = std::filesystem;
using gsnn::Matrix;
using gsnn::Rng;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("gsnn-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string source_path(const std::string& relative) { return std::string(GSNN_SOURCE_DIR) + "/" + relative; }

struct GroupedVectors {
  Matrix atoms;             // (G*g) x d, unit rows
  Matrix data;              // n x d
  std::vector<int> groups;  // generating group per row
};

inline Matrix random_atoms(int count, int dim, Rng& rng) {
  Matrix a(count, dim);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  a.rowwise().normalize();
  return a;
}

/// Each sample picks one group uniformly and mixes that group's atoms with
/// uniform [0,1] coefficients, plus isotropic Gaussian noise.
inline GroupedVectors sample_grouped(const Matrix& atoms, int groups, int g, int n, double sigma, Rng& rng) {
  GroupedVectors out;
  out.atoms = atoms;
  out.data = Matrix::Zero(n, atoms.cols());
  for (int i = 0; i < n; ++i) {
    const int p = static_cast<int>(rng.below(static_cast<std::uint64_t>(groups)));
    out.groups.push_back(p);
    for (int l = 0; l < g; ++l) out.data.row(i) += rng.uniform() * atoms.row(p * g + l);
    for (Eigen::Index k = 0; k < atoms.cols(); ++k) out.data(i, k) += rng.normal(0.0, sigma);
  }
  return out;
}

/// Synthetic question corpus over a two-level hierarchy. Top category t owns
/// sub-labels "t<t>s<s>"; every question holds filler words, one keyword of
/// its top category and one keyword of its sub-label, so that an unseen
/// sub-label still carries its parent's evidence.
struct TextSpec {
  int tops = 3;
  int subs_per_top = 2;
  int per_label = 20;
  int filler_vocab = 12;
  int min_len = 4;
  int max_len = 8;
};

inline std::string top_name(int t) { return "T" + std::to_string(t); }
inline std::string sub_name(int t, int s) { return "t" + std::to_string(t) + "s" + std::to_string(s); }

inline gsnn::Tokens sample_question(int t, int s, const TextSpec& spec, Rng& rng) {
  const int len = spec.min_len + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_len - spec.min_len + 1)));
  gsnn::Tokens words;
  for (int i = 0; i < len; ++i) words.push_back("w" + std::to_string(rng.below(static_cast<std::uint64_t>(spec.filler_vocab))));
  const auto at = [&](int slots) { return words.begin() + static_cast<std::ptrdiff_t>(rng.below(static_cast<std::uint64_t>(slots))); };
  words.insert(at(len + 1), "top" + std::to_string(t) + "k" + std::to_string(rng.below(2)));
  words.insert(at(len + 2), "sub" + std::to_string(t) + "_" + std::to_string(s));
  return words;
}

inline gsnn::LabeledCorpus text_corpus(const TextSpec& spec, Rng& rng, bool with_answers = true) {
  gsnn::LabeledCorpus c;
  gsnn::LabelHierarchy h;
  for (int t = 0; t < spec.tops; ++t) {
    for (int s = 0; s < spec.subs_per_top; ++s) h.add(sub_name(t, s), top_name(t));
  }
  for (int i = 0; i < spec.per_label; ++i) {
    for (int t = 0; t < spec.tops; ++t) {
      for (int s = 0; s < spec.subs_per_top; ++s) c.add(sample_question(t, s, spec, rng), {sub_name(t, s)});
    }
  }
  if (with_answers) {
    for (int t = 0; t < spec.tops; ++t) {
      for (int s = 0; s < spec.subs_per_top; ++s) {
        const int id = c.label_id(sub_name(t, s));
        for (int a = 0; a < 3; ++a) {
          gsnn::Tokens ans = sample_question(t, s, spec, rng);
          ans.push_back("answer");
          c.answers[id].push_back(ans);
        }
      }
    }
  }
  c.hierarchy = h;
  return c;
}

inline std::string join(const gsnn::Tokens& t) {
  std::ostringstream os;
  for (std::size_t i = 0; i < t.size(); ++i) os << (i ? " " : "") << t[i];
  return os.str();
}

}  // namespace fixture
