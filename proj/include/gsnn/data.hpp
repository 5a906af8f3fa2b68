#pragma once

// Dataset ingestion: MNIST IDX files, TREC question files, and the
// tab-separated question/answer corpus format.
//
// QA corpus files (UTF-8, one record per line, blank lines ignored):
//   questions:  <question text>\t<label>[|<label>...]
//   answers:    <label>\t<answer sentence>
//   hierarchy:  <sub-label>\t<top-label>

#include "gsnn/batching.hpp"
#include "gsnn/hierarchy.hpp"
#include "gsnn/numcore.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gsnn {

using Tokens = std::vector<std::string>;

/// Lowercases ASCII, splits on whitespace, and detaches leading/trailing
/// punctuation from each word as single-character tokens. All-punctuation
/// words are kept whole.
Tokens tokenize(const std::string& text);

struct LabeledCorpus {
  std::vector<Tokens> sentences;
  std::vector<std::vector<int>> labels;  // ids into label_names
  std::vector<std::string> label_names;
  std::optional<LabelHierarchy> hierarchy;
  std::map<int, std::vector<Tokens>> answers;  // per label id
  bool multi_label = false;

  std::size_t size() const { return sentences.size(); }
  int label_id(const std::string& name) const;  // -1 when absent
  int intern_label(const std::string& name);
  void add(Tokens sentence, const std::vector<std::string>& label_set);
  void validate() const;

  /// Samples restricted to `indices`; label table, hierarchy and answers kept.
  LabeledCorpus subset(const std::vector<std::size_t>& indices) const;

  /// Relabels every sample by its top-level parent (requires a hierarchy).
  LabeledCorpus coarsened() const;

  /// Number of samples carrying each label id.
  std::vector<std::size_t> label_counts() const;

  bool operator==(const LabeledCorpus& o) const;
};

struct ImageDataset {
  Matrix images;  // count x (rows*cols), values in [0,1]
  std::vector<int> labels;
  int rows = 28;
  int cols = 28;
};

ImageDataset load_mnist_idx(const std::string& image_path, const std::string& label_path);
void write_mnist_idx(const ImageDataset& data, const std::string& image_path, const std::string& label_path);

/// Lines of the form "TOP:sub question text". Sub-labels ("NUM:dist") are the
/// sample labels; the hierarchy maps each to its prefix ("NUM").
LabeledCorpus load_trec(const std::string& path);
void write_trec(const LabeledCorpus& corpus, const std::string& path);

/// `answer_path` and `hierarchy_path` may be empty strings. With a hierarchy
/// file, labels it does not mention become their own top level; without one
/// the corpus has no hierarchy.
LabeledCorpus load_qa_corpus(const std::string& question_path, const std::string& answer_path,
                             const std::string& hierarchy_path);
void write_qa_corpus(const LabeledCorpus& corpus, const std::string& question_path, const std::string& answer_path,
                     const std::string& hierarchy_path);

/// Seeded train/held-out split; floor(fraction * count) samples go to the
/// second list.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count, double fraction, Rng& rng);

/// Per-sample flag: true when any gold label is outside `known_labels`.
std::vector<bool> flag_unseen(const LabeledCorpus& corpus, const std::vector<std::string>& known_labels);

}  // namespace gsnn
