#pragma once

// Flat key=value run configuration shared by the train, eval and visualize
// commands. Lines are `key = value`; `#` starts a comment. Every key is listed
// in RunConfig::keys() and written back by dump() in that order.

#include "gsnn/autoencoder.hpp"
#include "gsnn/checkpoint.hpp"
#include "gsnn/gscnn.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace gsnn {

struct RunConfig {
  TaskKind task = TaskKind::Gsa;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::string checkpoint;  ///< eval/visualize input; defaults to <out>/model.gsnn1

  // Data sources.
  std::string mnist_images;
  std::string mnist_labels;
  std::string trec_train;
  std::string trec_test;
  std::string questions;
  std::string answers;
  std::string hierarchy;
  std::string test_questions;
  std::size_t limit = 0;             ///< use only the first N training samples (0 = all)
  double validation_fraction = 0.0;
  std::string label_level = "sub";   ///< sub | top
  std::vector<std::string> holdout_labels;

  // Model.
  SparsityConfig<double> sparsity;
  bool groups_auto = false;          ///< G = number of top-level categories
  ReconKind recon = ReconKind::CrossEntropy;
  bool tied = true;
  GsaInit gsa_init = GsaInit::Random;
  double gsa_init_scale = 1.0;
  int gsa_init_restarts = 10;
  CnnConfig cnn;
  bool head_auto = true;             ///< sigmoid for multi-label corpora, softmax otherwise
  InitStrategy init = InitStrategy::Random;
  double recon_weight = 0.1;
  int pretrain_epochs = 5;
  int random_init_count = 0;
  double atom_scale = 1.0;

  // Training.
  int epochs = 20;
  std::size_t batch_size = 100;
  OptimizerSettings optimizer;

  // Visualization.
  int columns = 15;
  int probe_index = -1;
  int probe_label = 0;
  std::string probe_sentence;

  /// Applies one `key=value` assignment; unknown keys and bad values throw.
  void set(const std::string& key, const std::string& value);
  /// Reads a config file; every malformed line is reported together.
  void load_file(const std::string& path);
  /// Problems that prevent a run of `command` (train, eval, visualize); empty
  /// when the configuration is usable.
  std::vector<std::string> problems(const std::string& command) const;
  /// Throws std::invalid_argument listing every problem on one line.
  void validate(const std::string& command) const;

  std::string dump() const;
  std::string checkpoint_path() const;

  GsaTrainSettings gsa_settings() const;
  GscnnConfig gscnn_config() const;

  /// Copy with task-dependent defaults filled in for keys never assigned:
  /// text tasks default to G = number of top-level categories, g = 10,
  /// 10 epochs, batches of 50 and Adam at 1e-3.
  RunConfig resolved() const;
  bool assigned(const std::string& key) const { return assigned_.count(key) != 0; }

  static const std::vector<std::string>& keys();

 private:
  std::set<std::string> assigned_;
};

/// Splits "key=value" (surrounding whitespace trimmed).
std::pair<std::string, std::string> split_assignment(const std::string& text);

}  // namespace gsnn
