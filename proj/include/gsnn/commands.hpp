#pragma once

// The train, eval and visualize commands plus their file artifacts.

#include "gsnn/data.hpp"
#include "gsnn/hierarchy.hpp"
#include "gsnn/run_config.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gsnn {

/// One line of metrics.csv. Fields that do not apply to a task are NaN and
/// written as empty cells.
struct MetricsRow {
  std::string phase = "train";  ///< "pretrain" or "train"
  int epoch = 0;
  double total;
  double classification;
  double reconstruction;
  double unit_kl;
  double group_kl;
  double train_accuracy;
  double val_accuracy;

  MetricsRow();
  bool operator==(const MetricsRow& o) const;
};

std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);
MetricsRow parse_metrics_row(const std::string& line);
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

using Summary = std::vector<std::pair<std::string, std::string>>;

void write_summary(const std::string& path, const Summary& summary);
Summary read_summary(const std::string& path);
std::string summary_value(const Summary& summary, const std::string& key);

struct TrainOutcome {
  std::vector<MetricsRow> metrics;
  Summary summary;
};

/// Validates the configuration, trains, and writes model.gsnn1, metrics.csv,
/// summary.txt and config.txt into the output directory.
TrainOutcome cmd_train(const RunConfig& config);

/// Three-way label report: accuracy on the labels the model predicts, after
/// mapping to top-level labels, and top-level accuracy restricted to samples
/// whose gold labels the model never saw.
struct LabelReport {
  std::size_t count = 0;
  double sub_accuracy = 0;
  double exact_match = 0;
  double top_accuracy = 0;
  std::size_t unseen_count = 0;
  double unseen_top_accuracy;  ///< NaN when no sample is unseen

  LabelReport();
};

/// `predicted` holds each sample's top-1 label, `predicted_sets` its full
/// label set, `gold` the gold label sets. Without a hierarchy every gold label
/// must be one of `known` (a flat hierarchy is then used).
LabelReport score_labels(const std::vector<std::string>& predicted,
                         const std::vector<std::vector<std::string>>& predicted_sets,
                         const std::vector<std::vector<std::string>>& gold, const std::vector<std::string>& known,
                         const std::optional<LabelHierarchy>& hierarchy);

struct EvalReport {
  std::string kind;
  Summary metrics;  // name -> value, report order
  std::optional<LabelReport> labels;
};

/// Evaluates the checkpoint on the configured test data (the training data
/// when no test file is given) and writes eval.csv.
EvalReport cmd_eval(const RunConfig& config);

/// Writes W_group_<p>.pgm and W_composite.pgm for image autoencoders and
/// activations.csv for a probe input. Returns the files written.
std::vector<std::string> cmd_visualize(const RunConfig& config);

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
  bool operator==(const GrayImage&) const = default;
};

/// Min-max scaling of one tile to [0,255]; a constant tile maps to 128.
std::vector<std::uint8_t> normalize_tile(const Vector& values);

/// Lays out `tiles` (one tile_h*tile_w image per entry, row-major) on a
/// grid_rows x grid_cols grid; empty cells are black.
GrayImage tile_grid(const std::vector<Vector>& tiles, int tile_h, int tile_w, int grid_rows, int grid_cols);

void write_pgm(const std::string& path, const GrayImage& image);
GrayImage read_pgm(const std::string& path);

/// Text corpus named by the configuration (training or test side), with the
/// configured label level applied. Returns nullopt when no test file is set.
std::optional<LabeledCorpus> load_text_corpus(const RunConfig& config, bool test);

/// Removes every sample carrying one of `labels` and drops label ids that no
/// sample uses any more (order of the remaining labels is kept).
LabeledCorpus hold_out(const LabeledCorpus& corpus, const std::vector<std::string>& labels);

}  // namespace gsnn
