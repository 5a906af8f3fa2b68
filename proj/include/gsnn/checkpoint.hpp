#pragma once

// "GSNN1" checkpoint container: a line-oriented text file of typed records,
// written in insertion order with 17 significant digits so that a save/load
// round trip is exact.
//
//   GSNN1
//   <key> scalar <value>
//   <key> int <value>
//   <key> text <single-line value>
//   <key> matrix <rows> <cols>
//   <row values, space separated>      (one line per row)
//   <key> strings <n>
//   <string>                           (one line per entry)
//   end

#include "gsnn/autoencoder.hpp"
#include "gsnn/gscnn.hpp"
#include "gsnn/textcnn.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace gsnn {

class Checkpoint {
 public:
  static constexpr const char* kMagic = "GSNN1";

  void set_scalar(const std::string& key, double v);
  void set_int(const std::string& key, std::int64_t v);
  void set_text(const std::string& key, const std::string& v);
  void set_matrix(const std::string& key, const Matrix& m);
  void set_vector(const std::string& key, const Vector& v);  // stored as n x 1
  void set_strings(const std::string& key, const std::vector<std::string>& v);

  bool has(const std::string& key) const { return index_.count(key) != 0; }
  double scalar(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  const Matrix& matrix(const std::string& key) const;
  Vector vector(const std::string& key) const;
  const std::vector<std::string>& strings(const std::string& key) const;

  const std::vector<std::string>& keys() const { return order_; }

  std::string serialize() const;
  static Checkpoint parse(const std::string& content);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  using Value = std::variant<double, std::int64_t, std::string, Matrix, std::vector<std::string>>;
  void put(const std::string& key, Value v);
  const Value& get(const std::string& key, const char* type) const;

  std::vector<std::string> order_;
  std::map<std::string, Value> index_;
};

enum class TaskKind { Gsa, Cnn, Gscnn };

std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

/// Model kind recorded in a checkpoint.
TaskKind checkpoint_kind(const Checkpoint& ck);

void store(Checkpoint& ck, const GsaModel<double>& model, const SparsityConfig<double>& cfg, ReconKind recon);
void store(Checkpoint& ck, const CnnModel& model);
void store(Checkpoint& ck, const GscnnModel& model);
void store_hierarchy(Checkpoint& ck, const LabelHierarchy& h);

struct GsaBundle {
  GsaModel<double> model;
  SparsityConfig<double> cfg;
  ReconKind recon = ReconKind::CrossEntropy;
};

GsaBundle restore_gsa(const Checkpoint& ck);
CnnModel restore_cnn(const Checkpoint& ck);
GscnnModel restore_gscnn(const Checkpoint& ck);
std::optional<LabelHierarchy> restore_hierarchy(const Checkpoint& ck);

}  // namespace gsnn
