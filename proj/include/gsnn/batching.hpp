#pragma once

#include "gsnn/numcore.hpp"

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace gsnn {

using Batch = std::vector<std::size_t>;

/// Seeded minibatch schedule over `count` sample indices. Every epoch is a
/// fresh shuffle; a trailing batch with fewer than two samples is merged into
/// the batch before it, since sparsity statistics are batch means.
class BatchSchedule {
 public:
  BatchSchedule(std::size_t count, std::size_t batch_size, Rng rng)
      : count_(count), batch_size_(batch_size), rng_(rng) {
    if (batch_size < 2) {
      throw std::invalid_argument("batch size must be at least 2, got " + std::to_string(batch_size));
    }
    if (count < 2) {
      throw std::invalid_argument("need at least 2 samples to form a batch, got " + std::to_string(count));
    }
  }

  std::size_t count() const { return count_; }
  std::size_t batch_size() const { return batch_size_; }

  std::vector<Batch> next_epoch() {
    std::vector<std::size_t> order(count_);
    for (std::size_t i = 0; i < count_; ++i) order[i] = i;
    rng_.shuffle(order);
    return chunk(order, batch_size_);
  }

  /// Splits `order` into consecutive batches under the merge rule.
  static std::vector<Batch> chunk(const std::vector<std::size_t>& order, std::size_t batch_size) {
    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      Batch b(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
      if (b.size() < 2 && !batches.empty()) {
        batches.back().insert(batches.back().end(), b.begin(), b.end());
      } else {
        batches.push_back(std::move(b));
      }
    }
    return batches;
  }

 private:
  std::size_t count_;
  std::size_t batch_size_;
  Rng rng_;
};

template <typename Scalar>
MatrixX<Scalar> gather_rows(const MatrixX<Scalar>& m, const Batch& rows) {
  MatrixX<Scalar> out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace gsnn
