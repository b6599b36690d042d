#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "shapeinst/tensor.hpp"

namespace shapeinst {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-parameter first/second moment buffers plus the shared step counter.
class AdamState {
 public:
  explicit AdamState(std::span<const Tensor> params);

  std::size_t step_count() const { return step_; }
  std::size_t parameter_count() const { return first_.size(); }

  friend void adam_step(std::span<Tensor> params, AdamState& state, double lr,
                        const AdamOptions& options);

 private:
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t step_ = 0;
};

/// One Adam update with bias correction. Every parameter must carry a
/// gradient; buffers must match the parameters the state was built from.
void adam_step(std::span<Tensor> params, AdamState& state, double lr,
               const AdamOptions& options = {});

}  // namespace shapeinst
