#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "persuade/nn.hpp"

namespace persuade {

struct AdamOptions {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction and no weight decay.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  double learning_rate() const { return options_.learning_rate; }
  std::int64_t steps() const { return step_; }

  void step(std::span<Parameter* const> params);

 private:
  AdamOptions options_;
  std::int64_t step_ = 0;
  std::vector<Matrix> first_moment_;
  std::vector<Matrix> second_moment_;
};

}  // namespace persuade
