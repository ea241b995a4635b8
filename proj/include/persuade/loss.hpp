#pragma once

#include <optional>
#include <span>

#include "persuade/corpus.hpp"
#include "persuade/nn.hpp"

namespace persuade {

struct LossAndGradient {
  double loss = 0.0;
  Matrix dlogits;
};

/// sum_i w[y_i] * (-log softmax(logits_i)[y_i]) / sum_i w[y_i]. Throws
/// ValidationError on non-finite logits or labels outside {0, 1}.
double weighted_cross_entropy(const Matrix& logits, std::span<const int> labels,
                              const ClassWeights& weights = ClassWeights::unit());

/// Same loss plus its gradient with respect to the logits.
LossAndGradient weighted_cross_entropy_with_grad(const Matrix& logits, std::span<const int> labels,
                                                 const ClassWeights& weights = ClassWeights::unit());

}  // namespace persuade
