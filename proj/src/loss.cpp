#include "persuade/loss.hpp"

#include <cmath>

#include <fmt/format.h>

#include "persuade/errors.hpp"

namespace persuade {
namespace {

LossAndGradient compute(const Matrix& logits, std::span<const int> labels, const ClassWeights& weights,
                        bool with_grad) {
  if (logits.rows() == 0) throw ValidationError("cross-entropy over an empty batch");
  if (logits.cols() != kNumClasses) throw ValidationError("logits must have two columns");
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw ValidationError(fmt::format("{} logit rows but {} labels", logits.rows(), labels.size()));
  }
  if (!logits.allFinite()) throw ValidationError("non-finite logits");

  LossAndGradient result;
  if (with_grad) result.dlogits = Matrix::Zero(logits.rows(), logits.cols());
  double weighted_sum = 0.0;
  double weight_total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y != 0 && y != 1) throw ValidationError(fmt::format("label index {} outside {{0, 1}}", y));
    const double top = logits.row(i).maxCoeff();
    const double log_norm = top + std::log(std::exp(logits(i, 0) - top) + std::exp(logits(i, 1) - top));
    const double w = weights.of_index(y);
    weighted_sum += w * (log_norm - logits(i, y));
    weight_total += w;
    if (with_grad) {
      for (Eigen::Index c = 0; c < kNumClasses; ++c) {
        result.dlogits(i, c) = w * (std::exp(logits(i, c) - log_norm) - (c == y ? 1.0 : 0.0));
      }
    }
  }
  result.loss = weighted_sum / weight_total;
  if (with_grad) result.dlogits /= weight_total;
  return result;
}

}  // namespace

double weighted_cross_entropy(const Matrix& logits, std::span<const int> labels, const ClassWeights& weights) {
  return compute(logits, labels, weights, false).loss;
}

LossAndGradient weighted_cross_entropy_with_grad(const Matrix& logits, std::span<const int> labels,
                                                 const ClassWeights& weights) {
  return compute(logits, labels, weights, true);
}

}  // namespace persuade
