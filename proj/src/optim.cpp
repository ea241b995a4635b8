#include "persuade/optim.hpp"

#include <cmath>

#include "persuade/errors.hpp"

namespace persuade {

void Adam::step(std::span<Parameter* const> params) {
  if (first_moment_.empty()) {
    for (const Parameter* p : params) {
      first_moment_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      second_moment_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (first_moment_.size() != params.size()) throw ValidationError("Adam: parameter set changed between steps");

  ++step_;
  const double t = static_cast<double>(step_);
  const double bias1 = 1.0 - std::pow(options_.beta1, t);
  const double bias2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = first_moment_[i];
    Matrix& v = second_moment_[i];
    m = options_.beta1 * m + (1.0 - options_.beta1) * p.grad;
    v = options_.beta2 * v + (1.0 - options_.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= options_.learning_rate * (m.array() / bias1) /
                       ((v.array() / bias2).sqrt() + options_.epsilon);
  }
}

}  // namespace persuade
