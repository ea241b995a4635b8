#include "persuade/nn.hpp"

#include <cmath>
#include <numbers>

#include "persuade/rng.hpp"

namespace persuade {

Parameter::Parameter(std::string name, Matrix value, int rank)
    : name(std::move(name)), value(std::move(value)), rank(rank) {
  zero_grad();
}

namespace nn {

Linear::Linear(const std::string& name, Eigen::Index in, Eigen::Index out)
    : weight(name + ".weight", Matrix::Zero(out, in)), bias(name + ".bias", Matrix::Zero(1, out), 1) {}

Matrix Linear::forward(const Matrix& x) const {
  Matrix y = x * weight.value.transpose();
  y.rowwise() += bias.value.row(0);
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& dy) {
  weight.grad.noalias() += dy.transpose() * x;
  bias.grad += dy.colwise().sum();
  return dy * weight.value;
}

void Linear::init_normal(Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < weight.value.size(); ++i) weight.value.data()[i] = rng.normal(0.0, stddev);
  bias.value.setZero();
}

LayerNorm::LayerNorm(const std::string& name, Eigen::Index width, double eps)
    : gamma(name + ".weight", Matrix::Ones(1, width), 1), beta(name + ".bias", Matrix::Zero(1, width), 1), eps(eps) {}

Matrix LayerNorm::forward(const Matrix& x, LayerNormCache* cache) const {
  const auto width = static_cast<double>(x.cols());
  Matrix normalized(x.rows(), x.cols());
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / width;
    const RowVector centered = x.row(r).array() - mean;
    const double variance = centered.squaredNorm() / width;
    inv_std(r) = 1.0 / std::sqrt(variance + eps);
    normalized.row(r) = centered * inv_std(r);
  }
  Matrix y = normalized.array().rowwise() * gamma.value.row(0).array();
  y.rowwise() += beta.value.row(0);
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix LayerNorm::backward(const LayerNormCache& cache, const Matrix& dy) {
  gamma.grad += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  beta.grad += dy.colwise().sum();
  const Matrix dnorm = dy.array().rowwise() * gamma.value.row(0).array();
  const auto width = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double sum = dnorm.row(r).sum();
    const double dot = dnorm.row(r).dot(cache.normalized.row(r));
    dx.row(r) = (dnorm.row(r).array() * width - sum - cache.normalized.row(r).array() * dot) *
                (cache.inv_std(r) / width);
  }
  return dx;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix mask = Matrix::Ones(rows, cols);
  if (rate <= 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

Matrix gelu(const Matrix& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
}

Matrix gelu_grad(const Matrix& x) {
  constexpr double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return x.unaryExpr([](double v) {
    return 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
  });
}

}  // namespace nn
}  // namespace persuade
