#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace persuade {

class Rng;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// A trainable tensor (stored as a matrix; biases are 1 x n) and its
/// accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  /// Serialized rank: 1 for biases and norm scales (stored 1 x n), else 2.
  int rank = 2;

  Parameter() = default;
  Parameter(std::string name, Matrix value, int rank = 2);
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

namespace nn {

/// y = x W^T + b with W stored [out x in], matching the usual checkpoint layout.
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out);

  Matrix forward(const Matrix& x) const;
  /// Accumulates parameter gradients and returns dL/dx.
  Matrix backward(const Matrix& x, const Matrix& dy);
  void init_normal(Rng& rng, double stddev);
};

struct LayerNormCache {
  Matrix normalized;
  Eigen::VectorXd inv_std;
};

struct LayerNorm {
  Parameter gamma;
  Parameter beta;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(const std::string& name, Eigen::Index width, double eps);

  Matrix forward(const Matrix& x, LayerNormCache* cache) const;
  Matrix backward(const LayerNormCache& cache, const Matrix& dy);
};

/// Inverted dropout. Returns the keep-mask already scaled by 1/(1-rate);
/// the mask is all ones when rate is zero.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

/// Exact (erf) GELU and its derivative.
Matrix gelu(const Matrix& x);
Matrix gelu_grad(const Matrix& x);

}  // namespace nn
}  // namespace persuade
