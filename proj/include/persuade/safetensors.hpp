#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "persuade/nn.hpp"

namespace persuade::safetensors {

struct Tensor {
  std::vector<std::int64_t> shape;
  Matrix data;  // rank-1 tensors are stored as 1 x n
};

/// Reads F64, F32, F16 and BF16 tensors of rank 1 or 2. Other entries are
/// skipped.
std::map<std::string, Tensor> read(const std::filesystem::path& file);

/// Writes F64 tensors with keys in sorted order; output bytes depend only on
/// the tensors given.
void write(const std::filesystem::path& file, const std::map<std::string, Tensor>& tensors,
           const std::map<std::string, std::string>& metadata = {});

}  // namespace persuade::safetensors
