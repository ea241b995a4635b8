#include "persuade/safetensors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "persuade/errors.hpp"

namespace persuade::safetensors {
namespace {

static_assert(std::endian::native == std::endian::little, "safetensors I/O assumes a little-endian host");

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = (h & 0x8000u) << 16;
  std::uint32_t exponent = (h >> 10) & 0x1Fu;
  std::uint32_t mantissa = h & 0x3FFu;
  std::uint32_t bits = 0;
  if (exponent == 0) {
    if (mantissa == 0) {
      bits = sign;
    } else {
      // Subnormal: renormalize.
      exponent = 127 - 15 + 1;
      while ((mantissa & 0x400u) == 0) {
        mantissa <<= 1;
        --exponent;
      }
      mantissa &= 0x3FFu;
      bits = sign | (exponent << 23) | (mantissa << 13);
    }
  } else if (exponent == 0x1F) {
    bits = sign | 0x7F800000u | (mantissa << 13);
  } else {
    bits = sign | ((exponent + 127 - 15) << 23) | (mantissa << 13);
  }
  return std::bit_cast<float>(bits);
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "F64") return 8;
  if (dtype == "F32") return 4;
  if (dtype == "F16" || dtype == "BF16") return 2;
  return 0;
}

}  // namespace

std::map<std::string, Tensor> read(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", file.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string bytes = buffer.str();
  const auto fail = [&](const std::string& what) {
    return ValidationError(fmt::format("{}: {}", file.string(), what));
  };
  if (bytes.size() < 8) throw fail("truncated header");
  std::uint64_t header_size = 0;
  std::memcpy(&header_size, bytes.data(), 8);
  if (header_size > bytes.size() - 8) throw fail("header length exceeds file size");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(8, header_size));
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  const std::size_t data_start = 8 + header_size;

  std::map<std::string, Tensor> tensors;
  for (const auto& [name, info] : header.items()) {
    if (name == "__metadata__") continue;
    const std::string dtype = info.at("dtype").get<std::string>();
    const auto shape = info.at("shape").get<std::vector<std::int64_t>>();
    const auto offsets = info.at("data_offsets").get<std::vector<std::uint64_t>>();
    const std::size_t elem = dtype_size(dtype);
    if (elem == 0 || shape.empty() || shape.size() > 2) continue;
    const Eigen::Index rows = shape.size() == 2 ? shape[0] : 1;
    const Eigen::Index cols = shape.size() == 2 ? shape[1] : shape[0];
    const auto count = static_cast<std::size_t>(rows * cols);
    if (offsets.size() != 2 || offsets[1] < offsets[0] || offsets[1] - offsets[0] != count * elem ||
        data_start + offsets[1] > bytes.size()) {
      throw fail(fmt::format("bad data offsets for tensor '{}'", name));
    }
    const char* src = bytes.data() + data_start + offsets[0];
    Tensor t{shape, Matrix(rows, cols)};
    double* dst = t.data.data();
    for (std::size_t i = 0; i < count; ++i) {
      if (dtype == "F64") {
        std::memcpy(dst + i, src + i * 8, 8);
      } else if (dtype == "F32") {
        float f;
        std::memcpy(&f, src + i * 4, 4);
        dst[i] = f;
      } else {
        std::uint16_t h;
        std::memcpy(&h, src + i * 2, 2);
        dst[i] = dtype == "F16" ? half_to_float(h) : std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16);
      }
    }
    tensors.emplace(name, std::move(t));
  }
  return tensors;
}

void write(const std::filesystem::path& file, const std::map<std::string, Tensor>& tensors,
           const std::map<std::string, std::string>& metadata) {
  nlohmann::json header = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : tensors) {
    const auto bytes = static_cast<std::uint64_t>(tensor.data.size()) * 8;
    header[name] = {{"dtype", "F64"}, {"shape", tensor.shape}, {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  if (!metadata.empty()) header["__metadata__"] = metadata;
  std::string header_text = header.dump();
  while (header_text.size() % 8 != 0) header_text.push_back(' ');

  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure(fmt::format("cannot write '{}'", file.string()));
  const std::uint64_t header_size = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_size), 8);
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& [name, tensor] : tensors) {
    out.write(reinterpret_cast<const char*>(tensor.data.data()), static_cast<std::streamsize>(tensor.data.size() * 8));
  }
  if (!out.flush()) throw RuntimeFailure(fmt::format("write failed for '{}'", file.string()));
}

}  // namespace persuade::safetensors
