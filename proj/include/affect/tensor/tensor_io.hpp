#pragma once

// Binary tensor container used by checkpoints:
//   "TNSR" | version u32 | rank u32 | dims u64[rank] | data f64[numel]
// All integers and reals little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "affect/tensor/tensor.hpp"

namespace affect {

inline constexpr std::uint32_t kTensorFormatVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
/// `origin` names the source in parse errors.
Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace affect
