#pragma once

#include <filesystem>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "mgre/tensor.hpp"

namespace mgre {

// METF v1, little-endian:
//   "METF" | u32 version=1 | u32 dtype (1 real64, 2 complex128) | u32 ndim |
//   ndim x u64 extents | payload (complex stored as interleaved re, im)
std::vector<std::uint8_t> encode_tensor(const Tensor& x);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const Tensor& x, const std::filesystem::path& path);

// Writes via a sibling temp file and rename so readers never see partial output.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& contents);

// A directory of named tensors plus manifest.json listing order, shapes and
// optional free-form metadata.
struct Archive {
    nlohmann::json meta = nlohmann::json::object();
    std::vector<std::pair<std::string, Tensor>> entries;
};
void write_archive(const std::filesystem::path& dir, const Archive& archive);
Archive read_archive(const std::filesystem::path& dir);

}  // namespace mgre
