#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace glyphda {

/// Named-array container used for weights files and checkpoints.
///
/// Layout (little-endian):
///   "GDAR" | u32 version
///   u32 n_meta  | n_meta x (str key, str value)
///   u32 n_array | n_array x (str name, u8 dtype, u32 rank, rank x i64 dim, raw bytes)
///   32-byte SHA-256 of everything above
/// where str = u32 length + bytes and dtype is 0 float32, 1 float64, 2 int64, 3 uint8.
/// Metadata is key-sorted; arrays keep insertion order.
struct Archive {
    std::map<std::string, std::string> metadata;
    std::vector<std::pair<std::string, torch::Tensor>> arrays;

    void add(std::string name, const torch::Tensor& array);
    const torch::Tensor* find(const std::string& name) const;
    const torch::Tensor& at(const std::string& name) const;  // throws CheckpointError
    std::string meta(const std::string& key) const;          // throws CheckpointError
};

std::string encode_archive(const Archive& archive);
Archive decode_archive(const std::string& bytes);

// Writes to a temporary sibling and renames, so readers never see a torn file.
void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

/// Copies arrays `prefix + name` into each target in place. Throws
/// CheckpointError naming the first missing or mis-shaped array.
void assign_arrays(const Archive& archive, const std::vector<std::pair<std::string, torch::Tensor>>& targets,
                   const std::string& prefix = {});

} // namespace glyphda
