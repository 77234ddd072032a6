#pragma once

// ParameterArchive: an 8-byte magic, a little-endian u64 manifest length, a
// JSON manifest [{name, shape, dtype, byte_offset}] and a raw little-endian
// payload. Offsets are relative to the start of the payload.

#include <filesystem>
#include <string>
#include <vector>

#include "sas/nn/tape.hpp"

namespace sas::nn {

enum class DType { kFloat32, kFloat64 };

struct ArchiveEntry {
  std::string name;
  std::vector<Index> shape;
  DType dtype = DType::kFloat64;
  Matrix value;
};

std::vector<ArchiveEntry> snapshot(const ParameterSet& params, DType dtype = DType::kFloat64);

void save_archive(const std::filesystem::path& path, const std::vector<ArchiveEntry>& entries);
void save_archive(const std::filesystem::path& path, const ParameterSet& params,
                  DType dtype = DType::kFloat64);
std::vector<ArchiveEntry> load_archive(const std::filesystem::path& path);

/// Copies archive values into matching parameters. Throws ShapeError listing
/// every missing, unexpected or differently shaped parameter.
void restore(ParameterSet& params, const std::vector<ArchiveEntry>& entries);

}  // namespace sas::nn
