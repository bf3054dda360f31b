#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gesturegen/numeric/dense_array.hpp"

namespace gesturegen::io {

inline constexpr const char* kCheckpointMagic = "MGCKPT1";

struct NamedArray {
  std::string name;
  numeric::DenseArray value;
};

/// Header fields are free-form key=value pairs (the experiment config);
/// arrays keep their insertion order on disk.
struct Checkpoint {
  std::map<std::string, std::string> header;
  std::int64_t step = 0;
  std::vector<NamedArray> arrays;

  const numeric::DenseArray& get(const std::string& name) const;
  bool contains(const std::string& name) const;
};

/// Layout: magic line, "step N", "header K" and K key=value lines,
/// "arrays M", then per array a name line, a shape line and raw
/// little-endian float32 data followed by a newline. Written to a temporary
/// file and renamed, so an interrupted save leaves the previous file intact.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Rounds every entry through float32, the precision stored on disk.
void round_to_f32(numeric::DenseArray& a);

}  // namespace gesturegen::io
