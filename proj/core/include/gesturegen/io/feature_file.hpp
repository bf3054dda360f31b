#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "gesturegen/numeric/dense_array.hpp"

namespace gesturegen::io {

inline constexpr const char* kFeatureMagic = "MGFEAT1";

struct FeatureFile {
  std::string modality;
  numeric::DenseArray values;  // F x d
};

/// Text header ("MGFEAT1", "F d", modality tag) then F*d little-endian float32.
void write_feature_file(const std::filesystem::path& path, const numeric::DenseArray& values,
                        const std::string& modality);
FeatureFile read_feature_file(const std::filesystem::path& path);
/// Same, but rejects a file whose modality tag differs from expected.
FeatureFile read_feature_file(const std::filesystem::path& path, const std::string& expected_modality);

// Raw little-endian float32 helpers shared with the checkpoint format.
void write_f32(std::ostream& out, const double* values, std::size_t count);
void read_f32(std::istream& in, double* values, std::size_t count, const std::string& context);

}  // namespace gesturegen::io
