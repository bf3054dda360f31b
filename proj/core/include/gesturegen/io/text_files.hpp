#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gesturegen::io {

/// Ordered key=value pairs. Blank lines and lines starting with '#' are
/// skipped; surrounding whitespace is trimmed; duplicate keys are an error.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text, const std::string& source);
KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path, const KeyValues& values);

/// One number per line (onset times in seconds, per-frame weights).
std::vector<double> read_number_list(const std::filesystem::path& path);
void write_number_list(const std::filesystem::path& path, const std::vector<double>& values);

struct ClipLabels {
  std::size_t style = 0;
  std::size_t emotion = 0;
};

/// Lines "style ..." and "emotion ...", each either a one-hot vector or a
/// single class index.
ClipLabels read_labels(const std::filesystem::path& path, std::size_t n_styles, std::size_t n_emotions);
void write_labels(const std::filesystem::path& path, const ClipLabels& labels, std::size_t n_styles,
                  std::size_t n_emotions);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace gesturegen::io
