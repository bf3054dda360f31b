#include "gesturegen/io/text_files.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& token, const std::string& context) {
  double v = 0.0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(ErrorKind::kParse, fmt::format("{}: '{}' is not a number", context, token));
  return v;
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) fail(ErrorKind::kIo, fmt::format("write failed for {}", path.string()));
}

KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues out;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::kConfig, fmt::format("{}: line {}: expected key=value, got '{}'", source, line_no, line));
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::kConfig, fmt::format("{}: line {}: empty key", source, line_no));
    if (!out.emplace(key, trim(line.substr(eq + 1))).second)
      throw Error(ErrorKind::kConfig, fmt::format("{}: line {}: duplicate key '{}'", source, line_no, key));
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) { return parse_key_values(read_text(path), path.string()); }

void write_key_values(const std::filesystem::path& path, const KeyValues& values) {
  std::string text;
  for (const auto& [k, v] : values) text += fmt::format("{}={}\n", k, v);
  write_text(path, text);
}

std::vector<double> read_number_list(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<double> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    out.push_back(parse_double(line, fmt::format("{}: line {}", path.string(), line_no)));
  }
  return out;
}

void write_number_list(const std::filesystem::path& path, const std::vector<double>& values) {
  std::string text;
  for (double v : values) text += fmt::format("{:.17g}\n", v);
  write_text(path, text);
}

ClipLabels read_labels(const std::filesystem::path& path, std::size_t n_styles, std::size_t n_emotions) {
  std::istringstream in(read_text(path));
  std::string raw;
  std::size_t line_no = 0;
  bool have_style = false, have_emotion = false;
  ClipLabels labels;
  while (std::getline(in, raw)) {
    ++line_no;
    std::istringstream fields(trim(raw));
    std::string key;
    if (!(fields >> key)) continue;
    const std::string ctx = fmt::format("{}: line {}", path.string(), line_no);
    std::vector<double> values;
    for (std::string tok; fields >> tok;) values.push_back(parse_double(tok, ctx));
    std::size_t classes = 0;
    std::size_t* target = nullptr;
    if (key == "style") {
      classes = n_styles;
      target = &labels.style;
      have_style = true;
    } else if (key == "emotion") {
      classes = n_emotions;
      target = &labels.emotion;
      have_emotion = true;
    } else {
      fail(ErrorKind::kParse, fmt::format("{}: unknown label '{}'", ctx, key));
    }
    if (values.size() == 1) {
      const double v = values[0];
      if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)) || v >= static_cast<double>(classes))
        fail(ErrorKind::kDataset, fmt::format("{}: {} index {} outside [0, {})", ctx, key, v, classes));
      *target = static_cast<std::size_t>(v);
      continue;
    }
    if (values.size() != classes)
      fail(ErrorKind::kDataset, fmt::format("{}: {} one-hot has {} entries, expected {}", ctx, key, values.size(), classes));
    std::size_t active = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] == 1.0) {
        ++active;
        *target = i;
      } else if (values[i] != 0.0) {
        fail(ErrorKind::kDataset, fmt::format("{}: {} one-hot has a non-binary entry", ctx, key));
      }
    }
    if (active != 1) fail(ErrorKind::kDataset, fmt::format("{}: {} one-hot must have exactly one active class", ctx, key));
  }
  if (!have_style || !have_emotion)
    fail(ErrorKind::kDataset, fmt::format("{}: needs both style and emotion labels", path.string()));
  return labels;
}

void write_labels(const std::filesystem::path& path, const ClipLabels& labels, std::size_t n_styles,
                  std::size_t n_emotions) {
  auto row = [](std::size_t idx, std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i == idx) ? " 1" : " 0";
    return s;
  };
  write_text(path, fmt::format("style{}\nemotion{}\n", row(labels.style, n_styles), row(labels.emotion, n_emotions)));
}

}  // namespace gesturegen::io
