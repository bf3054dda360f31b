#include "gesturegen/io/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "gesturegen/error.hpp"
#include "gesturegen/io/feature_file.hpp"

namespace gesturegen::io {

const numeric::DenseArray& Checkpoint::get(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a.value;
  fail(ErrorKind::kDataset, fmt::format("checkpoint has no array '{}'", name));
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return true;
  return false;
}

void round_to_f32(numeric::DenseArray& a) {
  for (auto& v : a.values()) v = static_cast<double>(static_cast<float>(v));
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  for (const auto& [k, v] : ck.header)
    if (k.empty() || k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      fail(ErrorKind::kParameter, fmt::format("invalid checkpoint header entry '{}'", k));
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorKind::kIo, fmt::format("cannot write {}", tmp.string()));
    out << kCheckpointMagic << '\n' << "step " << ck.step << '\n' << "header " << ck.header.size() << '\n';
    for (const auto& [k, v] : ck.header) out << k << '=' << v << '\n';
    out << "arrays " << ck.arrays.size() << '\n';
    for (const auto& a : ck.arrays) {
      if (a.name.empty() || a.name.find_first_of(" \n") != std::string::npos)
        fail(ErrorKind::kParameter, fmt::format("invalid array name '{}'", a.name));
      out << a.name << '\n';
      for (std::size_t i = 0; i < a.value.rank(); ++i) out << (i ? " " : "") << a.value.shape()[i];
      out << '\n';
      write_f32(out, a.value.data(), a.value.size());
      out << '\n';
    }
    if (!out) fail(ErrorKind::kIo, fmt::format("write failed for {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, fmt::format("cannot open {}", path.string()));
  const std::string ctx = path.string();
  std::size_t line_no = 0;
  auto next_line = [&](const char* what) {
    std::string line;
    ++line_no;
    if (!std::getline(in, line))
      throw Error(ErrorKind::kParse, fmt::format("{}: line {}: unexpected end of file, expected {}", ctx, line_no, what));
    return line;
  };
  auto parse_count = [&](const std::string& line, const std::string& key) {
    std::istringstream s(line);
    std::string k;
    long long n = -1;
    if (!(s >> k >> n) || k != key || n < 0)
      throw Error(ErrorKind::kParse, fmt::format("{}: line {}: expected '{} <n>', got '{}'", ctx, line_no, key, line));
    return n;
  };

  if (next_line("magic") != kCheckpointMagic)
    throw Error(ErrorKind::kParse, fmt::format("{}: line 1: expected magic {}", ctx, kCheckpointMagic));
  Checkpoint ck;
  ck.step = parse_count(next_line("step"), "step");
  const long long n_header = parse_count(next_line("header count"), "header");
  for (long long i = 0; i < n_header; ++i) {
    const std::string line = next_line("header entry");
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(ErrorKind::kParse, fmt::format("{}: line {}: expected key=value", ctx, line_no));
    ck.header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const long long n_arrays = parse_count(next_line("array count"), "arrays");
  for (long long i = 0; i < n_arrays; ++i) {
    NamedArray a;
    a.name = next_line("array name");
    std::istringstream shape_stream(next_line("array shape"));
    numeric::Shape shape;
    long long dim = 0;
    while (shape_stream >> dim) {
      if (dim <= 0) throw Error(ErrorKind::kParse, fmt::format("{}: line {}: non-positive extent", ctx, line_no));
      shape.push_back(static_cast<std::size_t>(dim));
    }
    if (shape.empty() || !shape_stream.eof())
      throw Error(ErrorKind::kParse, fmt::format("{}: line {}: malformed shape for '{}'", ctx, line_no, a.name));
    a.value = numeric::DenseArray(shape);
    read_f32(in, a.value.data(), a.value.size(), fmt::format("{}: array '{}'", ctx, a.name));
    if (in.get() != '\n')
      throw Error(ErrorKind::kParse, fmt::format("{}: array '{}' is not newline terminated", ctx, a.name));
    ck.arrays.push_back(std::move(a));
  }
  return ck;
}

}  // namespace gesturegen::io
