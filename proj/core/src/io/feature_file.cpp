#include "gesturegen/io/feature_file.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::io {

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

void write_f32(std::ostream& out, const double* values, std::size_t count) {
  std::vector<std::uint32_t> buf(count);
  for (std::size_t i = 0; i < count; ++i) buf[i] = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(count * 4));
}

void read_f32(std::istream& in, double* values, std::size_t count, const std::string& context) {
  std::vector<std::uint32_t> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * 4));
  if (static_cast<std::size_t>(in.gcount()) != count * 4)
    fail(ErrorKind::kParse, fmt::format("{}: expected {} float32 values, file truncated after {} bytes", context,
                                        count, in.gcount()));
  for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(to_le(buf[i]));
}

void write_feature_file(const std::filesystem::path& path, const numeric::DenseArray& values,
                        const std::string& modality) {
  if (values.rank() != 2) fail(ErrorKind::kDimension, "feature arrays must be F x d");
  if (modality.empty() || modality.find_first_of(" \n") != std::string::npos)
    fail(ErrorKind::kParameter, fmt::format("invalid modality tag '{}'", modality));
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, fmt::format("cannot write {}", path.string()));
  out << kFeatureMagic << '\n' << values.rows() << ' ' << values.cols() << '\n' << modality << '\n';
  write_f32(out, values.data(), values.size());
  if (!out) fail(ErrorKind::kIo, fmt::format("write failed for {}", path.string()));
}

FeatureFile read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, fmt::format("cannot open {}", path.string()));
  const std::string ctx = path.string();
  std::string magic, shape_line, modality;
  if (!std::getline(in, magic) || magic != kFeatureMagic)
    throw Error(ErrorKind::kParse, fmt::format("{}: line 1: expected magic {}", ctx, kFeatureMagic));
  if (!std::getline(in, shape_line))
    throw Error(ErrorKind::kParse, fmt::format("{}: line 2: missing shape line", ctx));
  std::istringstream shape(shape_line);
  long long rows = -1, cols = -1;
  std::string extra;
  if (!(shape >> rows >> cols) || (shape >> extra) || rows <= 0 || cols <= 0)
    throw Error(ErrorKind::kParse, fmt::format("{}: line 2: expected 'F d' with positive sizes, got '{}'", ctx,
                                               shape_line));
  if (!std::getline(in, modality) || modality.empty())
    throw Error(ErrorKind::kParse, fmt::format("{}: line 3: missing modality tag", ctx));
  FeatureFile f;
  f.modality = modality;
  f.values = numeric::DenseArray::matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  read_f32(in, f.values.data(), f.values.size(), ctx);
  if (in.peek() != std::char_traits<char>::eof())
    throw Error(ErrorKind::kParse, fmt::format("{}: trailing bytes after {}x{} payload", ctx, rows, cols));
  return f;
}

FeatureFile read_feature_file(const std::filesystem::path& path, const std::string& expected_modality) {
  FeatureFile f = read_feature_file(path);
  if (f.modality != expected_modality)
    fail(ErrorKind::kDataset, fmt::format("{}: modality '{}' where '{}' was expected", path.string(), f.modality,
                                          expected_modality));
  return f;
}

}  // namespace gesturegen::io
