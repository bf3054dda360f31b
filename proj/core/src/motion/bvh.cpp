#include "gesturegen/motion/bvh.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "gesturegen/error.hpp"

namespace gesturegen::motion {

namespace {

struct Token {
  std::string_view text;
  std::size_t line;
};

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

class HierarchyParser {
 public:
  explicit HierarchyParser(std::vector<Token> tokens, std::size_t last_line)
      : tokens_(std::move(tokens)), last_line_(last_line) {}

  Skeleton parse() {
    expect("HIERARCHY");
    expect("ROOT");
    Skeleton skeleton;
    parse_joint(skeleton, std::nullopt);
    if (pos_ < tokens_.size()) {
      throw ParseError(tokens_[pos_].line,
                       fmt::format("unexpected '{}' after root joint", tokens_[pos_].text));
    }
    return skeleton;
  }

 private:
  const Token& next(const char* what) {
    if (pos_ >= tokens_.size()) {
      throw ParseError(last_line_, fmt::format("unexpected end of hierarchy, expected {}", what));
    }
    return tokens_[pos_++];
  }

  const Token* peek() const { return pos_ < tokens_.size() ? &tokens_[pos_] : nullptr; }

  void expect(std::string_view word) {
    const Token& t = next(std::string(word).c_str());
    if (t.text != word) throw ParseError(t.line, fmt::format("expected '{}', found '{}'", word, t.text));
  }

  double number(const char* what) {
    const Token& t = next(what);
    auto v = to_double(t.text);
    if (!v) throw ParseError(t.line, fmt::format("expected number for {}, found '{}'", what, t.text));
    return *v;
  }

  std::array<double, 3> offset() {
    expect("OFFSET");
    return {number("OFFSET x"), number("OFFSET y"), number("OFFSET z")};
  }

  void parse_joint(Skeleton& skeleton, std::optional<std::size_t> parent) {
    const Token& name = next("joint name");
    const std::size_t index = skeleton.joints.size();
    skeleton.joints.push_back(Joint{std::string(name.text), parent, {}, {}, {}});
    expect("{");
    skeleton.joints[index].offset = offset();
    const Token& ch = next("CHANNELS");
    if (ch.text != "CHANNELS") throw ParseError(ch.line, fmt::format("expected 'CHANNELS', found '{}'", ch.text));
    const double count = number("channel count");
    if (count < 0 || count != static_cast<double>(static_cast<int>(count))) {
      throw ParseError(ch.line, "channel count must be a non-negative integer");
    }
    for (int c = 0; c < static_cast<int>(count); ++c) {
      const Token& label = next("channel label");
      auto channel = parse_channel(label.text);
      if (!channel) throw ParseError(label.line, fmt::format("unknown channel '{}'", label.text));
      skeleton.joints[index].channels.push_back(*channel);
    }
    check_layout(skeleton.joints[index], ch.line);

    while (true) {
      const Token& t = next("'}'");
      if (t.text == "}") return;
      if (t.text == "JOINT") {
        parse_joint(skeleton, index);
      } else if (t.text == "End") {
        expect("Site");
        expect("{");
        skeleton.joints[index].end_sites.push_back(offset());
        expect("}");
      } else {
        throw ParseError(t.line, fmt::format("unexpected '{}' in joint '{}'", t.text,
                                             skeleton.joints[index].name));
      }
    }
  }

  static void check_layout(const Joint& joint, std::size_t line) {
    int rotations = 0;
    int positions = 0;
    for (Channel c : joint.channels) (is_rotation(c) ? rotations : positions)++;
    const bool root = !joint.parent.has_value();
    const bool ok = rotations == 3 && (positions == 0 || (root && positions == 3));
    if (!ok) {
      throw ParseError(line, fmt::format("joint '{}': unsupported channel layout ({} rotation, {} "
                                         "position channels)",
                                         joint.name, rotations, positions));
    }
  }

  std::vector<Token> tokens_;
  std::size_t last_line_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::kXposition: return "Xposition";
    case Channel::kYposition: return "Yposition";
    case Channel::kZposition: return "Zposition";
    case Channel::kXrotation: return "Xrotation";
    case Channel::kYrotation: return "Yrotation";
    case Channel::kZrotation: return "Zrotation";
  }
  return "";
}

std::optional<Channel> parse_channel(std::string_view label) {
  for (Channel c : {Channel::kXposition, Channel::kYposition, Channel::kZposition,
                    Channel::kXrotation, Channel::kYrotation, Channel::kZrotation}) {
    if (to_string(c) == label) return c;
  }
  return std::nullopt;
}

bool is_rotation(Channel c) {
  return c == Channel::kXrotation || c == Channel::kYrotation || c == Channel::kZrotation;
}

bool Skeleton::has_root_translation() const {
  if (joints.empty()) return false;
  for (Channel c : joints.front().channels)
    if (!is_rotation(c)) return true;
  return false;
}

RotationOrder Skeleton::rotation_order(std::size_t joint) const {
  std::string letters;
  for (Channel c : joints.at(joint).channels) {
    if (is_rotation(c)) letters.push_back(to_string(c).front());
  }
  return RotationOrder::parse(letters);
}

std::size_t Skeleton::channel_count() const {
  std::size_t n = 0;
  for (const auto& j : joints) n += j.channels.size();
  return n;
}

std::optional<std::size_t> Skeleton::find(std::string_view name) const {
  for (std::size_t i = 0; i < joints.size(); ++i)
    if (joints[i].name == name) return i;
  return std::nullopt;
}

void Skeleton::validate() const {
  if (joints.empty()) fail(ErrorKind::kContract, "skeleton has no joints");
  if (joints.front().parent.has_value()) fail(ErrorKind::kContract, "first joint must be the root");
  for (std::size_t i = 1; i < joints.size(); ++i) {
    if (!joints[i].parent.has_value()) fail(ErrorKind::kContract, "skeleton has more than one root");
    if (*joints[i].parent >= i) {
      fail(ErrorKind::kContract, fmt::format("joint '{}' precedes its parent", joints[i].name));
    }
  }
  for (std::size_t i = 0; i < joints.size(); ++i) rotation_order(i);
}

void MotionClip::validate() const {
  if (!(fps > 0.0)) fail(ErrorKind::kContract, "clip fps must be positive");
  if (frames < 1) fail(ErrorKind::kContract, "clip must have at least one frame");
  if (orders.size() != joints) fail(ErrorKind::kContract, "clip rotation orders do not match joint count");
  if (rotations.size() != frames * joints * width()) {
    fail(ErrorKind::kContract, "clip rotation buffer has the wrong size");
  }
  if (!root_translation.empty() && root_translation.size() != frames * 3) {
    fail(ErrorKind::kContract, "clip root translation buffer has the wrong size");
  }
}

BvhDocument parse_bvh(std::string_view text) {
  const auto lines = split_lines(text);

  std::size_t motion_line = lines.size();
  std::vector<Token> tokens;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto words = split_ws(lines[i]);
    if (!words.empty() && words.front() == "MOTION") {
      motion_line = i;
      break;
    }
    for (auto w : words) tokens.push_back({w, i + 1});
  }
  if (motion_line == lines.size()) throw ParseError(lines.size(), "missing MOTION section");

  BvhDocument doc;
  doc.skeleton = HierarchyParser(std::move(tokens), motion_line + 1).parse();
  const Skeleton& sk = doc.skeleton;

  // Header tokens after MOTION: "Frames:" N "Frame" "Time:" dt.
  std::vector<Token> header;
  std::size_t cursor = motion_line + 1;
  while (cursor < lines.size() && header.size() < 5) {
    for (auto w : split_ws(lines[cursor])) header.push_back({w, cursor + 1});
    ++cursor;
  }
  if (header.size() != 5 || header[0].text != "Frames:" || header[2].text != "Frame" ||
      header[3].text != "Time:") {
    throw ParseError(motion_line + 1, "expected 'Frames: N' and 'Frame Time: T' after MOTION");
  }
  const auto frames_value = to_double(header[1].text);
  if (!frames_value || *frames_value < 1 ||
      *frames_value != static_cast<double>(static_cast<long long>(*frames_value))) {
    throw ParseError(header[1].line, fmt::format("invalid frame count '{}'", header[1].text));
  }
  const auto frame_time = to_double(header[4].text);
  if (!frame_time || !(*frame_time > 0.0)) {
    throw ParseError(header[4].line, fmt::format("invalid frame time '{}'", header[4].text));
  }
  const auto expected_frames = static_cast<std::size_t>(*frames_value);

  MotionClip& clip = doc.clip;
  clip.fps = 1.0 / *frame_time;
  clip.joints = sk.joint_count();
  clip.representation = Representation::kEulerDegrees;
  for (std::size_t j = 0; j < sk.joint_count(); ++j) clip.orders.push_back(sk.rotation_order(j));
  const bool translated = sk.has_root_translation();

  const std::size_t channels = sk.channel_count();
  std::vector<double> values;
  values.reserve(channels);
  std::size_t found = 0;
  for (; cursor < lines.size(); ++cursor) {
    const auto words = split_ws(lines[cursor]);
    if (words.empty()) continue;
    if (found == expected_frames) {
      throw ParseError(cursor + 1, fmt::format("more frame lines than the declared {} frames",
                                               expected_frames));
    }
    if (words.size() != channels) {
      if (cursor + 1 == lines.size() || (cursor + 2 == lines.size() && lines.back().empty())) {
        throw ParseError(cursor + 1,
                         fmt::format("truncated motion data: expected {} frames, found {} complete "
                                     "(last line has {} of {} values)",
                                     expected_frames, found, words.size(), channels));
      }
      throw ParseError(cursor + 1, fmt::format("frame has {} values but the hierarchy declares {} "
                                               "channels",
                                               words.size(), channels));
    }
    values.clear();
    for (auto w : words) {
      auto v = to_double(w);
      if (!v) throw ParseError(cursor + 1, fmt::format("non-numeric frame value '{}'", w));
      values.push_back(*v);
    }
    std::size_t k = 0;
    std::array<double, 3> translation{};
    for (std::size_t j = 0; j < sk.joint_count(); ++j) {
      int r = 0;
      std::array<double, 3> angles{};
      for (Channel c : sk.joints[j].channels) {
        const double v = values[k++];
        switch (c) {
          case Channel::kXposition: translation[0] = v; break;
          case Channel::kYposition: translation[1] = v; break;
          case Channel::kZposition: translation[2] = v; break;
          default: angles[static_cast<std::size_t>(r++)] = v; break;
        }
      }
      clip.rotations.insert(clip.rotations.end(), angles.begin(), angles.end());
    }
    if (translated) clip.root_translation.insert(clip.root_translation.end(), translation.begin(), translation.end());
    ++found;
  }
  if (found != expected_frames) {
    throw ParseError(lines.size(), fmt::format("truncated motion data: expected {} frames, found {}",
                                               expected_frames, found));
  }
  clip.frames = found;
  clip.validate();
  return doc;
}

namespace {

void emit_joint(std::string& out, const Skeleton& sk, std::size_t index, int depth) {
  const std::string indent(static_cast<std::size_t>(depth), '\t');
  const Joint& j = sk.joints[index];
  out += fmt::format("{}{} {}\n{}{{\n", indent, j.parent ? "JOINT" : "ROOT", j.name, indent);
  out += fmt::format("{}\tOFFSET {:.6f} {:.6f} {:.6f}\n", indent, j.offset[0], j.offset[1], j.offset[2]);
  out += fmt::format("{}\tCHANNELS {}", indent, j.channels.size());
  for (Channel c : j.channels) out += fmt::format(" {}", to_string(c));
  out += '\n';
  for (std::size_t child = index + 1; child < sk.joints.size(); ++child) {
    if (sk.joints[child].parent == index) emit_joint(out, sk, child, depth + 1);
  }
  for (const auto& site : j.end_sites) {
    out += fmt::format("{}\tEnd Site\n{}\t{{\n", indent, indent);
    out += fmt::format("{}\t\tOFFSET {:.6f} {:.6f} {:.6f}\n", indent, site[0], site[1], site[2]);
    out += fmt::format("{}\t}}\n", indent);
  }
  out += fmt::format("{}}}\n", indent);
}

}  // namespace

std::string write_bvh(const Skeleton& skeleton, const MotionClip& clip) {
  if (clip.representation != Representation::kEulerDegrees) {
    fail(ErrorKind::kRepresentation, "write_bvh needs an Euler-angle clip; convert rotation matrices first");
  }
  if (clip.frames < 1) fail(ErrorKind::kContract, "write_bvh: clip has no frames");
  skeleton.validate();
  clip.validate();
  if (clip.joints != skeleton.joint_count()) {
    fail(ErrorKind::kContract, fmt::format("write_bvh: clip has {} joints, skeleton {}", clip.joints,
                                           skeleton.joint_count()));
  }
  if (clip.has_translation() != skeleton.has_root_translation()) {
    fail(ErrorKind::kContract, "write_bvh: root translation presence differs from skeleton");
  }

  std::string out = "HIERARCHY\n";
  emit_joint(out, skeleton, 0, 0);
  out += fmt::format("MOTION\nFrames: {}\nFrame Time: {:.10f}\n", clip.frames, 1.0 / clip.fps);
  for (std::size_t f = 0; f < clip.frames; ++f) {
    bool first = true;
    for (std::size_t j = 0; j < skeleton.joint_count(); ++j) {
      const double* angles = clip.rotation(f, j);
      int r = 0;
      for (Channel c : skeleton.joints[j].channels) {
        double v = 0.0;
        switch (c) {
          case Channel::kXposition: v = clip.root_translation[f * 3 + 0]; break;
          case Channel::kYposition: v = clip.root_translation[f * 3 + 1]; break;
          case Channel::kZposition: v = clip.root_translation[f * 3 + 2]; break;
          default: v = angles[r++]; break;
        }
        if (!first) out += ' ';
        out += fmt::format("{:.6f}", v);
        first = false;
      }
    }
    out += '\n';
  }
  return out;
}

BvhDocument read_bvh_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_bvh(buffer.str());
  } catch (const ParseError& e) {
    throw Error(ErrorKind::kParse, fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_bvh_file(const std::filesystem::path& path, const Skeleton& skeleton,
                    const MotionClip& clip) {
  const std::string text = write_bvh(skeleton, clip);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, fmt::format("cannot write '{}'", path.string()));
  out << text;
}

}  // namespace gesturegen::motion
