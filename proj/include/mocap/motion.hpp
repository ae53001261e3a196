#pragma once

// Motion data model: per-dimension J x F coordinate matrices, clip partitioning,
// and the CSV / raw-f32 file formats.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mocap/byte_io.hpp"
#include "mocap/error.hpp"

namespace mocap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Dim : int { x = 0, y = 1, z = 2 };
inline constexpr std::array<Dim, 3> kDims{Dim::x, Dim::y, Dim::z};
inline constexpr int kNumDims = 3;

inline const char* to_string(Dim d) {
  switch (d) {
    case Dim::x: return "x";
    case Dim::y: return "y";
    case Dim::z: return "z";
  }
  return "?";
}

inline Dim parse_dim(std::string_view s) {
  if (s == "x") return Dim::x;
  if (s == "y") return Dim::y;
  if (s == "z") return Dim::z;
  fail(errc::invalid_dimension, "unknown dimension '" + std::string(s) + "'");
}

/// Three J x F matrices, one per coordinate axis. Column i of dimension d is the
/// d-component of frame i; row j is the d-trajectory of marker j.
class MotionSequence {
 public:
  MotionSequence() = default;

  MotionSequence(std::array<Matrix, 3> data, double frame_rate = 120.0)
      : data_(std::move(data)), frame_rate_(frame_rate) {
    validate();
  }

  static MotionSequence zeros(int joints, int frames, double frame_rate = 120.0) {
    require(joints > 0 && frames > 0, errc::invalid_argument, "J and F must be positive");
    return MotionSequence({Matrix::Zero(joints, frames), Matrix::Zero(joints, frames), Matrix::Zero(joints, frames)},
                          frame_rate);
  }

  int joints() const { return static_cast<int>(data_[0].rows()); }
  int frames() const { return static_cast<int>(data_[0].cols()); }
  double frame_rate() const { return frame_rate_; }

  const Matrix& dim(Dim d) const { return data_[static_cast<int>(d)]; }
  const Matrix& dim(int d) const { return data_.at(static_cast<std::size_t>(d)); }
  const std::array<Matrix, 3>& data() const { return data_; }

  /// Position of joint j at frame i.
  Eigen::Vector3d point(int frame, int joint) const {
    return {data_[0](joint, frame), data_[1](joint, frame), data_[2](joint, frame)};
  }

  bool operator==(const MotionSequence& o) const {
    return frame_rate_ == o.frame_rate_ && data_[0] == o.data_[0] && data_[1] == o.data_[1] && data_[2] == o.data_[2];
  }

 private:
  void validate() const {
    require(data_[0].rows() > 0 && data_[0].cols() > 0, errc::invalid_argument, "motion must have J >= 1 and F >= 1");
    for (int d = 1; d < 3; ++d)
      require(data_[d].rows() == data_[0].rows() && data_[d].cols() == data_[0].cols(), errc::shape_mismatch,
              "dimension matrices differ in shape");
    for (int d = 0; d < 3; ++d)
      require(data_[d].allFinite(), errc::non_finite_value, std::string("non-finite coordinate in dimension ") +
                                                                to_string(static_cast<Dim>(d)));
    require(std::isfinite(frame_rate_) && frame_rate_ > 0, errc::invalid_argument, "frame rate must be positive");
  }

  std::array<Matrix, 3> data_;
  double frame_rate_ = 120.0;
};

/// Returns the J x F coordinate matrix of one axis.
inline const Matrix& dimension_matrix(const MotionSequence& seq, Dim d) { return seq.dim(d); }

inline const Matrix& dimension_matrix(const MotionSequence& seq, std::string_view d) { return seq.dim(parse_dim(d)); }

struct Clip {
  int start_frame = 0;
  std::array<Matrix, 3> data;

  int length() const { return static_cast<int>(data[0].cols()); }
};

/// Splits into floor(F/L) clips of length L plus a trailing clip of F mod L frames.
inline std::vector<Clip> partition_clips(const MotionSequence& seq, int clip_length) {
  require(clip_length >= 1, errc::invalid_argument, "clip length must be >= 1");
  std::vector<Clip> clips;
  const int F = seq.frames();
  clips.reserve(static_cast<std::size_t>((F + clip_length - 1) / clip_length));
  for (int start = 0; start < F; start += clip_length) {
    const int len = std::min(clip_length, F - start);
    Clip c;
    c.start_frame = start;
    for (int d = 0; d < 3; ++d) c.data[d] = seq.dim(d).middleCols(start, len);
    clips.push_back(std::move(c));
  }
  return clips;
}

inline MotionSequence concatenate_clips(const std::vector<Clip>& clips, double frame_rate = 120.0) {
  require(!clips.empty(), errc::invalid_argument, "no clips to concatenate");
  const auto J = clips.front().data[0].rows();
  Eigen::Index F = 0;
  for (const auto& c : clips) F += c.length();
  std::array<Matrix, 3> data{Matrix(J, F), Matrix(J, F), Matrix(J, F)};
  Eigen::Index at = 0;
  for (const auto& c : clips) {
    for (int d = 0; d < 3; ++d) data[d].middleCols(at, c.length()) = c.data[d];
    at += c.length();
  }
  return MotionSequence(std::move(data), frame_rate);
}

enum class MotionFormat { csv, raw_f32 };

inline MotionFormat parse_motion_format(std::string_view s) {
  if (s == "csv") return MotionFormat::csv;
  if (s == "raw-f32" || s == "raw") return MotionFormat::raw_f32;
  fail(errc::invalid_argument, "unknown motion format '" + std::string(s) + "'");
}

/// Picks the format from the extension: ".csv" is CSV, anything else raw-f32.
inline MotionFormat motion_format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? MotionFormat::csv : MotionFormat::raw_f32;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// "# J=31 fps=120"
inline void parse_csv_header(std::string_view line, std::optional<int>& joints, double& fps, int line_no) {
  std::istringstream tokens{std::string(line.substr(1))};
  std::string tok;
  while (tokens >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "J") {
      int j = 0;
      auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), j);
      require(ec == std::errc() && p == val.data() + val.size() && j > 0, errc::malformed_input,
              "line " + std::to_string(line_no) + ": bad J in header '" + std::string(line) + "'");
      joints = j;
    } else if (key == "fps") {
      double f = 0;
      auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), f);
      require(ec == std::errc() && p == val.data() + val.size() && std::isfinite(f) && f > 0, errc::malformed_input,
              "line " + std::to_string(line_no) + ": bad fps in header '" + std::string(line) + "'");
      fps = f;
    }
  }
}

inline void append_double(std::string& out, double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, p);
}

}  // namespace detail

/// Parses CSV text. `joints_hint` supplies J when the text has no "# J=" header;
/// with neither, J is the column count of the first row divided by three.
inline MotionSequence parse_motion_csv(std::string_view text, std::optional<int> joints_hint = std::nullopt) {
  std::optional<int> joints;
  double fps = 120.0;
  std::vector<double> values;
  std::size_t row_len = 0;
  int rows = 0;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = detail::trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (rows == 0) detail::parse_csv_header(line, joints, fps, line_no);
      continue;
    }
    std::size_t count = 0;
    std::size_t at = 0;
    while (true) {
      auto comma = line.find(',', at);
      const auto field = detail::trim(line.substr(at, comma == std::string_view::npos ? line.size() - at : comma - at));
      double v = 0;
      const auto* first = field.data();
      const auto* last = field.data() + field.size();
      if (!field.empty() && *first == '+') ++first;
      auto [p, ec] = std::from_chars(first, last, v);
      require(!field.empty() && ec == std::errc() && p == last, errc::malformed_input,
              "line " + std::to_string(line_no) + ", field " + std::to_string(count + 1) + ": cannot parse '" +
                  std::string(field) + "'");
      require(std::isfinite(v), errc::non_finite_value,
              "line " + std::to_string(line_no) + ", field " + std::to_string(count + 1) + ": non-finite value");
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      at = comma + 1;
    }
    if (rows == 0) {
      row_len = count;
    } else {
      require(count == row_len, errc::malformed_input,
              "line " + std::to_string(line_no) + ": expected " + std::to_string(row_len) + " values, found " +
                  std::to_string(count));
    }
    ++rows;
  }
  require(rows > 0, errc::malformed_input, "no frames in CSV input");
  if (!joints) joints = joints_hint;
  if (!joints) {
    require(row_len % 3 == 0, errc::malformed_input,
            "row length " + std::to_string(row_len) + " is not a multiple of 3");
    joints = static_cast<int>(row_len / 3);
  }
  require(row_len == static_cast<std::size_t>(3 * *joints), errc::malformed_input,
          "rows carry " + std::to_string(row_len) + " values but J=" + std::to_string(*joints) + " needs " +
              std::to_string(3 * *joints));
  const int J = *joints;
  std::array<Matrix, 3> data{Matrix(J, rows), Matrix(J, rows), Matrix(J, rows)};
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < J; ++j)
      for (int d = 0; d < 3; ++d) data[d](j, i) = values[static_cast<std::size_t>(i) * row_len + 3 * j + d];
  return MotionSequence(std::move(data), fps);
}

inline std::string format_motion_csv(const MotionSequence& seq) {
  std::string out = "# J=" + std::to_string(seq.joints()) + " fps=";
  detail::append_double(out, seq.frame_rate());
  out += '\n';
  for (int i = 0; i < seq.frames(); ++i) {
    for (int j = 0; j < seq.joints(); ++j) {
      for (int d = 0; d < 3; ++d) {
        if (j + d > 0) out += ',';
        detail::append_double(out, seq.dim(d)(j, i));
      }
    }
    out += '\n';
  }
  return out;
}

inline constexpr std::string_view kRawMagic = "MCP1";

inline MotionSequence parse_motion_raw(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, errc::malformed_input);
  const auto magic = r.take(4);
  require(std::equal(magic.begin(), magic.end(), kRawMagic.begin()), errc::format_mismatch,
          "raw-f32 motion file has wrong magic (offset 0)");
  const auto J = r.u32();
  const auto F = r.u32();
  const float fps = r.f32();
  require(J > 0 && F > 0, errc::malformed_input, "raw-f32 header declares J=" + std::to_string(J) +
                                                     ", F=" + std::to_string(F) + " (offset 4)");
  const std::uint64_t expected = std::uint64_t{F} * 3u * J * 4u;
  require(r.remaining() == expected, errc::malformed_input,
          "raw-f32 payload is " + std::to_string(r.remaining()) + " bytes, expected " + std::to_string(expected) +
              " (offset 16)");
  std::array<Matrix, 3> data{Matrix(J, F), Matrix(J, F), Matrix(J, F)};
  for (std::uint32_t i = 0; i < F; ++i)
    for (std::uint32_t j = 0; j < J; ++j)
      for (int d = 0; d < 3; ++d) {
        const auto at = r.position();
        const float v = r.f32();
        require(std::isfinite(v), errc::non_finite_value, "non-finite value at byte offset " + std::to_string(at));
        data[d](j, i) = v;
      }
  return MotionSequence(std::move(data), std::isfinite(fps) && fps > 0 ? fps : 120.0);
}

inline std::vector<std::uint8_t> format_motion_raw(const MotionSequence& seq) {
  io::ByteWriter w;
  w.put_bytes(kRawMagic);
  w.u32(static_cast<std::uint32_t>(seq.joints()));
  w.u32(static_cast<std::uint32_t>(seq.frames()));
  w.f32(static_cast<float>(seq.frame_rate()));
  for (int i = 0; i < seq.frames(); ++i)
    for (int j = 0; j < seq.joints(); ++j)
      for (int d = 0; d < 3; ++d) w.f32(static_cast<float>(seq.dim(d)(j, i)));
  return std::move(w).take();
}

inline MotionSequence load_motion(const std::filesystem::path& path, MotionFormat format,
                                  std::optional<int> joints_hint = std::nullopt) {
  const auto bytes = io::read_file(path);
  try {
    if (format == MotionFormat::csv)
      return parse_motion_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                              joints_hint);
    return parse_motion_raw(bytes);
  } catch (const error& e) {
    throw error(e.code(), path.string() + ": " + std::string(e.what()).substr(std::string(to_string(e.code())).size() + 2));
  }
}

inline MotionSequence load_motion(const std::filesystem::path& path, std::optional<int> joints_hint = std::nullopt) {
  return load_motion(path, motion_format_for(path), joints_hint);
}

inline void save_motion(const MotionSequence& seq, const std::filesystem::path& path, MotionFormat format) {
  if (format == MotionFormat::csv) {
    const auto text = format_motion_csv(seq);
    io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  } else {
    io::write_file(path, format_motion_raw(seq));
  }
}

inline void save_motion(const MotionSequence& seq, const std::filesystem::path& path) {
  save_motion(seq, path, motion_format_for(path));
}

}  // namespace mocap
