#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/SVD>

#include "egodepth/camera.hpp"
#include "egodepth/image.hpp"

namespace egodepth {

/// Shortest text that reads back to exactly the same double.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Fixed four-decimal rendering used for console output.
inline std::string format_fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

namespace detail {

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Whitespace-separated header tokens of a binary Netpbm-style file. '#'
// starts a comment that runs to the end of the line.
class HeaderReader {
 public:
  HeaderReader(std::string_view bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}

  std::string_view token() {
    for (;;) {
      while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
      if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) fail("truncated header");
    return bytes_.substr(start, pos_ - start);
  }

  int positive_int() {
    const std::string_view t = token();
    int v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || v <= 0) fail("bad header value '" + std::string(t) + "'");
    return v;
  }

  double real() {
    const std::string_view t = token();
    double v = 0.0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) fail("bad header value '" + std::string(t) + "'");
    return v;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::string_view payload() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      fail("missing separator before data");
    return bytes_.substr(pos_ + 1);
  }

  [[noreturn]] void fail(const std::string& what) const { throw IoError(name_ + ": " + what); }

 private:
  std::string_view bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

inline std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

}  // namespace detail

/// Grayscale PFM: "Pf", "W H", scale "-1.0" (little-endian), then float32
/// rows from the bottom of the image up.
inline std::string encode_pfm(const DepthMap& d) {
  std::string out = "Pf\n" + std::to_string(d.width()) + " " + std::to_string(d.height()) + "\n-1.0\n";
  for (int y = d.height() - 1; y >= 0; --y)
    for (int x = 0; x < d.width(); ++x) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(d(x, y)));
      if constexpr (std::endian::native == std::endian::big) bits = detail::byteswap32(bits);
      char b[4];
      std::memcpy(b, &bits, 4);
      out.append(b, 4);
    }
  return out;
}

inline DepthMap decode_pfm(std::string_view bytes, const std::string& name = "pfm") {
  detail::HeaderReader h(bytes, name);
  const std::string_view magic = h.token();
  if (magic == "PF") h.fail("colour PFM is not supported");
  if (magic != "Pf") h.fail("not a PFM file");
  const int w = h.positive_int();
  const int height = h.positive_int();
  const double scale = h.real();
  if (scale == 0.0 || !std::isfinite(scale)) h.fail("invalid scale");
  const std::string_view data = h.payload();
  const std::size_t need = static_cast<std::size_t>(w) * height * 4;
  if (data.size() != need) h.fail("expected " + std::to_string(need) + " data bytes, found " + std::to_string(data.size()));
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);
  DepthMap d(w, height);
  std::size_t o = 0;
  for (int y = height - 1; y >= 0; --y)
    for (int x = 0; x < w; ++x, o += 4) {
      std::uint32_t bits;
      std::memcpy(&bits, data.data() + o, 4);
      if (swap) bits = detail::byteswap32(bits);
      d(x, y) = std::bit_cast<float>(bits);
    }
  return d;
}

inline void write_pfm(const std::filesystem::path& path, const DepthMap& d) {
  detail::write_file(path, encode_pfm(d));
}

inline DepthMap read_pfm(const std::filesystem::path& path) {
  return decode_pfm(detail::slurp(path), path.string());
}

/// Intensity in [0, 1] to an 8-bit level, round(v * 255).
inline std::uint8_t quantize(double v) {
  if (!std::isfinite(v)) throw InvalidArgument("quantize: non-finite intensity");
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Binary PGM (P5) for one channel, PPM (P6) for three; maxval 255.
inline std::string encode_pnm(const ImageBuffer& img) {
  std::string out = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.data().size());
  for (double v : img.data()) out.push_back(static_cast<char>(quantize(v)));
  return out;
}

inline ImageBuffer decode_pnm(std::string_view bytes, const std::string& name = "image") {
  detail::HeaderReader h(bytes, name);
  const std::string_view magic = h.token();
  if (magic != "P5" && magic != "P6") h.fail("only binary P5/P6 images are supported");
  const int channels = magic == "P5" ? 1 : 3;
  const int w = h.positive_int();
  const int height = h.positive_int();
  const int maxval = h.positive_int();
  if (maxval > 255) h.fail("16-bit images are not supported");
  const std::string_view data = h.payload();
  ImageBuffer img(w, height, channels);
  if (data.size() != img.data().size())
    h.fail("expected " + std::to_string(img.data().size()) + " data bytes, found " + std::to_string(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i)
    img.data()[i] = static_cast<unsigned char>(data[i]) / static_cast<double>(maxval);
  return img;
}

inline void write_image(const std::filesystem::path& path, const ImageBuffer& img) {
  detail::write_file(path, encode_pnm(img));
}

inline ImageBuffer read_image(const std::filesystem::path& path) {
  return decode_pnm(detail::slurp(path), path.string());
}

namespace detail {

// Numbers on one text line; throws ParseError naming the line.
inline std::vector<double> parse_reals(std::string_view line, std::size_t line_no) {
  std::vector<double> v;
  std::size_t i = 0;
  while (true) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    const char* first = line.data() + i;
    if (*first == '+') ++first;
    double x = 0.0;
    const auto [p, ec] = std::from_chars(first, line.data() + j, x);
    if (ec != std::errc() || p != line.data() + j || !std::isfinite(x))
      throw ParseError(line_no, "'" + std::string(line.substr(i, j - i)) + "' is not a number");
    v.push_back(x);
    i = j;
  }
  return v;
}

template <typename F>
void for_each_line(std::istream& in, F&& f) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    f(std::string_view(line), n);
  }
}

// Nearest rotation to a nearly orthonormal matrix, for pose files written
// with limited precision. Matrices that already pass validation are kept as is.
inline Rotation rotation_from_text(const Mat3& m, std::size_t line_no) {
  if (((m.transpose() * m) - Mat3::Identity()).cwiseAbs().maxCoeff() <= kRotationTolerance &&
      std::abs(m.determinant() - 1.0) <= kRotationTolerance)
    return Rotation::from_matrix(m);
  if (((m.transpose() * m) - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-4 || m.determinant() <= 0.0)
    throw ParseError(line_no, "rotation block is not a rotation matrix");
  const Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return Rotation::from_matrix(svd.matrixU() * svd.matrixV().transpose());
}

}  // namespace detail

/// KITTI odometry poses: one row-major 3x4 [R|t] per line, camera-to-world.
inline std::vector<SE3Transform> parse_poses(std::istream& in) {
  std::vector<SE3Transform> poses;
  detail::for_each_line(in, [&](std::string_view line, std::size_t n) {
    const auto v = detail::parse_reals(line, n);
    if (v.size() != 12) throw ParseError(n, "expected 12 values, found " + std::to_string(v.size()));
    Mat3 r;
    r << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    poses.emplace_back(detail::rotation_from_text(r, n), Vec3(v[3], v[7], v[11]));
  });
  return poses;
}

inline std::string format_poses(const std::vector<SE3Transform>& poses) {
  std::string out;
  for (const auto& p : poses) {
    const Mat4 m = p.matrix();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) {
        out += format_real(m(r, c));
        out += (r == 2 && c == 3) ? '\n' : ' ';
      }
  }
  return out;
}

inline std::vector<SE3Transform> read_poses(const std::filesystem::path& path) {
  std::ifstream in = detail::open_in(path);
  return parse_poses(in);
}

inline void write_poses(const std::filesystem::path& path, const std::vector<SE3Transform>& poses) {
  detail::write_file(path, format_poses(poses));
}

/// One timestamp in seconds per line.
inline std::vector<double> parse_timestamps(std::istream& in) {
  std::vector<double> ts;
  detail::for_each_line(in, [&](std::string_view line, std::size_t n) {
    const auto v = detail::parse_reals(line, n);
    if (v.size() != 1) throw ParseError(n, "expected one timestamp, found " + std::to_string(v.size()) + " values");
    ts.push_back(v[0]);
  });
  return ts;
}

inline std::vector<double> read_timestamps(const std::filesystem::path& path) {
  std::ifstream in = detail::open_in(path);
  return parse_timestamps(in);
}

inline void write_timestamps(const std::filesystem::path& path, const std::vector<double>& ts) {
  std::string out;
  for (double t : ts) out += format_real(t) + "\n";
  detail::write_file(path, out);
}

/// Intrinsics file: a single line "fx fy cx cy".
inline CameraIntrinsics parse_intrinsics(std::istream& in) {
  std::vector<double> v;
  std::size_t lines = 0;
  detail::for_each_line(in, [&](std::string_view line, std::size_t n) {
    if (++lines > 1) throw ParseError(n, "expected a single line 'fx fy cx cy'");
    v = detail::parse_reals(line, n);
    if (v.size() != 4) throw ParseError(n, "expected 4 values 'fx fy cx cy', found " + std::to_string(v.size()));
  });
  if (lines == 0) throw ParseError(1, "empty intrinsics file");
  CameraIntrinsics k{v[0], v[1], v[2], v[3]};
  k.validate();
  return k;
}

inline CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  std::ifstream in = detail::open_in(path);
  return parse_intrinsics(in);
}

inline void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& k) {
  detail::write_file(path, format_real(k.fx) + " " + format_real(k.fy) + " " + format_real(k.cx) + " " +
                               format_real(k.cy) + "\n");
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline void write_key_values(const std::filesystem::path& path, const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  detail::write_file(path, out);
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in = detail::open_in(path);
  KeyValues kv;
  detail::for_each_line(in, [&](std::string_view line, std::size_t n) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(n, "expected key=value");
    kv.emplace_back(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  });
  return kv;
}

}  // namespace egodepth
