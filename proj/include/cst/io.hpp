#pragma once

// CSTB arrays, key=value manifests with SHA-256 content hashes, and 8-bit
// grayscale PNG export.

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cst/core.hpp"
#include "cst/forward.hpp"

namespace cst {

namespace fs = std::filesystem;

inline constexpr char cstb_magic[4] = {'C', 'S', 'T', 'B'};
inline constexpr std::uint32_t cstb_version = 1;

struct CstbArray {
  std::vector<std::uint32_t> dims;
  std::vector<double> data;

  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw io_error("cstb: truncated header");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

inline void encode_f64(double v, char* out) {
  const auto u = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((u >> (8 * i)) & 0xff);
}

inline double decode_f64(const unsigned char* in) {
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

}  // namespace detail

/// Writes a CSTB file incrementally: header first, then row-major payload
/// blocks; close() checks the value count.
class CstbWriter {
 public:
  CstbWriter(const fs::path& path, std::vector<std::uint32_t> dims) : path_(path), dims_(std::move(dims)) {
    expected_ = 1;
    for (auto d : dims_) expected_ *= d;
    os_.open(path, std::ios::binary | std::ios::trunc);
    if (!os_) throw io_error("cstb: cannot open " + path.string() + " for writing");
    os_.write(cstb_magic, 4);
    detail::put_u32(os_, cstb_version);
    detail::put_u32(os_, static_cast<std::uint32_t>(dims_.size()));
    for (auto d : dims_) detail::put_u32(os_, d);
  }
  CstbWriter(const CstbWriter&) = delete;
  CstbWriter& operator=(const CstbWriter&) = delete;
  ~CstbWriter() {
    if (os_.is_open()) os_.close();
  }

  void write(std::span<const double> block) {
    if (written_ + block.size() > expected_) throw io_error("cstb: payload exceeds dims");
    buffer_.resize(8 * block.size());
    for (std::size_t i = 0; i < block.size(); ++i) detail::encode_f64(block[i], buffer_.data() + 8 * i);
    os_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    written_ += block.size();
  }

  void close() {
    if (written_ != expected_) throw io_error("cstb: payload shorter than dims in " + path_.string());
    os_.close();
    if (os_.fail()) throw io_error("cstb: write failed for " + path_.string());
  }

 private:
  fs::path path_;
  std::vector<std::uint32_t> dims_;
  std::ofstream os_;
  std::size_t expected_ = 0;
  std::size_t written_ = 0;
  std::vector<char> buffer_;
};

inline void write_cstb(const fs::path& path, const std::vector<std::uint32_t>& dims, std::span<const double> data) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  if (data.size() != n) throw std::invalid_argument("write_cstb: data size does not match dims");
  CstbWriter w(path, dims);
  constexpr std::size_t block = 1u << 16;
  for (std::size_t i = 0; i < data.size(); i += block) w.write(data.subspan(i, std::min(block, data.size() - i)));
  w.close();
}

inline CstbArray read_cstb(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cstb: cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, cstb_magic, 4) != 0) throw io_error("cstb: bad magic in " + path.string());
  if (detail::get_u32(is) != cstb_version) throw io_error("cstb: unsupported version in " + path.string());
  CstbArray a;
  a.dims.resize(detail::get_u32(is));
  for (auto& d : a.dims) d = detail::get_u32(is);
  const std::size_t n = a.count();
  a.data.resize(n);
  std::vector<unsigned char> buf(8 * std::min<std::size_t>(n, 1u << 16));
  for (std::size_t i = 0; i < n;) {
    const std::size_t m = std::min<std::size_t>(n - i, buf.size() / 8);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(8 * m)))
      throw io_error("cstb: truncated payload in " + path.string());
    for (std::size_t q = 0; q < m; ++q) a.data[i + q] = detail::decode_f64(buf.data() + 8 * q);
    i += m;
  }
  if (is.peek() != std::char_traits<char>::eof()) throw io_error("cstb: trailing bytes in " + path.string());
  return a;
}

// 2D arrays are stored as (rows, cols) = (ny, nx); spectra as (P, K).

inline void write_grid(const fs::path& path, const Grid& g) {
  write_cstb(path, {static_cast<std::uint32_t>(g.ny), static_cast<std::uint32_t>(g.nx)}, g.values);
}

/// Reads values into a grid with the given placement; shape must agree.
inline Grid read_grid(const fs::path& path, double x0, double y0, double step) {
  auto a = read_cstb(path);
  if (a.dims.size() != 2) throw io_error("cstb: expected a 2D array in " + path.string());
  Grid g(a.dims[1], a.dims[0], x0, y0, step);
  g.values = std::move(a.data);
  return g;
}

inline void write_spectrum(const fs::path& path, const Spectrum& s) {
  write_cstb(path, {static_cast<std::uint32_t>(s.p), static_cast<std::uint32_t>(s.k)}, s.values);
}

inline Spectrum read_spectrum(const fs::path& path) {
  auto a = read_cstb(path);
  if (a.dims.size() != 2) throw io_error("cstb: expected a P x K array in " + path.string());
  Spectrum s(a.dims[0], a.dims[1]);
  s.values = std::move(a.data);
  return s;
}

inline void write_matrix(const fs::path& path, const ForwardMatrix& m) {
  write_cstb(path, {static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols)}, m.entries);
}

inline ForwardMatrix read_matrix(const fs::path& path) {
  auto a = read_cstb(path);
  if (a.dims.size() != 2) throw io_error("cstb: expected a matrix in " + path.string());
  ForwardMatrix m;
  m.rows = a.dims[0];
  m.cols = a.dims[1];
  m.entries = std::move(a.data);
  return m;
}

inline void write_vector(const fs::path& path, std::span<const double> v) {
  write_cstb(path, {static_cast<std::uint32_t>(v.size())}, v);
}

inline std::vector<double> read_vector(const fs::path& path) {
  auto a = read_cstb(path);
  if (a.dims.size() != 1) throw io_error("cstb: expected a vector in " + path.string());
  return std::move(a.data);
}

// --- hashes and manifests ---

namespace detail {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw io_error("sha256: init failed");
  }
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace detail

inline std::string sha256_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("sha256: cannot open " + path.string());
  detail::Sha256 h;
  std::vector<char> buf(1u << 20);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() > 0) h.update(buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  return h.hex();
}

inline std::string sha256_string(std::string_view text) {
  detail::Sha256 h;
  h.update(text.data(), text.size());
  return h.hex();
}

/// Flat key=value text; '#' starts a comment line. Keys are written sorted.
inline std::map<std::string, std::string> parse_key_values(std::istream& is, const std::string& origin = "input") {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw io_error(origin + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

struct Manifest {
  std::map<std::string, std::string> entries;

  void set(const std::string& key, const std::string& value) { entries[key] = value; }
  bool has(const std::string& key) const { return entries.count(key) > 0; }
  const std::string& get(const std::string& key) const {
    auto it = entries.find(key);
    if (it == entries.end()) throw io_error("manifest: missing key " + key);
    return it->second;
  }

  /// Records the content hash of an output or input file under `name`.
  void add_output(const std::string& name, const fs::path& file) {
    set("output." + name, file.filename().string());
    set("output." + name + ".sha256", sha256_file(file));
  }
  void add_input(const std::string& name, const fs::path& file) {
    set("input." + name, file.filename().string());
    set("input." + name + ".sha256", sha256_file(file));
  }

  /// Throws if any recorded input under `dir` no longer has its hash.
  void verify_inputs(const fs::path& dir) const {
    for (const auto& [key, value] : entries) {
      if (!key.starts_with("input.") || key.ends_with(".sha256")) continue;
      const auto file = dir / value;
      if (!fs::exists(file)) throw io_error("manifest: missing upstream file " + file.string());
      if (sha256_file(file) != get(key + ".sha256")) throw io_error("manifest: upstream hash mismatch for " + file.string());
    }
  }

  void write(const fs::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw io_error("manifest: cannot write " + path.string());
    for (const auto& [k, v] : entries) os << k << '=' << v << '\n';
    if (!os) throw io_error("manifest: write failed for " + path.string());
  }

  static Manifest read(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw io_error("manifest: cannot open " + path.string());
    return {parse_key_values(is, path.string())};
  }
};

/// Confirms that `file` still matches the hash recorded in `upstream` for
/// output `name`.
inline void check_upstream(const Manifest& upstream, const std::string& name, const fs::path& file) {
  const auto& want = upstream.get("output." + name + ".sha256");
  if (sha256_file(file) != want) throw io_error("manifest: upstream hash mismatch for " + file.string());
}

// --- PNG ---

/// Linear window [lo, hi] to 0..255, rounded; a flat window gives mid gray.
inline std::vector<std::uint8_t> quantize(std::span<const double> v, double lo, double hi) {
  std::vector<std::uint8_t> q(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(hi > lo)) {
      q[i] = 128;
      continue;
    }
    const double t = std::clamp((v[i] - lo) / (hi - lo), 0.0, 1.0);
    q[i] = static_cast<std::uint8_t>(std::lround(255.0 * t));
  }
  return q;
}

/// Writes rows top to bottom; row 0 of the array is the image bottom.
inline void write_png_gray(const fs::path& path, std::size_t nx, std::size_t ny, std::span<const std::uint8_t> pixels) {
  require(pixels.size() == nx * ny, "write_png_gray: size mismatch");
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw io_error("png: cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw io_error("png: encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(nx), static_cast<png_uint_32>(ny), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < ny; ++r)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + (ny - 1 - r) * nx));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw io_error("png: write failed for " + path.string());
}

struct GrayImage {
  std::size_t nx = 0, ny = 0;
  std::vector<std::uint8_t> pixels;  // bottom row first, as written
};

inline GrayImage read_png_gray(const fs::path& path) {
  std::FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) throw io_error("png: cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  GrayImage img;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw io_error("png: decoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw io_error("png: not 8-bit grayscale: " + path.string());
  }
  img.nx = png_get_image_width(png, info);
  img.ny = png_get_image_height(png, info);
  img.pixels.resize(img.nx * img.ny);
  for (std::size_t r = 0; r < img.ny; ++r) png_read_row(png, img.pixels.data() + (img.ny - 1 - r) * img.nx, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

/// Exports a 2D CSTB array; the window is [min, max] of `window_from` when
/// given, else of the image itself.
inline void export_png(const fs::path& cstb, const fs::path& out, const std::optional<fs::path>& window_from = {}) {
  const auto a = read_cstb(cstb);
  if (a.dims.size() != 2) throw std::invalid_argument("export_png: input is not 2D");
  std::span<const double> ref = a.data;
  CstbArray w;
  if (window_from) {
    w = read_cstb(*window_from);
    ref = w.data;
  }
  require(!ref.empty(), "export_png: empty window source");
  const auto [lo, hi] = std::minmax_element(ref.begin(), ref.end());
  write_png_gray(out, a.dims[1], a.dims[0], quantize(a.data, *lo, *hi));
}

}  // namespace cst
