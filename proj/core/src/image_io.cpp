#include "pixelreg/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pixelreg/errors.hpp"

namespace pixelreg::data {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("read failed for " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// ---- PGM (binary P5) ----

class PgmHeaderScanner {
 public:
  PgmHeaderScanner(const std::vector<std::uint8_t>& bytes, std::size_t pos)
      : bytes_(bytes), pos_(pos) {}

  long next_int(const char* what) {
    skip_separators();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
      throw DataError(std::string("pgm: malformed header (") + what + ")");
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1 << 26) throw DataError("pgm: header value out of range");
      ++pos_;
    }
    return value;
  }

  // One whitespace byte separates the header from raster data.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw DataError("pgm: missing raster separator");
    return pos_ + 1;
  }

 private:
  void skip_separators() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_;
};

Image decode_pgm(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  PgmHeaderScanner scan(bytes, 2);
  const long w = scan.next_int("width");
  const long h = scan.next_int("height");
  const long maxval = scan.next_int("maxval");
  if (w < 1 || h < 1) throw DataError("pgm: bad dimensions in " + path.string());
  if (maxval != 255)
    throw DataError("pgm: only 8-bit maxval 255 supported, got " + std::to_string(maxval) +
                    " in " + path.string());
  const std::size_t off = scan.raster_offset();
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - off < need) throw DataError("pgm: truncated raster in " + path.string());

  Image img(static_cast<int>(h), static_cast<int>(w));
  for (std::size_t i = 0; i < need; ++i) img.v[i] = bytes[off + i] / 255.0;
  return img;
}

// ---- PNG, 8-bit color types 0 and 2 ----

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint8_t paeth(std::uint8_t a, std::uint8_t b, std::uint8_t c) {
  const int p = int(a) + int(b) - int(c);
  const int pa = std::abs(p - int(a)), pb = std::abs(p - int(b)), pc = std::abs(p - int(c));
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  auto fail = [&](const std::string& why) -> DataError {
    return DataError("png: " + why + " in " + path.string());
  };
  if (bytes.size() < 8 + 25 || std::memcmp(bytes.data(), kPngSignature, 8) != 0)
    throw fail("bad signature");

  std::size_t pos = 8;
  bool saw_ihdr = false;
  std::uint32_t width = 0, height = 0;
  int channels = 0;
  std::vector<std::uint8_t> idat;

  while (pos + 12 <= bytes.size()) {
    const std::uint32_t len = be32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw fail("truncated chunk");
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const std::uint8_t* data = &bytes[pos + 8];
    const std::uint32_t crc_want = be32(&bytes[pos + 8 + len]);
    uLong crc_acc = crc32(0L, &bytes[pos + 4], 4);
    if (len) crc_acc = crc32(crc_acc, data, len);
    if (static_cast<std::uint32_t>(crc_acc) != crc_want) throw fail("chunk crc mismatch");

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw fail("bad IHDR length");
      width = be32(data);
      height = be32(data + 4);
      const int bit_depth = data[8], color_type = data[9];
      const int compression = data[10], filter = data[11], interlace = data[12];
      if (width == 0 || height == 0 || width > (1u << 24) || height > (1u << 24))
        throw fail("bad dimensions");
      if (bit_depth == 16) throw fail("16-bit depth not supported");
      if (bit_depth != 8) throw fail("only 8-bit depth supported");
      if (color_type == 0) channels = 1;
      else if (color_type == 2) channels = 3;
      else throw fail("unsupported color type " + std::to_string(color_type));
      if (compression != 0 || filter != 0) throw fail("nonstandard compression/filter");
      if (interlace != 0) throw fail("interlaced images not supported");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      if (!saw_ihdr) throw fail("IDAT before IHDR");
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || idat.empty()) throw fail("missing IHDR or IDAT");

  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  const std::size_t raw_size = (stride + 1) * height;
  std::vector<std::uint8_t> raw(raw_size);
  uLongf out_len = raw_size;
  const int zrc = uncompress(raw.data(), &out_len, idat.data(), idat.size());
  if (zrc != Z_OK || out_len != raw_size) throw fail("IDAT inflate failed");

  std::vector<std::uint8_t> pix(stride * height);
  const int bpp = channels;
  for (std::uint32_t y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = &raw[y * (stride + 1) + 1];
    std::uint8_t* cur = &pix[y * stride];
    const std::uint8_t* up = y ? &pix[(y - 1) * stride] : nullptr;
    for (std::size_t x = 0; x < stride; ++x) {
      const std::uint8_t a = x >= static_cast<std::size_t>(bpp) ? cur[x - bpp] : 0;
      const std::uint8_t b = up ? up[x] : 0;
      const std::uint8_t c = (up && x >= static_cast<std::size_t>(bpp)) ? up[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (int(a) + int(b)) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw fail("unknown scanline filter " + std::to_string(filter));
      }
      cur[x] = static_cast<std::uint8_t>(v);
    }
  }

  Image img(static_cast<int>(height), static_cast<int>(width));
  for (std::uint32_t y = 0; y < height; ++y)
    for (std::uint32_t x = 0; x < width; ++x) {
      const std::uint8_t* px = &pix[y * stride + std::size_t(x) * channels];
      img.at(static_cast<int>(y), static_cast<int>(x)) =
          (channels == 1 ? px[0] : px[1]) / 255.0;  // RGB keeps the green channel
    }
  return img;
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, &out[type_at], static_cast<uInt>(4 + data.size())));
  put_be32(out, crc);
}

}  // namespace

Image load_grayscale(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes, path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0)
    return decode_png(bytes, path);
  throw DataError("unrecognized image format in " + path.string() +
                  " (expected binary PGM or PNG)");
}

void save_pgm(const std::filesystem::path& path, const Image& img) {
  if (img.rows < 1 || img.cols < 1) throw std::invalid_argument("save_pgm: empty image");
  std::string header =
      "P5\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + img.size());
  for (double v : img.v) bytes.push_back(quantize(v));
  write_file(path, bytes);
}

void save_png(const std::filesystem::path& path, const Image& img) {
  if (img.rows < 1 || img.cols < 1) throw std::invalid_argument("save_png: empty image");
  std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);

  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(img.cols));
  put_be32(ihdr, static_cast<std::uint32_t>(img.rows));
  ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});  // depth 8, grayscale, no interlace
  append_chunk(out, "IHDR", ihdr);

  std::vector<std::uint8_t> raw;
  raw.reserve((static_cast<std::size_t>(img.cols) + 1) * img.rows);
  for (int r = 0; r < img.rows; ++r) {
    raw.push_back(0);  // filter: none
    for (int c = 0; c < img.cols; ++c) raw.push_back(quantize(img.at(r, c)));
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(bound);
  if (compress2(packed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                Z_DEFAULT_COMPRESSION) != Z_OK)
    throw DataError("png: deflate failed for " + path.string());
  packed.resize(bound);
  append_chunk(out, "IDAT", packed);
  append_chunk(out, "IEND", {});
  write_file(path, out);
}

}  // namespace pixelreg::data
