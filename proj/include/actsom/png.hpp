#pragma once

// Minimal 8-bit grayscale PNG encoder (colour type 0, no alpha, no ancillary
// chunks). Output bytes depend only on the pixels and the zlib build.

#include <actsom/error.hpp>

#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace actsom {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

namespace detail {

inline void put_u32_be(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xffu));
}

inline void put_chunk(std::string& out, const char (&type)[5], const std::string& data) {
  put_u32_be(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = out.size();
  out.append(type, 4);
  out += data;
  const auto* crc_begin = reinterpret_cast<const Bytef*>(out.data() + type_at);
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), crc_begin, static_cast<uInt>(4 + data.size()));
  put_u32_be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

inline std::string encode_png(const GrayImage& img) {
  if (img.width == 0 || img.height == 0 || img.pixels.size() != img.width * img.height) {
    fail(ErrorKind::invalid_input, "image dimensions do not match pixel buffer");
  }
  std::string out("\x89PNG\r\n\x1a\n", 8);

  std::string ihdr;
  detail::put_u32_be(ihdr, static_cast<std::uint32_t>(img.width));
  detail::put_u32_be(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);  // deflate
  ihdr.push_back(0);  // adaptive filtering
  ihdr.push_back(0);  // no interlace
  detail::put_chunk(out, "IHDR", ihdr);

  // Filter type 0 on every scanline.
  std::vector<Bytef> raw;
  raw.reserve(img.height * (img.width + 1));
  for (std::size_t y = 0; y < img.height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(y * img.width),
               img.pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * img.width));
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(packed_size, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size, raw.data(), static_cast<uLong>(raw.size()),
                Z_BEST_COMPRESSION) != Z_OK) {
    fail(ErrorKind::io, "zlib compression failed");
  }
  packed.resize(packed_size);
  detail::put_chunk(out, "IDAT", packed);
  detail::put_chunk(out, "IEND", std::string());
  return out;
}

inline void write_png(const std::filesystem::path& path, const GrayImage& img) {
  const std::string bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "failed writing '" + path.string() + "'");
}

}  // namespace actsom
