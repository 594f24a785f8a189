#ifndef MASKCS_IMAGE_IO_HPP
#define MASKCS_IMAGE_IO_HPP

// Binary 8-bit PGM (P5) and PPM (P6).

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "types.hpp"

namespace maskcs {

/// Planar image with values in [0, 1] (sample / maxval).
struct PlanarImage {
  std::vector<Image> planes;  ///< 1 plane (gray) or 3 (RGB)

  Index rows() const { return planes.empty() ? 0 : planes.front().rows(); }
  Index cols() const { return planes.empty() ? 0 : planes.front().cols(); }
  Index channels() const { return static_cast<Index>(planes.size()); }
};

namespace detail {

inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;  // the single whitespace after the token has been consumed
}

}  // namespace detail

inline PlanarImage read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open image '" + path + "'");
  const std::string magic = detail::pnm_token(in);
  if (magic != "P5" && magic != "P6")
    throw io_error("'" + path + "' is not a binary PGM/PPM (P5/P6) file");
  long w = 0, h = 0, maxval = 0;
  try {
    w = std::stol(detail::pnm_token(in));
    h = std::stol(detail::pnm_token(in));
    maxval = std::stol(detail::pnm_token(in));
  } catch (const std::exception&) {
    throw io_error("malformed header in '" + path + "'");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw io_error("unsupported dimensions or maxval in '" + path + "' (8-bit only)");
  const Index channels = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w * h * channels));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw io_error("truncated pixel data in '" + path + "'");
  PlanarImage img;
  img.planes.assign(static_cast<std::size_t>(channels), Image(h, w));
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c)
      for (Index ch = 0; ch < channels; ++ch)
        img.planes[static_cast<std::size_t>(ch)](r, c) =
            raw[static_cast<std::size_t>((r * w + c) * channels + ch)] / static_cast<double>(maxval);
  return img;
}

/// Writes 1 plane as P5 or 3 planes as P6; values are clamped to [0, 1] and
/// rounded to 8 bits.
inline void write_pnm(const std::string& path, const PlanarImage& img) {
  const Index channels = img.channels();
  if (channels != 1 && channels != 3) throw std::invalid_argument("write_pnm: need 1 or 3 planes");
  const Index h = img.rows(), w = img.cols();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write image '" + path + "'");
  out << (channels == 3 ? "P6" : "P5") << "\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(w * h * channels));
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c)
      for (Index ch = 0; ch < channels; ++ch) {
        const double v = std::clamp(img.planes[static_cast<std::size_t>(ch)](r, c), 0.0, 1.0);
        raw[static_cast<std::size_t>((r * w + c) * channels + ch)] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw io_error("failed writing '" + path + "'");
}

}  // namespace maskcs

#endif  // MASKCS_IMAGE_IO_HPP
