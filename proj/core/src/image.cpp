#include "dpca/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace dpca {

namespace {

void skip_space_and_comments(std::istream& in) {
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

std::size_t read_header_int(std::istream& in, const std::filesystem::path& path) {
  skip_space_and_comments(in);
  long long v = -1;
  in >> v;
  if (!in || v < 0) throw std::runtime_error("load_pgm: malformed header in " + path.string());
  return static_cast<std::size_t>(v);
}

void require_same_shape(const Image& a, const Image& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(who) + ": image dimensions differ");
  }
}

}  // namespace

Image load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_pgm: cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5" && magic != "P2") {
    throw std::runtime_error("load_pgm: " + path.string() + " is not a P5/P2 PGM");
  }
  const std::size_t width = read_header_int(in, path);
  const std::size_t height = read_header_int(in, path);
  const std::size_t maxval = read_header_int(in, path);
  if (width == 0 || height == 0 || maxval == 0 || maxval > 255) {
    throw std::runtime_error("load_pgm: unsupported dimensions or maxval in " + path.string());
  }
  const double scale = 255.0 / static_cast<double>(maxval);
  Image img(height, width);
  auto px = img.data();
  if (magic == "P5") {
    in.get();  // single whitespace byte after maxval
    std::string bytes(width * height, '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
      throw std::runtime_error("load_pgm: truncated pixel data in " + path.string());
    }
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<unsigned char>(bytes[i]) * scale;
  } else {
    for (double& v : px) {
      long long value = -1;
      in >> value;
      if (!in || value < 0 || value > static_cast<long long>(maxval)) {
        throw std::runtime_error("load_pgm: bad pixel value in " + path.string());
      }
      v = static_cast<double>(value) * scale;
    }
  }
  return img;
}

void save_pgm(const std::filesystem::path& path, const Image& img) {
  if (img.empty()) throw std::invalid_argument("save_pgm: empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_pgm: cannot open " + path.string());
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  std::string bytes(img.size(), '\0');
  auto px = img.data();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double v = std::isfinite(px[i]) ? std::clamp(std::round(px[i]), 0.0, 255.0) : 0.0;
    bytes[i] = static_cast<char>(static_cast<unsigned char>(v));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("save_pgm: write failed for " + path.string());
}

Image map_to_image(std::span<const double> values, std::size_t height, std::size_t width) {
  if (values.size() != height * width) throw std::invalid_argument("map_to_image: size mismatch");
  Image img(height, width);
  if (values.empty()) return img;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (range <= 0.0) return img;
  auto px = img.data();
  for (std::size_t i = 0; i < values.size(); ++i) px[i] = 255.0 * (values[i] - *lo) / range;
  return img;
}

double sse(const Image& a, const Image& b) {
  require_same_shape(a, b, "sse");
  const double d = frobenius_distance(a, b);
  return d * d;
}

double psnr(const Image& a, const Image& b, double peak) {
  require_same_shape(a, b, "psnr");
  if (a.empty()) throw std::invalid_argument("psnr: empty image");
  const double mse = sse(a, b) / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / mse);
}

double sigma_for_psnr(double psnr_db, double peak) {
  return peak / std::pow(10.0, psnr_db / 20.0);
}

void clamp_pixels(Image& img, double lo, double hi) {
  for (double& v : img.data()) v = std::clamp(v, lo, hi);
}

}  // namespace dpca
