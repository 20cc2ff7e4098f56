#include "lict/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lict::io {

std::vector<unsigned char> to_rgb8(const Tensor& img) {
  check_image(img, "to_rgb8");
  const long h = img.extent(1), w = img.extent(2);
  std::vector<unsigned char> out((size_t)(h * w * 3));
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (long c = 0; c < 3; ++c) {
        double v = img.at(c, y, x);
        v = std::min(1.0, std::max(0.0, v));
        out[(size_t)((y * w + x) * 3 + c)] = (unsigned char)round_half_away(v * 255.0);
      }
  return out;
}

Tensor from_rgb8(const unsigned char* rgb, long h, long w) {
  Tensor img({3, h, w});
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (long c = 0; c < 3; ++c)
        img.at(c, y, x) = rgb[(y * w + x) * 3 + c] / 255.0;
  return img;
}

void write_png(const std::string& path, const Tensor& img) {
  check_image(img, "write_png");
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  pi.width = (png_uint_32)img.extent(2);
  pi.height = (png_uint_32)img.extent(1);
  pi.format = PNG_FORMAT_RGB;
  auto rgb = to_rgb8(img);
  if (!png_image_write_to_file(&pi, path.c_str(), 0, rgb.data(), 0, nullptr))
    throw std::runtime_error("write_png failed: " + path + ": " + pi.message);
}

Tensor read_png(const std::string& path) {
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.c_str()))
    throw std::runtime_error("read_png failed: " + path + ": " + pi.message);
  pi.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> rgb((size_t)PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, rgb.data(), 0, nullptr))
    throw std::runtime_error("read_png failed: " + path + ": " + pi.message);
  return from_rgb8(rgb.data(), pi.height, pi.width);
}

void write_ppm(const std::string& path, const Tensor& img) {
  check_image(img, "write_ppm");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
  const long h = img.extent(1), w = img.extent(2);
  f << "P6\n" << w << " " << h << "\n255\n";
  auto rgb = to_rgb8(img);
  f.write((const char*)rgb.data(), (std::streamsize)rgb.size());
}

Tensor read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_ppm: cannot open " + path);
  std::string magic;
  long w = 0, h = 0, maxv = 0;
  f >> magic >> w >> h >> maxv;
  if (magic != "P6" || maxv != 255 || w < 1 || h < 1)
    throw std::runtime_error("read_ppm: unsupported file " + path);
  f.get();
  std::vector<unsigned char> rgb((size_t)(w * h * 3));
  f.read((char*)rgb.data(), (std::streamsize)rgb.size());
  if (!f) throw std::runtime_error("read_ppm: truncated file " + path);
  return from_rgb8(rgb.data(), h, w);
}

std::vector<unsigned char> jpeg_encode(const Tensor& img, int quality) {
  check_image(img, "jpeg_encode");
  if (quality < 1 || quality > 100) throw std::invalid_argument("jpeg: quality must be in [1,100]");
  auto rgb = to_rgb8(img);
  const long h = img.extent(1), w = img.extent(2);

  jpeg_compress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  unsigned char* buf = nullptr;
  unsigned long buf_size = 0;
  jpeg_mem_dest(&cinfo, &buf, &buf_size);
  cinfo.image_width = (JDIMENSION)w;
  cinfo.image_height = (JDIMENSION)h;
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = rgb.data() + cinfo.next_scanline * w * 3;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  std::vector<unsigned char> out(buf, buf + buf_size);
  jpeg_destroy_compress(&cinfo);
  free(buf);
  return out;
}

Tensor jpeg_decode(const unsigned char* data, size_t size) {
  jpeg_decompress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, const_cast<unsigned char*>(data), (unsigned long)size);
  if (jpeg_read_header(&cinfo, TRUE) != JPEG_HEADER_OK) {
    jpeg_destroy_decompress(&cinfo);
    throw std::runtime_error("jpeg_decode: bad header");
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const long w = cinfo.output_width, h = cinfo.output_height;
  std::vector<unsigned char> rgb((size_t)(w * h * 3));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rgb.data() + cinfo.output_scanline * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_rgb8(rgb.data(), h, w);
}

Tensor jpeg_roundtrip(const Tensor& img, int quality) {
  auto bytes = jpeg_encode(img, quality);
  Tensor out = jpeg_decode(bytes.data(), bytes.size());
  if (!out.same_shape(img))
    throw std::runtime_error("jpeg_roundtrip: decoded size mismatch");
  return out;
}

namespace {
std::string lower_ext(const std::string& path) {
  auto pos = path.find_last_of('.');
  if (pos == std::string::npos) return "";
  std::string ext = path.substr(pos + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext;
}
}  // namespace

bool decodable_extension(const std::string& path) {
  const std::string e = lower_ext(path);
  return e == "png" || e == "ppm" || e == "jpg" || e == "jpeg";
}

Tensor read_image(const std::string& path) {
  const std::string e = lower_ext(path);
  if (e == "png") return read_png(path);
  if (e == "ppm") return read_ppm(path);
  if (e == "jpg" || e == "jpeg") {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_image: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    return jpeg_decode(bytes.data(), bytes.size());
  }
  throw std::runtime_error("read_image: unsupported extension in " + path);
}

void write_image(const std::string& path, const Tensor& img) {
  const std::string e = lower_ext(path);
  if (e == "png") return write_png(path, img);
  if (e == "ppm") return write_ppm(path, img);
  if (e == "jpg" || e == "jpeg") {
    auto bytes = jpeg_encode(img, 95);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_image: cannot open " + path);
    f.write((const char*)bytes.data(), (std::streamsize)bytes.size());
    return;
  }
  throw std::runtime_error("write_image: unsupported extension in " + path);
}

}  // namespace lict::io
