#pragma once

#include <string>
#include <vector>

#include "lict/image.hpp"

namespace lict::io {

// 8-bit quantization used at every file/codec boundary.
std::vector<unsigned char> to_rgb8(const Tensor& img);
Tensor from_rgb8(const unsigned char* rgb, long h, long w);

void write_png(const std::string& path, const Tensor& img);
Tensor read_png(const std::string& path);

void write_ppm(const std::string& path, const Tensor& img);
Tensor read_ppm(const std::string& path);

// JPEG via the reference codec (libjpeg), round-tripped fully in memory.
std::vector<unsigned char> jpeg_encode(const Tensor& img, int quality);
Tensor jpeg_decode(const unsigned char* data, size_t size);
Tensor jpeg_roundtrip(const Tensor& img, int quality);

// Dispatch on extension (.png, .ppm, .jpg, .jpeg). Throws on anything else.
Tensor read_image(const std::string& path);
void write_image(const std::string& path, const Tensor& img);

bool decodable_extension(const std::string& path);

}  // namespace lict::io
