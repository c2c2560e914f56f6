#include "slapseg/imgcore/io.hpp"

#include <png.h>

#include <csetjmp>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "slapseg/common/error.hpp"

namespace slapseg::img {

namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

void skip_pgm_space(std::istream& in) {
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

void png_warning_ignore(png_structp, png_const_charp) {}

// libpng reports errors through longjmp; the message is parked here and
// rethrown as an exception once control is back in C++ frames.
void png_error_jump(png_structp png, png_const_charp msg) {
  auto* slot = static_cast<std::string*>(png_get_error_ptr(png));
  if (slot != nullptr) *slot = msg;
  png_longjmp(png, 1);
}

bool png_decode(std::FILE* fp, std::vector<std::uint8_t>& pixels, png_uint_32& w, png_uint_32& h,
                std::string& error) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_jump, png_warning_ignore);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  pixels.resize(static_cast<std::size_t>(w) * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * w;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool png_encode(const GrayImage& img, std::vector<std::uint8_t>& out, std::string& error) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_jump, png_warning_ignore);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height(); ++y) {
    png_write_row(png, const_cast<png_bytep>(img.pixels().data() + static_cast<std::size_t>(y) * img.width()));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

GrayImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw ParseError(path.string() + ": not a binary PGM (P5)");
  int w = 0;
  int h = 0;
  int maxval = 0;
  skip_pgm_space(in);
  in >> w;
  skip_pgm_space(in);
  in >> h;
  skip_pgm_space(in);
  in >> maxval;
  if (!in || w < 1 || h < 1 || maxval != 255) throw ParseError(path.string() + ": bad PGM header");
  in.get();
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(pixels.size())) throw ParseError(path.string() + ": truncated PGM");
  return GrayImage(w, h, std::move(pixels));
}

void write_pgm(const GrayImage& img, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels().data()), static_cast<std::streamsize>(img.pixels().size()));
  if (!out) throw IoError("write failed: " + path.string());
}

GrayImage read_png(const fs::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> pixels;
  png_uint_32 w = 0;
  png_uint_32 h = 0;
  std::string error;
  if (!png_decode(fp.get(), pixels, w, h, error)) throw ParseError(path.string() + ": png: " + error);
  return GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(pixels));
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  std::vector<std::uint8_t> out;
  std::string error;
  if (!png_encode(img, out, error)) throw IoError("png encode: " + error);
  return out;
}

void write_png(const GrayImage& img, const fs::path& path) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

GrayImage read_image(const fs::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm") return read_pgm(path);
  throw ValidationError("unsupported image extension: " + path.string());
}

void write_image(const GrayImage& img, const fs::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return write_png(img, path);
  if (ext == ".pgm") return write_pgm(img, path);
  throw ValidationError("unsupported image extension: " + path.string());
}

}  // namespace slapseg::img
