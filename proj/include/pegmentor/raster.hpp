#pragma once

// RGBA raster frames and the integer drawing primitives used by the scene
// renderer and the guidance overlay. Every primitive clips to the canvas, so
// no call can write outside it.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pegmentor {

struct Rgba {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  std::uint8_t a = 255;

  friend bool operator==(const Rgba&, const Rgba&) = default;
};

/// Mutable view of a rectangular pixel region. The stride (in pixels) may
/// exceed the width, which lets a caller embed the canvas in a larger buffer.
class Canvas {
 public:
  Canvas(std::uint8_t* data, int width, int height, int stride_px);

  int width() const { return width_; }
  int height() const { return height_; }
  bool contains(long long x, long long y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  void put(int x, int y, Rgba c) {
    std::uint8_t* p = data_ + (static_cast<std::size_t>(y) * stride_ + x) * 4;
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
    p[3] = c.a;
  }
  /// Bounds-checked write; out-of-range coordinates are ignored.
  void put_clipped(long long x, long long y, Rgba c) {
    if (contains(x, y)) put(static_cast<int>(x), static_cast<int>(y), c);
  }
  Rgba get(int x, int y) const;
  void fill_span(int y, int x0, int x1, Rgba c);  // inclusive, pre-clipped by caller or not

 private:
  std::uint8_t* data_;
  int width_;
  int height_;
  int stride_;
};

/// Row-major RGBA8 frame; pixels().size() == width * height * 4.
class FrameBuffer {
 public:
  FrameBuffer(int width = 640, int height = 480, Rgba fill = {0, 0, 0, 255});

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<std::uint8_t>& pixels() const { return pixels_; }
  std::vector<std::uint8_t>& pixels() { return pixels_; }
  Rgba at(int x, int y) const;
  Canvas canvas() { return {pixels_.data(), width_, height_, width_}; }

  friend bool operator==(const FrameBuffer&, const FrameBuffer&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

/// Pixel (x, y) with x - cx, y - cy inside the closed disc of radius r.
void fill_disc(Canvas& c, long long cx, long long cy, int radius, Rgba color);

/// Integer line from (x0, y0) to (x1, y1), endpoints included. Along the
/// major axis step i the minor coordinate is the start plus i * d_minor /
/// d_major rounded half toward the start, i.e. the classic midpoint
/// (Bresenham) sequence. Clipping (Cohen-Sutherland on the frame rectangle)
/// only skips pixels that would fall outside; the visible ones are exactly
/// those of the unclipped line.
void draw_line(Canvas& c, long long x0, long long y0, long long x1, long long y1, Rgba color, int thickness = 1);

/// Fills the pixels whose centers lie inside a convex polygon (any winding).
void fill_convex_polygon(Canvas& c, std::span<const double> xs, std::span<const double> ys, Rgba color);

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;

/// Column bitmaps of the built-in 5x7 font (bit 0 = top row); characters
/// outside printable ASCII map to '?'.
const std::uint8_t* glyph(char ch);

/// Draws text with its top-left corner at (x, y); '\n' starts a new line.
/// Each font pixel becomes a scale x scale block.
void draw_text(Canvas& c, int x, int y, std::string_view text, Rgba color, int scale = 1);
/// Pixel width of the longest line of `text`.
int text_width(std::string_view text, int scale = 1);

/// Binary PPM (P6, RGB; alpha dropped).
std::string encode_ppm(const FrameBuffer& f);
/// Netpbm PAM (P7, RGB_ALPHA): a PPM-family header followed by exactly
/// width * height * 4 bytes, so RGBA frames survive the trip unchanged.
std::string encode_pam(const FrameBuffer& f);
/// Accepts P6 (alpha set to 255) and P7 RGB_ALPHA. Throws MalformedFile.
FrameBuffer decode_netpbm(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
/// Throws MalformedFile on characters outside the alphabet or bad padding.
std::string base64_decode(std::string_view text);

}  // namespace pegmentor
