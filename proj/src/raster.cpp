#include "pegmentor/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "pegmentor/error.hpp"

namespace pegmentor {

Canvas::Canvas(std::uint8_t* data, int width, int height, int stride_px)
    : data_(data), width_(width), height_(height), stride_(stride_px) {
  if (width < 0 || height < 0 || stride_px < width)
    throw Error(ErrorCode::InvalidArgument, "canvas stride must be at least its width");
}

Rgba Canvas::get(int x, int y) const {
  const std::uint8_t* p = data_ + (static_cast<std::size_t>(y) * stride_ + x) * 4;
  return {p[0], p[1], p[2], p[3]};
}

void Canvas::fill_span(int y, int x0, int x1, Rgba c) {
  if (y < 0 || y >= height_) return;
  x0 = std::max(x0, 0);
  x1 = std::min(x1, width_ - 1);
  for (int x = x0; x <= x1; ++x) put(x, y, c);
}

FrameBuffer::FrameBuffer(int width, int height, Rgba fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "frame dimensions must be positive");
  pixels_.resize(static_cast<std::size_t>(width) * height * 4);
  for (std::size_t i = 0; i < pixels_.size(); i += 4) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
    pixels_[i + 3] = fill.a;
  }
}

Rgba FrameBuffer::at(int x, int y) const {
  if (x < 0 || y < 0 || x >= width_ || y >= height_)
    throw Error(ErrorCode::InvalidArgument, "pixel outside frame");
  const std::uint8_t* p = pixels_.data() + (static_cast<std::size_t>(y) * width_ + x) * 4;
  return {p[0], p[1], p[2], p[3]};
}

void fill_disc(Canvas& c, long long cx, long long cy, int radius, Rgba color) {
  if (radius < 0) return;
  const long long r2 = static_cast<long long>(radius) * radius;
  for (long long dy = -radius; dy <= radius; ++dy) {
    const long long y = cy + dy;
    if (y < 0 || y >= c.height()) continue;
    long long hx = static_cast<long long>(std::sqrt(static_cast<double>(r2 - dy * dy)));
    while (hx * hx > r2 - dy * dy) --hx;
    while ((hx + 1) * (hx + 1) <= r2 - dy * dy) ++hx;
    const long long x0 = std::max<long long>(cx - hx, 0);
    const long long x1 = std::min<long long>(cx + hx, c.width() - 1);
    if (x0 > x1) continue;
    c.fill_span(static_cast<int>(y), static_cast<int>(x0), static_cast<int>(x1), color);
  }
}

namespace {

// Cohen-Sutherland outcodes.
constexpr int kInside = 0, kLeft = 1, kRight = 2, kBottom = 4, kTop = 8;

struct Rect {
  double x0, y0, x1, y1;
};

int outcode(const Rect& r, double x, double y) {
  int code = kInside;
  if (x < r.x0) code |= kLeft;
  else if (x > r.x1) code |= kRight;
  if (y < r.y0) code |= kTop;
  else if (y > r.y1) code |= kBottom;
  return code;
}

/// Clips the segment in place; false when it misses the rectangle.
bool cohen_sutherland(const Rect& r, double& ax, double& ay, double& bx, double& by) {
  int ca = outcode(r, ax, ay);
  int cb = outcode(r, bx, by);
  for (;;) {
    if (!(ca | cb)) return true;
    if (ca & cb) return false;
    const int out = ca ? ca : cb;
    double x = 0.0, y = 0.0;
    if (out & kBottom) {
      x = ax + (bx - ax) * (r.y1 - ay) / (by - ay);
      y = r.y1;
    } else if (out & kTop) {
      x = ax + (bx - ax) * (r.y0 - ay) / (by - ay);
      y = r.y0;
    } else if (out & kRight) {
      y = ay + (by - ay) * (r.x1 - ax) / (bx - ax);
      x = r.x1;
    } else {
      y = ay + (by - ay) * (r.x0 - ax) / (bx - ax);
      x = r.x0;
    }
    if (out == ca) {
      ax = x;
      ay = y;
      ca = outcode(r, ax, ay);
    } else {
      bx = x;
      by = y;
      cb = outcode(r, bx, by);
    }
  }
}

void draw_thin_line(Canvas& c, long long x0, long long y0, long long x1, long long y1, Rgba color) {
  const long long dx = x1 - x0, dy = y1 - y0;
  const bool x_major = std::llabs(dx) >= std::llabs(dy);
  const long long major_len = x_major ? std::llabs(dx) : std::llabs(dy);
  const long long minor_len = x_major ? std::llabs(dy) : std::llabs(dx);
  if (major_len == 0) {
    c.put_clipped(x0, y0, color);
    return;
  }
  const long long s_major = (x_major ? dx : dy) < 0 ? -1 : 1;
  const long long s_minor = (x_major ? dy : dx) < 0 ? -1 : 1;

  // Any in-frame pixel of the line lies within half a pixel of the ideal
  // segment, so clipping against the frame grown by half a pixel (plus a
  // one-step margin) never loses a visible pixel.
  const Rect grown{-0.5 - 1e-6, -0.5 - 1e-6, c.width() - 0.5 + 1e-6, c.height() - 0.5 + 1e-6};
  double ax = static_cast<double>(x0), ay = static_cast<double>(y0);
  double bx = static_cast<double>(x1), by = static_cast<double>(y1);
  if (!cohen_sutherland(grown, ax, ay, bx, by)) return;
  const double m0 = static_cast<double>(x_major ? x0 : y0);
  const double ia = ((x_major ? ax : ay) - m0) * static_cast<double>(s_major);
  const double ib = ((x_major ? bx : by) - m0) * static_cast<double>(s_major);
  const long long i_lo = std::max<long long>(0, static_cast<long long>(std::floor(std::min(ia, ib))) - 1);
  const long long i_hi = std::min<long long>(major_len, static_cast<long long>(std::ceil(std::max(ia, ib))) + 1);

  // Minor offset at step i is floor((2 i minor + major - 1) / (2 major)).
  const long long two_major = 2 * major_len;
  long long num = 2 * i_lo * minor_len + major_len - 1;
  long long off = num / two_major;
  long long rem = num % two_major;
  for (long long i = i_lo; i <= i_hi; ++i) {
    const long long a = (x_major ? x0 : y0) + s_major * i;
    const long long b = (x_major ? y0 : x0) + s_minor * off;
    if (x_major) c.put_clipped(a, b, color);
    else c.put_clipped(b, a, color);
    rem += 2 * minor_len;
    if (rem >= two_major) {
      rem -= two_major;
      ++off;
    }
  }
}

}  // namespace

void draw_line(Canvas& c, long long x0, long long y0, long long x1, long long y1, Rgba color, int thickness) {
  // Keeps the integer arithmetic far from overflow for wild endpoints (a
  // point just in front of the camera can project arbitrarily far away).
  constexpr double kLimit = static_cast<double>(1LL << 26);
  if (std::max({std::llabs(x0), std::llabs(y0), std::llabs(x1), std::llabs(y1)}) > (1LL << 26)) {
    double ax = static_cast<double>(x0), ay = static_cast<double>(y0);
    double bx = static_cast<double>(x1), by = static_cast<double>(y1);
    if (!cohen_sutherland({-kLimit, -kLimit, kLimit, kLimit}, ax, ay, bx, by)) return;
    x0 = std::llround(ax);
    y0 = std::llround(ay);
    x1 = std::llround(bx);
    y1 = std::llround(by);
  }
  thickness = std::max(thickness, 1);
  const bool steep = std::llabs(y1 - y0) > std::llabs(x1 - x0);
  for (int k = -(thickness - 1) / 2; k <= thickness / 2; ++k) {
    if (steep) draw_thin_line(c, x0 + k, y0, x1 + k, y1, color);
    else draw_thin_line(c, x0, y0 + k, x1, y1 + k, color);
  }
}

void fill_convex_polygon(Canvas& c, std::span<const double> xs, std::span<const double> ys, Rgba color) {
  const std::size_t n = xs.size();
  if (n < 3 || ys.size() != n) return;
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) return;
    ymin = std::min(ymin, ys[i]);
    ymax = std::max(ymax, ys[i]);
  }
  const long long row0 = std::max<long long>(0, static_cast<long long>(std::ceil(ymin)));
  const long long row1 = std::min<long long>(c.height() - 1, static_cast<long long>(std::floor(ymax)));
  for (long long y = row0; y <= row1; ++y) {
    const double fy = static_cast<double>(y);
    double xl = std::numeric_limits<double>::infinity(), xr = -xl;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = (i + 1) % n;
      const double ya = ys[i], yb = ys[k];
      if (fy < std::min(ya, yb) || fy > std::max(ya, yb)) continue;
      if (ya == yb) {
        xl = std::min({xl, xs[i], xs[k]});
        xr = std::max({xr, xs[i], xs[k]});
        continue;
      }
      const double x = xs[i] + (fy - ya) * (xs[k] - xs[i]) / (yb - ya);
      xl = std::min(xl, x);
      xr = std::max(xr, x);
    }
    if (xl > xr) continue;
    const double lo = std::max(std::ceil(xl), 0.0);
    const double hi = std::min(std::floor(xr), static_cast<double>(c.width() - 1));
    if (lo > hi) continue;
    c.fill_span(static_cast<int>(y), static_cast<int>(lo), static_cast<int>(hi), color);
  }
}

namespace {

// Printable ASCII 0x20..0x7E, five columns each, bit 0 at the top.
constexpr std::array<std::uint8_t, 95 * 5> kFont = {
    0x00, 0x00, 0x00, 0x00, 0x00,  // ' '
    0x00, 0x00, 0x5F, 0x00, 0x00,  // !
    0x00, 0x07, 0x00, 0x07, 0x00,  // "
    0x14, 0x7F, 0x14, 0x7F, 0x14,  // #
    0x24, 0x2A, 0x7F, 0x2A, 0x12,  // $
    0x23, 0x13, 0x08, 0x64, 0x62,  // %
    0x36, 0x49, 0x56, 0x20, 0x50,  // &
    0x00, 0x08, 0x07, 0x03, 0x00,  // '
    0x00, 0x1C, 0x22, 0x41, 0x00,  // (
    0x00, 0x41, 0x22, 0x1C, 0x00,  // )
    0x2A, 0x1C, 0x7F, 0x1C, 0x2A,  // *
    0x08, 0x08, 0x3E, 0x08, 0x08,  // +
    0x00, 0x50, 0x30, 0x00, 0x00,  // ,
    0x08, 0x08, 0x08, 0x08, 0x08,  // -
    0x00, 0x60, 0x60, 0x00, 0x00,  // .
    0x20, 0x10, 0x08, 0x04, 0x02,  // /
    0x3E, 0x51, 0x49, 0x45, 0x3E,  // 0
    0x00, 0x42, 0x7F, 0x40, 0x00,  // 1
    0x72, 0x49, 0x49, 0x49, 0x46,  // 2
    0x21, 0x41, 0x49, 0x4D, 0x33,  // 3
    0x18, 0x14, 0x12, 0x7F, 0x10,  // 4
    0x27, 0x45, 0x45, 0x45, 0x39,  // 5
    0x3C, 0x4A, 0x49, 0x49, 0x31,  // 6
    0x41, 0x21, 0x11, 0x09, 0x07,  // 7
    0x36, 0x49, 0x49, 0x49, 0x36,  // 8
    0x46, 0x49, 0x49, 0x29, 0x1E,  // 9
    0x00, 0x36, 0x36, 0x00, 0x00,  // :
    0x00, 0x56, 0x36, 0x00, 0x00,  // ;
    0x08, 0x14, 0x22, 0x41, 0x00,  // <
    0x14, 0x14, 0x14, 0x14, 0x14,  // =
    0x00, 0x41, 0x22, 0x14, 0x08,  // >
    0x02, 0x01, 0x59, 0x09, 0x06,  // ?
    0x3E, 0x41, 0x5D, 0x59, 0x4E,  // @
    0x7C, 0x12, 0x11, 0x12, 0x7C,  // A
    0x7F, 0x49, 0x49, 0x49, 0x36,  // B
    0x3E, 0x41, 0x41, 0x41, 0x22,  // C
    0x7F, 0x41, 0x41, 0x41, 0x3E,  // D
    0x7F, 0x49, 0x49, 0x49, 0x41,  // E
    0x7F, 0x09, 0x09, 0x09, 0x01,  // F
    0x3E, 0x41, 0x41, 0x51, 0x73,  // G
    0x7F, 0x08, 0x08, 0x08, 0x7F,  // H
    0x00, 0x41, 0x7F, 0x41, 0x00,  // I
    0x20, 0x40, 0x41, 0x3F, 0x01,  // J
    0x7F, 0x08, 0x14, 0x22, 0x41,  // K
    0x7F, 0x40, 0x40, 0x40, 0x40,  // L
    0x7F, 0x02, 0x1C, 0x02, 0x7F,  // M
    0x7F, 0x04, 0x08, 0x10, 0x7F,  // N
    0x3E, 0x41, 0x41, 0x41, 0x3E,  // O
    0x7F, 0x09, 0x09, 0x09, 0x06,  // P
    0x3E, 0x41, 0x51, 0x21, 0x5E,  // Q
    0x7F, 0x09, 0x19, 0x29, 0x46,  // R
    0x26, 0x49, 0x49, 0x49, 0x32,  // S
    0x03, 0x01, 0x7F, 0x01, 0x03,  // T
    0x3F, 0x40, 0x40, 0x40, 0x3F,  // U
    0x1F, 0x20, 0x40, 0x20, 0x1F,  // V
    0x3F, 0x40, 0x38, 0x40, 0x3F,  // W
    0x63, 0x14, 0x08, 0x14, 0x63,  // X
    0x03, 0x04, 0x78, 0x04, 0x03,  // Y
    0x61, 0x59, 0x49, 0x4D, 0x43,  // Z
    0x00, 0x7F, 0x41, 0x41, 0x41,  // [
    0x02, 0x04, 0x08, 0x10, 0x20,  // backslash
    0x41, 0x41, 0x41, 0x7F, 0x00,  // ]
    0x04, 0x02, 0x01, 0x02, 0x04,  // ^
    0x40, 0x40, 0x40, 0x40, 0x40,  // _
    0x00, 0x01, 0x02, 0x04, 0x00,  // `
    0x20, 0x54, 0x54, 0x54, 0x78,  // a
    0x7F, 0x48, 0x44, 0x44, 0x38,  // b
    0x38, 0x44, 0x44, 0x44, 0x20,  // c
    0x38, 0x44, 0x44, 0x48, 0x7F,  // d
    0x38, 0x54, 0x54, 0x54, 0x18,  // e
    0x08, 0x7E, 0x09, 0x01, 0x02,  // f
    0x0C, 0x52, 0x52, 0x52, 0x3E,  // g
    0x7F, 0x08, 0x04, 0x04, 0x78,  // h
    0x00, 0x44, 0x7D, 0x40, 0x00,  // i
    0x20, 0x40, 0x44, 0x3D, 0x00,  // j
    0x7F, 0x10, 0x28, 0x44, 0x00,  // k
    0x00, 0x41, 0x7F, 0x40, 0x00,  // l
    0x7C, 0x04, 0x18, 0x04, 0x78,  // m
    0x7C, 0x08, 0x04, 0x04, 0x78,  // n
    0x38, 0x44, 0x44, 0x44, 0x38,  // o
    0x7C, 0x14, 0x14, 0x14, 0x08,  // p
    0x08, 0x14, 0x14, 0x18, 0x7C,  // q
    0x7C, 0x08, 0x04, 0x04, 0x08,  // r
    0x48, 0x54, 0x54, 0x54, 0x20,  // s
    0x04, 0x3F, 0x44, 0x40, 0x20,  // t
    0x3C, 0x40, 0x40, 0x20, 0x7C,  // u
    0x1C, 0x20, 0x40, 0x20, 0x1C,  // v
    0x3C, 0x40, 0x30, 0x40, 0x3C,  // w
    0x44, 0x28, 0x10, 0x28, 0x44,  // x
    0x0C, 0x50, 0x50, 0x50, 0x3C,  // y
    0x44, 0x64, 0x54, 0x4C, 0x44,  // z
    0x00, 0x08, 0x36, 0x41, 0x00,  // {
    0x00, 0x00, 0x7F, 0x00, 0x00,  // |
    0x00, 0x41, 0x36, 0x08, 0x00,  // }
    0x08, 0x04, 0x08, 0x10, 0x08,  // ~
};

constexpr int kAdvance = kGlyphWidth + 1;
constexpr int kLineHeight = kGlyphHeight + 2;

}  // namespace

const std::uint8_t* glyph(char ch) {
  const int code = static_cast<unsigned char>(ch);
  const int index = (code >= 0x20 && code <= 0x7E) ? code - 0x20 : '?' - 0x20;
  return kFont.data() + index * kGlyphWidth;
}

void draw_text(Canvas& c, int x, int y, std::string_view text, Rgba color, int scale) {
  scale = std::max(scale, 1);
  int pen_x = x, pen_y = y;
  for (char ch : text) {
    if (ch == '\n') {
      pen_x = x;
      pen_y += kLineHeight * scale;
      continue;
    }
    const std::uint8_t* g = glyph(ch);
    for (int col = 0; col < kGlyphWidth; ++col) {
      for (int row = 0; row < kGlyphHeight; ++row) {
        if (!((g[col] >> row) & 1u)) continue;
        for (int sy = 0; sy < scale; ++sy)
          for (int sx = 0; sx < scale; ++sx)
            c.put_clipped(static_cast<long long>(pen_x) + col * scale + sx,
                          static_cast<long long>(pen_y) + row * scale + sy, color);
      }
    }
    pen_x += kAdvance * scale;
  }
}

int text_width(std::string_view text, int scale) {
  scale = std::max(scale, 1);
  int best = 0, current = 0;
  for (char ch : text) {
    if (ch == '\n') {
      current = 0;
      continue;
    }
    ++current;
    best = std::max(best, current);
  }
  return best == 0 ? 0 : (best * kAdvance - 1) * scale;
}

std::string encode_ppm(const FrameBuffer& f) {
  std::string out = "P6\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(f.width()) * f.height() * 3);
  const auto& px = f.pixels();
  for (std::size_t i = 0; i < px.size(); i += 4) {
    out.push_back(static_cast<char>(px[i]));
    out.push_back(static_cast<char>(px[i + 1]));
    out.push_back(static_cast<char>(px[i + 2]));
  }
  return out;
}

std::string encode_pam(const FrameBuffer& f) {
  std::string out = "P7\nWIDTH " + std::to_string(f.width()) + "\nHEIGHT " + std::to_string(f.height()) +
                    "\nDEPTH 4\nMAXVAL 255\nTUPLTYPE RGB_ALPHA\nENDHDR\n";
  out.append(reinterpret_cast<const char*>(f.pixels().data()), f.pixels().size());
  return out;
}

namespace {

[[noreturn]] void bad_image(const std::string& what) { throw Error(ErrorCode::MalformedFile, "netpbm: " + what); }

int parse_dimension(const std::string& token) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size() || v < 1 || v > (1 << 15)) bad_image("bad dimension '" + token + "'");
    return v;
  } catch (const std::logic_error&) {
    bad_image("bad dimension '" + token + "'");
  }
}

}  // namespace

FrameBuffer decode_netpbm(std::string_view bytes) {
  if (bytes.size() < 2) bad_image("truncated header");
  const std::string magic(bytes.substr(0, 2));
  std::size_t pos = 2;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) bad_image("truncated header");
    return std::string(bytes.substr(start, pos - start));
  };

  int width = 0, height = 0, depth = 0;
  if (magic == "P6") {
    width = parse_dimension(next_token());
    height = parse_dimension(next_token());
    if (next_token() != "255") bad_image("only maxval 255 is supported");
    depth = 3;
  } else if (magic == "P7") {
    std::string tupltype;
    for (;;) {
      const std::string key = next_token();
      if (key == "ENDHDR") break;
      const std::string value = next_token();
      if (key == "WIDTH") width = parse_dimension(value);
      else if (key == "HEIGHT") height = parse_dimension(value);
      else if (key == "DEPTH") depth = parse_dimension(value);
      else if (key == "MAXVAL") {
        if (value != "255") bad_image("only maxval 255 is supported");
      } else if (key == "TUPLTYPE") tupltype = value;
      else bad_image("unknown header field '" + key + "'");
    }
    if (depth != 4 || tupltype != "RGB_ALPHA") bad_image("only RGB_ALPHA PAM images are supported");
    if (width == 0 || height == 0) bad_image("missing dimensions");
  } else {
    bad_image("unsupported magic '" + magic + "'");
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) bad_image("truncated header");
  ++pos;  // single whitespace before the raster
  const std::size_t expected = static_cast<std::size_t>(width) * height * depth;
  if (bytes.size() - pos != expected)
    bad_image("expected " + std::to_string(expected) + " raster bytes, got " + std::to_string(bytes.size() - pos));
  FrameBuffer f(width, height);
  auto& px = f.pixels();
  for (std::size_t i = 0, o = 0; i < expected; i += depth, o += 4) {
    px[o] = static_cast<std::uint8_t>(bytes[pos + i]);
    px[o + 1] = static_cast<std::uint8_t>(bytes[pos + i + 1]);
    px[o + 2] = static_cast<std::uint8_t>(bytes[pos + i + 2]);
    px[o + 3] = depth == 4 ? static_cast<std::uint8_t>(bytes[pos + i + 3]) : 255;
  }
  return f;
}

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (static_cast<std::uint8_t>(bytes[i]) << 16) |
                            (static_cast<std::uint8_t>(bytes[i + 1]) << 8) | static_cast<std::uint8_t>(bytes[i + 2]);
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back(kB64[(v >> 6) & 63]);
    out.push_back(kB64[v & 63]);
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = static_cast<std::uint8_t>(bytes[i]) << 16;
    if (rest == 2) v |= static_cast<std::uint8_t>(bytes[i + 1]) << 8;
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back(rest == 2 ? kB64[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  static const std::array<int, 256> table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kB64[i])] = i;
    return t;
  }();
  if (text.size() % 4 != 0) throw Error(ErrorCode::MalformedFile, "base64 length is not a multiple of 4");
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char ch = text[i + k];
      if (ch == '=') {
        if (i + 4 != text.size() || k < 2) throw Error(ErrorCode::MalformedFile, "misplaced base64 padding");
        v[k] = 0;
        ++pad;
      } else {
        if (pad) throw Error(ErrorCode::MalformedFile, "misplaced base64 padding");
        v[k] = table[static_cast<unsigned char>(ch)];
        if (v[k] < 0) throw Error(ErrorCode::MalformedFile, "invalid base64 character");
      }
    }
    const std::uint32_t w = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<char>((w >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<char>((w >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<char>(w & 0xFF));
  }
  return out;
}

}  // namespace pegmentor
