#include "analogy/rpm_render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace analogy::rpm {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kOutlineHalfWidth = 0.6;  // pixels

struct Point {
  double x, y;
};

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

int polygon_sides(int shape) {
  switch (shape) {
    case triangle: return 3;
    case square: return 4;
    case pentagon: return 5;
    case hexagon: return 6;
    default: return 0;  // circle
  }
}

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

// Where a pixel centre falls relative to one shape.
enum class Region { outside, outline, interior };

Region classify(Point p, Point centre, double radius, int shape) {
  const int sides = polygon_sides(shape);
  if (sides == 0) {
    const double r = std::hypot(p.x - centre.x, p.y - centre.y);
    if (std::abs(r - radius) <= kOutlineHalfWidth) return Region::outline;
    return r < radius ? Region::interior : Region::outside;
  }
  std::vector<Point> v(sides);
  // Pointing up; squares get a flat top.
  const double phase = -kPi / 2 + (sides == 4 ? kPi / 4 : 0.0);
  for (int i = 0; i < sides; ++i) {
    const double a = phase + 2 * kPi * i / sides;
    v[i] = {centre.x + radius * std::cos(a), centre.y + radius * std::sin(a)};
  }
  double edge = 1e300;
  bool inside = true;
  for (int i = 0; i < sides; ++i) {
    const Point a = v[i], b = v[(i + 1) % sides];
    edge = std::min(edge, segment_distance(p, a, b));
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (cross < 0) inside = false;
  }
  if (edge <= kOutlineHalfWidth) return Region::outline;
  return inside ? Region::interior : Region::outside;
}

}  // namespace

double fill_intensity(int color, int color_levels) {
  if (color_levels <= 1) return 0.0;
  return quantize(static_cast<double>(color) / (color_levels - 1));
}

Raster render_raster(const Panel& panel, Config config, int height, int width) {
  if (height < 8 || width < 8) {
    throw std::invalid_argument("raster resolution must be at least 8x8");
  }
  Raster r{height, width, std::vector<double>(static_cast<std::size_t>(height) * width, 0.0)};
  const int side = grid_side(config);
  const double cell_w = static_cast<double>(width) / side;
  const double cell_h = static_cast<double>(height) / side;
  for (const Entity& e : panel.entities) {
    const int row = e.position / side, col = e.position % side;
    const Point centre{(col + 0.5) * cell_w, (row + 0.5) * cell_h};
    const double radius = 0.5 * std::min(cell_w, cell_h) * (0.4 + 0.1 * e.size);
    const double fill = fill_intensity(e.color);
    const int y0 = std::max(0, static_cast<int>(row * cell_h));
    const int y1 = std::min(height, static_cast<int>(std::ceil((row + 1) * cell_h)));
    const int x0 = std::max(0, static_cast<int>(col * cell_w));
    const int x1 = std::min(width, static_cast<int>(std::ceil((col + 1) * cell_w)));
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const Region region = classify({x + 0.5, y + 0.5}, centre, radius, e.type);
        double& px = r.pixels[static_cast<std::size_t>(y) * width + x];
        if (region == Region::outline) px = 1.0;
        else if (region == Region::interior) px = fill;
      }
    }
  }
  return r;
}

}  // namespace analogy::rpm
