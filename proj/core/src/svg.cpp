#include "cpabf/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace cpabf {

namespace {

constexpr int kCanvas = 720;
constexpr double kPad = 0.05;

struct Mapper {
  double x0, y0, scale;

  static Mapper fit(const Triangulation& tri) {
    Eigen::Vector2d lo = tri.vertex(0), hi = tri.vertex(0);
    for (const auto& p : tri.vertices()) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double span = std::max({(hi - lo).x(), (hi - lo).y(), 1e-12});
    Mapper m;
    m.scale = kCanvas * (1.0 - 2.0 * kPad) / span;
    m.x0 = lo.x() - kPad * kCanvas / m.scale;
    m.y0 = hi.y() + kPad * kCanvas / m.scale;
    return m;
  }
  // SVG y grows downward; flip so plots read like the plane.
  double px(double x) const { return (x - x0) * scale; }
  double py(double y) const { return (y0 - y) * scale; }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::ofstream open_svg(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kCanvas
    << "\" height=\"" << kCanvas << "\" viewBox=\"0 0 " << kCanvas << ' '
    << kCanvas << "\">\n";
  return f;
}

void mesh_edges(std::ofstream& f, const Triangulation& tri, const Mapper& m,
                const std::string& stroke) {
  f << "<g fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"0.5\">\n";
  for (int i = 0; i < tri.num_simplices(); ++i) {
    const Simplex& s = tri.simplex(i);
    f << "<path d=\"M" << fmt(m.px(tri.vertex(s[0]).x())) << ' '
      << fmt(m.py(tri.vertex(s[0]).y())) << " L"
      << fmt(m.px(tri.vertex(s[1]).x())) << ' '
      << fmt(m.py(tri.vertex(s[1]).y())) << " L"
      << fmt(m.px(tri.vertex(s[2]).x())) << ' '
      << fmt(m.py(tri.vertex(s[2]).y())) << " Z\"/>\n";
  }
  f << "</g>\n";
}

}  // namespace

void write_safe_set_svg(const std::string& path, const Triangulation& tri,
                        const std::vector<Segment>& boundary) {
  const Mapper m = Mapper::fit(tri);
  auto f = open_svg(path);
  mesh_edges(f, tri, m, "#cccccc");
  f << "<g fill=\"none\" stroke=\"#1f77d0\" stroke-width=\"2\" "
       "stroke-linecap=\"round\">\n";
  for (const auto& seg : boundary) {
    f << "<line x1=\"" << fmt(m.px(seg.a.x())) << "\" y1=\""
      << fmt(m.py(seg.a.y())) << "\" x2=\"" << fmt(m.px(seg.b.x()))
      << "\" y2=\"" << fmt(m.py(seg.b.y())) << "\"/>\n";
  }
  f << "</g>\n</svg>\n";
}

void write_gamma_heatmap_svg(const std::string& path, const Triangulation& tri,
                             const Eigen::VectorXd& gamma) {
  if (gamma.size() != tri.num_simplices())
    throw DimensionMismatch("heatmap: one gamma per simplex");
  const Mapper m = Mapper::fit(tri);
  const double lo = gamma.minCoeff();
  const double hi = gamma.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;

  auto f = open_svg(path);
  f << "<g stroke=\"none\">\n";
  for (int i = 0; i < tri.num_simplices(); ++i) {
    const Simplex& s = tri.simplex(i);
    const double t = (gamma[i] - lo) / span;
    const int c = static_cast<int>(std::lround(255.0 * t));
    char color[8];
    std::snprintf(color, sizeof(color), "#%02x%02x00", c, c);
    f << "<path fill=\"" << color << "\" d=\"M"
      << fmt(m.px(tri.vertex(s[0]).x())) << ' ' << fmt(m.py(tri.vertex(s[0]).y()))
      << " L" << fmt(m.px(tri.vertex(s[1]).x())) << ' '
      << fmt(m.py(tri.vertex(s[1]).y())) << " L"
      << fmt(m.px(tri.vertex(s[2]).x())) << ' '
      << fmt(m.py(tri.vertex(s[2]).y())) << " Z\"/>\n";
  }
  f << "</g>\n</svg>\n";
}

}  // namespace cpabf
