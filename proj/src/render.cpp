#include "mvbf/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace mvbf {

std::size_t SilhouetteMask::count() const {
  std::size_t n = 0;
  for (const auto b : bits) n += b != 0;
  return n;
}

RasterResult rasterize(const Points& vertices, const Faces& faces,
                       const Camera& camera, int width, int height) {
  if (width <= 0 || height <= 0)
    throw InputError("rasterize: resolution must be positive");
  const double sx = static_cast<double>(width) / camera.width;
  const double sy = static_cast<double>(height) / camera.height;
  const double fx = camera.fx * sx, fy = camera.fy * sy;
  const double cx = camera.cx * sx, cy = camera.cy * sy;

  RasterResult out;
  out.depth.width = out.mask.width = width;
  out.depth.height = out.mask.height = height;
  out.depth.depth.assign(static_cast<std::size_t>(width) * height,
                         std::numeric_limits<float>::infinity());
  out.mask.bits.assign(static_cast<std::size_t>(width) * height, 0);

  const int V = static_cast<int>(vertices.rows());
  std::vector<double> u(V), v(V), z(V);
  for (int i = 0; i < V; ++i) {
    const Vec3 cam = camera.rotation * Vec3(vertices.row(i)) + camera.translation;
    z[i] = cam.z();
    if (cam.z() > 1e-9) {
      u[i] = fx * (cam.x() / cam.z()) + cx;
      v[i] = fy * (cam.y() / cam.z()) + cy;
    } else {
      u[i] = v[i] = 0;
    }
  }

  for (int f = 0; f < static_cast<int>(faces.rows()); ++f) {
    const std::uint32_t i0 = faces(f, 0), i1 = faces(f, 1), i2 = faces(f, 2);
    if (z[i0] <= 1e-9 || z[i1] <= 1e-9 || z[i2] <= 1e-9) continue;
    const double x0 = u[i0], y0 = v[i0], x1 = u[i1], y1 = v[i1], x2 = u[i2], y2 = v[i2];

    const double area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    if (area == 0.0) continue;

    const int min_x = std::max(0, static_cast<int>(std::floor(std::min({x0, x1, x2}) - 0.5)));
    const int max_x = std::min(width - 1, static_cast<int>(std::ceil(std::max({x0, x1, x2}) - 0.5)));
    const int min_y = std::max(0, static_cast<int>(std::floor(std::min({y0, y1, y2}) - 0.5)));
    const int max_y = std::min(height - 1, static_cast<int>(std::ceil(std::max({y0, y1, y2}) - 0.5)));
    if (min_x > max_x || min_y > max_y) continue;

    const double inv_area = 1.0 / area;
    const double iz0 = 1.0 / z[i0], iz1 = 1.0 / z[i1], iz2 = 1.0 / z[i2];

    for (int py = min_y; py <= max_y; ++py) {
      const double yc = py + 0.5;
      for (int px = min_x; px <= max_x; ++px) {
        const double xc = px + 0.5;
        // Signed edge functions; same sign as the full area means inside.
        const double w0 = (x1 - xc) * (y2 - yc) - (x2 - xc) * (y1 - yc);
        const double w1 = (x2 - xc) * (y0 - yc) - (x0 - xc) * (y2 - yc);
        const double w2 = (x0 - xc) * (y1 - yc) - (x1 - xc) * (y0 - yc);
        const bool inside = area > 0 ? (w0 >= 0 && w1 >= 0 && w2 >= 0)
                                     : (w0 <= 0 && w1 <= 0 && w2 <= 0);
        if (!inside) continue;
        const double b0 = w0 * inv_area, b1 = w1 * inv_area, b2 = w2 * inv_area;
        // Perspective-correct depth from screen-space barycentrics.
        const double inv_z = b0 * iz0 + b1 * iz1 + b2 * iz2;
        const float depth = static_cast<float>(1.0 / inv_z);
        const std::size_t idx = static_cast<std::size_t>(py) * width + px;
        if (depth < out.depth.depth[idx]) {
          out.depth.depth[idx] = depth;
          out.mask.bits[idx] = 1;
        }
      }
    }
  }
  return out;
}

std::vector<bool> vertex_visibility(const Points& vertices, const Camera& camera,
                                    const DepthMap& depthmap, double eps) {
  const double sx = static_cast<double>(depthmap.width) / camera.width;
  const double sy = static_cast<double>(depthmap.height) / camera.height;
  const int V = static_cast<int>(vertices.rows());
  std::vector<bool> visible(V, false);
  for (int i = 0; i < V; ++i) {
    const auto proj = project(camera, vertices.row(i));
    if (!proj) continue;
    const double px = proj->pixel.x() * sx;
    const double py = proj->pixel.y() * sy;
    const int x = static_cast<int>(std::floor(px));
    const int y = static_cast<int>(std::floor(py));
    if (x < 0 || y < 0 || x >= depthmap.width || y >= depthmap.height) continue;
    visible[i] = proj->depth <= static_cast<double>(depthmap.at(x, y)) + eps;
  }
  return visible;
}

double silhouette_iou(const SilhouetteMask& a, const SilhouetteMask& b) {
  if (a.width != b.width || a.height != b.height)
    throw InputError("silhouette_iou: mask dimensions differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    const bool pa = a.bits[i] != 0, pb = b.bits[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

void save_mask_pgm(const SilhouetteMask& mask, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write mask: " + path);
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<std::uint8_t> row(mask.bits.size());
  for (std::size_t i = 0; i < mask.bits.size(); ++i) row[i] = mask.bits[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
}

void save_depth_raw(const DepthMap& depth, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write depth map: " + path);
  const char magic[4] = {'D', 'P', 'T', 'H'};
  const std::uint32_t header[3] = {static_cast<std::uint32_t>(depth.width),
                                   static_cast<std::uint32_t>(depth.height), 0};
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(header), 12);
  out.write(reinterpret_cast<const char*>(depth.depth.data()),
            static_cast<std::streamsize>(depth.depth.size() * sizeof(float)));
}

DepthMap load_depth_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open depth map: " + path);
  char magic[4];
  std::uint32_t header[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(header), 12);
  if (!in || std::memcmp(magic, "DPTH", 4) != 0)
    throw InputError(path + ": not a DPTH depth map");
  DepthMap d;
  d.width = static_cast<int>(header[0]);
  d.height = static_cast<int>(header[1]);
  d.depth.resize(static_cast<std::size_t>(d.width) * d.height);
  in.read(reinterpret_cast<char*>(d.depth.data()),
          static_cast<std::streamsize>(d.depth.size() * sizeof(float)));
  if (!in) throw InputError(path + ": truncated depth map");
  return d;
}

}  // namespace mvbf
