#pragma once

#include <string>
#include <vector>

#include "mvbf/camera.hpp"
#include "mvbf/types.hpp"

namespace mvbf {

struct DepthMap {
  int width = 0, height = 0;
  std::vector<float> depth;  // row-major, +inf where empty

  float at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
};

struct SilhouetteMask {
  int width = 0, height = 0;
  std::vector<std::uint8_t> bits;  // row-major, 1 = inside

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t count() const;
};

struct RasterResult {
  DepthMap depth;
  SilhouetteMask mask;
};

// Z-buffered software rasterizer. Pixel centers sample at (x+0.5, y+0.5),
// origin top-left; depth is camera-space z interpolated perspective-correctly;
// faces are not back-face culled. Faces with any vertex at or behind the
// camera plane are skipped. If resolution differs from the camera's, the
// intrinsics are scaled accordingly.
RasterResult rasterize(const Points& vertices, const Faces& faces,
                       const Camera& camera, int width, int height);

inline RasterResult rasterize(const Points& vertices, const Faces& faces,
                              const Camera& camera) {
  return rasterize(vertices, faces, camera, camera.width, camera.height);
}

// Vertex visible iff it projects inside the image and its camera depth is
// within eps of the depth buffer at its pixel.
std::vector<bool> vertex_visibility(const Points& vertices, const Camera& camera,
                                    const DepthMap& depthmap, double eps);

// |a AND b| / |a OR b|; 1 when both masks are empty.
double silhouette_iou(const SilhouetteMask& a, const SilhouetteMask& b);

// P5 PGM, 255 = inside.
void save_mask_pgm(const SilhouetteMask& mask, const std::string& path);
// Raw little-endian f32 with 16-byte header: "DPTH", u32 width, u32 height,
// u32 reserved.
void save_depth_raw(const DepthMap& depth, const std::string& path);
DepthMap load_depth_raw(const std::string& path);

}  // namespace mvbf
