#include "basepose/render.hpp"

#include <algorithm>
#include <cmath>

namespace basepose {

std::string to_p6(const Image& img) {
    std::string out = "P6\n" + std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
    out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
    return out;
}

Image render_heatmap(const TensorF& map, int* clamped) {
    assert(map.ndim() == 2);
    Image img;
    img.h = map.dim(0);
    img.w = map.dim(1);
    img.rgb.assign(static_cast<size_t>(img.w) * img.h * 3, 0);
    int clamp_count = 0;
    for (int v = 0; v < img.h; ++v)
        for (int u = 0; u < img.w; ++u) {
            float x = map[static_cast<int64_t>(v) * img.w + u];
            if (x < 0.0f || x > 1.0f) {
                ++clamp_count;
                x = std::clamp(x, 0.0f, 1.0f);
            }
            // dark blue -> yellow -> red ramp
            uint8_t r, g, b;
            if (x < 0.5f) {
                const float t = x * 2.0f;
                r = static_cast<uint8_t>(20 + 235 * t);
                g = static_cast<uint8_t>(30 + 225 * t);
                b = static_cast<uint8_t>(90 * (1.0f - t) + 40 * t);
            } else {
                const float t = (x - 0.5f) * 2.0f;
                r = 255;
                g = static_cast<uint8_t>(255 * (1.0f - t));
                b = static_cast<uint8_t>(40 * (1.0f - t));
            }
            img.set(u, v, r, g, b);
        }
    if (clamped) *clamped = clamp_count;
    return img;
}

Image render_scene(const OrthoProjection& proj) {
    Image img;
    img.w = img.h = proj.hw;
    img.rgb.assign(static_cast<size_t>(img.w) * img.h * 3, 0);
    for (int v = 0; v < proj.hw; ++v)
        for (int u = 0; u < proj.hw; ++u) {
            switch (proj.semantic_class(u, v)) {
                case kSemFree: img.set(u, v, 235, 235, 235); break;
                case kSemTable: img.set(u, v, 168, 125, 66); break;
                case kSemObstacle: img.set(u, v, 70, 70, 70); break;
                case kSemObject: img.set(u, v, 46, 200, 60); break;
                case kSemRobot: img.set(u, v, 60, 90, 220); break;
            }
        }
    return img;
}

void draw_arrow(Image& img, int u, int v, double theta, int len_px, uint8_t r, uint8_t g,
                uint8_t b) {
    // tail at (u, v): the cell is the robot-center placement
    const double dx = std::cos(theta), dy = std::sin(theta);
    int tu = u, tv = v;
    for (int i = 0; i <= len_px; ++i) {
        tu = u + static_cast<int>(std::lround(dx * i));
        tv = v + static_cast<int>(std::lround(dy * i));
        img.set(tu, tv, r, g, b);
    }
    // simple head: orthogonal ticks at the tip
    img.set(tu + static_cast<int>(std::lround(-dy)), tv + static_cast<int>(std::lround(dx)), r, g, b);
    img.set(tu - static_cast<int>(std::lround(-dy)), tv - static_cast<int>(std::lround(dx)), r, g, b);
}

void draw_path(Image& img, const std::vector<GridPose>& cells, uint8_t r, uint8_t g, uint8_t b) {
    for (const auto& c : cells) img.set(c.u, c.v, r, g, b);
}

}  // namespace basepose
