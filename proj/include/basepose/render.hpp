#pragma once

#include <string>
#include <vector>

#include "basepose/scene.hpp"
#include "basepose/transporter.hpp"

namespace basepose {

// P6 renders: trivially byte-testable, no codec dependency.
struct Image {
    int w = 0;
    int h = 0;
    std::vector<uint8_t> rgb;  // 3 bytes per pixel, row-major

    void set(int u, int v, uint8_t r, uint8_t g, uint8_t b) {
        if (u < 0 || u >= w || v < 0 || v >= h) return;
        const size_t i = 3 * (static_cast<size_t>(v) * w + u);
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    }
};

std::string to_p6(const Image& img);

// Deterministic palette mapping of a [H, W] tensor of values in [0, 1];
// out-of-range values are clamped and counted in *clamped.
Image render_heatmap(const TensorF& map, int* clamped = nullptr);

// Semantic composite with the object/robot drawn; candidate arrows have their
// tail at the base-pose cell (the robot center placement).
Image render_scene(const OrthoProjection& proj);
void draw_arrow(Image& img, int u, int v, double theta, int len_px, uint8_t r, uint8_t g,
                uint8_t b);
void draw_path(Image& img, const std::vector<GridPose>& cells, uint8_t r, uint8_t g, uint8_t b);

}  // namespace basepose
