#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "aedf/tensor.hpp"

namespace aedf {

struct GrayImage {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

/// Renders a discriminator output (C x F' x T') as an image with frames as
/// rows and the stacked channel-frequency axis as columns, min-max
/// normalized. A constant representation maps to uniform mid-gray.
inline GrayImage representation_image(const Tensor& rep) {
    if (rep.rank() != 3)
        throw DimensionError(cat("representation_image: need CxF'xT', got ",
                                 shape_str(rep.shape())));
    const int c = rep.dim(0), f = rep.dim(1), t = rep.dim(2);
    float lo = rep.data()[0], hi = rep.data()[0];
    for (std::size_t i = 0; i < rep.size(); ++i) {
        lo = std::min(lo, rep.data()[i]);
        hi = std::max(hi, rep.data()[i]);
    }
    GrayImage img;
    img.rows = t;
    img.cols = c * f;
    img.pixels.resize(static_cast<std::size_t>(img.rows) * img.cols);
    const float range = hi - lo;
    for (int row = 0; row < t; ++row)
        for (int ci = 0; ci < c; ++ci)
            for (int fi = 0; fi < f; ++fi) {
                const float v = rep.data()[(static_cast<std::size_t>(ci) * f + fi) * t + row];
                const float norm = range > 0 ? (v - lo) / range : 0.5f;
                img.pixels[static_cast<std::size_t>(row) * img.cols + ci * f + fi] =
                    static_cast<std::uint8_t>(std::lround(norm * 255.0f));
            }
    return img;
}

inline void write_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(cat("cannot open '", path, "' for writing"));
    os << "P5\n" << img.cols << " " << img.rows << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
    if (!os) throw IoError(cat("write failed for '", path, "'"));
}

/// Pearson correlation of two equally sized images; 0 when either side has
/// no variance.
inline double normalized_cross_correlation(const GrayImage& a, const GrayImage& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw DimensionError("normalized_cross_correlation: image sizes differ");
    const std::size_t n = a.pixels.size();
    double mean_a = 0, mean_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += a.pixels[i];
        mean_b += b.pixels[i];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);
    double cov = 0, var_a = 0, var_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a.pixels[i] - mean_a;
        const double db = b.pixels[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a <= 0 || var_b <= 0) return 0.0;
    return cov / std::sqrt(var_a * var_b);
}

}  // namespace aedf
