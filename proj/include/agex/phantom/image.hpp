#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "agex/core/error.hpp"

namespace agex {

// Square grayscale image, row-major, intensities in [0,1].
class GrayImage {
 public:
  GrayImage() = default;

  explicit GrayImage(int resolution, float fill = 0.0f)
      : resolution_(resolution),
        pixels_(static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution), fill) {
    if (resolution <= 0) throw ShapeError("image resolution must be positive");
  }

  GrayImage(int resolution, std::vector<float> pixels) : resolution_(resolution), pixels_(std::move(pixels)) {
    if (resolution <= 0 ||
        pixels_.size() != static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution)) {
      throw ShapeError("pixel buffer does not match a " + std::to_string(resolution) + "^2 image");
    }
    for (float v : pixels_) {
      if (!(v >= 0.0f && v <= 1.0f)) throw DomainError("image intensities must lie in [0,1]");
    }
  }

  int resolution() const { return resolution_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  float at(int row, int col) const { return pixels_[index(row, col)]; }
  float& at(int row, int col) { return pixels_[index(row, col)]; }

  std::span<const float> pixels() const { return pixels_; }
  std::span<float> pixels() { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(resolution_) + static_cast<std::size_t>(col);
  }

  int resolution_ = 0;
  std::vector<float> pixels_;
};

// Rectangular raw intensities as they come off a detector or decoder.
struct RawImage {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // row-major, rows*cols

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

// Min-max scale to [0,1], then pad the short axis with zero borders to make
// the image square; an odd remainder goes to the trailing side. A constant
// input maps to 0.5 inside the original region.
inline GrayImage normalize_image(const RawImage& raw) {
  if (raw.rows <= 0 || raw.cols <= 0 || raw.values.size() != static_cast<std::size_t>(raw.rows) * raw.cols) {
    throw ShapeError("normalize_image needs a non-empty rows x cols array");
  }
  double lo = raw.values.front();
  double hi = lo;
  for (double v : raw.values) {
    if (!std::isfinite(v)) throw DomainError("normalize_image input contains non-finite values");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const int side = std::max(raw.rows, raw.cols);
  const int top = (side - raw.rows) / 2;
  const int left = (side - raw.cols) / 2;
  GrayImage out(side, 0.0f);
  const double range = hi - lo;
  for (int r = 0; r < raw.rows; ++r) {
    for (int c = 0; c < raw.cols; ++c) {
      double v = range > 0 ? (raw.at(r, c) - lo) / range : 0.5;
      out.at(top + r, left + c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

// Box-filter downsampling by an integer factor.
inline GrayImage downsample(const GrayImage& img, int resolution) {
  if (resolution == img.resolution()) return img;
  if (resolution <= 0 || img.resolution() % resolution != 0) {
    throw ShapeError("cannot resample " + std::to_string(img.resolution()) + "^2 to " +
                     std::to_string(resolution) + "^2 (integer downsampling only)");
  }
  const int f = img.resolution() / resolution;
  GrayImage out(resolution);
  const float inv = 1.0f / static_cast<float>(f * f);
  for (int r = 0; r < resolution; ++r) {
    for (int c = 0; c < resolution; ++c) {
      float acc = 0.0f;
      for (int dr = 0; dr < f; ++dr) {
        for (int dc = 0; dc < f; ++dc) acc += img.at(r * f + dr, c * f + dc);
      }
      out.at(r, c) = std::clamp(acc * inv, 0.0f, 1.0f);
    }
  }
  return out;
}

}  // namespace agex
