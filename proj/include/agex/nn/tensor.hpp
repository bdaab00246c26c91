#pragma once

#include <cmath>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "agex/core/error.hpp"

namespace agex::nn {

// 64-byte aligned storage. Eigen picks its vectorized kernel by pointer
// alignment, so unaligned heap blocks make GEMM results vary in the last bit
// from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

using FloatBuffer = std::vector<float, AlignedAllocator<float>>;

// Dense float batch in NCHW layout. Vectors are stored as (n, c, 1, 1).
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 1;
  int w = 1;
  FloatBuffer data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_ = 1, int w_ = 1, float fill = 0.0f)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

  float* sample(int i) { return data.data() + static_cast<std::size_t>(i) * sample_size(); }
  const float* sample(int i) const { return data.data() + static_cast<std::size_t>(i) * sample_size(); }

  float& at(int i, int ch, int y = 0, int x = 0) {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }
  float at(int i, int ch, int y = 0, int x = 0) const {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

  std::string shape_str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }

  bool all_finite() const {
    for (float v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

// Stacks the given samples of `src` into a new batch.
inline Tensor gather(const Tensor& src, std::span<const int> rows) {
  Tensor out(static_cast<int>(rows.size()), src.c, src.h, src.w);
  const std::size_t s = src.sample_size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(src.sample(rows[i]), s, out.sample(static_cast<int>(i)));
  }
  return out;
}

// Concatenates two batches along n.
inline Tensor concat_batch(const Tensor& a, const Tensor& b) {
  if (a.c != b.c || a.h != b.h || a.w != b.w) throw ShapeError("concat_batch shape mismatch");
  Tensor out(a.n + b.n, a.c, a.h, a.w);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

// Splits a batch at sample index `at`.
inline std::pair<Tensor, Tensor> split_batch(const Tensor& t, int at) {
  Tensor a(at, t.c, t.h, t.w);
  Tensor b(t.n - at, t.c, t.h, t.w);
  std::copy_n(t.data.begin(), a.size(), a.data.begin());
  std::copy(t.data.begin() + static_cast<std::ptrdiff_t>(a.size()), t.data.end(), b.data.begin());
  return {std::move(a), std::move(b)};
}

// Concatenates two (n, c) feature batches along channels.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n != b.n || a.h != 1 || a.w != 1 || b.h != 1 || b.w != 1) throw ShapeError("concat_channels needs vectors");
  Tensor out(a.n, a.c + b.c);
  for (int i = 0; i < a.n; ++i) {
    std::copy_n(a.sample(i), a.c, out.sample(i));
    std::copy_n(b.sample(i), b.c, out.sample(i) + a.c);
  }
  return out;
}

inline std::pair<Tensor, Tensor> split_channels(const Tensor& t, int at) {
  Tensor a(t.n, at);
  Tensor b(t.n, t.c - at);
  for (int i = 0; i < t.n; ++i) {
    std::copy_n(t.sample(i), at, a.sample(i));
    std::copy_n(t.sample(i) + at, t.c - at, b.sample(i));
  }
  return {std::move(a), std::move(b)};
}

}  // namespace agex::nn
