#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dtu::nn {

struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
           static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  bool operator==(const Shape& o) const = default;
};

// Dense NCHW tensor; scalars live in shape {1,1,1,1}.
template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{0}) : shape(s), data(s.numel(), fill) {}

  T& operator()(int n, int c, int y, int x) {
    return data[static_cast<std::size_t>(((n * shape.c + c) * shape.h + y) * shape.w + x)];
  }
  T operator()(int n, int c, int y, int x) const {
    return data[static_cast<std::size_t>(((n * shape.c + c) * shape.h + y) * shape.w + x)];
  }

  T* plane(int n, int c) {
    return data.data() + static_cast<std::size_t>(n * shape.c + c) * shape.h * shape.w;
  }
  const T* plane(int n, int c) const {
    return data.data() + static_cast<std::size_t>(n * shape.c + c) * shape.h * shape.w;
  }

  T scalar() const {
    if (shape.numel() != 1) throw std::logic_error("Tensor::scalar on non-scalar tensor");
    return data[0];
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

}  // namespace dtu::nn
