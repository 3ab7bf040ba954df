#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vfr::nn {

/// NCHW extents. Scalars are 1x1x1x1.
struct Shape {
    int n = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    std::size_t numel() const noexcept { return static_cast<std::size_t>(n) * c * h * w; }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
    std::string str() const;
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense double-precision NCHW array.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), values_(shape.numel(), fill) {}
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor(Shape{}, v); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t numel() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(int n, int c, int y, int x) { return values_[offset(n, c, y, x)]; }
    double operator()(int n, int c, int y, int x) const { return values_[offset(n, c, y, x)]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    double* plane(int n, int c) { return values_.data() + offset(n, c, 0, 0); }
    const double* plane(int n, int c) const { return values_.data() + offset(n, c, 0, 0); }

    std::span<double> data() noexcept { return values_; }
    std::span<const double> data() const noexcept { return values_; }
    std::vector<double>& storage() noexcept { return values_; }

    double item() const;
    bool all_finite() const;
    void fill(double v);

    friend bool operator==(const Tensor&, const Tensor&) = default;

  private:
    std::size_t offset(int n, int c, int y, int x) const noexcept {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    Shape shape_{0, 0, 0, 0};
    std::vector<double> values_;
};

}  // namespace vfr::nn
