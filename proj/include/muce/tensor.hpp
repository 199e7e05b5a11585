#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace muce::num {

using Shape = std::vector<int64_t>;

int64_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major tensor of doubles. All arithmetic in the repository is done
// in double precision.
struct Tensor {
    Shape shape;
    std::vector<double> v;

    Tensor() = default;

    static Tensor zeros(Shape s);
    static Tensor full(Shape s, double value);
    static Tensor scalar(double value);
    static Tensor from(Shape s, std::vector<double> values);

    int64_t size() const { return int64_t(v.size()); }
    int64_t dim(size_t i) const { return shape.at(i); }
    int rank() const { return int(shape.size()); }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    double item() const;  // value of a size-1 tensor
};

}  // namespace muce::num
