#include "muce/tensor.hpp"

#include <cmath>

#include "muce/errors.hpp"

namespace muce::num {

int64_t shape_size(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) {
        if (d <= 0) throw DimensionError("non-positive extent in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor Tensor::zeros(Shape s) {
    Tensor t;
    int64_t n = shape_size(s);
    t.shape = std::move(s);
    t.v.assign(size_t(n), 0.0);
    return t;
}

Tensor Tensor::full(Shape s, double value) {
    Tensor t = zeros(std::move(s));
    for (auto& x : t.v) x = value;
    return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from(Shape s, std::vector<double> values) {
    if (shape_size(s) != int64_t(values.size()))
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(s));
    Tensor t;
    t.shape = std::move(s);
    t.v = std::move(values);
    return t;
}

bool Tensor::all_finite() const {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

double Tensor::item() const {
    if (v.size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape));
    return v[0];
}

}  // namespace muce::num
