#include "supersub/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "supersub/error.hpp"
#include "supersub/half.hpp"

namespace supersub {

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

std::size_t shape_elements(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)), data_(shape_elements(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_elements(shape_)) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_string(shape_));
    }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<float> values) {
    return Tensor({rows, cols}, std::vector<float>(values));
}

Tensor Tensor::vector(std::initializer_list<float> values) {
    return Tensor({values.size()}, std::vector<float>(values));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_string(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_string(shape_));
    return shape_[1];
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

bool Tensor::bit_equal(const Tensor& other) const noexcept {
    return shape_ == other.shape_ &&
           (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw DimensionError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor c({m, n});
    kernels::matmul<float>(a.data(), b.data(), c.data(), m, k, n);
    return c;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (float& v : y.data()) v = v > 0.0f ? v : 0.0f;
    return y;
}

Tensor softmax_rows(const Tensor& x) {
    const std::size_t m = x.rows(), n = x.cols();
    if (n == 0) throw DimensionError("softmax_rows: need at least one column");
    Tensor y({m, n});
    kernels::softmax_rows<float>(x.data(), y.data(), m, n);
    return y;
}

double cross_entropy(const Tensor& probs, std::span<const std::size_t> labels) {
    const std::size_t m = probs.rows(), n = probs.cols();
    if (labels.size() != m) {
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(m) + " rows");
    }
    if (m == 0) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (labels[i] >= n) {
            throw IndexError("cross_entropy: label " + std::to_string(labels[i]) + " out of range for " +
                             std::to_string(n) + " classes");
        }
        total += std::log(static_cast<double>(probs.at(i, labels[i])) + kCrossEntropyEpsilon);
    }
    return -total / static_cast<double>(m);
}

Tensor f16_round(const Tensor& x) {
    Tensor y = x;
    for (float& v : y.data()) {
        const float r = half::round_trip(v);
        if (!std::isfinite(r)) {
            throw OverflowError("f16_round: value " + std::to_string(v) + " exceeds the binary16 range");
        }
        v = r;
    }
    return y;
}

}  // namespace supersub
