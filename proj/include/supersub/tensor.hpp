#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace supersub {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_elements(const Shape& shape);

// Dense row-major float32 array. The only numeric carrier in the library.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<float> values);
    static Tensor vector(std::initializer_list<float> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    const std::vector<float>& values() const noexcept { return data_; }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }
    float& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    float at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    bool all_finite() const noexcept;

    // Bit-exact comparison: shapes equal and every float has the same bit pattern.
    bool bit_equal(const Tensor& other) const noexcept;

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Shape shape_;
    std::vector<float> data_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
double cross_entropy(const Tensor& probs, std::span<const std::size_t> labels);

// Rounds every element to the nearest binary16 value (ties to even) and widens back.
Tensor f16_round(const Tensor& x);

inline constexpr double kCrossEntropyEpsilon = 1e-12;

namespace kernels {

// c[m x n] = a[m x k] * b[k x n]; accumulation over t in ascending order.
template <typename T>
void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
            std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            T acc = T(0);
            for (std::size_t t = 0; t < k; ++t) acc += a[i * k + t] * b[t * n + j];
            c[i * n + j] = acc;
        }
    }
}

// c[m x n] = a[m x k] * transpose(b[n x k]); same accumulation order as matmul.
template <typename T>
void matmul_bt(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
               std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            T acc = T(0);
            for (std::size_t t = 0; t < k; ++t) acc += a[i * k + t] * b[j * k + t];
            c[i * n + j] = acc;
        }
    }
}

// c[k x n] = transpose(a[m x k]) * b[m x n]; accumulation over rows in ascending order.
template <typename T>
void matmul_at(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m, std::size_t k,
               std::size_t n) {
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            T acc = T(0);
            for (std::size_t r = 0; r < m; ++r) acc += a[r * k + i] * b[r * n + j];
            c[i * n + j] = acc;
        }
    }
}

// Row-wise softmax with per-row max subtraction.
template <typename T>
void softmax_rows(std::span<const T> logits, std::span<T> probs, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const auto row = logits.subspan(i * n, n);
        T peak = row[0];
        for (std::size_t j = 1; j < n; ++j) peak = row[j] > peak ? row[j] : peak;
        T total = T(0);
        for (std::size_t j = 0; j < n; ++j) {
            probs[i * n + j] = std::exp(row[j] - peak);
            total += probs[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= total;
    }
}

}  // namespace kernels

}  // namespace supersub
