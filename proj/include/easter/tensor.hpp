#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace easter {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor of 32-bit reals.
///
/// The element count always equals the product of the extents; every
/// constructor and reshape enforces this.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    float* raw() { return data_.data(); }
    const float* raw() const { return data_.data(); }
    std::vector<float>& storage() { return data_; }
    const std::vector<float>& storage() const { return data_; }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    float& at(std::initializer_list<std::size_t> index);
    float at(std::initializer_list<std::size_t> index) const;

    Tensor reshaped(Shape shape) const&;
    Tensor reshaped(Shape shape) &&;

    void fill(float value);
    /// this += other, elementwise; shapes must match.
    Tensor& add_(const Tensor& other);
    Tensor& scale_(float factor);

    bool all_finite() const;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    std::size_t offset(std::initializer_list<std::size_t> index) const;

    Shape shape_;
    std::vector<float> data_;
};

/// Throws ContractViolation when shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// Debug-build guard on the finiteness invariant.
#ifndef NDEBUG
void debug_check_finite(const Tensor& t, const char* where);
#define EASTER_CHECK_FINITE(t, where) ::easter::debug_check_finite((t), (where))
#else
#define EASTER_CHECK_FINITE(t, where) ((void)0)
#endif

}  // namespace easter
