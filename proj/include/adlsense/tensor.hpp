#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "adlsense/error.hpp"

namespace adlsense {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << " x ";
        out << shape[i];
    }
    out << ']';
    return out.str();
}

inline std::size_t shape_volume(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

// Dense row-major tensor. Rank is dynamic; element access goes through
// at(...) with one index per dimension.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{})
        : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {
        compute_strides();
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_volume(shape_)) {
            throw ShapeError("tensor data has " + std::to_string(data_.size()) +
                             " elements, shape " + shape_string(shape_) + " needs " +
                             std::to_string(shape_volume(shape_)));
        }
        compute_strides();
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    template <typename... Idx>
    T& at(Idx... idx) noexcept {
        return data_[offset(idx...)];
    }

    template <typename... Idx>
    const T& at(Idx... idx) const noexcept {
        return data_[offset(idx...)];
    }

    T& operator[](std::size_t flat) noexcept { return data_[flat]; }
    const T& operator[](std::size_t flat) const noexcept { return data_[flat]; }

    bool has_shape(const Shape& expected) const { return shape_ == expected; }

    void require_shape(const Shape& expected, const std::string& what) const {
        if (shape_ != expected) {
            throw ShapeError(what + ": expected shape " + shape_string(expected) + ", found " +
                             shape_string(shape_));
        }
    }

    T sum() const { return std::accumulate(data_.begin(), data_.end(), T{}); }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        std::transform(data_.begin(), data_.end(), out.begin(),
                       [](T v) { return static_cast<U>(v); });
        return Tensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void compute_strides() {
        strides_.assign(shape_.size(), 1);
        for (std::size_t i = shape_.size(); i-- > 1;) strides_[i - 1] = strides_[i] * shape_[i];
    }

    template <typename... Idx>
    std::size_t offset(Idx... idx) const noexcept {
        const std::size_t indices[] = {static_cast<std::size_t>(idx)...};
        std::size_t flat = 0;
        for (std::size_t i = 0; i < sizeof...(Idx); ++i) flat += indices[i] * strides_[i];
        return flat;
    }

    Shape shape_;
    std::vector<std::size_t> strides_;
    std::vector<T> data_;
};

}  // namespace adlsense
