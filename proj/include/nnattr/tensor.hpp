#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nnattr/errors.hpp"

namespace nnattr {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                           std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

/// Dense N-dimensional array, flat row-major storage.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;

    explicit Tensor(Shape s) : shape(std::move(s)) {
        for (auto d : shape) {
            if (d <= 0) throw ShapeError("tensor dimension must be positive, got shape " + shape_str(shape));
        }
        data.assign(static_cast<std::size_t>(numel(shape)), T{0});
    }

    Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
        if (static_cast<std::int64_t>(data.size()) != numel(shape)) {
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        }
    }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }

    T& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    /// Flat offset of a multi-index (row-major).
    std::int64_t offset(std::initializer_list<std::int64_t> idx) const {
        std::int64_t off = 0;
        std::size_t k = 0;
        for (auto i : idx) {
            off = off * shape[k] + i;
            ++k;
        }
        return off;
    }

    T at(std::initializer_list<std::int64_t> idx) const { return data[static_cast<std::size_t>(offset(idx))]; }
    T& at(std::initializer_list<std::int64_t> idx) { return data[static_cast<std::size_t>(offset(idx))]; }

    Tensor<T> reshaped(Shape new_shape) const {
        if (numel(new_shape) != size()) {
            throw ShapeError("cannot reshape " + shape_str(shape) + " to " + shape_str(new_shape));
        }
        return Tensor<T>(std::move(new_shape), data);
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

    bool all_finite() const {
        for (const T& v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }
};

template <typename T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
    return a.shape == b.shape;
}

template <typename T>
void require_shape(const Tensor<T>& t, const Shape& expect, const std::string& what) {
    if (t.shape != expect) {
        throw ShapeError(what + ": expected shape " + shape_str(expect) + ", got " + shape_str(t.shape));
    }
}

} // namespace nnattr
