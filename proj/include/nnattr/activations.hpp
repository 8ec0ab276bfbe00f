#pragma once

#include <cmath>
#include <string>

#include "nnattr/errors.hpp"
#include "nnattr/tensor.hpp"

namespace nnattr {

enum class Activation { Linear, Relu, Tanh, Sigmoid, Softmax };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softmax: return "softmax";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "linear") return Activation::Linear;
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "softmax") return Activation::Softmax;
    throw ParseError("unknown activation \"" + s + "\"");
}

template <typename T>
T activate_scalar(Activation a, T z) {
    switch (a) {
        case Activation::Linear: return z;
        case Activation::Relu: return z > T(0) ? z : T(0);
        case Activation::Tanh: return std::tanh(z);
        case Activation::Sigmoid: return T(1) / (T(1) + std::exp(-z));
        case Activation::Softmax: break;
    }
    throw ValueError("softmax has no scalar form");
}

/// Derivative of the scalar activation. ReLU uses subgradient 0 at z == 0.
template <typename T>
T activate_derivative(Activation a, T z) {
    switch (a) {
        case Activation::Linear: return T(1);
        case Activation::Relu: return z > T(0) ? T(1) : T(0);
        case Activation::Tanh: {
            const T t = std::tanh(z);
            return T(1) - t * t;
        }
        case Activation::Sigmoid: {
            const T s = T(1) / (T(1) + std::exp(-z));
            return s * (T(1) - s);
        }
        case Activation::Softmax: break;
    }
    throw ValueError("softmax has no elementwise derivative");
}

/// Applies the activation over the trailing axis of each instance row.
/// For softmax, `row_size` is the number of classes (max-shifted, stable).
template <typename T>
Tensor<T> activate(Activation a, const Tensor<T>& z, std::int64_t row_size) {
    Tensor<T> out;
    out.shape = z.shape;
    out.data.resize(z.data.size());
    if (a == Activation::Softmax) {
        const std::int64_t rows = z.size() / row_size;
        for (std::int64_t r = 0; r < rows; ++r) {
            const T* in = z.data.data() + r * row_size;
            T* o = out.data.data() + r * row_size;
            T mx = in[0];
            for (std::int64_t i = 1; i < row_size; ++i) mx = std::max(mx, in[i]);
            T denom = 0;
            for (std::int64_t i = 0; i < row_size; ++i) {
                o[i] = std::exp(in[i] - mx);
                denom += o[i];
            }
            for (std::int64_t i = 0; i < row_size; ++i) o[i] /= denom;
        }
    } else {
        for (std::size_t i = 0; i < z.data.size(); ++i) out.data[i] = activate_scalar(a, z.data[i]);
    }
    return out;
}

} // namespace nnattr
