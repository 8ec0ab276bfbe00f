#pragma once

// Forward and adjoint compute kernels. All kernels use fixed loop orders so
// repeated runs produce bit-identical results for a given precision.

#include <array>
#include <cstdint>

#include "nnattr/tensor.hpp"

namespace nnattr {

enum class Padding { Valid, Same };

/// a [m x k] * b [k x n] -> [m x n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul expects rank-2 operands, got " + shape_str(a.shape) + " and " + shape_str(b.shape));
    }
    if (a.shape[1] != b.shape[0]) {
        throw ShapeError("matmul inner dimensions disagree: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    }
    const std::int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor<T> out({m, n});
    for (std::int64_t i = 0; i < m; ++i) {
        const T* arow = a.data.data() + i * k;
        T* orow = out.data.data() + i * n;
        for (std::int64_t p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b.data.data() + p * n;
            for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

namespace detail {

inline void conv_out_size(std::int64_t in, std::int64_t k, std::int64_t stride,
                          Padding padding, std::int64_t& out, std::int64_t& pad_lo) {
    if (stride <= 0) throw ShapeError("stride must be positive");
    if (padding == Padding::Valid) {
        if (k > in) {
            throw ShapeError("kernel extent " + std::to_string(k) + " exceeds input extent " + std::to_string(in));
        }
        out = (in - k) / stride + 1;
        pad_lo = 0;
    } else {
        out = (in + stride - 1) / stride;
        const std::int64_t pad_total = std::max<std::int64_t>(0, (out - 1) * stride + k - in);
        pad_lo = pad_total / 2;
    }
}

template <typename T>
Tensor<T> pad_image(const Tensor<T>& x, std::int64_t pad_h, std::int64_t pad_w,
                    std::int64_t hp, std::int64_t wp) {
    const std::int64_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
    Tensor<T> out({c, hp, wp});
    for (std::int64_t ci = 0; ci < c; ++ci)
        for (std::int64_t i = 0; i < h; ++i)
            for (std::int64_t j = 0; j < w; ++j)
                out.data[(ci * hp + i + pad_h) * wp + j + pad_w] = x.data[(ci * h + i) * w + j];
    return out;
}

} // namespace detail

/// Cross-correlation of input [C_in x H x W] with kernel [C_out x C_in x kH x kW].
/// bias may be empty (no bias). Output [C_out x H' x W'].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::array<std::int64_t, 2> stride, Padding padding) {
    if (input.rank() != 3) throw ShapeError("conv2d input must be rank 3, got " + shape_str(input.shape));
    if (kernel.rank() != 4) throw ShapeError("conv2d kernel must be rank 4, got " + shape_str(kernel.shape));
    if (kernel.shape[1] != input.shape[0]) {
        throw ShapeError("conv2d channel mismatch: kernel " + shape_str(kernel.shape) +
                         " vs input " + shape_str(input.shape));
    }
    const std::int64_t cout = kernel.shape[0], cin = kernel.shape[1];
    const std::int64_t kh = kernel.shape[2], kw = kernel.shape[3];
    const std::int64_t h = input.shape[1], w = input.shape[2];
    std::int64_t oh = 0, ow = 0, ph = 0, pw = 0;
    detail::conv_out_size(h, kh, stride[0], padding, oh, ph);
    detail::conv_out_size(w, kw, stride[1], padding, ow, pw);
    if (!bias.data.empty() && (bias.rank() != 1 || bias.shape[0] != cout)) {
        throw ShapeError("conv2d bias must be [" + std::to_string(cout) + "], got " + shape_str(bias.shape));
    }

    const Tensor<T>* src = &input;
    Tensor<T> padded;
    std::int64_t hp = h, wp = w;
    if (padding == Padding::Same) {
        hp = std::max(h, (oh - 1) * stride[0] + kh);
        wp = std::max(w, (ow - 1) * stride[1] + kw);
        if (hp != h || wp != w || ph > 0 || pw > 0) {
            padded = detail::pad_image(input, ph, pw, hp, wp);
            src = &padded;
        }
    }

    Tensor<T> out({cout, oh, ow});
    for (std::int64_t co = 0; co < cout; ++co) {
        T* oplane = out.data.data() + co * oh * ow;
        if (!bias.data.empty()) {
            const T bv = bias.data[static_cast<std::size_t>(co)];
            for (std::int64_t i = 0; i < oh * ow; ++i) oplane[i] = bv;
        }
        for (std::int64_t ci = 0; ci < cin; ++ci) {
            const T* iplane = src->data.data() + ci * hp * wp;
            const T* kplane = kernel.data.data() + (co * cin + ci) * kh * kw;
            for (std::int64_t ki = 0; ki < kh; ++ki) {
                for (std::int64_t kj = 0; kj < kw; ++kj) {
                    const T kv = kplane[ki * kw + kj];
                    for (std::int64_t i = 0; i < oh; ++i) {
                        const T* irow = iplane + (i * stride[0] + ki) * wp + kj;
                        T* orow = oplane + i * ow;
                        for (std::int64_t j = 0; j < ow; ++j) orow[j] += kv * irow[j * stride[1]];
                    }
                }
            }
        }
    }
    return out;
}

/// Exact adjoint of conv2d with respect to its input (transposed convolution).
/// input_shape is the [C_in x H x W] geometry of the original forward input.
template <typename T>
Tensor<T> conv2d_input_adjoint(const Tensor<T>& upstream, const Tensor<T>& kernel,
                               std::array<std::int64_t, 2> stride, Padding padding,
                               const Shape& input_shape) {
    if (upstream.rank() != 3) throw ShapeError("conv2d adjoint upstream must be rank 3");
    if (input_shape.size() != 3) throw ShapeError("conv2d adjoint needs input geometry [C x H x W]");
    const std::int64_t cout = kernel.shape[0], cin = kernel.shape[1];
    const std::int64_t kh = kernel.shape[2], kw = kernel.shape[3];
    const std::int64_t h = input_shape[1], w = input_shape[2];
    std::int64_t oh = 0, ow = 0, ph = 0, pw = 0;
    detail::conv_out_size(h, kh, stride[0], padding, oh, ph);
    detail::conv_out_size(w, kw, stride[1], padding, ow, pw);
    if (upstream.shape[0] != cout || upstream.shape[1] != oh || upstream.shape[2] != ow) {
        throw ShapeError("conv2d adjoint geometry mismatch: upstream " + shape_str(upstream.shape) +
                         " vs expected [" + std::to_string(cout) + "x" + std::to_string(oh) + "x" +
                         std::to_string(ow) + "]");
    }
    if (input_shape[0] != cin) throw ShapeError("conv2d adjoint channel mismatch");

    std::int64_t hp = h, wp = w;
    if (padding == Padding::Same) {
        hp = std::max(h, (oh - 1) * stride[0] + kh);
        wp = std::max(w, (ow - 1) * stride[1] + kw);
    }
    Tensor<T> grad({cin, hp, wp});
    for (std::int64_t co = 0; co < cout; ++co) {
        const T* uplane = upstream.data.data() + co * oh * ow;
        for (std::int64_t ci = 0; ci < cin; ++ci) {
            T* gplane = grad.data.data() + ci * hp * wp;
            const T* kplane = kernel.data.data() + (co * cin + ci) * kh * kw;
            for (std::int64_t ki = 0; ki < kh; ++ki) {
                for (std::int64_t kj = 0; kj < kw; ++kj) {
                    const T kv = kplane[ki * kw + kj];
                    for (std::int64_t i = 0; i < oh; ++i) {
                        T* grow = gplane + (i * stride[0] + ki) * wp + kj;
                        const T* urow = uplane + i * ow;
                        for (std::int64_t j = 0; j < ow; ++j) grow[j * stride[1]] += kv * urow[j];
                    }
                }
            }
        }
    }
    if (hp == h && wp == w && ph == 0 && pw == 0) return grad;
    // crop padding back off
    Tensor<T> out({cin, h, w});
    for (std::int64_t ci = 0; ci < cin; ++ci)
        for (std::int64_t i = 0; i < h; ++i)
            for (std::int64_t j = 0; j < w; ++j)
                out.data[(ci * h + i) * w + j] = grad.data[(ci * hp + i + ph) * wp + j + pw];
    return out;
}

/// Mean over each pooling window. Input [C x H x W] -> [C x H' x W'].
template <typename T>
Tensor<T> avgpool2d(const Tensor<T>& input, std::array<std::int64_t, 2> kernel,
                    std::array<std::int64_t, 2> stride) {
    if (input.rank() != 3) throw ShapeError("avgpool2d input must be rank 3");
    const std::int64_t c = input.shape[0], h = input.shape[1], w = input.shape[2];
    std::int64_t oh = 0, ow = 0, dummy = 0;
    detail::conv_out_size(h, kernel[0], stride[0], Padding::Valid, oh, dummy);
    detail::conv_out_size(w, kernel[1], stride[1], Padding::Valid, ow, dummy);
    Tensor<T> out({c, oh, ow});
    const T scale = T(1) / static_cast<T>(kernel[0] * kernel[1]);
    for (std::int64_t ci = 0; ci < c; ++ci) {
        const T* iplane = input.data.data() + ci * h * w;
        T* oplane = out.data.data() + ci * oh * ow;
        for (std::int64_t i = 0; i < oh; ++i) {
            for (std::int64_t j = 0; j < ow; ++j) {
                T acc = 0;
                for (std::int64_t ki = 0; ki < kernel[0]; ++ki) {
                    const T* irow = iplane + (i * stride[0] + ki) * w + j * stride[1];
                    for (std::int64_t kj = 0; kj < kernel[1]; ++kj) acc += irow[kj];
                }
                oplane[i * ow + j] = acc * scale;
            }
        }
    }
    return out;
}

/// Adjoint of avgpool2d: spreads upstream / (kH*kW) back onto each window cell.
template <typename T>
Tensor<T> avgpool2d_adjoint(const Tensor<T>& upstream, std::array<std::int64_t, 2> kernel,
                            std::array<std::int64_t, 2> stride, const Shape& input_shape) {
    if (input_shape.size() != 3) throw ShapeError("avgpool2d adjoint needs input geometry [C x H x W]");
    const std::int64_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
    std::int64_t oh = 0, ow = 0, dummy = 0;
    detail::conv_out_size(h, kernel[0], stride[0], Padding::Valid, oh, dummy);
    detail::conv_out_size(w, kernel[1], stride[1], Padding::Valid, ow, dummy);
    require_shape(upstream, {c, oh, ow}, "avgpool2d adjoint upstream");
    Tensor<T> grad({c, h, w});
    const T scale = T(1) / static_cast<T>(kernel[0] * kernel[1]);
    for (std::int64_t ci = 0; ci < c; ++ci) {
        const T* uplane = upstream.data.data() + ci * oh * ow;
        T* gplane = grad.data.data() + ci * h * w;
        for (std::int64_t i = 0; i < oh; ++i) {
            for (std::int64_t j = 0; j < ow; ++j) {
                const T v = uplane[i * ow + j] * scale;
                for (std::int64_t ki = 0; ki < kernel[0]; ++ki) {
                    T* grow = gplane + (i * stride[0] + ki) * w + j * stride[1];
                    for (std::int64_t kj = 0; kj < kernel[1]; ++kj) grow[kj] += v;
                }
            }
        }
    }
    return grad;
}

/// Per-window maximum plus the flat row-major index (within the channel plane)
/// of the first maximizer. Ties break to the lowest row-major index.
template <typename T>
std::pair<Tensor<T>, Tensor<std::int32_t>> maxpool2d(const Tensor<T>& input,
                                                     std::array<std::int64_t, 2> kernel,
                                                     std::array<std::int64_t, 2> stride) {
    if (input.rank() != 3) throw ShapeError("maxpool2d input must be rank 3");
    const std::int64_t c = input.shape[0], h = input.shape[1], w = input.shape[2];
    std::int64_t oh = 0, ow = 0, dummy = 0;
    detail::conv_out_size(h, kernel[0], stride[0], Padding::Valid, oh, dummy);
    detail::conv_out_size(w, kernel[1], stride[1], Padding::Valid, ow, dummy);
    Tensor<T> out({c, oh, ow});
    Tensor<std::int32_t> argmax({c, oh, ow});
    for (std::int64_t ci = 0; ci < c; ++ci) {
        const T* iplane = input.data.data() + ci * h * w;
        for (std::int64_t i = 0; i < oh; ++i) {
            for (std::int64_t j = 0; j < ow; ++j) {
                T best = iplane[(i * stride[0]) * w + j * stride[1]];
                std::int64_t best_idx = (i * stride[0]) * w + j * stride[1];
                for (std::int64_t ki = 0; ki < kernel[0]; ++ki) {
                    for (std::int64_t kj = 0; kj < kernel[1]; ++kj) {
                        const std::int64_t idx = (i * stride[0] + ki) * w + j * stride[1] + kj;
                        if (iplane[idx] > best) {
                            best = iplane[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.data[(ci * oh + i) * ow + j] = best;
                argmax.data[(ci * oh + i) * ow + j] = static_cast<std::int32_t>(best_idx);
            }
        }
    }
    return {std::move(out), std::move(argmax)};
}

/// Routes upstream values to the recorded argmax positions, zero elsewhere.
template <typename T>
Tensor<T> maxpool2d_adjoint(const Tensor<T>& upstream, const Tensor<std::int32_t>& argmax,
                            const Shape& input_shape) {
    if (input_shape.size() != 3) throw ShapeError("maxpool2d adjoint needs input geometry [C x H x W]");
    if (upstream.shape != argmax.shape) throw ShapeError("maxpool2d adjoint upstream/argmax shape mismatch");
    const std::int64_t c = input_shape[0], plane = input_shape[1] * input_shape[2];
    const std::int64_t oplane = upstream.shape[1] * upstream.shape[2];
    Tensor<T> grad({c, input_shape[1], input_shape[2]});
    for (std::int64_t ci = 0; ci < c; ++ci) {
        for (std::int64_t t = 0; t < oplane; ++t) {
            const std::int64_t idx = argmax.data[ci * oplane + t];
            grad.data[ci * plane + idx] += upstream.data[ci * oplane + t];
        }
    }
    return grad;
}

/// [batch x H x W x C] -> [batch x C x H x W].
template <typename T>
Tensor<T> channels_last_to_first(const Tensor<T>& x) {
    if (x.rank() != 4) throw ShapeError("channel permutation expects rank-4 input, got " + shape_str(x.shape));
    const std::int64_t b = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3];
    Tensor<T> out({b, c, h, w});
    for (std::int64_t bi = 0; bi < b; ++bi)
        for (std::int64_t i = 0; i < h; ++i)
            for (std::int64_t j = 0; j < w; ++j)
                for (std::int64_t ci = 0; ci < c; ++ci)
                    out.data[((bi * c + ci) * h + i) * w + j] = x.data[((bi * h + i) * w + j) * c + ci];
    return out;
}

/// [batch x C x H x W] -> [batch x H x W x C]; inverse of channels_last_to_first.
template <typename T>
Tensor<T> channels_first_to_last(const Tensor<T>& x) {
    if (x.rank() != 4) throw ShapeError("channel permutation expects rank-4 input, got " + shape_str(x.shape));
    const std::int64_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    Tensor<T> out({b, h, w, c});
    for (std::int64_t bi = 0; bi < b; ++bi)
        for (std::int64_t ci = 0; ci < c; ++ci)
            for (std::int64_t i = 0; i < h; ++i)
                for (std::int64_t j = 0; j < w; ++j)
                    out.data[((bi * h + i) * w + j) * c + ci] = x.data[((bi * c + ci) * h + i) * w + j];
    return out;
}

} // namespace nnattr
