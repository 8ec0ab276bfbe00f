#pragma once

// The six attribution families, implemented as rule-based backward passes
// over a recorded forward trace.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nnattr/forward.hpp"
#include "nnattr/model.hpp"
#include "nnattr/rng.hpp"

namespace nnattr {

enum class Method { Gradient, SmoothGrad, Lrp, DeepLift, ConnectionWeights };
enum class LrpRule { Simple, Epsilon, AlphaBeta };
enum class DeepLiftRule { Rescale, RevealCancel };
enum class PrecisionMode { Single, Double };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::Gradient: return "gradient";
        case Method::SmoothGrad: return "smoothgrad";
        case Method::Lrp: return "lrp";
        case Method::DeepLift: return "deeplift";
        case Method::ConnectionWeights: return "connection-weights";
    }
    return "?";
}

struct AttributionConfig {
    Method method = Method::Gradient;
    bool times_input = false;
    int n = 50;               // SmoothGrad sample count
    double noise_level = 0.1; // SmoothGrad lambda
    std::uint64_t seed = 1;
    std::map<LayerKind, LrpRule> rule_name;  // per layer kind; unmapped kinds use Simple
    std::map<LayerKind, double> rule_param;  // epsilon or alpha per kind
    DeepLiftRule deeplift_rule = DeepLiftRule::Rescale;
    std::optional<Dataset> x_ref; // absent = zeros baseline
    bool winner_takes_all = true;
    OutputSelection selection; // empty units = all output nodes
    PrecisionMode precision = PrecisionMode::Single;

    LrpRule lrp_rule_for(LayerKind kind) const {
        auto it = rule_name.find(kind);
        return it == rule_name.end() ? LrpRule::Simple : it->second;
    }
    double lrp_param_for(LayerKind kind) const {
        auto it = rule_param.find(kind);
        if (it != rule_param.end()) return it->second;
        return lrp_rule_for(kind) == LrpRule::Epsilon ? 0.01 : 1.0; // default eps / alpha
    }
};

/// Relevances per input layer, [batch x input dims... x n_selected_outputs].
struct RelevanceResult {
    std::vector<std::string> input_ids;
    std::vector<Tensor<double>> values;
    std::vector<AxisNames> input_names;
    std::vector<std::string> instance_ids;
    std::vector<std::string> output_labels;
    std::vector<std::string> output_layer_ids; // one per selected output
    std::string method_name;

    std::int64_t batch_size() const { return values.empty() ? 0 : values[0].shape[0]; }
    std::int64_t n_outputs() const { return static_cast<std::int64_t>(output_labels.size()); }
};

namespace detail {

template <typename T>
constexpr T rescale_fallback_tau() {
    if constexpr (sizeof(T) == sizeof(float)) return T(1e-7);
    else return T(1e-10);
}

// ---- exposed rule primitives (dense linear parts) ----

/// z_j = b_j + sum_i x_i w_{j,i}; messages x_i w_{j,i} / z_j * R_j summed over
/// j. A zero z_j is only an error when nonzero relevance has to flow through
/// it; with R_j = 0 there is no mass to distribute and the message is zero.
template <typename T>
Tensor<T> lrp_message_simple(const Tensor<T>& weight, const Tensor<T>& bias, const Tensor<T>& x,
                             const Tensor<T>& upper) {
    const Tensor<T> z = dense_forward(x, weight, bias);
    Tensor<T> s;
    s.shape = z.shape;
    s.data.resize(z.data.size());
    for (std::size_t k = 0; k < z.data.size(); ++k) {
        if (z.data[k] == T(0)) {
            if (upper.data[k] != T(0)) {
                throw ValueError("LRP simple rule: zero pre-activation denominator; use the epsilon rule");
            }
            s.data[k] = T(0);
        } else {
            s.data[k] = upper.data[k] / z.data[k];
        }
    }
    const std::int64_t batch = x.shape[0], in = x.shape[1], out_n = weight.shape[0];
    Tensor<T> lower({batch, in});
    for (std::int64_t b = 0; b < batch; ++b) {
        for (std::int64_t i = 0; i < in; ++i) {
            T acc = 0;
            for (std::int64_t j = 0; j < out_n; ++j) {
                acc += weight.data[j * in + i] * s.data[b * out_n + j];
            }
            lower.data[b * in + i] = x.data[b * in + i] * acc;
        }
    }
    return lower;
}

/// Stabilized variant: denominator z_j + sign(z_j) * eps with sign(0) = +1.
template <typename T>
Tensor<T> lrp_message_epsilon(const Tensor<T>& weight, const Tensor<T>& bias, const Tensor<T>& x,
                              const Tensor<T>& upper, T eps) {
    if (!(eps > T(0))) throw ValueError("LRP epsilon rule requires eps > 0");
    const Tensor<T> z = dense_forward(x, weight, bias);
    const std::int64_t batch = x.shape[0], in = x.shape[1], out_n = weight.shape[0];
    Tensor<T> lower({batch, in});
    for (std::int64_t b = 0; b < batch; ++b) {
        for (std::int64_t i = 0; i < in; ++i) {
            T acc = 0;
            for (std::int64_t j = 0; j < out_n; ++j) {
                const T zj = z.data[b * out_n + j];
                const T denom = zj + (zj < T(0) ? -eps : eps);
                acc += weight.data[j * in + i] * (upper.data[b * out_n + j] / denom);
            }
            lower.data[b * in + i] = x.data[b * in + i] * acc;
        }
    }
    return lower;
}

/// Positive and negative pre-activation parts handled separately with weights
/// alpha and beta = 1 - alpha; a vanished part contributes zero.
template <typename T>
Tensor<T> lrp_message_alpha_beta(const Tensor<T>& weight, const Tensor<T>& bias, const Tensor<T>& x,
                                 const Tensor<T>& upper, T alpha) {
    const T beta = T(1) - alpha;
    const std::int64_t batch = x.shape[0], in = x.shape[1], out_n = weight.shape[0];
    Tensor<T> lower({batch, in});
    for (std::int64_t b = 0; b < batch; ++b) {
        for (std::int64_t j = 0; j < out_n; ++j) {
            T zpos = 0, zneg = 0;
            if (!bias.data.empty()) {
                const T bj = bias.data[static_cast<std::size_t>(j)];
                (bj > T(0) ? zpos : zneg) += bj;
            }
            for (std::int64_t i = 0; i < in; ++i) {
                const T lp = x.data[b * in + i] * weight.data[j * in + i];
                (lp > T(0) ? zpos : zneg) += lp;
            }
            const T spos = zpos != T(0) ? alpha * upper.data[b * out_n + j] / zpos : T(0);
            const T sneg = zneg != T(0) ? beta * upper.data[b * out_n + j] / zneg : T(0);
            for (std::int64_t i = 0; i < in; ++i) {
                const T lp = x.data[b * in + i] * weight.data[j * in + i];
                lower.data[b * in + i] += lp > T(0) ? lp * spos : lp * sneg;
            }
        }
    }
    return lower;
}

/// DeepLift rescale multiplier: delta-sigma / delta-z with a gradient fallback
/// when z is within tau of its reference.
template <typename T>
Tensor<T> multiplier_rescale(const Tensor<T>& z, const Tensor<T>& z_ref, Activation act,
                             T tau = rescale_fallback_tau<T>()) {
    Tensor<T> m;
    m.shape = z.shape;
    m.data.resize(z.data.size());
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        const T dz = z.data[i] - z_ref.data[i];
        if (std::abs(dz) < tau) {
            m.data[i] = activate_derivative(act, z.data[i]);
        } else {
            m.data[i] = (activate_scalar(act, z.data[i]) - activate_scalar(act, z_ref.data[i])) / dz;
        }
    }
    return m;
}

/// RevealCancel multipliers for the positive / negative pre-activation parts.
/// When one part vanishes the full difference flows through the other and the
/// rule degenerates to rescale on that side.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> multiplier_reveal_cancel(const Tensor<T>& z_ref, const Tensor<T>& dz_pos,
                                                         const Tensor<T>& dz_neg, Activation act,
                                                         T tau = rescale_fallback_tau<T>()) {
    Tensor<T> mpos, mneg;
    mpos.shape = z_ref.shape;
    mneg.shape = z_ref.shape;
    mpos.data.resize(z_ref.data.size());
    mneg.data.resize(z_ref.data.size());
    for (std::size_t i = 0; i < z_ref.data.size(); ++i) {
        const T zr = z_ref.data[i];
        const T dp = dz_pos.data[i];
        const T dn = dz_neg.data[i];
        const T dsigma = activate_scalar(act, zr + dp + dn) - activate_scalar(act, zr);
        const bool pos_dead = std::abs(dp) < tau;
        const bool neg_dead = std::abs(dn) < tau;
        if (pos_dead && neg_dead) {
            const T g = activate_derivative(act, zr + dp + dn);
            mpos.data[i] = g;
            mneg.data[i] = g;
        } else if (neg_dead) {
            mpos.data[i] = dsigma / dp;
            mneg.data[i] = T(0);
        } else if (pos_dead) {
            mpos.data[i] = T(0);
            mneg.data[i] = dsigma / dn;
        } else {
            const T half =
                (activate_scalar(act, zr + dp) - activate_scalar(act, zr) + activate_scalar(act, zr + dp + dn) -
                 activate_scalar(act, zr + dp)) /
                (T(2));
            mpos.data[i] = half / dp;
            const T half_n =
                (activate_scalar(act, zr + dn) - activate_scalar(act, zr) + activate_scalar(act, zr + dn + dp) -
                 activate_scalar(act, zr + dn)) /
                (T(2));
            mneg.data[i] = half_n / dn;
        }
    }
    return {std::move(mpos), std::move(mneg)};
}

// ---- shared backward machinery ----

template <typename T>
void accumulate(Tensor<T>& acc, const Tensor<T>& add, char& has) {
    if (!has) {
        acc = add;
        has = 1;
    } else {
        for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += add.data[i];
    }
}

/// Elementwise x * sigma'(z).
template <typename T>
Tensor<T> mul_activation_derivative(const Tensor<T>& upper, const Tensor<T>& z, Activation act) {
    Tensor<T> out;
    out.shape = upper.shape;
    out.data.resize(upper.data.size());
    for (std::size_t i = 0; i < upper.data.size(); ++i) {
        out.data[i] = upper.data[i] * activate_derivative(act, z.data[i]);
    }
    return out;
}

/// Vector-Jacobian product through a softmax row: g_z = s (g - <g, s>).
template <typename T>
Tensor<T> softmax_vjp(const Tensor<T>& upper, const Tensor<T>& softmax_out, std::int64_t row) {
    Tensor<T> out;
    out.shape = upper.shape;
    out.data.resize(upper.data.size());
    const std::int64_t rows = static_cast<std::int64_t>(upper.data.size()) / row;
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* g = upper.data.data() + r * row;
        const T* s = softmax_out.data.data() + r * row;
        T dot = 0;
        for (std::int64_t k = 0; k < row; ++k) dot += g[k] * s[k];
        for (std::int64_t k = 0; k < row; ++k) out.data[r * row + k] = s[k] * (g[k] - dot);
    }
    return out;
}

/// Dense adjoint: out[b,i] = sum_j upper[b,j] * W[j,i].
template <typename T>
Tensor<T> dense_input_adjoint(const Tensor<T>& upper, const Tensor<T>& weight) {
    const std::int64_t batch = upper.shape[0], out_n = weight.shape[0], in = weight.shape[1];
    Tensor<T> lower({batch, in});
    for (std::int64_t b = 0; b < batch; ++b) {
        const T* urow = upper.data.data() + b * out_n;
        T* lrow = lower.data.data() + b * in;
        for (std::int64_t j = 0; j < out_n; ++j) {
            const T uv = urow[j];
            const T* wrow = weight.data.data() + j * in;
            for (std::int64_t i = 0; i < in; ++i) lrow[i] += uv * wrow[i];
        }
    }
    return lower;
}

template <typename T, typename Fn>
Tensor<T> per_instance(const Tensor<T>& batched, const Shape& out_inst, Fn&& fn) {
    const std::int64_t batch = batched.shape[0];
    Tensor<T> out(batched_shape<T>(batch, out_inst));
    for (std::int64_t b = 0; b < batch; ++b) set_instance(out, b, fn(instance_slice(batched, b), b));
    return out;
}

/// Splits t into elementwise positive part max(t,0) and negative part min(t,0).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_signs(const Tensor<T>& t) {
    Tensor<T> pos, neg;
    pos.shape = t.shape;
    neg.shape = t.shape;
    pos.data.resize(t.data.size());
    neg.data.resize(t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        const T v = t.data[i];
        pos.data[i] = v > T(0) ? v : T(0);
        neg.data[i] = v < T(0) ? v : T(0);
    }
    return {std::move(pos), std::move(neg)};
}

/// Reverse sweep over the graph. `prop` handles Dense/Conv2D/AvgPool2D/
/// MaxPool2D; Flatten and Concatenate are pure index routing and handled
/// here. Returns one tensor per graph input layer (zeros when no path
/// connects an input to the seed).
template <typename T, typename PropagateLayer>
std::vector<Tensor<T>> reverse_sweep(const ModelGraph& g, std::int64_t batch,
                                     const std::string& seed_layer, Tensor<T> seed,
                                     PropagateLayer&& prop) {
    std::vector<Tensor<T>> value(g.layers.size());
    std::vector<char> has(g.layers.size(), 0);
    const std::size_t seed_idx = g.index_of.at(seed_layer);
    value[seed_idx] = std::move(seed);
    has[seed_idx] = 1;

    for (std::size_t li = g.layers.size(); li-- > 0;) {
        if (!has[li]) continue;
        const LayerSpec& layer = g.layers[li];
        if (layer.kind == LayerKind::Input) continue;
        const Tensor<T>& upper = value[li];
        switch (layer.kind) {
            case LayerKind::Flatten: {
                const LayerSpec& pred = g.layer(layer.inbound[0]);
                const std::size_t pi = g.index_of.at(pred.id);
                detail::accumulate(value[pi], upper.reshaped(detail::batched_shape<T>(batch, pred.output_shape)),
                                   has[pi]);
                break;
            }
            case LayerKind::Concatenate: {
                std::vector<Shape> part_shapes;
                for (const auto& id : layer.inbound) part_shapes.push_back(g.layer(id).output_shape);
                auto parts = detail::split_batched(upper, layer.concat_axis, part_shapes);
                for (std::size_t i = 0; i < parts.size(); ++i) {
                    const std::size_t pi = g.index_of.at(layer.inbound[i]);
                    detail::accumulate(value[pi], parts[i], has[pi]);
                }
                break;
            }
            default: {
                Tensor<T> lower = prop(layer, upper);
                const std::size_t pi = g.index_of.at(layer.inbound[0]);
                detail::accumulate(value[pi], lower, has[pi]);
                break;
            }
        }
        value[li] = Tensor<T>();
    }

    std::vector<Tensor<T>> result;
    for (const auto& id : g.input_ids) {
        const std::size_t ii = g.index_of.at(id);
        if (has[ii]) {
            result.push_back(std::move(value[ii]));
        } else {
            result.push_back(Tensor<T>(detail::batched_shape<T>(batch, g.layer(id).input_shape)));
        }
    }
    return result;
}

/// One-hot seed [batch x width] selecting a single output node.
template <typename T>
Tensor<T> onehot_seed(std::int64_t batch, std::int64_t width, std::int64_t node) {
    Tensor<T> seed({batch, width});
    for (std::int64_t b = 0; b < batch; ++b) seed.data[b * width + node] = T(1);
    return seed;
}

/// Exact reverse-mode derivative of one selected output w.r.t. the inputs.
template <typename T>
std::vector<Tensor<T>> gradient_sweep(const ModelGraph& g, const ForwardTrace<T>& trace,
                                      const OutputUnit& unit, bool use_pre_activation) {
    const std::int64_t batch = trace.batch;
    const LayerSpec& out_layer = g.layer(unit.layer_id);
    Tensor<T> seed = onehot_seed<T>(batch, out_layer.output_shape[0], unit.node);

    auto prop = [&](const LayerSpec& layer, const Tensor<T>& upper) -> Tensor<T> {
        const Shape& in_shape = g.layer(layer.inbound[0]).output_shape;
        switch (layer.kind) {
            case LayerKind::Dense:
            case LayerKind::Conv2D: {
                Tensor<T> gz = upper;
                const bool skip = use_pre_activation && layer.id == unit.layer_id;
                if (layer.activation != Activation::Linear && !skip) {
                    if (layer.activation == Activation::Softmax) {
                        gz = softmax_vjp(upper, trace.output_of(layer.id),
                                         layer.output_shape[layer.output_shape.size() - 1]);
                    } else {
                        gz = mul_activation_derivative(upper, trace.preact_of(layer.id), layer.activation);
                    }
                }
                if (layer.kind == LayerKind::Dense) {
                    return dense_input_adjoint(gz, layer.weight.template cast<T>());
                }
                const Tensor<T> kernel = layer.weight.template cast<T>();
                return per_instance(gz, in_shape, [&](Tensor<T> u, std::int64_t) {
                    return conv2d_input_adjoint(u, kernel, layer.stride, layer.padding, in_shape);
                });
            }
            case LayerKind::AvgPool2D:
                return per_instance(upper, in_shape, [&](Tensor<T> u, std::int64_t) {
                    return avgpool2d_adjoint(u, layer.kernel_size, layer.stride, in_shape);
                });
            case LayerKind::MaxPool2D: {
                const auto& lt = trace.layers[g.index_of.at(layer.id)];
                return per_instance(upper, in_shape, [&](Tensor<T> u, std::int64_t b) {
                    return maxpool2d_adjoint(u, instance_slice(lt.argmax, b), in_shape);
                });
            }
            default:
                throw ValueError("unexpected layer kind in backward pass");
        }
    };
    return reverse_sweep(g, batch, unit.layer_id, std::move(seed), prop);
}

/// LRP backward for one selected output. The seed is the explained output
/// value itself; activations pass relevance through unchanged and the mapped
/// rule redistributes through each linear part.
template <typename T>
std::vector<Tensor<T>> lrp_sweep(const ModelGraph& g, const ForwardTrace<T>& trace,
                                 const OutputUnit& unit, const AttributionConfig& cfg) {
    const std::int64_t batch = trace.batch;
    const LayerSpec& out_layer = g.layer(unit.layer_id);
    const std::int64_t width = out_layer.output_shape[0];
    const Tensor<T>& out_vals = cfg.selection.use_pre_activation ? trace.preact_of(unit.layer_id)
                                                                 : trace.output_of(unit.layer_id);
    Tensor<T> seed({batch, width});
    for (std::int64_t b = 0; b < batch; ++b) {
        seed.data[b * width + unit.node] = out_vals.data[b * width + unit.node];
    }

    auto rule_of = [&](LayerKind kind) { return cfg.lrp_rule_for(kind); };
    auto param_of = [&](LayerKind kind) { return static_cast<T>(cfg.lrp_param_for(kind)); };

    auto prop = [&](const LayerSpec& layer, const Tensor<T>& upper) -> Tensor<T> {
        const Shape& in_shape = g.layer(layer.inbound[0]).output_shape;
        const Tensor<T>& x = trace.output_of(layer.inbound[0]);
        const LrpRule rule = rule_of(layer.kind);
        const T param = param_of(layer.kind);
        if (rule == LrpRule::Epsilon && !(param > T(0))) {
            throw ValueError("layer \"" + layer.id + "\": LRP epsilon rule requires a positive parameter");
        }

        switch (layer.kind) {
            case LayerKind::Dense: {
                const Tensor<T> w = layer.weight.template cast<T>();
                const Tensor<T> b = layer.bias.template cast<T>();
                try {
                    switch (rule) {
                        case LrpRule::Simple: return lrp_message_simple(w, b, x, upper);
                        case LrpRule::Epsilon: return lrp_message_epsilon(w, b, x, upper, param);
                        case LrpRule::AlphaBeta: return lrp_message_alpha_beta(w, b, x, upper, param);
                    }
                } catch (const ValueError& e) {
                    throw ValueError("layer \"" + layer.id + "\": " + e.what());
                }
                break;
            }
            case LayerKind::Conv2D: {
                const Tensor<T> kernel = layer.weight.template cast<T>();
                if (rule == LrpRule::Simple || rule == LrpRule::Epsilon) {
                    const Tensor<T>& z = trace.preact_of(layer.id);
                    Tensor<T> s;
                    s.shape = upper.shape;
                    s.data.resize(upper.data.size());
                    for (std::size_t i = 0; i < upper.data.size(); ++i) {
                        T denom = z.data[i];
                        if (rule == LrpRule::Simple) {
                            if (denom == T(0)) {
                                if (upper.data[i] != T(0)) {
                                    throw ValueError("layer \"" + layer.id +
                                                     "\": LRP simple rule: zero pre-activation; use the epsilon rule");
                                }
                                s.data[i] = T(0);
                                continue;
                            }
                        } else {
                            denom += denom < T(0) ? -param : param;
                        }
                        s.data[i] = upper.data[i] / denom;
                    }
                    Tensor<T> adj = per_instance(s, in_shape, [&](Tensor<T> u, std::int64_t) {
                        return conv2d_input_adjoint(u, kernel, layer.stride, layer.padding, in_shape);
                    });
                    for (std::size_t i = 0; i < adj.data.size(); ++i) adj.data[i] *= x.data[i];
                    return adj;
                }
                // alpha-beta via sign-split kernels
                const T alpha = param, beta = T(1) - alpha;
                auto [kp, kn] = split_signs(kernel);
                auto [xp, xn] = split_signs(x);
                Tensor<T> bias_pos, bias_neg;
                if (layer.has_bias()) {
                    auto parts = split_signs(layer.bias.template cast<T>());
                    bias_pos = std::move(parts.first);
                    bias_neg = std::move(parts.second);
                }
                Tensor<T> spos, sneg;
                spos.shape = upper.shape;
                sneg.shape = upper.shape;
                spos.data.resize(upper.data.size());
                sneg.data.resize(upper.data.size());
                for (std::int64_t b = 0; b < batch; ++b) {
                    const Tensor<T> xpi = instance_slice(xp, b), xni = instance_slice(xn, b);
                    Tensor<T> zp = conv2d(xpi, kp, bias_pos, layer.stride, layer.padding);
                    const Tensor<T> zp2 = conv2d(xni, kn, Tensor<T>(), layer.stride, layer.padding);
                    Tensor<T> zn = conv2d(xpi, kn, bias_neg, layer.stride, layer.padding);
                    const Tensor<T> zn2 = conv2d(xni, kp, Tensor<T>(), layer.stride, layer.padding);
                    const std::int64_t m = zp.size();
                    for (std::int64_t i = 0; i < m; ++i) {
                        const T zpv = zp.data[i] + zp2.data[i];
                        const T znv = zn.data[i] + zn2.data[i];
                        const T u = upper.data[b * m + i];
                        spos.data[b * m + i] = zpv != T(0) ? alpha * u / zpv : T(0);
                        sneg.data[b * m + i] = znv != T(0) ? beta * u / znv : T(0);
                    }
                }
                auto adj = [&](const Tensor<T>& k, const Tensor<T>& s) {
                    return per_instance(s, in_shape, [&](Tensor<T> u, std::int64_t) {
                        return conv2d_input_adjoint(u, k, layer.stride, layer.padding, in_shape);
                    });
                };
                const Tensor<T> app = adj(kp, spos), anp = adj(kn, spos);
                const Tensor<T> apn = adj(kn, sneg), ann = adj(kp, sneg);
                Tensor<T> lower;
                lower.shape = x.shape;
                lower.data.resize(x.data.size());
                for (std::size_t i = 0; i < x.data.size(); ++i) {
                    lower.data[i] = xp.data[i] * (app.data[i] + apn.data[i]) +
                                    xn.data[i] * (anp.data[i] + ann.data[i]);
                }
                return lower;
            }
            case LayerKind::AvgPool2D: {
                const Tensor<T>& z = trace.output_of(layer.id);
                if (rule == LrpRule::Simple || rule == LrpRule::Epsilon) {
                    Tensor<T> s;
                    s.shape = upper.shape;
                    s.data.resize(upper.data.size());
                    for (std::size_t i = 0; i < upper.data.size(); ++i) {
                        T denom = z.data[i];
                        if (rule == LrpRule::Simple) {
                            if (denom == T(0)) {
                                if (upper.data[i] != T(0)) {
                                    throw ValueError("layer \"" + layer.id +
                                                     "\": LRP simple rule: zero pre-activation; use the epsilon rule");
                                }
                                s.data[i] = T(0);
                                continue;
                            }
                        } else {
                            denom += denom < T(0) ? -param : param;
                        }
                        s.data[i] = upper.data[i] / denom;
                    }
                    Tensor<T> adj = per_instance(s, in_shape, [&](Tensor<T> u, std::int64_t) {
                        return avgpool2d_adjoint(u, layer.kernel_size, layer.stride, in_shape);
                    });
                    for (std::size_t i = 0; i < adj.data.size(); ++i) adj.data[i] *= x.data[i];
                    return adj;
                }
                const T alpha = param, beta = T(1) - alpha;
                auto [xp, xn] = split_signs(x);
                Tensor<T> spos, sneg;
                spos.shape = upper.shape;
                sneg.shape = upper.shape;
                spos.data.resize(upper.data.size());
                sneg.data.resize(upper.data.size());
                for (std::int64_t b = 0; b < batch; ++b) {
                    const Tensor<T> zp = avgpool2d(instance_slice(xp, b), layer.kernel_size, layer.stride);
                    const Tensor<T> zn = avgpool2d(instance_slice(xn, b), layer.kernel_size, layer.stride);
                    const std::int64_t m = zp.size();
                    for (std::int64_t i = 0; i < m; ++i) {
                        const T u = upper.data[b * m + i];
                        spos.data[b * m + i] = zp.data[i] != T(0) ? alpha * u / zp.data[i] : T(0);
                        sneg.data[b * m + i] = zn.data[i] != T(0) ? beta * u / zn.data[i] : T(0);
                    }
                }
                auto adj = [&](const Tensor<T>& s) {
                    return per_instance(s, in_shape, [&](Tensor<T> u, std::int64_t) {
                        return avgpool2d_adjoint(u, layer.kernel_size, layer.stride, in_shape);
                    });
                };
                const Tensor<T> ap = adj(spos), an = adj(sneg);
                Tensor<T> lower;
                lower.shape = x.shape;
                lower.data.resize(x.data.size());
                for (std::size_t i = 0; i < x.data.size(); ++i) {
                    lower.data[i] = xp.data[i] * ap.data[i] + xn.data[i] * an.data[i];
                }
                return lower;
            }
            case LayerKind::MaxPool2D: {
                // winner takes all: relevance goes to the recorded argmax
                const auto& lt = trace.layers[g.index_of.at(layer.id)];
                return per_instance(upper, in_shape, [&](Tensor<T> u, std::int64_t b) {
                    return maxpool2d_adjoint(u, instance_slice(lt.argmax, b), in_shape);
                });
            }
            default:
                throw ValueError("unexpected layer kind in LRP backward pass");
        }
        throw ValueError("unreachable");
    };
    return reverse_sweep(g, batch, unit.layer_id, std::move(seed), prop);
}

/// DeepLift backward for one selected output: composes multipliers from the
/// output down to the inputs using both the actual and the reference trace.
/// Returns the multiplier map per input layer (relevance = m * (x - x_ref)).
template <typename T>
std::vector<Tensor<T>> deeplift_sweep(const ModelGraph& g, const ForwardTrace<T>& trace,
                                      const ForwardTrace<T>& ref, const OutputUnit& unit,
                                      const AttributionConfig& cfg) {
    const std::int64_t batch = trace.batch;
    const LayerSpec& out_layer = g.layer(unit.layer_id);
    Tensor<T> seed = onehot_seed<T>(batch, out_layer.output_shape[0], unit.node);
    const T tau = rescale_fallback_tau<T>();

    auto prop = [&](const LayerSpec& layer, const Tensor<T>& upper) -> Tensor<T> {
        const Shape& in_shape = g.layer(layer.inbound[0]).output_shape;
        const bool skip = cfg.selection.use_pre_activation && layer.id == unit.layer_id;

        switch (layer.kind) {
            case LayerKind::Dense:
            case LayerKind::Conv2D: {
                const bool has_act = layer.activation != Activation::Linear && !skip;
                if (has_act && layer.activation == Activation::Softmax) {
                    throw ValueError("layer \"" + layer.id +
                                     "\": DeepLift cannot pass through softmax; explain the pre-activation output");
                }
                const Tensor<T> w = layer.weight.template cast<T>();
                const Tensor<T>& x = trace.output_of(layer.inbound[0]);
                const Tensor<T>& xr = ref.output_of(layer.inbound[0]);

                if (!has_act || cfg.deeplift_rule == DeepLiftRule::Rescale) {
                    Tensor<T> m = upper;
                    if (has_act) {
                        const Tensor<T> mult = multiplier_rescale(trace.preact_of(layer.id),
                                                                  ref.preact_of(layer.id), layer.activation, tau);
                        m.data.resize(upper.data.size());
                        for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = upper.data[i] * mult.data[i];
                    }
                    if (layer.kind == LayerKind::Dense) return dense_input_adjoint(m, w);
                    return per_instance(m, in_shape, [&](Tensor<T> u, std::int64_t) {
                        return conv2d_input_adjoint(u, w, layer.stride, layer.padding, in_shape);
                    });
                }

                // RevealCancel: split the difference-from-reference pre-activation
                // into contributions of each sign, then route through the matching
                // sign parts of the weights.
                Tensor<T> dx;
                dx.shape = x.shape;
                dx.data.resize(x.data.size());
                for (std::size_t i = 0; i < x.data.size(); ++i) dx.data[i] = x.data[i] - xr.data[i];
                auto [dxp, dxn] = split_signs(dx);
                auto [wp, wn] = split_signs(w);

                Tensor<T> dz_pos, dz_neg;
                if (layer.kind == LayerKind::Dense) {
                    const Tensor<T> a = dense_forward(dxp, wp, Tensor<T>()), b2 = dense_forward(dxn, wn, Tensor<T>());
                    const Tensor<T> c = dense_forward(dxp, wn, Tensor<T>()), d = dense_forward(dxn, wp, Tensor<T>());
                    dz_pos.shape = a.shape;
                    dz_neg.shape = a.shape;
                    dz_pos.data.resize(a.data.size());
                    dz_neg.data.resize(a.data.size());
                    for (std::size_t i = 0; i < a.data.size(); ++i) {
                        dz_pos.data[i] = a.data[i] + b2.data[i];
                        dz_neg.data[i] = c.data[i] + d.data[i];
                    }
                } else {
                    dz_pos = Tensor<T>(upper.shape);
                    dz_neg = Tensor<T>(upper.shape);
                    for (std::int64_t b = 0; b < batch; ++b) {
                        const Tensor<T> xpi = instance_slice(dxp, b), xni = instance_slice(dxn, b);
                        const Tensor<T> a = conv2d(xpi, wp, Tensor<T>(), layer.stride, layer.padding);
                        const Tensor<T> b3 = conv2d(xni, wn, Tensor<T>(), layer.stride, layer.padding);
                        const Tensor<T> c = conv2d(xpi, wn, Tensor<T>(), layer.stride, layer.padding);
                        const Tensor<T> d = conv2d(xni, wp, Tensor<T>(), layer.stride, layer.padding);
                        const std::int64_t m = a.size();
                        for (std::int64_t i = 0; i < m; ++i) {
                            dz_pos.data[b * m + i] = a.data[i] + b3.data[i];
                            dz_neg.data[b * m + i] = c.data[i] + d.data[i];
                        }
                    }
                }
                auto [mpos, mneg] = multiplier_reveal_cancel(ref.preact_of(layer.id), dz_pos, dz_neg,
                                                             layer.activation, tau);
                Tensor<T> p, q;
                p.shape = upper.shape;
                q.shape = upper.shape;
                p.data.resize(upper.data.size());
                q.data.resize(upper.data.size());
                for (std::size_t i = 0; i < upper.data.size(); ++i) {
                    p.data[i] = upper.data[i] * mpos.data[i];
                    q.data[i] = upper.data[i] * mneg.data[i];
                }
                Tensor<T> ap, aq, bp, bq;
                if (layer.kind == LayerKind::Dense) {
                    ap = dense_input_adjoint(p, wp);
                    aq = dense_input_adjoint(q, wn);
                    bp = dense_input_adjoint(p, wn);
                    bq = dense_input_adjoint(q, wp);
                } else {
                    auto adj = [&](const Tensor<T>& k, const Tensor<T>& s) {
                        return per_instance(s, in_shape, [&](Tensor<T> u, std::int64_t) {
                            return conv2d_input_adjoint(u, k, layer.stride, layer.padding, in_shape);
                        });
                    };
                    ap = adj(wp, p);
                    aq = adj(wn, q);
                    bp = adj(wn, p);
                    bq = adj(wp, q);
                }
                Tensor<T> lower;
                lower.shape = x.shape;
                lower.data.resize(x.data.size());
                for (std::size_t i = 0; i < x.data.size(); ++i) {
                    const T pos_route = ap.data[i] + aq.data[i];
                    const T neg_route = bp.data[i] + bq.data[i];
                    if (dx.data[i] > T(0)) lower.data[i] = pos_route;
                    else if (dx.data[i] < T(0)) lower.data[i] = neg_route;
                    else lower.data[i] = (pos_route + neg_route) / T(2);
                }
                return lower;
            }
            case LayerKind::AvgPool2D:
                return per_instance(upper, in_shape, [&](Tensor<T> u, std::int64_t) {
                    return avgpool2d_adjoint(u, layer.kernel_size, layer.stride, in_shape);
                });
            case LayerKind::MaxPool2D: {
                // Route to the actual input's argmax, scaled so that the
                // summation-to-delta identity survives differing reference argmaxes.
                const auto& lt = trace.layers[g.index_of.at(layer.id)];
                const Tensor<T>& x = trace.output_of(layer.inbound[0]);
                const Tensor<T>& xr = ref.output_of(layer.inbound[0]);
                const Tensor<T>& pool_x = trace.output_of(layer.id);
                const Tensor<T>& pool_r = ref.output_of(layer.id);
                Tensor<T> lower(detail::batched_shape<T>(batch, in_shape));
                const std::int64_t plane = in_shape[1] * in_shape[2];
                const std::int64_t oplane = layer.output_shape[1] * layer.output_shape[2];
                const std::int64_t channels = in_shape[0];
                for (std::int64_t b = 0; b < batch; ++b) {
                    for (std::int64_t ci = 0; ci < channels; ++ci) {
                        for (std::int64_t t = 0; t < oplane; ++t) {
                            const std::int64_t out_off = (b * channels + ci) * oplane + t;
                            const std::int64_t a = lt.argmax.data[out_off];
                            const std::int64_t in_off = (b * channels + ci) * plane + a;
                            const T dxa = x.data[in_off] - xr.data[in_off];
                            const T dout = pool_x.data[out_off] - pool_r.data[out_off];
                            const T ratio = std::abs(dxa) > tau ? dout / dxa : T(1);
                            lower.data[in_off] += upper.data[out_off] * ratio;
                        }
                    }
                }
                return lower;
            }
            default:
                throw ValueError("unexpected layer kind in DeepLift backward pass");
        }
    };
    return reverse_sweep(g, batch, unit.layer_id, std::move(seed), prop);
}

/// Connection-weights backward: path-weight products, data independent.
/// Biases and activations are ignored; pooling acts as a uniform-weight layer.
template <typename T>
std::vector<Tensor<T>> connection_weights_sweep(const ModelGraph& g, const OutputUnit& unit) {
    const LayerSpec& out_layer = g.layer(unit.layer_id);
    Tensor<T> seed = onehot_seed<T>(1, out_layer.output_shape[0], unit.node);

    auto prop = [&](const LayerSpec& layer, const Tensor<T>& upper) -> Tensor<T> {
        const Shape& in_shape = g.layer(layer.inbound[0]).output_shape;
        switch (layer.kind) {
            case LayerKind::Dense:
                return dense_input_adjoint(upper, layer.weight.template cast<T>());
            case LayerKind::Conv2D: {
                const Tensor<T> kernel = layer.weight.template cast<T>();
                return per_instance(upper, in_shape, [&](Tensor<T> u, std::int64_t) {
                    return conv2d_input_adjoint(u, kernel, layer.stride, layer.padding, in_shape);
                });
            }
            case LayerKind::AvgPool2D:
            case LayerKind::MaxPool2D:
                return per_instance(upper, in_shape, [&](Tensor<T> u, std::int64_t) {
                    return avgpool2d_adjoint(u, layer.kernel_size, layer.stride, in_shape);
                });
            default:
                throw ValueError("unexpected layer kind in connection-weights backward pass");
        }
    };
    return reverse_sweep(g, 1, unit.layer_id, std::move(seed), prop);
}

/// Stacks per-unit sweeps into [batch x input dims x n_units] tensors.
template <typename T>
std::vector<Tensor<T>> stack_units(const std::vector<std::vector<Tensor<T>>>& per_unit) {
    const std::size_t n_inputs = per_unit[0].size();
    const std::int64_t n_units = static_cast<std::int64_t>(per_unit.size());
    std::vector<Tensor<T>> out;
    for (std::size_t ii = 0; ii < n_inputs; ++ii) {
        Shape s = per_unit[0][ii].shape;
        s.push_back(n_units);
        Tensor<T> t(s);
        const std::int64_t flat = per_unit[0][ii].size();
        for (std::int64_t u = 0; u < n_units; ++u) {
            const auto& src = per_unit[static_cast<std::size_t>(u)][ii];
            for (std::int64_t i = 0; i < flat; ++i) t.data[i * n_units + u] = src.data[i];
        }
        out.push_back(std::move(t));
    }
    return out;
}

template <typename T>
std::vector<Tensor<T>> dataset_inputs(const ModelGraph& g, const Dataset& data) {
    std::vector<Tensor<T>> v;
    for (const auto& id : g.input_ids) v.push_back(data.tensor_for(id).template cast<T>());
    return v;
}

/// Reference inputs for DeepLift: zeros when absent, otherwise x_ref broadcast
/// from batch 1 or matched instance-wise.
template <typename T>
std::vector<Tensor<T>> reference_inputs(const ModelGraph& g, const std::optional<Dataset>& x_ref,
                                        std::int64_t batch) {
    std::vector<Tensor<T>> v;
    for (std::size_t i = 0; i < g.input_ids.size(); ++i) {
        const auto& id = g.input_ids[i];
        const Shape& inst = g.layer(id).input_shape;
        if (!x_ref) {
            v.push_back(Tensor<T>(detail::batched_shape<T>(batch, inst)));
            continue;
        }
        Tensor<T> src = x_ref->tensor_for(id).template cast<T>();
        require_shape(Tensor<T>(Shape(src.shape.begin() + 1, src.shape.end())),
                      inst, "x_ref for input \"" + id + "\"");
        if (src.shape[0] == batch) {
            v.push_back(std::move(src));
        } else if (src.shape[0] == 1) {
            Tensor<T> rep(detail::batched_shape<T>(batch, inst));
            const std::int64_t n = numel(inst);
            for (std::int64_t b = 0; b < batch; ++b) {
                std::copy(src.data.begin(), src.data.end(), rep.data.begin() + b * n);
            }
            v.push_back(std::move(rep));
        } else {
            throw ShapeError("x_ref batch size " + std::to_string(src.shape[0]) +
                             " must be 1 or match the data batch " + std::to_string(batch));
        }
    }
    return v;
}

inline void validate_config(const AttributionConfig& cfg, bool have_data) {
    if (cfg.times_input && (cfg.method == Method::Lrp || cfg.method == Method::DeepLift)) {
        throw ValueError("times_input applies to the gradient and connection-weights families only");
    }
    if (cfg.method == Method::SmoothGrad) {
        if (cfg.n < 1) throw ValueError("SmoothGrad needs n >= 1");
        if (cfg.noise_level < 0) throw ValueError("SmoothGrad noise level must be non-negative");
    }
    for (const auto& [kind, rule] : cfg.rule_name) {
        if (rule == LrpRule::Epsilon) {
            auto it = cfg.rule_param.find(kind);
            if (it != cfg.rule_param.end() && !(it->second > 0)) {
                throw ValueError("LRP epsilon rule requires a positive parameter for kind " + to_string(kind));
            }
        }
    }
    if (cfg.method == Method::ConnectionWeights) {
        if (cfg.times_input && !have_data) {
            throw ValueError("connection-weights with times_input needs input data");
        }
    } else if (!have_data) {
        throw ValueError("method " + to_string(cfg.method) + " needs input data");
    }
}

inline OutputSelection resolve_selection(const ModelGraph& g, const AttributionConfig& cfg) {
    OutputSelection sel = cfg.selection;
    if (sel.units.empty()) {
        sel = select_all_outputs(g, cfg.selection.use_pre_activation);
        return sel;
    }
    for (auto& unit : sel.units) {
        const auto it = std::find(g.output_ids.begin(), g.output_ids.end(), unit.layer_id);
        if (it == g.output_ids.end()) {
            throw ValueError("selected layer \"" + unit.layer_id + "\" is not an output layer");
        }
        const auto& layer = g.layer(unit.layer_id);
        if (unit.node < 0 || unit.node >= layer.output_shape[0]) {
            throw ValueError("output index " + std::to_string(unit.node + 1) + " out of range for layer \"" +
                             unit.layer_id + "\" with " + std::to_string(layer.output_shape[0]) + " nodes");
        }
        if (unit.label.empty()) {
            const std::size_t li = static_cast<std::size_t>(it - g.output_ids.begin());
            unit.label = g.output_names[li][static_cast<std::size_t>(unit.node)];
        }
    }
    return sel;
}

/// Per-unit gradient sweeps at given inputs (shared by Gradient and SmoothGrad).
template <typename T>
std::vector<std::vector<Tensor<T>>> gradient_units(const ModelGraph& g, const std::vector<Tensor<T>>& inputs,
                                                   const OutputSelection& sel) {
    const ForwardTrace<T> trace = forward(g, inputs);
    std::vector<std::vector<Tensor<T>>> per_unit;
    per_unit.reserve(sel.units.size());
    for (const auto& unit : sel.units) {
        per_unit.push_back(gradient_sweep(g, trace, unit, sel.use_pre_activation));
    }
    return per_unit;
}

template <typename T>
void elementwise_mul_inplace(std::vector<std::vector<Tensor<T>>>& per_unit,
                             const std::vector<Tensor<T>>& factors) {
    for (auto& unit_vals : per_unit) {
        for (std::size_t ii = 0; ii < unit_vals.size(); ++ii) {
            for (std::size_t k = 0; k < unit_vals[ii].data.size(); ++k) {
                unit_vals[ii].data[k] *= factors[ii].data[k];
            }
        }
    }
}

template <typename T>
std::vector<Tensor<T>> attribute_typed(const ModelGraph& graph_in, const Dataset& data,
                                       const AttributionConfig& cfg, OutputSelection& sel_out) {
    ModelGraph substituted;
    const ModelGraph* gp = &graph_in;
    if ((cfg.method == Method::Lrp || cfg.method == Method::DeepLift) && !cfg.winner_takes_all) {
        substituted = graph_in.with_maxpool_as_avgpool();
        gp = &substituted;
    }
    const ModelGraph& g = *gp;
    const OutputSelection sel = resolve_selection(g, cfg);
    sel_out = sel;

    switch (cfg.method) {
        case Method::Gradient: {
            const auto inputs = dataset_inputs<T>(g, data);
            auto per_unit = gradient_units(g, inputs, sel);
            if (cfg.times_input) elementwise_mul_inplace(per_unit, inputs);
            return stack_units(per_unit);
        }
        case Method::SmoothGrad: {
            const auto inputs = dataset_inputs<T>(g, data);
            if (cfg.noise_level == 0.0) {
                // zero noise is exactly the gradient; keep it bit-identical
                auto per_unit = gradient_units(g, inputs, sel);
                if (cfg.times_input) elementwise_mul_inplace(per_unit, inputs);
                return stack_units(per_unit);
            }
            std::vector<T> sigma;
            for (const auto& t : inputs) {
                T lo = t.data[0], hi = t.data[0];
                for (const T& v : t.data) {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                sigma.push_back(static_cast<T>(cfg.noise_level) * (hi - lo));
            }
            NormalSampler rng(cfg.seed);
            std::vector<std::vector<Tensor<T>>> mean;
            for (int k = 0; k < cfg.n; ++k) {
                std::vector<Tensor<T>> perturbed = inputs;
                for (std::size_t ii = 0; ii < perturbed.size(); ++ii) {
                    for (auto& v : perturbed[ii].data) v += sigma[ii] * static_cast<T>(rng.next());
                }
                auto per_unit = gradient_units(g, perturbed, sel);
                if (cfg.times_input) elementwise_mul_inplace(per_unit, perturbed);
                if (mean.empty()) {
                    mean = std::move(per_unit);
                } else {
                    for (std::size_t u = 0; u < mean.size(); ++u) {
                        for (std::size_t ii = 0; ii < mean[u].size(); ++ii) {
                            for (std::size_t e = 0; e < mean[u][ii].data.size(); ++e) {
                                mean[u][ii].data[e] += per_unit[u][ii].data[e];
                            }
                        }
                    }
                }
            }
            const T inv = T(1) / static_cast<T>(cfg.n);
            for (auto& unit_vals : mean) {
                for (auto& t : unit_vals) {
                    for (auto& v : t.data) v *= inv;
                }
            }
            return stack_units(mean);
        }
        case Method::Lrp: {
            const auto inputs = dataset_inputs<T>(g, data);
            const ForwardTrace<T> trace = forward(g, inputs);
            std::vector<std::vector<Tensor<T>>> per_unit;
            for (const auto& unit : sel.units) per_unit.push_back(lrp_sweep(g, trace, unit, cfg));
            return stack_units(per_unit);
        }
        case Method::DeepLift: {
            const auto inputs = dataset_inputs<T>(g, data);
            const auto refs = reference_inputs<T>(g, cfg.x_ref, data.batch_size());
            const ForwardTrace<T> trace = forward(g, inputs);
            const ForwardTrace<T> ref_trace = forward(g, refs);
            std::vector<std::vector<Tensor<T>>> per_unit;
            for (const auto& unit : sel.units) {
                auto mult = deeplift_sweep(g, trace, ref_trace, unit, cfg);
                for (std::size_t ii = 0; ii < mult.size(); ++ii) {
                    for (std::size_t e = 0; e < mult[ii].data.size(); ++e) {
                        mult[ii].data[e] *= inputs[ii].data[e] - refs[ii].data[e];
                    }
                }
                per_unit.push_back(std::move(mult));
            }
            return stack_units(per_unit);
        }
        case Method::ConnectionWeights: {
            std::vector<std::vector<Tensor<T>>> per_unit;
            for (const auto& unit : sel.units) per_unit.push_back(connection_weights_sweep<T>(g, unit));
            if (!cfg.times_input) return stack_units(per_unit);
            // local variant: multiply the global map by each instance
            const auto inputs = dataset_inputs<T>(g, data);
            const std::int64_t batch = data.batch_size();
            std::vector<std::vector<Tensor<T>>> local(per_unit.size());
            for (std::size_t u = 0; u < per_unit.size(); ++u) {
                for (std::size_t ii = 0; ii < per_unit[u].size(); ++ii) {
                    const Tensor<T>& global = per_unit[u][ii];
                    const std::int64_t n = global.size(); // batch dim is 1
                    Shape s = global.shape;
                    s[0] = batch;
                    Tensor<T> t(s);
                    for (std::int64_t b = 0; b < batch; ++b) {
                        for (std::int64_t e = 0; e < n; ++e) {
                            t.data[b * n + e] = global.data[e] * inputs[ii].data[b * n + e];
                        }
                    }
                    local[u].push_back(std::move(t));
                }
            }
            return stack_units(local);
        }
    }
    throw ValueError("unknown method");
}

} // namespace detail

inline std::string method_descriptor(const AttributionConfig& cfg) {
    std::string name = to_string(cfg.method);
    if (cfg.method == Method::DeepLift) {
        name += cfg.deeplift_rule == DeepLiftRule::Rescale ? " (rescale)" : " (reveal-cancel)";
    }
    if (cfg.times_input) name += " x input";
    return name;
}

/// Runs the configured method over the batch. For the global
/// connection-weights variant `data` may be an empty Dataset; the result then
/// carries a single pseudo-instance "global".
inline RelevanceResult run_attribution(const ModelGraph& graph, const Dataset& data,
                                       const AttributionConfig& cfg) {
    const bool have_data = !data.tensors.empty() && data.batch_size() > 0;
    detail::validate_config(cfg, have_data);

    OutputSelection sel;
    std::vector<Tensor<double>> values;
    if (cfg.precision == PrecisionMode::Single) {
        auto typed = detail::attribute_typed<float>(graph, data, cfg, sel);
        for (auto& t : typed) values.push_back(t.cast<double>());
    } else {
        values = detail::attribute_typed<double>(graph, data, cfg, sel);
    }

    RelevanceResult result;
    result.input_ids = graph.input_ids;
    result.input_names = graph.input_names;
    result.values = std::move(values);
    result.method_name = method_descriptor(cfg);
    for (const auto& unit : sel.units) {
        result.output_labels.push_back(unit.label);
        result.output_layer_ids.push_back(unit.layer_id);
    }
    if (cfg.method == Method::ConnectionWeights && !cfg.times_input) {
        result.instance_ids = {"global"};
    } else {
        result.instance_ids = data.instance_ids;
    }
    return result;
}

// Public aliases for the rule primitives (dense linear parts).
using detail::lrp_message_alpha_beta;
using detail::lrp_message_epsilon;
using detail::lrp_message_simple;
using detail::multiplier_rescale;
using detail::multiplier_reveal_cancel;

} // namespace nnattr

