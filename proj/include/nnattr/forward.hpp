#pragma once

// Recording forward pass: every layer's pre- and post-activation values are
// kept so the rule-based backward passes can read them.

#include <cstdint>
#include <string>
#include <vector>

#include "nnattr/model.hpp"

namespace nnattr {

struct OutputUnit {
    std::string layer_id;
    std::int64_t node = 0; // 0-based index within the output layer
    std::string label;
};

struct OutputSelection {
    std::vector<OutputUnit> units;
    bool use_pre_activation = true; // the ignore-last-activation switch
};

/// Selection of every node of every output layer, labelled from output_names.
inline OutputSelection select_all_outputs(const ModelGraph& g, bool use_pre_activation = true) {
    OutputSelection sel;
    sel.use_pre_activation = use_pre_activation;
    for (std::size_t li = 0; li < g.output_ids.size(); ++li) {
        const auto& layer = g.layer(g.output_ids[li]);
        for (std::int64_t n = 0; n < layer.output_shape[0]; ++n) {
            sel.units.push_back({g.output_ids[li], n, g.output_names[li][static_cast<std::size_t>(n)]});
        }
    }
    return sel;
}

template <typename T>
struct LayerTrace {
    Tensor<T> preact;            // z, only stored when it differs from output
    Tensor<T> output;            // post-activation, [batch x dims...]
    Tensor<std::int32_t> argmax; // MaxPool2D only
    bool preact_is_output = false;
};

template <typename T>
struct ForwardTrace {
    const ModelGraph* graph = nullptr;
    std::vector<LayerTrace<T>> layers; // indexed like graph->layers
    std::int64_t batch = 0;

    const Tensor<T>& output_of(const std::string& id) const {
        return layers[graph->index_of.at(id)].output;
    }
    const Tensor<T>& preact_of(const std::string& id) const {
        const auto& lt = layers[graph->index_of.at(id)];
        return lt.preact_is_output ? lt.output : lt.preact;
    }

    /// Total stored elements; memory grows linearly with this count.
    std::int64_t stored_elements() const {
        std::int64_t n = 0;
        for (const auto& lt : layers) {
            n += lt.output.size() + (lt.preact_is_output ? 0 : lt.preact.size()) + lt.argmax.size();
        }
        return n;
    }
};

namespace detail {

template <typename T>
Tensor<T> instance_slice(const Tensor<T>& batched, std::int64_t b) {
    Shape inst(batched.shape.begin() + 1, batched.shape.end());
    const std::int64_t n = numel(inst);
    Tensor<T> out;
    out.shape = std::move(inst);
    out.data.assign(batched.data.begin() + b * n, batched.data.begin() + (b + 1) * n);
    return out;
}

template <typename T>
void set_instance(Tensor<T>& batched, std::int64_t b, const Tensor<T>& inst) {
    const std::int64_t n = inst.size();
    std::copy(inst.data.begin(), inst.data.end(), batched.data.begin() + b * n);
}

template <typename T>
Shape batched_shape(std::int64_t batch, const Shape& per_instance) {
    Shape s{batch};
    s.insert(s.end(), per_instance.begin(), per_instance.end());
    return s;
}

/// out[b,j] = bias[j] + sum_i x[b,i] * W[j,i], fixed ascending-i order.
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    const std::int64_t batch = x.shape[0], in = x.shape[1], out_n = weight.shape[0];
    if (weight.shape[1] != in) {
        throw ShapeError("dense weight " + shape_str(weight.shape) + " does not match input " + shape_str(x.shape));
    }
    Tensor<T> z({batch, out_n});
    for (std::int64_t b = 0; b < batch; ++b) {
        const T* xrow = x.data.data() + b * in;
        T* zrow = z.data.data() + b * out_n;
        for (std::int64_t j = 0; j < out_n; ++j) {
            const T* wrow = weight.data.data() + j * in;
            T acc = bias.data.empty() ? T(0) : bias.data[static_cast<std::size_t>(j)];
            for (std::int64_t i = 0; i < in; ++i) acc += xrow[i] * wrow[i];
            zrow[j] = acc;
        }
    }
    return z;
}

/// Concatenates along per-instance axis `axis` (batch axis excluded).
template <typename T>
Tensor<T> concat_batched(const std::vector<const Tensor<T>*>& parts, std::int64_t axis) {
    const std::int64_t batch = parts[0]->shape[0];
    const int rank = parts[0]->rank() - 1;
    Shape out_inst(parts[0]->shape.begin() + 1, parts[0]->shape.end());
    out_inst[static_cast<std::size_t>(axis)] = 0;
    for (const auto* p : parts) out_inst[static_cast<std::size_t>(axis)] += p->shape[axis + 1];

    // sizes around the concat axis
    std::int64_t lead = 1, trail = 1;
    for (std::int64_t a = 0; a < axis; ++a) lead *= out_inst[static_cast<std::size_t>(a)];
    for (std::int64_t a = axis + 1; a < rank; ++a) trail *= out_inst[static_cast<std::size_t>(a)];

    Tensor<T> out(batched_shape<T>(batch, out_inst));
    const std::int64_t out_axis = out_inst[static_cast<std::size_t>(axis)];
    for (std::int64_t b = 0; b < batch; ++b) {
        std::int64_t axis_off = 0;
        for (const auto* p : parts) {
            const std::int64_t p_axis = p->shape[axis + 1];
            for (std::int64_t l = 0; l < lead; ++l) {
                const T* src = p->data.data() + ((b * lead + l) * p_axis) * trail;
                T* dst = out.data.data() + ((b * lead + l) * out_axis + axis_off) * trail;
                std::copy(src, src + p_axis * trail, dst);
            }
            axis_off += p_axis;
        }
    }
    return out;
}

/// Splits a concat output back into per-part tensors (adjoint of concat_batched).
template <typename T>
std::vector<Tensor<T>> split_batched(const Tensor<T>& whole, std::int64_t axis,
                                     const std::vector<Shape>& part_shapes) {
    const std::int64_t batch = whole.shape[0];
    const int rank = whole.rank() - 1;
    std::int64_t lead = 1, trail = 1;
    for (std::int64_t a = 0; a < axis; ++a) lead *= whole.shape[a + 1];
    for (std::int64_t a = axis + 1; a < rank; ++a) trail *= whole.shape[a + 1];
    const std::int64_t whole_axis = whole.shape[axis + 1];

    std::vector<Tensor<T>> parts;
    std::int64_t axis_off = 0;
    for (const auto& ps : part_shapes) {
        Tensor<T> part(batched_shape<T>(batch, ps));
        const std::int64_t p_axis = ps[static_cast<std::size_t>(axis)];
        for (std::int64_t b = 0; b < batch; ++b) {
            for (std::int64_t l = 0; l < lead; ++l) {
                const T* src = whole.data.data() + ((b * lead + l) * whole_axis + axis_off) * trail;
                T* dst = part.data.data() + ((b * lead + l) * p_axis) * trail;
                std::copy(src, src + p_axis * trail, dst);
            }
        }
        axis_off += p_axis;
        parts.push_back(std::move(part));
    }
    return parts;
}

} // namespace detail

/// Runs the graph on a batch (already channels-first, shapes validated) and
/// records all intermediate values. Deterministic; throws ValueError naming
/// the layer if a non-finite value appears.
template <typename T>
ForwardTrace<T> forward(const ModelGraph& graph, const std::vector<Tensor<T>>& inputs) {
    if (inputs.size() != graph.input_ids.size()) {
        throw ShapeError("forward expects " + std::to_string(graph.input_ids.size()) + " input tensors, got " +
                         std::to_string(inputs.size()));
    }
    ForwardTrace<T> trace;
    trace.graph = &graph;
    trace.batch = inputs.empty() ? 0 : inputs[0].shape[0];
    trace.layers.resize(graph.layers.size());

    for (std::size_t i = 0; i < graph.input_ids.size(); ++i) {
        const auto& layer = graph.layer(graph.input_ids[i]);
        require_shape(inputs[i], detail::batched_shape<T>(trace.batch, layer.input_shape),
                      "input \"" + layer.id + "\"");
    }

    for (std::size_t li = 0; li < graph.layers.size(); ++li) {
        const LayerSpec& layer = graph.layers[li];
        LayerTrace<T>& lt = trace.layers[li];
        const std::int64_t batch = trace.batch;

        switch (layer.kind) {
            case LayerKind::Input: {
                const auto it = std::find(graph.input_ids.begin(), graph.input_ids.end(), layer.id);
                lt.output = inputs[static_cast<std::size_t>(it - graph.input_ids.begin())];
                lt.preact_is_output = true;
                break;
            }
            case LayerKind::Dense: {
                const Tensor<T>& x = trace.output_of(layer.inbound[0]);
                Tensor<T> z = detail::dense_forward(x, layer.weight.template cast<T>(),
                                                    layer.bias.template cast<T>());
                if (layer.activation == Activation::Linear) {
                    lt.output = std::move(z);
                    lt.preact_is_output = true;
                } else {
                    lt.output = activate(layer.activation, z, layer.output_shape[0]);
                    lt.preact = std::move(z);
                }
                break;
            }
            case LayerKind::Conv2D: {
                const Tensor<T>& x = trace.output_of(layer.inbound[0]);
                const Tensor<T> kernel = layer.weight.template cast<T>();
                const Tensor<T> bias = layer.bias.template cast<T>();
                Tensor<T> z(detail::batched_shape<T>(batch, layer.output_shape));
                for (std::int64_t b = 0; b < batch; ++b) {
                    detail::set_instance(z, b, conv2d(detail::instance_slice(x, b), kernel, bias,
                                                      layer.stride, layer.padding));
                }
                if (layer.activation == Activation::Linear) {
                    lt.output = std::move(z);
                    lt.preact_is_output = true;
                } else {
                    lt.output = activate(layer.activation, z, z.size() / batch);
                    lt.preact = std::move(z);
                }
                break;
            }
            case LayerKind::AvgPool2D: {
                const Tensor<T>& x = trace.output_of(layer.inbound[0]);
                lt.output = Tensor<T>(detail::batched_shape<T>(batch, layer.output_shape));
                for (std::int64_t b = 0; b < batch; ++b) {
                    detail::set_instance(lt.output, b,
                                         avgpool2d(detail::instance_slice(x, b), layer.kernel_size, layer.stride));
                }
                lt.preact_is_output = true;
                break;
            }
            case LayerKind::MaxPool2D: {
                const Tensor<T>& x = trace.output_of(layer.inbound[0]);
                lt.output = Tensor<T>(detail::batched_shape<T>(batch, layer.output_shape));
                lt.argmax = Tensor<std::int32_t>(detail::batched_shape<std::int32_t>(batch, layer.output_shape));
                for (std::int64_t b = 0; b < batch; ++b) {
                    auto [vals, idx] = maxpool2d(detail::instance_slice(x, b), layer.kernel_size, layer.stride);
                    detail::set_instance(lt.output, b, vals);
                    detail::set_instance(lt.argmax, b, idx);
                }
                lt.preact_is_output = true;
                break;
            }
            case LayerKind::Flatten: {
                const Tensor<T>& x = trace.output_of(layer.inbound[0]);
                lt.output = x.reshaped(detail::batched_shape<T>(batch, layer.output_shape));
                lt.preact_is_output = true;
                break;
            }
            case LayerKind::Concatenate: {
                std::vector<const Tensor<T>*> parts;
                for (const auto& pred : layer.inbound) parts.push_back(&trace.output_of(pred));
                lt.output = detail::concat_batched(parts, layer.concat_axis);
                lt.preact_is_output = true;
                break;
            }
        }

        if (!lt.output.all_finite() || (!lt.preact_is_output && !lt.preact.all_finite())) {
            throw ValueError("layer \"" + layer.id + "\" produced a non-finite value");
        }
    }
    return trace;
}

template <typename T>
ForwardTrace<T> forward(const ModelGraph& graph, const Dataset& data) {
    std::vector<Tensor<T>> inputs;
    for (const auto& id : graph.input_ids) inputs.push_back(data.tensor_for(id).template cast<T>());
    return forward(graph, inputs);
}

/// Selected output values, [batch x n_selected]. With use_pre_activation the
/// final layer's activation is skipped and the raw z (logit) is returned.
template <typename T>
Tensor<T> select_outputs(const ForwardTrace<T>& trace, const OutputSelection& selection) {
    if (selection.units.empty()) throw ValueError("output selection is empty");
    const std::int64_t batch = trace.batch;
    const std::int64_t n = static_cast<std::int64_t>(selection.units.size());
    Tensor<T> out({batch, n});
    for (std::int64_t u = 0; u < n; ++u) {
        const auto& unit = selection.units[static_cast<std::size_t>(u)];
        const auto& layer = trace.graph->layer(unit.layer_id);
        if (layer.output_shape.size() != 1 || unit.node < 0 || unit.node >= layer.output_shape[0]) {
            throw ValueError("output index " + std::to_string(unit.node + 1) + " out of range for layer \"" +
                             unit.layer_id + "\"");
        }
        const Tensor<T>& vals =
            selection.use_pre_activation ? trace.preact_of(unit.layer_id) : trace.output_of(unit.layer_id);
        const std::int64_t width = layer.output_shape[0];
        for (std::int64_t b = 0; b < batch; ++b) out.data[b * n + u] = vals.data[b * width + unit.node];
    }
    return out;
}

} // namespace nnattr
