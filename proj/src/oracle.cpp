#include "nnattr/oracle.hpp"

#include "nnattr/forward.hpp"
#include "nnattr/rng.hpp"

namespace nnattr::oracle {

std::vector<Tensor<double>> finite_diff_gradient(const ModelGraph& graph, const Dataset& data,
                                                 const OutputSelection& selection, double h) {
    std::vector<Tensor<double>> inputs;
    for (const auto& id : graph.input_ids) inputs.push_back(data.tensor_for(id));
    const std::int64_t batch = data.batch_size();
    const std::int64_t n_sel = static_cast<std::int64_t>(selection.units.size());

    std::vector<Tensor<double>> grads;
    for (std::size_t ii = 0; ii < inputs.size(); ++ii) {
        Shape s = inputs[ii].shape;
        s.push_back(n_sel);
        grads.emplace_back(s);
    }

    for (std::size_t ii = 0; ii < inputs.size(); ++ii) {
        const std::int64_t per_inst = inputs[ii].size() / batch;
        for (std::int64_t e = 0; e < per_inst; ++e) {
            // perturb entry e of every instance at once; instances are independent
            std::vector<Tensor<double>> plus = inputs;
            std::vector<Tensor<double>> minus = inputs;
            for (std::int64_t b = 0; b < batch; ++b) {
                plus[ii].data[b * per_inst + e] += h;
                minus[ii].data[b * per_inst + e] -= h;
            }
            const Tensor<double> f_plus = select_outputs(forward(graph, plus), selection);
            const Tensor<double> f_minus = select_outputs(forward(graph, minus), selection);
            for (std::int64_t b = 0; b < batch; ++b) {
                for (std::int64_t u = 0; u < n_sel; ++u) {
                    grads[ii].data[(b * per_inst + e) * n_sel + u] =
                        (f_plus.data[b * n_sel + u] - f_minus.data[b * n_sel + u]) / (2.0 * h);
                }
            }
        }
    }
    return grads;
}

namespace {

struct DenseChain {
    // weights[l][j][i], biases[l][j] (empty when absent), activation per layer
    std::vector<std::vector<std::vector<double>>> weights;
    std::vector<std::vector<double>> biases;
    std::vector<Activation> activations;
};

DenseChain materialize_dense_chain(const ModelGraph& graph) {
    DenseChain chain;
    if (graph.input_ids.size() != 1 || graph.output_ids.size() != 1) {
        throw ValueError("naive_lrp supports single-input single-output graphs");
    }
    for (const auto& layer : graph.layers) {
        if (layer.kind == LayerKind::Input) continue;
        if (layer.kind != LayerKind::Dense) {
            throw ValueError("naive_lrp supports Dense layers only, got " + to_string(layer.kind));
        }
        const std::int64_t out_n = layer.weight.shape[0], in_n = layer.weight.shape[1];
        std::vector<std::vector<double>> w(static_cast<std::size_t>(out_n),
                                           std::vector<double>(static_cast<std::size_t>(in_n)));
        for (std::int64_t j = 0; j < out_n; ++j) {
            for (std::int64_t i = 0; i < in_n; ++i) {
                w[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = layer.weight.data[j * in_n + i];
            }
        }
        chain.weights.push_back(std::move(w));
        std::vector<double> b;
        if (layer.has_bias()) b.assign(layer.bias.data.begin(), layer.bias.data.end());
        chain.biases.push_back(std::move(b));
        chain.activations.push_back(layer.activation);
    }
    return chain;
}

double sigma(Activation a, double z) {
    switch (a) {
        case Activation::Linear: return z;
        case Activation::Relu: return z > 0 ? z : 0;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
        default: throw ValueError("naive_lrp: unsupported activation");
    }
}

} // namespace

Tensor<double> naive_lrp(const ModelGraph& graph, const Dataset& data, const OutputSelection& selection,
                         LrpRule rule, double param) {
    const DenseChain chain = materialize_dense_chain(graph);
    const std::int64_t batch = data.batch_size();
    const Tensor<double>& input = data.tensors[0];
    const std::int64_t p = input.size() / batch;
    const std::int64_t n_sel = static_cast<std::int64_t>(selection.units.size());
    const std::size_t n_layers = chain.weights.size();

    Tensor<double> result({batch, p, n_sel});
    for (std::int64_t b = 0; b < batch; ++b) {
        // forward with plain loops
        std::vector<std::vector<double>> xs(n_layers + 1);
        std::vector<std::vector<double>> zs(n_layers);
        xs[0].assign(input.data.begin() + b * p, input.data.begin() + (b + 1) * p);
        for (std::size_t l = 0; l < n_layers; ++l) {
            const auto& w = chain.weights[l];
            zs[l].resize(w.size());
            xs[l + 1].resize(w.size());
            for (std::size_t j = 0; j < w.size(); ++j) {
                double z = chain.biases[l].empty() ? 0.0 : chain.biases[l][j];
                for (std::size_t i = 0; i < w[j].size(); ++i) z += xs[l][i] * w[j][i];
                zs[l][j] = z;
                xs[l + 1][j] = sigma(chain.activations[l], z);
            }
        }

        for (std::int64_t u = 0; u < n_sel; ++u) {
            const auto& unit = selection.units[static_cast<std::size_t>(u)];
            // seed with the explained output value
            std::vector<double> upper(zs[n_layers - 1].size(), 0.0);
            const auto node = static_cast<std::size_t>(unit.node);
            upper[node] = selection.use_pre_activation ? zs[n_layers - 1][node] : xs[n_layers][node];

            for (std::size_t l = n_layers; l-- > 0;) {
                const auto& w = chain.weights[l];
                std::vector<double> lower(xs[l].size(), 0.0);
                for (std::size_t j = 0; j < w.size(); ++j) {
                    if (upper[j] == 0.0) continue;
                    switch (rule) {
                        case LrpRule::Simple: {
                            const double z = zs[l][j];
                            if (z == 0.0) throw ValueError("naive_lrp: zero denominator in simple rule");
                            for (std::size_t i = 0; i < lower.size(); ++i) {
                                lower[i] += xs[l][i] * w[j][i] / z * upper[j];
                            }
                            break;
                        }
                        case LrpRule::Epsilon: {
                            const double z = zs[l][j];
                            const double denom = z + (z < 0 ? -param : param);
                            for (std::size_t i = 0; i < lower.size(); ++i) {
                                lower[i] += xs[l][i] * w[j][i] / denom * upper[j];
                            }
                            break;
                        }
                        case LrpRule::AlphaBeta: {
                            const double alpha = param, beta = 1.0 - param;
                            double zpos = 0.0, zneg = 0.0;
                            if (!chain.biases[l].empty()) {
                                (chain.biases[l][j] > 0 ? zpos : zneg) += chain.biases[l][j];
                            }
                            for (std::size_t i = 0; i < lower.size(); ++i) {
                                const double lp = xs[l][i] * w[j][i];
                                (lp > 0 ? zpos : zneg) += lp;
                            }
                            for (std::size_t i = 0; i < lower.size(); ++i) {
                                const double lp = xs[l][i] * w[j][i];
                                double msg = 0.0;
                                if (lp > 0 && zpos != 0.0) msg = alpha * lp / zpos;
                                if (lp <= 0 && zneg != 0.0) msg = beta * lp / zneg;
                                lower[i] += msg * upper[j];
                            }
                            break;
                        }
                    }
                }
                upper = std::move(lower);
            }
            for (std::int64_t i = 0; i < p; ++i) {
                result.data[(b * p + i) * n_sel + u] = upper[static_cast<std::size_t>(i)];
            }
        }
    }
    return result;
}

namespace {

Tensor<double> normal_tensor(Shape shape, NormalSampler& rng, double scale) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data) v = rng.next() * scale;
    return t;
}

/// Margin that keeps finite-difference stencils on one side of every relu
/// kink and maxpool argmax flip (perturbations move pre-activations by at
/// most ~1e-3 for unit-scale weights and h = 1e-3).
constexpr double kKinkMargin = 2e-3;

bool instance_is_smooth(const ModelGraph& g, const Tensor<double>& instance) {
    Tensor<double> batched = instance.reshaped([&] {
        Shape s{1};
        s.insert(s.end(), instance.shape.begin(), instance.shape.end());
        return s;
    }());
    const auto trace = forward<double>(g, std::vector<Tensor<double>>{batched});
    for (const auto& layer : g.layers) {
        if (layer.is_linear_kind() && layer.activation == Activation::Relu) {
            for (double z : trace.preact_of(layer.id).data) {
                if (std::abs(z) < kKinkMargin) return false;
            }
        }
        if (layer.kind == LayerKind::MaxPool2D) {
            const auto& in = trace.output_of(layer.inbound[0]);
            const Shape& is = g.layer(layer.inbound[0]).output_shape;
            const std::int64_t c = is[0], h = is[1], w = is[2];
            const auto kh = layer.kernel_size[0], kw = layer.kernel_size[1];
            const auto sh = layer.stride[0], sw = layer.stride[1];
            for (std::int64_t ci = 0; ci < c; ++ci) {
                for (std::int64_t i = 0; i + kh <= h; i += sh) {
                    for (std::int64_t j = 0; j + kw <= w; j += sw) {
                        double best = -1e300, second = -1e300;
                        for (std::int64_t a = 0; a < kh; ++a) {
                            for (std::int64_t b = 0; b < kw; ++b) {
                                const double v = in.data[(ci * h + i + a) * w + j + b];
                                if (v > best) {
                                    second = best;
                                    best = v;
                                } else if (v > second) {
                                    second = v;
                                }
                            }
                        }
                        if (best - second < kKinkMargin) return false;
                    }
                }
            }
        }
    }
    return true;
}

/// Standard-normal batch, resampled instance-wise until the model is locally
/// smooth around each instance. Deterministic for a given sampler state.
Tensor<double> smooth_normal_batch(const ModelGraph& g, std::int64_t n_instances, NormalSampler& rng) {
    const Shape& inst_shape = g.layer(g.input_ids[0]).input_shape;
    Shape batch_shape{n_instances};
    batch_shape.insert(batch_shape.end(), inst_shape.begin(), inst_shape.end());
    Tensor<double> batch(batch_shape);
    const std::int64_t per = numel(inst_shape);
    for (std::int64_t b = 0; b < n_instances; ++b) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            Tensor<double> inst = normal_tensor(inst_shape, rng, 1.0);
            if (instance_is_smooth(g, inst)) {
                std::copy(inst.data.begin(), inst.data.end(), batch.data.begin() + b * per);
                break;
            }
            if (attempt == 999) throw ValueError("grid data generation failed to find a smooth instance");
        }
    }
    return batch;
}

} // namespace

std::vector<GridEntry> architecture_grid(std::uint64_t seed) {
    std::vector<GridEntry> grid;
    const std::int64_t n_instances = 32;
    int arch_index = 0;

    auto next_sampler = [&]() {
        return NormalSampler(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(++arch_index));
    };
    auto act_name = [](Activation a) { return a == Activation::Relu ? std::string("relu") : std::string("tanh"); };

    // dense family: 10 -> 32 -> C
    for (Activation act : {Activation::Relu, Activation::Tanh}) {
        for (bool bias : {true, false}) {
            for (std::int64_t n_out : {std::int64_t{1}, std::int64_t{5}}) {
                NormalSampler rng = next_sampler();
                ModelGraph g;
                LayerSpec in;
                in.id = "in";
                in.kind = LayerKind::Input;
                in.input_shape = {10};
                in.output_shape = {10};
                LayerSpec hidden;
                hidden.id = "hidden";
                hidden.kind = LayerKind::Dense;
                hidden.inbound = {"in"};
                hidden.activation = act;
                hidden.weight = normal_tensor({32, 10}, rng, 1.0 / std::sqrt(10.0));
                if (bias) hidden.bias = normal_tensor({32}, rng, 1.0 / std::sqrt(10.0));
                hidden.output_shape = {32};
                LayerSpec out;
                out.id = "out";
                out.kind = LayerKind::Dense;
                out.inbound = {"hidden"};
                out.activation = Activation::Linear;
                out.weight = normal_tensor({n_out, 32}, rng, 1.0 / std::sqrt(32.0));
                if (bias) out.bias = normal_tensor({n_out}, rng, 1.0 / std::sqrt(32.0));
                out.output_shape = {n_out};
                g.layers = {in, hidden, out};
                g.input_ids = {"in"};
                g.output_ids = {"out"};
                for (std::size_t i = 0; i < g.layers.size(); ++i) g.index_of[g.layers[i].id] = i;
                g.input_names = {{{"X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8", "X9", "X10"}}};
                std::vector<std::string> onames;
                for (std::int64_t c = 1; c <= n_out; ++c) onames.push_back("Y" + std::to_string(c));
                g.output_names = {onames};

                GridEntry entry;
                entry.name = "dense_" + act_name(act) + (bias ? "_bias" : "_nobias") + "_c" + std::to_string(n_out);
                entry.graph = std::move(g);
                entry.has_bias = bias;
                entry.is_dense = true;
                entry.activation = act;
                entry.data.input_ids = {"in"};
                entry.data.tensors.push_back(smooth_normal_batch(entry.graph, n_instances, rng));
                for (std::int64_t i = 1; i <= n_instances; ++i) {
                    entry.data.instance_ids.push_back(std::to_string(i));
                }
                grid.push_back(std::move(entry));
            }
        }
    }

    // conv family: 3x10x10 -> conv(5 filters 4x4) -> pool variant -> flatten -> C
    enum class PoolKind { None, Avg, Max };
    for (Activation act : {Activation::Relu, Activation::Tanh}) {
        for (bool bias : {true, false}) {
            for (PoolKind pool : {PoolKind::None, PoolKind::Avg, PoolKind::Max}) {
                for (std::int64_t n_out : {std::int64_t{1}, std::int64_t{5}}) {
                    NormalSampler rng = next_sampler();
                    ModelGraph g;
                    LayerSpec in;
                    in.id = "in";
                    in.kind = LayerKind::Input;
                    in.input_shape = {3, 10, 10};
                    in.output_shape = {3, 10, 10};

                    LayerSpec conv;
                    conv.id = "conv";
                    conv.kind = LayerKind::Conv2D;
                    conv.inbound = {"in"};
                    conv.activation = act;
                    conv.weight = normal_tensor({5, 3, 4, 4}, rng, 1.0 / std::sqrt(3.0 * 4 * 4));
                    if (bias) conv.bias = normal_tensor({5}, rng, 1.0 / std::sqrt(3.0 * 4 * 4));
                    conv.kernel_size = {4, 4};
                    conv.stride = pool == PoolKind::None ? std::array<std::int64_t, 2>{2, 2}
                                                         : std::array<std::int64_t, 2>{1, 1};
                    conv.padding = Padding::Valid;
                    const std::int64_t side = pool == PoolKind::None ? 4 : 7;
                    conv.output_shape = {5, side, side};

                    std::vector<LayerSpec> layers = {in, conv};
                    std::string flat_pred = "conv";
                    Shape flat_in = conv.output_shape;
                    if (pool != PoolKind::None) {
                        LayerSpec pl;
                        pl.id = "pool";
                        pl.kind = pool == PoolKind::Avg ? LayerKind::AvgPool2D : LayerKind::MaxPool2D;
                        pl.inbound = {"conv"};
                        pl.kernel_size = {3, 3};
                        pl.stride = {3, 3};
                        pl.output_shape = {5, 2, 2};
                        layers.push_back(pl);
                        flat_pred = "pool";
                        flat_in = pl.output_shape;
                    }
                    LayerSpec flat;
                    flat.id = "flat";
                    flat.kind = LayerKind::Flatten;
                    flat.inbound = {flat_pred};
                    flat.output_shape = {numel(flat_in)};
                    layers.push_back(flat);

                    LayerSpec out;
                    out.id = "out";
                    out.kind = LayerKind::Dense;
                    out.inbound = {"flat"};
                    out.activation = Activation::Linear;
                    const std::int64_t flat_n = flat.output_shape[0];
                    out.weight = normal_tensor({n_out, flat_n}, rng, 1.0 / std::sqrt(static_cast<double>(flat_n)));
                    if (bias) out.bias = normal_tensor({n_out}, rng, 1.0 / std::sqrt(static_cast<double>(flat_n)));
                    out.output_shape = {n_out};
                    layers.push_back(out);

                    g.layers = std::move(layers);
                    g.input_ids = {"in"};
                    g.output_ids = {"out"};
                    for (std::size_t i = 0; i < g.layers.size(); ++i) g.index_of[g.layers[i].id] = i;
                    AxisNames in_names;
                    for (auto [prefix, n] : {std::pair<char, std::int64_t>{'C', 3}, {'H', 10}, {'W', 10}}) {
                        std::vector<std::string> axis;
                        for (std::int64_t i = 1; i <= n; ++i) axis.push_back(std::string(1, prefix) + std::to_string(i));
                        in_names.push_back(std::move(axis));
                    }
                    g.input_names = {in_names};
                    std::vector<std::string> onames;
                    for (std::int64_t c = 1; c <= n_out; ++c) onames.push_back("Y" + std::to_string(c));
                    g.output_names = {onames};

                    const char* pool_name = pool == PoolKind::None ? "stride" : (pool == PoolKind::Avg ? "avg" : "max");
                    GridEntry entry;
                    entry.name = "conv_" + act_name(act) + (bias ? "_bias" : "_nobias") + "_" + pool_name + "_c" +
                                 std::to_string(n_out);
                    entry.graph = std::move(g);
                    entry.has_bias = bias;
                    entry.is_dense = false;
                    entry.activation = act;
                    entry.data.input_ids = {"in"};
                    entry.data.tensors.push_back(smooth_normal_batch(entry.graph, n_instances, rng));
                    for (std::int64_t i = 1; i <= n_instances; ++i) {
                        entry.data.instance_ids.push_back(std::to_string(i));
                    }
                    grid.push_back(std::move(entry));
                }
            }
        }
    }
    return grid;
}

} // namespace nnattr::oracle
