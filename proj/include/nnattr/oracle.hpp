#pragma once

// Brute-force reference implementations used to validate the engine. These
// share no code with the engine's backward passes: plain loops only.

#include <cstdint>
#include <string>
#include <vector>

#include "nnattr/attribution.hpp"
#include "nnattr/model.hpp"

namespace nnattr::oracle {

/// Central finite differences (f(x + h e_i) - f(x - h e_i)) / 2h of every
/// selected output w.r.t. every input entry, double precision.
/// Returns one tensor per input layer, [batch x input dims x n_selected].
std::vector<Tensor<double>> finite_diff_gradient(const ModelGraph& graph, const Dataset& data,
                                                 const OutputSelection& selection, double h = 1e-3);

/// Per-neuron loop evaluation of the chosen LRP relevance message for graphs
/// made of Dense layers only. Returns [batch x features x n_selected].
Tensor<double> naive_lrp(const ModelGraph& graph, const Dataset& data, const OutputSelection& selection,
                         LrpRule rule, double param);

struct GridEntry {
    std::string name;
    ModelGraph graph;
    Dataset data;
    bool has_bias = false;
    bool is_dense = false;
    Activation activation = Activation::Relu;
};

/// Deterministic validation grid: 32 architectures (8 dense, 24 convolutional)
/// with normal weights and a 32-instance standard-normal dataset each.
std::vector<GridEntry> architecture_grid(std::uint64_t seed);

} // namespace nnattr::oracle
