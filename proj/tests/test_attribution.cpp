#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nnattr/attribution.hpp"
#include "nnattr/model_io.hpp"
#include "nnattr/oracle.hpp"
#include "testutil.hpp"

using namespace nnattr;

namespace {

AttributionConfig dbl_config(Method m) {
    AttributionConfig cfg;
    cfg.method = m;
    cfg.precision = PrecisionMode::Double;
    return cfg;
}

double result_sum(const RelevanceResult& r, std::int64_t b, std::int64_t u) {
    double total = 0;
    const auto n_out = r.n_outputs();
    const auto batch = r.batch_size();
    for (const auto& t : r.values) {
        const std::int64_t flat = t.size() / (batch * n_out);
        for (std::int64_t e = 0; e < flat; ++e) total += t.data[(b * flat + e) * n_out + u];
    }
    return total;
}

} // namespace

TEST_CASE("gradient of an identity dense layer is one-hot") {
    auto g = parse_model(R"({
      "format_version": 1, "inputs": ["in"], "outputs": ["out"],
      "layers": [
        {"id": "in", "kind": "Input", "shape": [3]},
        {"id": "out", "kind": "Dense", "inbound": ["in"], "weight": [[1,0,0],[0,1,0],[0,0,1]]}
      ]
    })");
    auto data = testutil::single_instance(g, {0.4, -0.3, 2.0});
    auto res = run_attribution(g, data, dbl_config(Method::Gradient));
    // values: [1 x 3 x 3 outputs]
    for (std::int64_t i = 0; i < 3; ++i) {
        for (std::int64_t u = 0; u < 3; ++u) {
            CHECK(res.values[0].data[i * 3 + u] == (i == u ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("gradient of a single tanh unit at zero is one") {
    auto g = parse_model(R"({
      "format_version": 1, "inputs": ["in"], "outputs": ["out"],
      "layers": [
        {"id": "in", "kind": "Input", "shape": [1]},
        {"id": "out", "kind": "Dense", "inbound": ["in"], "weight": [[1]], "activation": "tanh"}
      ]
    })");
    auto data = testutil::single_instance(g, {0.0});
    AttributionConfig cfg = dbl_config(Method::Gradient);
    cfg.selection.use_pre_activation = false; // differentiate through the tanh
    auto res = run_attribution(g, data, cfg);
    CHECK(res.values[0].data[0] == doctest::Approx(1.0));
}

TEST_CASE("gradient matches central finite differences on a tanh net") {
    auto g = testutil::random_dense_model(10, 32, 3, "tanh", true);
    auto data = testutil::random_batch(g, 4);
    auto res = run_attribution(g, data, dbl_config(Method::Gradient));
    auto fd = oracle::finite_diff_gradient(g, data, select_all_outputs(g));
    CHECK(testutil::max_abs_diff(res.values[0], fd[0]) <= 1e-6);
}

TEST_CASE("relu subgradient at zero is zero, not an error") {
    auto g = parse_model(R"({
      "format_version": 1, "inputs": ["in"], "outputs": ["out"],
      "layers": [
        {"id": "in", "kind": "Input", "shape": [1]},
        {"id": "out", "kind": "Dense", "inbound": ["in"], "weight": [[1]], "activation": "relu"}
      ]
    })");
    auto data = testutil::single_instance(g, {0.0});
    AttributionConfig cfg = dbl_config(Method::Gradient);
    cfg.selection.use_pre_activation = false;
    auto res = run_attribution(g, data, cfg);
    CHECK(res.values[0].data[0] == 0.0);
}

TEST_CASE("smoothgrad with zero noise equals the gradient bit for bit") {
    auto g = testutil::random_dense_model(6, 8, 2, "tanh", true);
    auto data = testutil::random_batch(g, 3);
    for (PrecisionMode prec : {PrecisionMode::Single, PrecisionMode::Double}) {
        AttributionConfig grad = dbl_config(Method::Gradient);
        grad.precision = prec;
        AttributionConfig smooth = dbl_config(Method::SmoothGrad);
        smooth.precision = prec;
        smooth.noise_level = 0.0;
        smooth.n = 7;
        auto r1 = run_attribution(g, data, grad);
        auto r2 = run_attribution(g, data, smooth);
        CHECK(r1.values[0].data == r2.values[0].data);
    }
}

TEST_CASE("smoothgrad equals the gradient on an affine model for any noise") {
    auto g = testutil::random_dense_model(5, 4, 2, "linear", true);
    auto data = testutil::random_batch(g, 2);
    auto grad = run_attribution(g, data, dbl_config(Method::Gradient));
    for (double lambda : {0.05, 0.5}) {
        for (std::uint64_t seed : {1ULL, 99ULL}) {
            AttributionConfig cfg = dbl_config(Method::SmoothGrad);
            cfg.noise_level = lambda;
            cfg.n = 13;
            cfg.seed = seed;
            auto res = run_attribution(g, data, cfg);
            CHECK(testutil::max_abs_diff(grad.values[0], res.values[0]) <= 1e-12);
        }
    }
}

TEST_CASE("smoothgrad agrees with a large-sample Monte-Carlo oracle") {
    auto g = testutil::random_dense_model(3, 8, 1, "tanh", true);
    auto data = testutil::random_batch(g, 1);

    // oracle: mean and sd of per-sample gradients over many perturbations
    const int big_n = 50000;
    AttributionConfig probe = dbl_config(Method::Gradient);
    const double lambda = 0.1;
    double lo = data.tensors[0].data[0], hi = lo;
    for (double v : data.tensors[0].data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double sigma = lambda * (hi - lo);
    std::mt19937_64 rng(424242);
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<double> mean(3, 0.0), m2(3, 0.0);
    for (int k = 0; k < big_n; ++k) {
        Dataset pert = data;
        for (auto& v : pert.tensors[0].data) v += noise(rng);
        auto gres = run_attribution(g, pert, probe);
        for (int i = 0; i < 3; ++i) {
            const double x = gres.values[0].data[i];
            const double d = x - mean[i];
            mean[i] += d / (k + 1);
            m2[i] += d * (x - mean[i]);
        }
    }

    AttributionConfig cfg = dbl_config(Method::SmoothGrad);
    cfg.noise_level = lambda;
    cfg.n = 500;
    cfg.seed = 7;
    auto res = run_attribution(g, data, cfg);
    for (int i = 0; i < 3; ++i) {
        const double sd = std::sqrt(m2[i] / (big_n - 1));
        const double se = sd / std::sqrt(500.0);
        CHECK(std::abs(res.values[0].data[i] - mean[i]) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("gradient times input decomposes a linear bias-free model") {
    auto g = parse_model(R"({
      "format_version": 1, "inputs": ["in"], "outputs": ["out"],
      "layers": [
        {"id": "in", "kind": "Input", "shape": [3]},
        {"id": "out", "kind": "Dense", "inbound": ["in"], "weight": [[0.5,-1.0,2.0]]}
      ]
    })");
    auto data = testutil::single_instance(g, {1.0, 2.0, 3.0});
    AttributionConfig cfg = dbl_config(Method::Gradient);
    cfg.times_input = true;
    auto res = run_attribution(g, data, cfg);
    CHECK(res.values[0].data[0] == doctest::Approx(0.5));
    CHECK(res.values[0].data[1] == doctest::Approx(-2.0));
    CHECK(res.values[0].data[2] == doctest::Approx(6.0));
    CHECK(result_sum(res, 0, 0) == doctest::Approx(0.5 - 2.0 + 6.0)); // equals the prediction

    auto zeros = testutil::single_instance(g, {0.0, 0.0, 0.0});
    auto rz = run_attribution(g, zeros, cfg);
    for (double v : rz.values[0].data) CHECK(v == 0.0);
}

TEST_CASE("gradient times input equals zero-baseline rescale DeepLift on bias-free relu nets") {
    auto g = testutil::random_dense_model(6, 12, 2, "relu", false);
    auto data = testutil::random_batch(g, 5);
    AttributionConfig gi = dbl_config(Method::Gradient);
    gi.times_input = true;
    AttributionConfig dl = dbl_config(Method::DeepLift);
    auto r1 = run_attribution(g, data, gi);
    auto r2 = run_attribution(g, data, dl);
    CHECK(testutil::max_abs_diff(r1.values[0], r2.values[0]) <= 1e-6);
}

TEST_CASE("LRP simple rule on a single linear layer telescopes to x*w") {
    auto g = parse_model(R"({
      "format_version": 1, "inputs": ["in"], "outputs": ["out"],
      "layers": [
        {"id": "in", "kind": "Input", "shape": [2]},
        {"id": "out", "kind": "Dense", "inbound": ["in"], "weight": [[0.25,0.75]]}
      ]
    })");
    auto data = testutil::single_instance(g, {2.0, -1.0});
    auto res = run_attribution(g, data, dbl_config(Method::Lrp));
    CHECK(res.values[0].data[0] == doctest::Approx(2.0 * 0.25));
    CHECK(res.values[0].data[1] == doctest::Approx(-1.0 * 0.75));
}

TEST_CASE("LRP alpha-beta on the unit-weight bias model") {
    auto g = testutil::unit_bias_model();
    auto data = testutil::single_instance(g, {1.0});
    AttributionConfig cfg = dbl_config(Method::Lrp);
    cfg.rule_name[LayerKind::Dense] = LrpRule::AlphaBeta;
    cfg.rule_param[LayerKind::Dense] = 1.0;
    CHECK(run_attribution(g, data, cfg).values[0].data[0] == doctest::Approx(0.75).epsilon(1e-9));
    cfg.rule_param[LayerKind::Dense] = 2.0;
    CHECK(run_attribution(g, data, cfg).values[0].data[0] == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("LRP epsilon rule on the unit-weight bias model") {
    auto g = testutil::unit_bias_model();
    auto data = testutil::single_instance(g, {1.0});
    AttributionConfig cfg = dbl_config(Method::Lrp);
    cfg.rule_name[LayerKind::Dense] = LrpRule::Epsilon;
    cfg.rule_param[LayerKind::Dense] = 0.01;
    CHECK(run_attribution(g, data, cfg).values[0].data[0] == doctest::Approx(0.75 / 0.76).epsilon(1e-12));
}

TEST_CASE("LRP epsilon defaults to 0.01 when no parameter given") {
    auto g = testutil::unit_bias_model();
    auto data = testutil::single_instance(g, {1.0});
    AttributionConfig cfg = dbl_config(Method::Lrp);
    cfg.rule_name[LayerKind::Dense] = LrpRule::Epsilon;
    CHECK(run_attribution(g, data, cfg).values[0].data[0] == doctest::Approx(0.75 / 0.76).epsilon(1e-12));
}

TEST_CASE("LRP simple conservation on bias-free nets") {
    for (const char* act : {"relu", "tanh"}) {
        auto g = testutil::random_dense_model(8, 16, 3, act, false);
        auto data = testutil::random_batch(g, 6);
        auto res = run_attribution(g, data, dbl_config(Method::Lrp));
        auto y = select_outputs(forward<double>(g, data), select_all_outputs(g));
        for (std::int64_t b = 0; b < 6; ++b) {
            for (std::int64_t u = 0; u < 3; ++u) {
                const double target = y.data[b * 3 + u];
                CHECK(std::abs(result_sum(res, b, u) - target) <= 1e-5 * std::max(1.0, std::abs(target)));
            }
        }
    }
}

TEST_CASE("per-layer message identities on a biased two-neuron layer") {
    // weights [2x2], bias, single instance
    Tensor<double> w({2, 2}, {0.8, -0.4, 0.3, 0.9});
    Tensor<double> bias({2}, {0.2, -0.5});
    Tensor<double> x({1, 2}, {1.2, -0.7});
    Tensor<double> upper({1, 2}, {0.6, 1.1});

    // bias-free: full conservation per layer
    auto lower_nb = lrp_message_simple(w, Tensor<double>(), x, upper);
    CHECK(lower_nb.data[0] + lower_nb.data[1] == doctest::Approx(upper.data[0] + upper.data[1]).epsilon(1e-12));

    // biased: the bias absorbs R_j * b_j / z_j per neuron
    auto lower = lrp_message_simple(w, bias, x, upper);
    double expect = 0;
    for (int j = 0; j < 2; ++j) {
        double z = bias.data[j];
        for (int i = 0; i < 2; ++i) z += x.data[i] * w.data[j * 2 + i];
        expect += upper.data[j] * (z - bias.data[j]) / z;
    }
    CHECK(lower.data[0] + lower.data[1] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("alpha=1 equals the simple rule when everything is non-negative") {
    Tensor<double> w({2, 3}, {0.5, 0.1, 0.9, 0.2, 0.7, 0.3});
    Tensor<double> bias({2}, {0.05, 0.4});
    Tensor<double> x({1, 3}, {0.3, 1.2, 0.8});
    Tensor<double> upper({1, 2}, {1.0, 0.25});
    auto simple = lrp_message_simple(w, bias, x, upper);
    auto ab = lrp_message_alpha_beta(w, bias, x, upper, 1.0);
    CHECK(testutil::max_abs_diff(simple, ab) <= 1e-6);
}

TEST_CASE("epsilon rule approaches the simple rule as epsilon vanishes") {
    auto g = testutil::random_dense_model(5, 7, 2, "tanh", true, 0.9);
    auto data = testutil::random_batch(g, 3);
    // keep only instances where all pre-activations are comfortably nonzero
    auto trace = forward<double>(g, data);
    bool healthy = true;
    for (const char* lid : {"hidden", "out"}) {
        for (double z : trace.preact_of(lid).data) healthy &= std::abs(z) > 0.1;
    }
    if (healthy) {
        auto simple = run_attribution(g, data, dbl_config(Method::Lrp));
        AttributionConfig cfg = dbl_config(Method::Lrp);
        cfg.rule_name[LayerKind::Dense] = LrpRule::Epsilon;
        cfg.rule_param[LayerKind::Dense] = 1e-8;
        auto eps = run_attribution(g, data, cfg);
        CHECK(testutil::max_abs_diff(simple.values[0], eps.values[0]) <= 1e-5);
    }
}

TEST_CASE("simple rule reports a zero denominator and advises the epsilon rule") {
    // sigmoid(0) = 0.5: nonzero relevance must flow through z = 0
    auto g = parse_model(R"({
      "format_version": 1, "inputs": ["in"], "outputs": ["out"],
      "layers": [
        {"id": "in", "kind": "Input", "shape": [2]},
        {"id": "out", "kind": "Dense", "inbound": ["in"], "weight": [[1,-1]], "activation": "sigmoid"}
      ]
    })");
    auto data = testutil::single_instance(g, {1.0, 1.0});
    AttributionConfig cfg = dbl_config(Method::Lrp);
    cfg.selection.use_pre_activation = false;
    CHECK_THROWS_WITH_AS(run_attribution(g, data, cfg), doctest::Contains("epsilon"), ValueError);

    // zero relevance through a zero denominator is benign: nothing to distribute
    auto pre = run_attribution(g, data, dbl_config(Method::Lrp));
    CHECK(pre.values[0].data[0] == 0.0);
    CHECK(pre.values[0].data[1] == 0.0);
}

TEST_CASE("unmapped layer kinds fall back to the simple rule") {
    auto grid = oracle::architecture_grid(3);
    const auto& entry = grid[8]; // first conv entry
    REQUIRE(!entry.is_dense);
    AttributionConfig a = dbl_config(Method::Lrp);
    a.rule_name[LayerKind::Conv2D] = LrpRule::Epsilon;
    a.rule_param[LayerKind::Conv2D] = 0.01;
    AttributionConfig b = a;
    b.rule_name[LayerKind::Dense] = LrpRule::Simple;
    b.rule_name[LayerKind::AvgPool2D] = LrpRule::Simple;
    auto ra = run_attribution(entry.graph, entry.data, a);
    auto rb = run_attribution(entry.graph, entry.data, b);
    CHECK(ra.values[0].data == rb.values[0].data);
}

TEST_CASE("DeepLift on a single relu unit in the linear regime") {
    auto g = parse_model(R"({
      "format_version": 1, "inputs": ["in"], "outputs": ["out"],
      "layers": [
        {"id": "in", "kind": "Input", "shape": [1]},
        {"id": "out", "kind": "Dense", "inbound": ["in"], "weight": [[1]], "activation": "relu"}
      ]
    })");
    auto data = testutil::single_instance(g, {2.0});
    AttributionConfig cfg = dbl_config(Method::DeepLift);
    cfg.selection.use_pre_activation = false;
    auto res = run_attribution(g, data, cfg);
    CHECK(res.values[0].data[0] == doctest::Approx(2.0)); // multiplier 1, R = delta-y
}

TEST_CASE("reveal-cancel multipliers: worked relu example") {
    Tensor<double> z_ref({1}, {0.0});
    Tensor<double> dz_pos({1}, {1.0});
    Tensor<double> dz_neg({1}, {-0.5});
    auto [mp, mn] = multiplier_reveal_cancel(z_ref, dz_pos, dz_neg, Activation::Relu);
    CHECK(mp.data[0] == doctest::Approx(0.25));
    CHECK(mn.data[0] == doctest::Approx(-0.5));
    const double dsigma = activate_scalar(Activation::Relu, 0.5) - activate_scalar(Activation::Relu, 0.0);
    CHECK(mp.data[0] * 1.0 + mn.data[0] * -0.5 == doctest::Approx(dsigma));
}

TEST_CASE("reveal-cancel end to end reproduces the worked example") {
    auto g = parse_model(R"({
      "format_version": 1, "inputs": ["in"], "outputs": ["out"],
      "layers": [
        {"id": "in", "kind": "Input", "shape": [2]},
        {"id": "out", "kind": "Dense", "inbound": ["in"], "weight": [[1,1]], "activation": "relu"}
      ]
    })");
    auto data = testutil::single_instance(g, {1.0, -0.5});
    AttributionConfig cfg = dbl_config(Method::DeepLift);
    cfg.deeplift_rule = DeepLiftRule::RevealCancel;
    cfg.selection.use_pre_activation = false;
    auto res = run_attribution(g, data, cfg);
    CHECK(res.values[0].data[0] == doctest::Approx(0.25)); // m+ routed, 0.25 * 1
    CHECK(res.values[0].data[1] == doctest::Approx(0.25)); // m- routed, -0.5 * -0.5
    CHECK(result_sum(res, 0, 0) == doctest::Approx(0.5));  // = f(x) - f(0)
}

TEST_CASE("DeepLift with x equal to the reference gives zero everywhere") {
    auto g = testutil::random_dense_model(4, 6, 2, "tanh", true);
    auto data = testutil::random_batch(g, 2);
    AttributionConfig cfg = dbl_config(Method::DeepLift);
    cfg.x_ref = data;
    auto res = run_attribution(g, data, cfg);
    for (double v : res.values[0].data) CHECK(v == 0.0);
}

TEST_CASE("rescale multiplier: identity activation and gradient fallback") {
    Tensor<double> z({3}, {0.5, -0.2, 1.0});
    Tensor<double> z_ref({3}, {0.1, 0.3, 1.0});
    auto m_id = multiplier_rescale(z, z_ref, Activation::Linear);
    for (double v : m_id.data) CHECK(v == doctest::Approx(1.0));

    auto m_tanh = multiplier_rescale(z, z_ref, Activation::Tanh);
    // third entry has dz == 0 -> derivative fallback
    CHECK(m_tanh.data[2] == doctest::Approx(activate_derivative(Activation::Tanh, 1.0)));
    CHECK(m_tanh.data[0] == doctest::Approx((std::tanh(0.5) - std::tanh(0.1)) / 0.4));
}

TEST_CASE("reveal-cancel degenerates to rescale when one side vanishes") {
    Tensor<double> z_ref({1}, {0.25});
    Tensor<double> dz_pos({1}, {0.8});
    Tensor<double> dz_neg({1}, {0.0});
    auto [mp, mn] = multiplier_reveal_cancel(z_ref, dz_pos, dz_neg, Activation::Tanh);
    const double dsigma = std::tanh(0.25 + 0.8) - std::tanh(0.25);
    CHECK(mp.data[0] == doctest::Approx(dsigma / 0.8));
    CHECK(mn.data[0] == 0.0);
}

TEST_CASE("DeepLift summation-to-delta on random nets with random baselines") {
    for (DeepLiftRule rule : {DeepLiftRule::Rescale, DeepLiftRule::RevealCancel}) {
        for (const char* act : {"relu", "tanh"}) {
            auto g = testutil::random_dense_model(7, 11, 2, act, true);
            auto data = testutil::random_batch(g, 4);
            auto baseline = testutil::random_batch(g, 4);
            AttributionConfig cfg = dbl_config(Method::DeepLift);
            cfg.deeplift_rule = rule;
            cfg.x_ref = baseline;
            auto res = run_attribution(g, data, cfg);
            auto sel = select_all_outputs(g);
            auto fx = select_outputs(forward<double>(g, data), sel);
            auto fr = select_outputs(forward<double>(g, baseline), sel);
            for (std::int64_t b = 0; b < 4; ++b) {
                for (std::int64_t u = 0; u < 2; ++u) {
                    const double delta = fx.data[b * 2 + u] - fr.data[b * 2 + u];
                    CHECK(std::abs(result_sum(res, b, u) - delta) <= 1e-5 * std::max(1.0, std::abs(delta)));
                }
            }
        }
    }
}

TEST_CASE("winner-takes-all off equals an explicit avgpool substitution") {
    auto grid = oracle::architecture_grid(11);
    for (const auto& entry : grid) {
        if (entry.name.find("max") == std::string::npos) continue;
        ModelGraph avg = entry.graph.with_maxpool_as_avgpool();
        for (Method m : {Method::Lrp, Method::DeepLift}) {
            AttributionConfig cfg = dbl_config(m);
            cfg.winner_takes_all = false;
            auto r1 = run_attribution(entry.graph, entry.data, cfg);
            cfg.winner_takes_all = true;
            auto r2 = run_attribution(avg, entry.data, cfg);
            CHECK(r1.values[0].data == r2.values[0].data);
        }
        break; // one max-pool architecture suffices here
    }
}

TEST_CASE("connection weights: single layer returns the weight matrix") {
    auto g = parse_model(R"({
      "format_version": 1, "inputs": ["in"], "outputs": ["out"],
      "layers": [
        {"id": "in", "kind": "Input", "shape": [2]},
        {"id": "out", "kind": "Dense", "inbound": ["in"], "weight": [[0.5,-1.5],[2.0,0.25]],
         "bias": [9.0, -9.0], "activation": "tanh"}
      ]
    })");
    auto res = run_attribution(g, Dataset{}, dbl_config(Method::ConnectionWeights));
    // [1 x 2 x 2]: biases and activations ignored
    CHECK(res.values[0].data[0] == 0.5);
    CHECK(res.values[0].data[1] == 2.0);
    CHECK(res.values[0].data[2] == -1.5);
    CHECK(res.values[0].data[3] == 0.25);
    CHECK(res.instance_ids == std::vector<std::string>{"global"});
}

TEST_CASE("connection weights through two identity layers is the identity") {
    auto g = parse_model(R"({
      "format_version": 1, "inputs": ["in"], "outputs": ["out"],
      "layers": [
        {"id": "in", "kind": "Input", "shape": [2]},
        {"id": "mid", "kind": "Dense", "inbound": ["in"], "weight": [[1,0],[0,1]], "activation": "relu"},
        {"id": "out", "kind": "Dense", "inbound": ["mid"], "weight": [[1,0],[0,1]]}
      ]
    })");
    auto res = run_attribution(g, Dataset{}, dbl_config(Method::ConnectionWeights));
    CHECK(res.values[0].data == std::vector<double>{1, 0, 0, 1});
}

TEST_CASE("global connection weights ignore the batch entirely") {
    auto g = testutil::random_dense_model(5, 6, 2, "relu", true);
    auto d1 = testutil::random_batch(g, 3);
    auto d2 = testutil::random_batch(g, 8);
    auto r1 = run_attribution(g, d1, dbl_config(Method::ConnectionWeights));
    auto r2 = run_attribution(g, d2, dbl_config(Method::ConnectionWeights));
    CHECK(r1.values[0].data == r2.values[0].data);
}

TEST_CASE("local connection weights multiply the global map by each instance") {
    auto g = testutil::random_dense_model(4, 5, 1, "tanh", false);
    auto data = testutil::random_batch(g, 2);
    auto global = run_attribution(g, Dataset{}, dbl_config(Method::ConnectionWeights));
    AttributionConfig cfg = dbl_config(Method::ConnectionWeights);
    cfg.times_input = true;
    auto local = run_attribution(g, data, cfg);
    for (std::int64_t b = 0; b < 2; ++b) {
        for (std::int64_t i = 0; i < 4; ++i) {
            CHECK(local.values[0].data[b * 4 + i] ==
                  doctest::Approx(global.values[0].data[i] * data.tensors[0].data[b * 4 + i]));
        }
    }
}

TEST_CASE("argument contract violations") {
    auto g = testutil::unit_bias_model();
    AttributionConfig cfg = dbl_config(Method::ConnectionWeights);
    cfg.times_input = true;
    CHECK_THROWS_AS(run_attribution(g, Dataset{}, cfg), ValueError);

    auto data = testutil::single_instance(g, {1.0});
    AttributionConfig lrp_ti = dbl_config(Method::Lrp);
    lrp_ti.times_input = true;
    CHECK_THROWS_AS(run_attribution(g, data, lrp_ti), ValueError);

    AttributionConfig sg = dbl_config(Method::SmoothGrad);
    sg.n = 0;
    CHECK_THROWS_AS(run_attribution(g, data, sg), ValueError);
    sg.n = 5;
    sg.noise_level = -0.5;
    CHECK_THROWS_AS(run_attribution(g, data, sg), ValueError);
}

TEST_CASE("channels-last ingestion equals channels-first ingestion bit for bit") {
    auto grid = oracle::architecture_grid(17);
    const auto& entry = grid[10]; // a conv architecture
    REQUIRE(!entry.is_dense);
    const ModelGraph& g = entry.graph;
    const Tensor<double>& chw = entry.data.tensors[0]; // [B x 3 x 10 x 10]

    const std::string chw_json = serialize_dataset(entry.data);
    Dataset hwc_ds = entry.data;
    hwc_ds.tensors[0] = channels_first_to_last(chw);
    const std::string hwc_json = serialize_dataset(hwc_ds);

    auto ds_first = parse_dataset(chw_json, DataFormat::Json, true, g);
    auto ds_last = parse_dataset(hwc_json, DataFormat::Json, false, g);
    CHECK(ds_first.tensors[0].data == ds_last.tensors[0].data);

    for (Method m : {Method::Gradient, Method::Lrp, Method::DeepLift}) {
        auto r1 = run_attribution(g, ds_first, dbl_config(m));
        auto r2 = run_attribution(g, ds_last, dbl_config(m));
        CHECK(r1.values[0].data == r2.values[0].data);
    }
}
