#include "nnattr/check.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <thread>

#include "nnattr/model_io.hpp"
#include "nnattr/oracle.hpp"
#include "nnattr/results.hpp"

namespace nnattr {

namespace {

struct EntryErrors {
    double grad_max_abs = 0.0;
    double grad_worst_mae = 0.0;
    double deeplift_worst = 0.0;      // normalized summation-to-delta residual
    double lrp_conservation = -1.0;   // bias-free models only, -1 = not applicable
    double naive_agreement = -1.0;    // dense models only
};

Dataset normal_reference(const oracle::GridEntry& entry, std::uint64_t seed) {
    NormalSampler rng(seed);
    Dataset ref;
    ref.input_ids = entry.data.input_ids;
    for (const auto& t : entry.data.tensors) {
        Tensor<double> r(t.shape);
        for (auto& v : r.data) v = rng.next();
        ref.tensors.push_back(std::move(r));
    }
    ref.instance_ids = entry.data.instance_ids;
    return ref;
}

EntryErrors check_entry(const oracle::GridEntry& entry, std::uint64_t ref_seed) {
    EntryErrors err;
    const ModelGraph& g = entry.graph;
    const Dataset& data = entry.data;
    const OutputSelection sel = select_all_outputs(g);
    const std::int64_t batch = data.batch_size();
    const std::int64_t n_sel = static_cast<std::int64_t>(sel.units.size());

    AttributionConfig base;
    base.precision = PrecisionMode::Double;
    base.selection.use_pre_activation = true;

    // gradient vs central finite differences
    {
        AttributionConfig cfg = base;
        cfg.method = Method::Gradient;
        const RelevanceResult res = run_attribution(g, data, cfg);
        const auto fd = oracle::finite_diff_gradient(g, data, sel);
        for (std::size_t ii = 0; ii < fd.size(); ++ii) {
            const std::int64_t per_inst = fd[ii].size() / (batch * n_sel);
            for (std::int64_t b = 0; b < batch; ++b) {
                for (std::int64_t u = 0; u < n_sel; ++u) {
                    double abs_sum = 0.0;
                    for (std::int64_t e = 0; e < per_inst; ++e) {
                        const double d = std::abs(res.values[ii].data[(b * per_inst + e) * n_sel + u] -
                                                  fd[ii].data[(b * per_inst + e) * n_sel + u]);
                        err.grad_max_abs = std::max(err.grad_max_abs, d);
                        abs_sum += d;
                    }
                    err.grad_worst_mae = std::max(err.grad_worst_mae, abs_sum / static_cast<double>(per_inst));
                }
            }
        }
    }

    // DeepLift summation-to-delta, both rules, zero and normal baselines
    {
        const Dataset normal_ref = normal_reference(entry, ref_seed);
        const Tensor<double> f_x = select_outputs(forward<double>(g, data), sel);
        for (DeepLiftRule rule : {DeepLiftRule::Rescale, DeepLiftRule::RevealCancel}) {
            for (int baseline = 0; baseline < 2; ++baseline) {
                AttributionConfig cfg = base;
                cfg.method = Method::DeepLift;
                cfg.deeplift_rule = rule;
                Tensor<double> f_ref;
                if (baseline == 0) {
                    Dataset zeros;
                    zeros.input_ids = data.input_ids;
                    for (const auto& t : data.tensors) zeros.tensors.push_back(Tensor<double>(t.shape));
                    zeros.instance_ids = data.instance_ids;
                    f_ref = select_outputs(forward<double>(g, zeros), sel);
                } else {
                    cfg.x_ref = normal_ref;
                    f_ref = select_outputs(forward<double>(g, normal_ref), sel);
                }
                const RelevanceResult res = run_attribution(g, data, cfg);
                for (std::int64_t b = 0; b < batch; ++b) {
                    for (std::int64_t u = 0; u < n_sel; ++u) {
                        double total = 0.0;
                        for (std::size_t ii = 0; ii < res.values.size(); ++ii) {
                            const std::int64_t per_inst = res.values[ii].size() / (batch * n_sel);
                            for (std::int64_t e = 0; e < per_inst; ++e) {
                                total += res.values[ii].data[(b * per_inst + e) * n_sel + u];
                            }
                        }
                        const double delta = f_x.data[b * n_sel + u] - f_ref.data[b * n_sel + u];
                        const double residual = std::abs(total - delta) / std::max(1.0, std::abs(delta));
                        err.deeplift_worst = std::max(err.deeplift_worst, residual);
                    }
                }
            }
        }
    }

    // LRP simple-rule conservation on bias-free models
    if (!entry.has_bias) {
        AttributionConfig cfg = base;
        cfg.method = Method::Lrp;
        const RelevanceResult res = run_attribution(g, data, cfg);
        const Tensor<double> f_x = select_outputs(forward<double>(g, data), sel);
        err.lrp_conservation = 0.0;
        for (std::int64_t b = 0; b < batch; ++b) {
            for (std::int64_t u = 0; u < n_sel; ++u) {
                double total = 0.0;
                for (std::size_t ii = 0; ii < res.values.size(); ++ii) {
                    const std::int64_t per_inst = res.values[ii].size() / (batch * n_sel);
                    for (std::int64_t e = 0; e < per_inst; ++e) {
                        total += res.values[ii].data[(b * per_inst + e) * n_sel + u];
                    }
                }
                const double y = f_x.data[b * n_sel + u];
                const double residual = std::abs(total - y) / std::max(1.0, std::abs(y));
                err.lrp_conservation = std::max(err.lrp_conservation, residual);
            }
        }
    }

    // naive loop oracle agreement on dense models
    if (entry.is_dense) {
        err.naive_agreement = 0.0;
        struct RuleCase {
            LrpRule rule;
            double param;
        };
        for (const RuleCase rc : {RuleCase{LrpRule::Simple, 0.0}, RuleCase{LrpRule::Epsilon, 0.01},
                                  RuleCase{LrpRule::AlphaBeta, 1.0}, RuleCase{LrpRule::AlphaBeta, 2.0}}) {
            AttributionConfig cfg = base;
            cfg.method = Method::Lrp;
            if (rc.rule != LrpRule::Simple) {
                cfg.rule_name[LayerKind::Dense] = rc.rule;
                cfg.rule_param[LayerKind::Dense] = rc.param;
            }
            const RelevanceResult res = run_attribution(g, data, cfg);
            const Tensor<double> naive = oracle::naive_lrp(g, data, sel, rc.rule, rc.param);
            for (std::size_t i = 0; i < naive.data.size(); ++i) {
                err.naive_agreement =
                    std::max(err.naive_agreement, std::abs(naive.data[i] - res.values[0].data[i]));
            }
        }
    }
    return err;
}

template <typename Fn>
void parallel_for(std::int64_t count, int threads, Fn&& fn) {
    threads = std::max(1, threads);
    if (threads == 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::int64_t> next{0};
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (std::int64_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace

CheckReport run_validity_check(std::uint64_t base_seed, int n_seeds, int threads,
                               const std::string& emit_dir) {
    std::vector<oracle::GridEntry> entries;
    for (int s = 0; s < n_seeds; ++s) {
        auto grid = oracle::architecture_grid(base_seed + static_cast<std::uint64_t>(s));
        for (auto& e : grid) {
            e.name = "seed" + std::to_string(base_seed + static_cast<std::uint64_t>(s)) + "_" + e.name;
            entries.push_back(std::move(e));
        }
    }

    if (!emit_dir.empty()) {
        std::filesystem::create_directories(emit_dir);
        for (const auto& e : entries) {
            write_text_file(emit_dir + "/" + e.name + ".model.json", serialize_model(e.graph));
            write_text_file(emit_dir + "/" + e.name + ".data.json", serialize_dataset(e.data));
        }
    }

    std::vector<EntryErrors> errors(entries.size());
    parallel_for(static_cast<std::int64_t>(entries.size()), threads, [&](std::int64_t i) {
        errors[static_cast<std::size_t>(i)] =
            check_entry(entries[static_cast<std::size_t>(i)], base_seed * 7919 + static_cast<std::uint64_t>(i));
    });

    CheckRow grad_max{"gradient vs finite differences (max abs)", 0, 1e-6, 0, false};
    CheckRow grad_mae{"gradient vs finite differences (worst MAE)", 0, 1e-6, 0, false};
    CheckRow deeplift{"deeplift summation-to-delta (relative)", 0, 1e-5, 0, false};
    CheckRow lrp{"lrp simple conservation, bias-free (relative)", 0, 1e-5, 0, false};
    CheckRow naive{"lrp engine vs naive loops (max abs)", 0, 1e-6, 0, false};
    for (const auto& e : errors) {
        grad_max.worst = std::max(grad_max.worst, e.grad_max_abs);
        ++grad_max.cases;
        grad_mae.worst = std::max(grad_mae.worst, e.grad_worst_mae);
        ++grad_mae.cases;
        deeplift.worst = std::max(deeplift.worst, e.deeplift_worst);
        ++deeplift.cases;
        if (e.lrp_conservation >= 0) {
            lrp.worst = std::max(lrp.worst, e.lrp_conservation);
            ++lrp.cases;
        }
        if (e.naive_agreement >= 0) {
            naive.worst = std::max(naive.worst, e.naive_agreement);
            ++naive.cases;
        }
    }

    CheckReport report;
    for (CheckRow row : {grad_max, grad_mae, deeplift, lrp, naive}) {
        row.pass = row.worst <= row.tolerance;
        report.all_pass = report.all_pass && row.pass;
        report.rows.push_back(row);
    }
    return report;
}

std::string format_check_report(const CheckReport& report) {
    std::ostringstream os;
    for (const auto& row : report.rows) {
        os << (row.pass ? "PASS" : "FAIL") << "  " << row.name << ": worst " << format_double(row.worst)
           << " (tolerance " << format_double(row.tolerance) << ", " << row.cases << " models)\n";
    }
    os << (report.all_pass ? "all checks passed" : "CHECK FAILED") << "\n";
    return os.str();
}

} // namespace nnattr
