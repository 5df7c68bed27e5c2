#pragma once

#include <cassert>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sphnet/data.hpp"
#include "sphnet/jet.hpp"
#include "sphnet/model_io.hpp"
#include "sphnet/network.hpp"
#include "sphnet/optimizer.hpp"

namespace sphnet {

enum class Method { ad, mm };

struct TrainConfig {
    std::vector<int> dims;
    std::vector<double> mus;   // empty = every layer on the unit sphere
    Method method = Method::ad;
    int iterations = 200;
    double eps = std::numbers::pi / 6.0; // trust region for the curve-model method
    std::vector<std::uint64_t> seeds = {0};
    std::string data_path;
    double train_fraction = 0.8;
    OpNormOptions op_norm;
    std::string out_path;      // per-iteration metrics CSV; empty = no file
    std::string model_out;     // trained model dump; empty = no file
    bool bit_reproducible = false; // fixed reductions; wall_ms written as 0
    bool safeguard_ad = false; // compare objective at {0, t*, eps} before stepping
#ifdef NDEBUG
    bool check_consistency = false;
#else
    bool check_consistency = true;
#endif
};

struct MetricsRow {
    std::uint64_t seed = 0;
    int iteration = 0;
    double train_objective = 0.0;
    double test_objective = 0.0;
    double tau = 0.0;
    StepBranch branch = StepBranch::zero_grad;
    double wall_ms = 0.0;
    bool aborted = false; // diagnostic row for a NaN objective
};

struct SeedRun {
    std::uint64_t seed = 0;
    std::vector<MetricsRow> rows;
    std::optional<NetworkParams> net; // final parameters
    double train_rms = 0.0;
    double test_rms = 0.0;
    bool ok = true;
    std::string error;
    bool consistency_ok = true;
    double worst_consistency_ratio = 0.0; // gap / allowance, max over iterations
};

struct TrainOutcome {
    std::vector<SeedRun> runs;
};

enum class Split { train, test };

/// Root-mean-square prediction error in original target units: errors are
/// de-scaled by y_max/gain, and the vector-norm convention is used,
/// sqrt(mean over samples of ||error vector||^2).
inline double rms_error(const NetworkParams& net, const ScaledDataset& data, Split split) {
    if (!(data.gain > 0.0) || !(data.y_max > 0.0))
        throw contract_error("rms_error: dataset carries no scale metadata");
    const std::vector<Sample>& samples = split == Split::train ? data.train : data.test;
    if (samples.empty()) throw data_error("rms_error: empty split");
    const double descale = data.y_max / data.gain;
    detail::ForwardWorkspace ws;
    double total = 0.0;
    for (const Sample& s : samples) {
        detail::forward_into<relu_activation>(net, s.x, ws);
        const Vector& f = ws.preact.back();
        double e2 = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k) {
            const double e = (f[k] - s.y[k]) * descale;
            e2 += e * e;
        }
        total += e2;
    }
    return std::sqrt(total / static_cast<double>(samples.size()));
}

namespace detail {

inline double gradient_scale(const NetworkParams& net, const std::vector<Matrix>& grads) {
    double s = 0.0;
    for (std::size_t l = 0; l < grads.size(); ++l) s += net.layer(l).mu() * frob_norm(grads[l]);
    return s;
}

/// The two derivative routes (jet pass vs tangent-norm sum) must agree. The
/// allowance is 1e-9 relative with a roundoff floor scaled by the gradient
/// magnitude, since at numerically-stationary points both routes are pure
/// roundoff and a bare relative test is unsatisfiable.
inline double consistency_ratio(double curve_d1, double beta, double grad_scale) {
    const double gap = std::abs(curve_d1 + beta);
    const double allowance = 1e-9 * std::max(std::abs(curve_d1), beta) + 1e-13 * grad_scale;
    return allowance > 0.0 ? gap / allowance : (gap > 0.0 ? HUGE_VAL : 0.0);
}

} // namespace detail

struct IterationSettings {
    Method method = Method::ad;
    int iterations = 1;
    double eps = std::numbers::pi / 6.0;
    OpNormOptions op_norm;
    bool bit_reproducible = false;
    bool safeguard_ad = false;
    bool check_consistency = false;
};

/// The iteration engine: runs the configured stepsize method from the given
/// starting point on an already-scaled dataset. One metrics row per
/// iteration; a NaN objective aborts the run with a diagnostic row.
inline SeedRun run_training(NetworkParams net, const ScaledDataset& data,
                            const IterationSettings& cfg, std::uint64_t seed) {
    if (cfg.iterations < 1) throw config_error("run_training: iterations must be >= 1");
    if (data.train.empty() || data.test.empty())
        throw data_error("run_training: both splits must be nonempty");

    SeedRun run;
    run.seed = seed;
    run.rows.reserve(static_cast<std::size_t>(cfg.iterations));

    for (int it = 1; it <= cfg.iterations; ++it) {
        const auto t0 = std::chrono::steady_clock::now();

        auto [loss0, grads] = loss_and_grad(net, data.train);
        const double test_obj = loss(net, data.test);

        MetricsRow row;
        row.seed = seed;
        row.iteration = it;
        row.train_objective = loss0;
        row.test_objective = test_obj;

        if (!std::isfinite(loss0) || !std::isfinite(test_obj)) {
            row.aborted = true;
            run.rows.push_back(row);
            run.ok = false;
            run.error = "non-finite objective at iteration " + std::to_string(it);
            break;
        }

        const UpdateDirection dir = riemannian_direction(net, grads);
        StepResult step;
        if (dir.all_degenerate()) {
            step.branch = StepBranch::zero_grad; // stationary; nothing can move
        } else if (cfg.method == Method::ad) {
            const Jet2 jet = curve_eval(net, dir.dirs, data.train);
            if (cfg.check_consistency) {
                const double ratio = detail::consistency_ratio(
                    jet.d1, dir.beta, detail::gradient_scale(net, grads));
                run.worst_consistency_ratio = std::max(run.worst_consistency_ratio, ratio);
                if (ratio > 1.0) run.consistency_ok = false;
                assert(ratio <= 1.0 && "curve derivative vs direction coefficient mismatch");
            }
            step = ad_stepsize(jet.d1, jet.d2, cfg.eps);
            if (cfg.safeguard_ad && step.tau > 0.0) {
                double best_t = 0.0;
                double best_v = loss0;
                for (double cand : {step.tau, cfg.eps}) {
                    const double v = loss(apply_update(net, dir, cand), data.train);
                    if (v < best_v) {
                        best_v = v;
                        best_t = cand;
                    }
                }
                if (best_t != step.tau) {
                    step.tau = best_t;
                    step.branch = best_t == 0.0 ? StepBranch::zero_grad
                                                : StepBranch::trust_boundary;
                }
            }
        } else {
            const MajorantConstants consts = majorant_constants(net, dir, data.q, cfg.op_norm);
            step = mm_stepsize(consts, net, dir.dirs, loss0, cfg.op_norm);
            if (cfg.check_consistency) {
                const Jet2 jet = curve_eval(net, dir.dirs, data.train);
                const double ratio = detail::consistency_ratio(
                    jet.d1, dir.beta, detail::gradient_scale(net, grads));
                run.worst_consistency_ratio = std::max(run.worst_consistency_ratio, ratio);
                if (ratio > 1.0) run.consistency_ok = false;
                assert(ratio <= 1.0 && "curve derivative vs direction coefficient mismatch");
            }
        }

        net = apply_update(net, dir, step.tau);

        const auto t1 = std::chrono::steady_clock::now();
        row.tau = step.tau;
        row.branch = step.branch;
        row.wall_ms = cfg.bit_reproducible
                          ? 0.0
                          : std::chrono::duration<double, std::milli>(t1 - t0).count();
        run.rows.push_back(row);
    }

    if (run.ok) {
        run.train_rms = rms_error(net, data, Split::train);
        run.test_rms = rms_error(net, data, Split::test);
    }
    run.net = std::move(net);
    return run;
}

// ---- metrics CSV ----

inline void write_metrics_csv(const std::string& path, const std::vector<SeedRun>& runs) {
    std::ofstream out(path);
    if (!out) throw data_error("write_metrics_csv: cannot open '" + path + "'");
    out << "seed,iteration,train_objective,test_objective,tau,branch,wall_ms\n";
    char wall[32];
    for (const SeedRun& run : runs) {
        for (const MetricsRow& r : run.rows) {
            std::snprintf(wall, sizeof(wall), "%.3f", r.wall_ms);
            out << r.seed << ',' << r.iteration << ',' << detail::format_double(r.train_objective)
                << ',' << detail::format_double(r.test_objective) << ','
                << detail::format_double(r.tau) << ','
                << (r.aborted ? "nan_abort" : branch_name(r.branch)) << ',' << wall << '\n';
        }
    }
    if (!out) throw data_error("write_metrics_csv: write to '" + path + "' failed");
}

inline std::string model_path_for_seed(const std::string& base, std::uint64_t seed,
                                       bool multiple) {
    if (!multiple) return base;
    const std::size_t dot = base.rfind('.');
    const std::string stem = dot == std::string::npos ? base : base.substr(0, dot);
    const std::string ext = dot == std::string::npos ? "" : base.substr(dot);
    return stem + ".seed" + std::to_string(seed) + ext;
}

inline void validate_config(const TrainConfig& cfg) {
    if (cfg.dims.size() < 2) throw config_error("config: dims needs at least [d0, d1]");
    for (int d : cfg.dims)
        if (d <= 0) throw config_error("config: dims must be positive");
    if (!cfg.mus.empty() && cfg.mus.size() != cfg.dims.size() - 1)
        throw config_error("config: mus count " + std::to_string(cfg.mus.size()) +
                           " does not match layer count " + std::to_string(cfg.dims.size() - 1));
    for (double mu : cfg.mus)
        if (!(mu > 0.0)) throw config_error("config: mus must be positive");
    if (cfg.iterations < 1) throw config_error("config: iterations must be >= 1");
    if (!(cfg.eps > 0.0)) throw config_error("config: eps must be positive");
    if (cfg.seeds.empty()) throw config_error("config: at least one seed required");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw config_error("config: train_fraction must be in (0, 1)");
    if (cfg.data_path.empty()) throw config_error("config: dataset path required");
}

inline std::vector<double> effective_mus(const TrainConfig& cfg) {
    if (!cfg.mus.empty()) return cfg.mus;
    return std::vector<double>(cfg.dims.size() - 1, 1.0);
}

/// Full pipeline per seed: load + shuffle + split, spectral initialisation,
/// data scaling, then the iteration loop. Seeds run independently; the same
/// seed value drives both the split shuffle and the layer initialisation.
inline TrainOutcome train(const TrainConfig& cfg) {
    validate_config(cfg);
    const std::vector<double> mus = effective_mus(cfg);

    IterationSettings it;
    it.method = cfg.method;
    it.iterations = cfg.iterations;
    it.eps = cfg.eps;
    it.op_norm = cfg.op_norm;
    it.bit_reproducible = cfg.bit_reproducible;
    it.safeguard_ad = cfg.safeguard_ad;
    it.check_consistency = cfg.check_consistency;

    TrainOutcome outcome;
    for (std::uint64_t seed : cfg.seeds) {
        const RawDataset raw = load_csv(cfg.data_path, cfg.dims.front(), cfg.dims.back(),
                                        cfg.train_fraction, seed);
        NetworkParams net = spectral_initialise(cfg.dims, mus, seed);
        const ScaledDataset data = normalise_data(raw, net, cfg.op_norm);
        SeedRun run = run_training(std::move(net), data, it, seed);
        if (!cfg.model_out.empty() && run.ok && run.net) {
            save_model(model_path_for_seed(cfg.model_out, seed, cfg.seeds.size() > 1),
                       ModelFile{*run.net, data.y_max, data.gain, seed, cfg.train_fraction});
        }
        outcome.runs.push_back(std::move(run));
    }
    if (!cfg.out_path.empty()) write_metrics_csv(cfg.out_path, outcome.runs);
    return outcome;
}

// ---- width/depth grid harness ----

struct GridCell {
    int width = 0;
    int depth = 0;
    std::uint64_t seed = 0;
    double train_rms = 0.0;
    double test_rms = 0.0;
    double wall_ms = 0.0;
    bool ok = true;
    std::string error;
};

struct GridSummaryRow {
    int width = 0;
    int depth = 0;
    double mean_train_rms = 0.0;
    double mean_test_rms = 0.0;
    double mean_wall_ms = 0.0;
    int seeds_ok = 0;
};

struct GridOutcome {
    std::vector<GridCell> cells;     // one row per (width, depth, seed)
    std::vector<GridSummaryRow> summary; // means over ok seeds per (width, depth)
};

/// Layer sizes for one grid cell: the dims list has `depth` entries, the
/// dataset dims at the ends and `depth - 2` hidden layers of the given width.
inline std::vector<int> grid_dims(int d_in, int d_out, int width, int depth) {
    if (depth < 2) throw config_error("grid: depth must be >= 2");
    if (width <= 0) throw config_error("grid: width must be positive");
    std::vector<int> dims;
    dims.reserve(static_cast<std::size_t>(depth));
    dims.push_back(d_in);
    for (int i = 0; i < depth - 2; ++i) dims.push_back(width);
    dims.push_back(d_out);
    return dims;
}

/// Runs the training pipeline for every (width, depth) combination. Failures
/// are recorded per cell and the sweep continues.
inline GridOutcome grid_experiment(const std::vector<int>& widths, const std::vector<int>& depths,
                                   const TrainConfig& base) {
    if (widths.empty() || depths.empty()) throw config_error("grid: empty width/depth range");
    validate_config(base);
    const int d_in = base.dims.front();
    const int d_out = base.dims.back();

    GridOutcome out;
    for (int depth : depths) {
        for (int width : widths) {
            TrainConfig cfg = base;
            cfg.dims = grid_dims(d_in, d_out, width, depth);
            cfg.mus.clear();
            cfg.out_path.clear();
            cfg.model_out.clear();

            GridSummaryRow sum;
            sum.width = width;
            sum.depth = depth;
            for (std::uint64_t seed : cfg.seeds) {
                GridCell cell;
                cell.width = width;
                cell.depth = depth;
                cell.seed = seed;
                try {
                    TrainConfig one = cfg;
                    one.seeds = {seed};
                    const auto t0 = std::chrono::steady_clock::now();
                    TrainOutcome res = train(one);
                    const auto t1 = std::chrono::steady_clock::now();
                    const SeedRun& run = res.runs.front();
                    if (!run.ok) throw numeric_error(run.error);
                    cell.train_rms = run.train_rms;
                    cell.test_rms = run.test_rms;
                    cell.wall_ms = base.bit_reproducible
                                       ? 0.0
                                       : std::chrono::duration<double, std::milli>(t1 - t0).count();
                    sum.mean_train_rms += cell.train_rms;
                    sum.mean_test_rms += cell.test_rms;
                    sum.mean_wall_ms += cell.wall_ms;
                    ++sum.seeds_ok;
                } catch (const error& e) {
                    cell.ok = false;
                    cell.error = e.what();
                }
                out.cells.push_back(std::move(cell));
            }
            if (sum.seeds_ok > 0) {
                sum.mean_train_rms /= sum.seeds_ok;
                sum.mean_test_rms /= sum.seeds_ok;
                sum.mean_wall_ms /= sum.seeds_ok;
            }
            out.summary.push_back(sum);
        }
    }
    return out;
}

inline void write_grid_csv(const std::string& path, const GridOutcome& g) {
    std::ofstream out(path);
    if (!out) throw data_error("write_grid_csv: cannot open '" + path + "'");
    out << "width,depth,seed,train_rms,test_rms,wall_ms,status\n";
    char wall[32];
    for (const GridCell& c : g.cells) {
        std::snprintf(wall, sizeof(wall), "%.3f", c.wall_ms);
        out << c.width << ',' << c.depth << ',' << c.seed << ','
            << detail::format_double(c.train_rms) << ',' << detail::format_double(c.test_rms)
            << ',' << wall << ',' << (c.ok ? "ok" : "error:" + c.error) << '\n';
    }
}

inline void write_grid_summary_csv(const std::string& path, const GridOutcome& g) {
    std::ofstream out(path);
    if (!out) throw data_error("write_grid_summary_csv: cannot open '" + path + "'");
    out << "width,depth,mean_train_rms,mean_test_rms,mean_wall_ms,seeds_ok\n";
    char wall[32];
    for (const GridSummaryRow& r : g.summary) {
        std::snprintf(wall, sizeof(wall), "%.3f", r.mean_wall_ms);
        out << r.width << ',' << r.depth << ',' << detail::format_double(r.mean_train_rms) << ','
            << detail::format_double(r.mean_test_rms) << ',' << wall << ',' << r.seeds_ok << '\n';
    }
}

} // namespace sphnet
