// sphnet command-line trainer.
//
//   sphnet train --data d.csv --dims 12,25,30,15,3 --method ad --iters 200
//                --seeds 0..39 --out metrics.csv
//   sphnet grid  --data d.csv --dims 12,25,30,15,3 --widths 15:5:35
//                --depths 4:2:12 --method ad --iters 200 --seeds 0..39 --out grid.csv
//   sphnet eval  --model model.sphm --data d.csv --split test
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "sphnet/sphnet.hpp"

namespace {

// seed tokens: "7" or "0..39" (inclusive)
std::vector<std::uint64_t> parse_seeds(const std::vector<std::string>& tokens) {
    std::vector<std::uint64_t> out;
    for (const std::string& s : tokens) {
        try {
            const auto dots = s.find("..");
            if (dots != std::string::npos) {
                const std::uint64_t lo = std::stoull(s.substr(0, dots));
                const std::uint64_t hi = std::stoull(s.substr(dots + 2));
                if (hi < lo) throw sphnet::config_error("seeds: range '" + s + "' is backwards");
                for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
            } else {
                out.push_back(std::stoull(s));
            }
        } catch (const sphnet::error&) {
            throw;
        } catch (const std::exception&) {
            throw sphnet::config_error("seeds: cannot parse '" + s + "'");
        }
    }
    if (out.empty()) throw sphnet::config_error("seeds: empty list");
    return out;
}

// range tokens: "15" or "15:5:35" (start:step:stop, inclusive)
std::vector<int> parse_range(const std::vector<std::string>& tokens, const char* what) {
    std::vector<int> out;
    for (const std::string& s : tokens) {
        try {
            const auto c1 = s.find(':');
            if (c1 == std::string::npos) {
                out.push_back(std::stoi(s));
                continue;
            }
            const auto c2 = s.find(':', c1 + 1);
            if (c2 == std::string::npos)
                throw sphnet::config_error(std::string(what) + ": expected start:step:stop");
            const int start = std::stoi(s.substr(0, c1));
            const int step = std::stoi(s.substr(c1 + 1, c2 - c1 - 1));
            const int stop = std::stoi(s.substr(c2 + 1));
            if (step <= 0)
                throw sphnet::config_error(std::string(what) + ": step must be positive");
            for (int v = start; v <= stop; v += step) out.push_back(v);
        } catch (const sphnet::error&) {
            throw;
        } catch (const std::exception&) {
            throw sphnet::config_error(std::string(what) + ": cannot parse '" + s + "'");
        }
    }
    if (out.empty()) throw sphnet::config_error(std::string(what) + ": empty range");
    return out;
}

struct CommonFlags {
    std::string data;
    std::vector<int> dims = {12, 25, 30, 15, 3};
    std::vector<double> mus;
    std::string method = "ad";
    int iters = 200;
    double eps = std::numbers::pi / 6.0;
    std::vector<std::string> seeds = {"0"};
    double train_fraction = 0.8;
    double op_norm_tol = 1e-10;
    int op_norm_iters = 500;
    std::string out;
    std::string model_out;
    bool bit_reproducible = false;
    bool safeguard = false;
    bool check_consistency = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--data", f.data, "dataset CSV (d_in input columns then d_out target columns)")
        ->required();
    cmd->add_option("--dims", f.dims, "layer sizes, e.g. 12,25,30,15,3")->delimiter(',');
    cmd->add_option("--mus", f.mus, "per-layer Frobenius radii (default: all 1)")
        ->delimiter(',');
    cmd->add_option("--method", f.method, "stepsize method: ad | mm")
        ->check(CLI::IsMember({"ad", "mm"}));
    cmd->add_option("--iters", f.iters, "iterations per seed");
    cmd->add_option("--eps", f.eps, "trust region for method ad (default pi/6)");
    cmd->add_option("--seeds", f.seeds, "seed list: 0..39 or 0,1,2")->delimiter(',');
    cmd->add_option("--train-fraction", f.train_fraction, "train split fraction (default 0.8)");
    cmd->add_option("--op-norm-tol", f.op_norm_tol, "power iteration relative tolerance");
    cmd->add_option("--op-norm-iters", f.op_norm_iters, "power iteration max iterations");
    cmd->add_option("--out", f.out, "metrics CSV path");
    cmd->add_flag("--bit-reproducible", f.bit_reproducible,
                  "byte-identical outputs per seed (wall_ms written as 0)");
    cmd->add_flag("--safeguard", f.safeguard,
                  "method ad: compare the objective at {0, t*, eps} before stepping");
    cmd->add_flag("--check-consistency", f.check_consistency,
                  "assert the two first-derivative routes agree every iteration");
    cmd->fallthrough();
}

sphnet::TrainConfig to_config(const CommonFlags& f) {
    sphnet::TrainConfig cfg;
    cfg.dims = f.dims;
    cfg.mus = f.mus;
    cfg.method = f.method == "mm" ? sphnet::Method::mm : sphnet::Method::ad;
    cfg.iterations = f.iters;
    cfg.eps = f.eps;
    cfg.seeds = parse_seeds(f.seeds);
    cfg.data_path = f.data;
    cfg.train_fraction = f.train_fraction;
    cfg.op_norm.tol = f.op_norm_tol;
    cfg.op_norm.max_iters = f.op_norm_iters;
    cfg.out_path = f.out;
    cfg.model_out = f.model_out;
    cfg.bit_reproducible = f.bit_reproducible;
    cfg.safeguard_ad = f.safeguard;
    if (f.check_consistency) cfg.check_consistency = true;
    return cfg;
}

void print_mean_sigma(const char* label, const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sigma = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    std::printf("%s %.6g +- %.3g\n", label, mean, sigma);
}

int cmd_train(const CommonFlags& flags) {
    const sphnet::TrainConfig cfg = to_config(flags);
    const sphnet::TrainOutcome outcome = sphnet::train(cfg);

    std::vector<double> train_rms, test_rms;
    int aborted = 0;
    for (const sphnet::SeedRun& run : outcome.runs) {
        if (!run.ok) {
            ++aborted;
            std::fprintf(stderr, "seed %llu aborted: %s\n",
                         static_cast<unsigned long long>(run.seed), run.error.c_str());
            continue;
        }
        train_rms.push_back(run.train_rms);
        test_rms.push_back(run.test_rms);
        std::printf("seed %llu: train_rms %.6g  test_rms %.6g  final_objective %.6g\n",
                    static_cast<unsigned long long>(run.seed), run.train_rms, run.test_rms,
                    run.rows.empty() ? 0.0 : run.rows.back().train_objective);
    }
    if (!train_rms.empty()) {
        print_mean_sigma("train_rms:", train_rms);
        print_mean_sigma("test_rms: ", test_rms);
    }
    if (!cfg.out_path.empty()) std::printf("metrics written to %s\n", cfg.out_path.c_str());
    return aborted > 0 ? 3 : 0;
}

int cmd_grid(const CommonFlags& flags, const std::vector<std::string>& widths,
             const std::vector<std::string>& depths) {
    const sphnet::TrainConfig base = to_config(flags);
    const std::vector<int> w = parse_range(widths, "widths");
    const std::vector<int> d = parse_range(depths, "depths");
    const sphnet::GridOutcome g = sphnet::grid_experiment(w, d, base);

    for (const sphnet::GridSummaryRow& r : g.summary)
        std::printf("width %2d depth %2d: mean_train_rms %.6g  mean_test_rms %.6g  (%d seeds)\n",
                    r.width, r.depth, r.mean_train_rms, r.mean_test_rms, r.seeds_ok);

    if (!flags.out.empty()) {
        sphnet::write_grid_csv(flags.out, g);
        const std::size_t dot = flags.out.rfind('.');
        const std::string mean_path = dot == std::string::npos
                                          ? flags.out + "_mean"
                                          : flags.out.substr(0, dot) + "_mean" + flags.out.substr(dot);
        sphnet::write_grid_summary_csv(mean_path, g);
        std::printf("grid written to %s, means to %s\n", flags.out.c_str(), mean_path.c_str());
    }
    int failed = 0;
    for (const sphnet::GridCell& c : g.cells)
        if (!c.ok) ++failed;
    if (failed > 0) std::fprintf(stderr, "%d grid cells failed\n", failed);
    return failed > 0 ? 3 : 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& split) {
    const sphnet::ModelFile m = sphnet::load_model(model_path);
    const sphnet::RawDataset raw =
        sphnet::load_csv(data_path, m.net.input_dim(), m.net.output_dim(), m.train_fraction,
                         m.split_seed);
    const sphnet::ScaledDataset data = sphnet::apply_recorded_scaling(raw, m.y_max, m.gain);
    const sphnet::Split which = split == "train" ? sphnet::Split::train : sphnet::Split::test;
    const double rms = sphnet::rms_error(m.net, data, which);
    const double obj = sphnet::loss(m.net, which == sphnet::Split::train ? data.train : data.test);
    std::printf("%s: rms %.6g  objective %.6g  (%zu samples)\n", split.c_str(), rms, obj,
                which == sphnet::Split::train ? data.train.size() : data.test.size());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trainer for Frobenius-sphere-normalised fully-connected networks "
                 "with automatic stepsizes"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "key=value config file with [train]/[grid]/[eval] sections; "
                   "command-line flags take precedence");

    CommonFlags train_flags;
    CLI::App* train_cmd = app.add_subcommand("train", "train one layer configuration");
    add_common(train_cmd, train_flags);
    train_cmd->add_option("--model-out", train_flags.model_out,
                          "write the trained model (per-seed suffix when several seeds)");

    CommonFlags grid_flags;
    std::vector<std::string> widths = {"15:5:35"};
    std::vector<std::string> depths = {"4:2:12"};
    CLI::App* grid_cmd = app.add_subcommand("grid", "sweep hidden widths and depths");
    add_common(grid_cmd, grid_flags);
    grid_cmd->add_option("--widths", widths, "hidden width range, e.g. 15:5:35")->delimiter(',');
    grid_cmd->add_option("--depths", depths, "dims-length range, e.g. 4:2:12")->delimiter(',');

    std::string model_path, eval_data, eval_split = "test";
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a saved model");
    eval_cmd->add_option("--model", model_path, "model file")->required();
    eval_cmd->add_option("--data", eval_data, "dataset CSV")->required();
    eval_cmd->add_option("--split", eval_split, "train | test")
        ->check(CLI::IsMember({"train", "test"}));

    try {
        app.parse(argc, argv);
        if (*train_cmd) return cmd_train(train_flags);
        if (*grid_cmd) return cmd_grid(grid_flags, widths, depths);
        if (*eval_cmd) return cmd_eval(model_path, eval_data, eval_split);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const sphnet::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const sphnet::data_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const sphnet::error& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    }
}
