#include <catch2/catch.hpp>

#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "test_support.hpp"

using namespace sphnet;

namespace {

constexpr double pi = std::numbers::pi;

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TrainConfig small_config(const std::string& data_path) {
    TrainConfig cfg;
    cfg.dims = {4, 6, 5, 2};
    cfg.iterations = 25;
    cfg.seeds = {0, 1};
    cfg.data_path = data_path;
    cfg.check_consistency = true;
    return cfg;
}

/// Exact single-layer interpolant plus a hand-assembled scaled dataset: the
/// gradient vanishes, so one iteration must be a fixed point.
struct StationarySetup {
    NetworkParams net;
    ScaledDataset data;
};

StationarySetup stationary_setup() {
    Rng rng(90);
    const SpherePoint w = testsup::random_sphere_point(rng, 2, 3, 1.0);
    NetworkParams net({w});
    ScaledDataset data;
    data.q = 1.0;
    data.y_max = 2.0;
    data.gain = 0.5;
    for (int i = 0; i < 6; ++i) {
        Vector x = testsup::random_vector(rng, 3);
        const double n = norm(x);
        for (double& v : x) v /= n;
        Vector y;
        matvec(w.weights(), x, y);
        Sample s{std::move(x), std::move(y)};
        (i < 4 ? data.train : data.test).push_back(s);
        (i < 4 ? data.train_input_norms : data.test_input_norms).push_back(n);
    }
    return {std::move(net), std::move(data)};
}

} // namespace

TEST_CASE("a stationary start is a fixed point for both methods", "[trainer]") {
    for (const Method method : {Method::ad, Method::mm}) {
        StationarySetup s = stationary_setup();
        IterationSettings cfg;
        cfg.method = method;
        cfg.iterations = 1;
        const double before = loss(s.net, s.data.train);
        const SeedRun run = run_training(s.net, s.data, cfg, 0);
        REQUIRE(run.ok);
        REQUIRE(run.rows.size() == 1);
        CHECK(run.rows[0].tau == 0.0);
        CHECK(run.rows[0].branch == StepBranch::zero_grad);
        CHECK(run.rows[0].train_objective == before);
        CHECK(loss(*run.net, s.data.train) == before);
    }
}

TEST_CASE("training descends on synthetic data with both methods", "[trainer]") {
    TempFile csv(testsup::temp_path("descend.csv"));
    testsup::write_synthetic_csv(csv.path, 160, 4, 2, 11);

    for (const Method method : {Method::ad, Method::mm}) {
        TrainConfig cfg = small_config(csv.path);
        cfg.method = method;
        cfg.iterations = method == Method::ad ? 40 : 120;
        cfg.seeds = {3};
        const TrainOutcome out = train(cfg);
        REQUIRE(out.runs.size() == 1);
        const SeedRun& run = out.runs.front();
        REQUIRE(run.ok);
        CHECK(run.consistency_ok);
        CHECK(run.rows.front().train_objective > run.rows.back().train_objective);
        // stepsize domains
        for (const MetricsRow& r : run.rows) {
            CHECK(r.tau >= 0.0);
            CHECK(r.tau <= (method == Method::ad ? pi / 6.0 + 1e-15 : pi + 1e-15));
            CHECK(std::isfinite(r.train_objective));
            CHECK(std::isfinite(r.test_objective));
        }
    }
}

TEST_CASE("metrics CSVs are byte-identical across reruns", "[trainer]") {
    TempFile csv(testsup::temp_path("repro.csv"));
    testsup::write_synthetic_csv(csv.path, 80, 3, 2, 5);

    TempFile m1(testsup::temp_path("m1.csv"));
    TempFile m2(testsup::temp_path("m2.csv"));

    TrainConfig cfg;
    cfg.dims = {3, 5, 2};
    cfg.iterations = 12;
    cfg.seeds = {0, 7};
    cfg.data_path = csv.path;
    cfg.bit_reproducible = true;
    cfg.check_consistency = true;

    cfg.out_path = m1.path;
    train(cfg);
    cfg.out_path = m2.path;
    train(cfg);

    const std::string a = slurp(m1.path);
    const std::string b = slurp(m2.path);
    REQUIRE_FALSE(a.empty());
    CHECK(a == b);

    // header plus one row per (seed, iteration)
    CHECK(std::count(a.begin(), a.end(), '\n') == 1 + 2 * 12);
    CHECK(a.rfind("seed,iteration,train_objective,test_objective,tau,branch,wall_ms", 0) == 0);
}

TEST_CASE("rms_error uses the recorded scale and the vector-norm convention", "[trainer]") {
    // constant-zero predictor, every de-scaled target equal to (1, 0, 0)
    NetworkParams net({SpherePoint::rescaled(Matrix{{1, 1}, {1, -1}, {0, 1}}, 1.0)});
    ScaledDataset data;
    data.y_max = 3.0;
    data.gain = 1.5; // de-scale factor 2
    const Vector x{1.0, 0.0};
    const Vector y{0.5, 0.0, 0.0}; // de-scales to (1, 0, 0)
    data.train.assign(4, Sample{x, y});
    data.test.assign(2, Sample{x, y});

    // zero the predictor by feeding inputs orthogonal to every weight row:
    // easier to zero the input directly
    for (Sample& s : data.train) s.x = {0.0, 0.0};
    for (Sample& s : data.test) s.x = {0.0, 0.0};

    CHECK(rms_error(net, data, Split::train) == Approx(1.0).epsilon(1e-12));
    CHECK(rms_error(net, data, Split::test) == Approx(1.0).epsilon(1e-12));

    ScaledDataset no_meta = data;
    no_meta.gain = 0.0;
    CHECK_THROWS_AS(rms_error(net, no_meta, Split::train), contract_error);
}

TEST_CASE("rms_error on raw pairs equals rms_error via de-scaled outputs", "[trainer]") {
    TempFile csv(testsup::temp_path("rms.csv"));
    testsup::write_synthetic_csv(csv.path, 60, 3, 2, 21);
    const RawDataset raw = load_csv(csv.path, 3, 2, 0.8, 1);
    const NetworkParams net = spectral_initialise({3, 4, 2}, {1.0, 1.0}, 1);
    const ScaledDataset data = normalise_data(raw, net);

    // direct route: forward scaled inputs, de-scale outputs, compare to raw targets
    double total = 0.0;
    for (std::size_t i = 0; i < data.test.size(); ++i) {
        const Vector f = forward(net, data.test[i].x).output;
        double e2 = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k) {
            const double fk_raw = f[k] * data.y_max / data.gain;
            const double e = fk_raw - raw.test[i].y[k];
            e2 += e * e;
        }
        total += e2;
    }
    const double direct = std::sqrt(total / static_cast<double>(data.test.size()));
    CHECK(rms_error(net, data, Split::test) == Approx(direct).epsilon(1e-12));
}

TEST_CASE("model save/load round-trips bitwise", "[trainer]") {
    TempFile file(testsup::temp_path("model.sphm"));
    Rng rng(91);
    std::vector<SpherePoint> layers;
    layers.push_back(testsup::random_sphere_point(rng, 4, 3, 1.0));
    layers.push_back(testsup::random_sphere_point(rng, 2, 4, 0.75));
    const ModelFile m{NetworkParams(std::move(layers)), 3.25, 0.125, 17, 0.8};
    save_model(file.path, m);

    const ModelFile r = load_model(file.path);
    CHECK(r.y_max == m.y_max);
    CHECK(r.gain == m.gain);
    CHECK(r.split_seed == 17);
    CHECK(r.train_fraction == 0.8);
    REQUIRE(r.net.dims() == m.net.dims());
    for (std::size_t l = 0; l < m.net.depth(); ++l) {
        CHECK(r.net.layer(l).mu() == m.net.layer(l).mu());
        bool bitwise = true;
        for (int i = 0; i < m.net.layer(l).rows(); ++i)
            for (int j = 0; j < m.net.layer(l).cols(); ++j)
                bitwise &= r.net.layer(l).weights()(i, j) == m.net.layer(l).weights()(i, j);
        CHECK(bitwise);
    }

    CHECK_THROWS_AS(load_model("missing.sphm"), data_error);
}

TEST_CASE("train writes per-seed models that eval can reuse", "[trainer]") {
    TempFile csv(testsup::temp_path("mdl.csv"));
    testsup::write_synthetic_csv(csv.path, 70, 3, 2, 8);
    TempFile mdl0(testsup::temp_path("out.seed0.sphm"));
    TempFile mdl4(testsup::temp_path("out.seed4.sphm"));

    TrainConfig cfg;
    cfg.dims = {3, 5, 2};
    cfg.iterations = 8;
    cfg.seeds = {0, 4};
    cfg.data_path = csv.path;
    cfg.model_out = testsup::temp_path("out.sphm");
    const TrainOutcome out = train(cfg);

    const ModelFile m = load_model(mdl4.path);
    const RawDataset raw = load_csv(csv.path, 3, 2, m.train_fraction, m.split_seed);
    const ScaledDataset data = apply_recorded_scaling(raw, m.y_max, m.gain);
    CHECK(rms_error(m.net, data, Split::test) ==
          Approx(out.runs[1].test_rms).epsilon(1e-12));
}

TEST_CASE("grid dims construction matches the documented rule", "[trainer]") {
    CHECK(grid_dims(12, 3, 15, 4) == std::vector<int>{12, 15, 15, 3});
    CHECK(grid_dims(12, 3, 35, 12) ==
          std::vector<int>{12, 35, 35, 35, 35, 35, 35, 35, 35, 35, 35, 3});
    CHECK(grid_dims(5, 2, 7, 2) == std::vector<int>{5, 2});
    CHECK_THROWS_AS(grid_dims(12, 3, 15, 1), config_error);
    CHECK_THROWS_AS(grid_dims(12, 3, 0, 4), config_error);
}

TEST_CASE("grid experiment produces one row per cell and seed", "[trainer]") {
    TempFile csv(testsup::temp_path("grid.csv"));
    testsup::write_synthetic_csv(csv.path, 90, 3, 2, 14);

    TrainConfig base;
    base.dims = {3, 4, 2};
    base.iterations = 5;
    base.seeds = {0, 1, 2};
    base.data_path = csv.path;

    const GridOutcome g = grid_experiment({4, 6}, {3, 4}, base);
    CHECK(g.cells.size() == 2 * 2 * 3);
    CHECK(g.summary.size() == 4);
    for (const GridSummaryRow& r : g.summary) {
        CHECK(r.seeds_ok == 3);
        CHECK(r.mean_train_rms > 0.0);
    }

    TempFile long_csv(testsup::temp_path("grid_long.csv"));
    TempFile mean_csv(testsup::temp_path("grid_mean.csv"));
    write_grid_csv(long_csv.path, g);
    write_grid_summary_csv(mean_csv.path, g);
    const std::string body = slurp(long_csv.path);
    CHECK(std::count(body.begin(), body.end(), '\n') == 1 + 12);
    CHECK(slurp(mean_csv.path).rfind("width,depth,", 0) == 0);
}

TEST_CASE("a non-finite objective aborts the seed with a diagnostic row", "[trainer]") {
    StationarySetup s = stationary_setup();
    // targets huge enough to overflow the squared error
    for (Sample& smp : s.data.train)
        for (double& v : smp.y) v = 1e200;
    IterationSettings cfg;
    cfg.iterations = 10;
    const SeedRun run = run_training(s.net, s.data, cfg, 0);
    CHECK_FALSE(run.ok);
    REQUIRE(run.rows.size() == 1);
    CHECK(run.rows.front().aborted);
    CHECK_FALSE(std::isfinite(run.rows.front().train_objective));
    CHECK(run.error.find("iteration 1") != std::string::npos);
}

TEST_CASE("config validation rejects bad settings", "[trainer]") {
    TrainConfig cfg;
    cfg.data_path = "x.csv";
    cfg.dims = {4};
    CHECK_THROWS_AS(validate_config(cfg), config_error);
    cfg.dims = {4, 2};
    cfg.iterations = 0;
    CHECK_THROWS_AS(validate_config(cfg), config_error);
    cfg.iterations = 1;
    cfg.mus = {1.0, 2.0};
    CHECK_THROWS_AS(validate_config(cfg), config_error);
    cfg.mus = {1.0};
    cfg.seeds.clear();
    CHECK_THROWS_AS(validate_config(cfg), config_error);
    cfg.seeds = {0};
    cfg.train_fraction = 1.0;
    CHECK_THROWS_AS(validate_config(cfg), config_error);
    cfg.train_fraction = 0.8;
    cfg.data_path.clear();
    CHECK_THROWS_AS(validate_config(cfg), config_error);
}

TEST_CASE("safeguarded curve-model steps are monotone in the objective", "[trainer]") {
    TempFile csv(testsup::temp_path("guard.csv"));
    testsup::write_synthetic_csv(csv.path, 100, 4, 2, 33);

    TrainConfig cfg = small_config(csv.path);
    cfg.seeds = {2};
    cfg.iterations = 30;
    cfg.safeguard_ad = true;
    const TrainOutcome guarded = train(cfg);
    REQUIRE(guarded.runs.front().ok);
    const auto& rows = guarded.runs.front().rows;
    for (std::size_t i = 1; i < rows.size(); ++i)
        CHECK(rows[i].train_objective <= rows[i - 1].train_objective * (1.0 + 1e-12));
}
