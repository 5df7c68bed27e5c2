#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sphnet/errors.hpp"
#include "sphnet/network.hpp"
#include "sphnet/random.hpp"

namespace sphnet {

/// Dataset as loaded, before any scaling.
struct RawDataset {
    std::vector<Sample> train;
    std::vector<Sample> test;
};

/// Dataset after the initialisation-time scaling pass: inputs unit-norm,
/// targets scaled by gain/y_max. The scale factors are frozen here so later
/// weight updates cannot silently change the data scale, and the original
/// input norms are kept so raw pairs stay reconstructible.
struct ScaledDataset {
    std::vector<Sample> train;
    std::vector<Sample> test;
    double q = 0.0;     // mean squared input norm over train+test (1 after scaling)
    double y_max = 0.0; // max train target norm before scaling
    double gain = 0.0;  // product of layer operator norms at initialisation
    std::vector<double> train_input_norms;
    std::vector<double> test_input_norms;
};

// ---- CSV ingestion ----

namespace detail {

/// Locale-independent: '.' is the decimal separator no matter what the host
/// application set with setlocale.
inline bool parse_double(const std::string& tok, double& out) {
    const char* begin = tok.data();
    const char* end = begin + tok.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(end[-1]))) --end;
    if (begin < end && *begin == '+' && end - begin > 1 && end[-1] != '+' && begin[1] != '-' &&
        begin[1] != '+')
        ++begin; // from_chars does not take an explicit plus sign
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline bool blank_line(const std::string& line) {
    for (char c : line)
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
}

} // namespace detail

/// Loads a plain numeric CSV of d_in input columns followed by d_out target
/// columns, shuffles rows with the seeded generator, and splits off
/// floor(train_fraction * N) rows for training. A single header line is
/// auto-detected by a non-numeric first token.
inline RawDataset load_csv(const std::string& path, int d_in, int d_out, double train_fraction,
                           std::uint64_t shuffle_seed) {
    if (d_in <= 0 || d_out <= 0) throw config_error("load_csv: dims must be positive");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw config_error("load_csv: train_fraction must be in (0, 1)");

    std::ifstream in(path);
    if (!in) throw data_error("load_csv: cannot open '" + path + "'");

    const std::size_t want = static_cast<std::size_t>(d_in) + static_cast<std::size_t>(d_out);
    std::vector<Sample> rows;
    std::string line;
    std::size_t line_no = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::blank_line(line)) continue;
        auto toks = detail::split_csv_line(line);
        if (first_content_line) {
            first_content_line = false;
            double probe;
            if (!detail::parse_double(toks.front(), probe)) continue; // header line
        }
        if (toks.size() != want)
            throw data_error("load_csv: schema error at line " + std::to_string(line_no) + ": " +
                             std::to_string(toks.size()) + " columns, expected " +
                             std::to_string(want));
        Sample s;
        s.x.reserve(static_cast<std::size_t>(d_in));
        s.y.reserve(static_cast<std::size_t>(d_out));
        for (std::size_t k = 0; k < want; ++k) {
            double v;
            if (!detail::parse_double(toks[k], v))
                throw data_error("load_csv: parse error at line " + std::to_string(line_no) +
                                 ", column " + std::to_string(k + 1) + ": '" + toks[k] + "'");
            (k < static_cast<std::size_t>(d_in) ? s.x : s.y).push_back(v);
        }
        rows.push_back(std::move(s));
    }
    if (rows.empty()) throw data_error("load_csv: no data rows in '" + path + "'");

    Rng rng(shuffle_seed);
    rng.shuffle(rows);

    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(rows.size())));
    if (n_train == 0) throw data_error("load_csv: train split is empty");
    if (n_train == rows.size()) throw data_error("load_csv: test split is empty");

    RawDataset ds;
    ds.train.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    ds.test.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
    return ds;
}

// ---- spectral initialisation ----

/// Uniform Xavier draw for every layer, each immediately rescaled to its
/// sphere radius. Deterministic given the seed.
inline NetworkParams spectral_initialise(const std::vector<int>& dims,
                                         const std::vector<double>& mus, std::uint64_t seed) {
    if (dims.size() < 2) throw config_error("spectral_initialise: need at least [d0, d1]");
    const std::size_t layer_count = dims.size() - 1;
    if (mus.size() != layer_count)
        throw config_error("spectral_initialise: " + std::to_string(mus.size()) +
                           " mus for " + std::to_string(layer_count) + " layers");
    for (double mu : mus)
        if (!(mu > 0.0)) throw config_error("spectral_initialise: mus must be positive");
    for (int d : dims)
        if (d <= 0) throw config_error("spectral_initialise: dims must be positive");

    Rng rng(seed);
    std::vector<SpherePoint> layers;
    layers.reserve(layer_count);
    for (std::size_t i = 0; i < layer_count; ++i) {
        const int fan_in = dims[i];
        const int fan_out = dims[i + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix w(fan_out, fan_in);
        for (int attempt = 0;; ++attempt) {
            for (int r = 0; r < w.rows(); ++r)
                for (int c = 0; c < w.cols(); ++c) w(r, c) = rng.next_symmetric(bound);
            if (frob_norm(w) > 0.0) break;
            if (attempt == 1)
                throw numeric_error("spectral_initialise: repeated zero-norm draw for layer " +
                                    std::to_string(i + 1));
        }
        layers.push_back(SpherePoint::rescaled(std::move(w), mus[i]));
    }
    return NetworkParams(std::move(layers));
}

// ---- data normalisation ----

namespace detail {

inline ScaledDataset scale_dataset(const RawDataset& raw, double y_max, double gain) {
    ScaledDataset out;
    out.y_max = y_max;
    out.gain = gain;
    const double y_scale = gain / y_max;

    double q_sum = 0.0;
    auto scale_split = [&](const std::vector<Sample>& src, std::vector<Sample>& dst,
                           std::vector<double>& norms, const char* name) {
        dst.reserve(src.size());
        norms.reserve(src.size());
        for (std::size_t i = 0; i < src.size(); ++i) {
            const double xn = norm(src[i].x);
            if (xn < 1e-12)
                throw data_error(std::string("normalise_data: ") + name + " row " +
                                 std::to_string(i) + " has input norm below 1e-12");
            Sample s = src[i];
            for (double& v : s.x) v /= xn;
            for (double& v : s.y) v *= y_scale;
            q_sum += dot(s.x, s.x);
            norms.push_back(xn);
            dst.push_back(std::move(s));
        }
    };
    scale_split(raw.train, out.train, out.train_input_norms, "train");
    scale_split(raw.test, out.test, out.test_input_norms, "test");
    out.q = q_sum / static_cast<double>(out.train.size() + out.test.size());
    return out;
}

} // namespace detail

/// The initialisation-time scaling pass: every input to unit norm, every
/// target scaled by gain/Y_max where gain comes from the freshly
/// initialised network and Y_max is the largest target norm over the train
/// split only.
inline ScaledDataset normalise_data(const RawDataset& raw, const NetworkParams& net,
                                    const OpNormOptions& opts = {}) {
    if (raw.train.empty()) throw data_error("normalise_data: empty train split");
    double y_max = 0.0;
    for (const Sample& s : raw.train) y_max = std::max(y_max, norm(s.y));
    if (y_max == 0.0) throw data_error("normalise_data: all train targets are zero (Y_max = 0)");
    return detail::scale_dataset(raw, y_max, lipschitz_bound(net, opts));
}

/// Re-applies a previously recorded scaling (for evaluating a saved model,
/// where the initialisation-time network no longer exists).
inline ScaledDataset apply_recorded_scaling(const RawDataset& raw, double y_max, double gain) {
    if (raw.train.empty()) throw data_error("apply_recorded_scaling: empty train split");
    if (!(y_max > 0.0) || !(gain > 0.0))
        throw contract_error("apply_recorded_scaling: y_max and gain must be positive");
    return detail::scale_dataset(raw, y_max, gain);
}

} // namespace sphnet
