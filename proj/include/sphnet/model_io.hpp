#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sphnet/data.hpp"
#include "sphnet/network.hpp"

namespace sphnet {

namespace detail {

/// Shortest representation that round-trips a double exactly.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

/// A trained model plus the run metadata needed to evaluate it later in
/// original units: the recorded data scale and the train/test split identity.
struct ModelFile {
    NetworkParams net;
    double y_max;
    double gain;
    std::uint64_t split_seed;
    double train_fraction;
};

// Model format, version 1. Line-oriented UTF-8 text; all reals are printed
// with 17 significant digits so doubles round-trip exactly.
//
//   sphnet-model 1
//   dims <d0> ... <dL>
//   mus <mu1> ... <muL>
//   scale <y_max> <gain>
//   split <shuffle_seed> <train_fraction>
//   layer <i> <rows> <cols>      (repeated for i = 1..L)
//   <rows lines of cols row-major entries each>
//   end

inline void save_model(const std::string& path, const ModelFile& m) {
    std::ofstream out(path);
    if (!out) throw data_error("save_model: cannot open '" + path + "' for writing");
    out << "sphnet-model 1\n";
    out << "dims";
    for (int d : m.net.dims()) out << ' ' << d;
    out << "\nmus";
    for (double mu : m.net.mus()) out << ' ' << detail::format_double(mu);
    out << "\nscale " << detail::format_double(m.y_max) << ' ' << detail::format_double(m.gain);
    out << "\nsplit " << m.split_seed << ' ' << detail::format_double(m.train_fraction) << '\n';
    for (std::size_t l = 0; l < m.net.depth(); ++l) {
        const Matrix& w = m.net.layer(l).weights();
        out << "layer " << (l + 1) << ' ' << w.rows() << ' ' << w.cols() << '\n';
        for (int i = 0; i < w.rows(); ++i) {
            for (int j = 0; j < w.cols(); ++j) {
                if (j) out << ' ';
                out << detail::format_double(w(i, j));
            }
            out << '\n';
        }
    }
    out << "end\n";
    if (!out) throw data_error("save_model: write to '" + path + "' failed");
}

inline ModelFile load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("load_model: cannot open '" + path + "'");
    std::string line;

    auto next_line = [&](const char* what) -> std::istringstream {
        if (!std::getline(in, line))
            throw data_error(std::string("load_model: truncated file, expected ") + what);
        return std::istringstream(line);
    };
    auto expect_tag = [&](std::istringstream& ss, const std::string& tag) {
        std::string got;
        ss >> got;
        if (got != tag)
            throw data_error("load_model: expected '" + tag + "', got '" + got + "'");
    };

    {
        auto ss = next_line("header");
        expect_tag(ss, "sphnet-model");
        int version = 0;
        ss >> version;
        if (version != 1)
            throw data_error("load_model: unsupported format version " + std::to_string(version));
    }

    std::vector<int> dims;
    {
        auto ss = next_line("dims");
        expect_tag(ss, "dims");
        int d;
        while (ss >> d) dims.push_back(d);
        if (dims.size() < 2) throw data_error("load_model: need at least two dims");
    }
    std::vector<double> mus;
    {
        auto ss = next_line("mus");
        expect_tag(ss, "mus");
        double mu;
        while (ss >> mu) mus.push_back(mu);
        if (mus.size() != dims.size() - 1)
            throw data_error("load_model: mus count does not match layer count");
    }
    double y_max = 0.0, gain = 0.0;
    {
        auto ss = next_line("scale");
        expect_tag(ss, "scale");
        if (!(ss >> y_max >> gain)) throw data_error("load_model: bad scale line");
    }
    std::uint64_t split_seed = 0;
    double train_fraction = 0.0;
    {
        auto ss = next_line("split");
        expect_tag(ss, "split");
        if (!(ss >> split_seed >> train_fraction)) throw data_error("load_model: bad split line");
    }

    std::vector<SpherePoint> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        auto ss = next_line("layer header");
        expect_tag(ss, "layer");
        std::size_t idx = 0;
        int rows = 0, cols = 0;
        if (!(ss >> idx >> rows >> cols) || idx != l + 1)
            throw data_error("load_model: bad layer header for layer " + std::to_string(l + 1));
        if (rows != dims[l + 1] || cols != dims[l])
            throw data_error("load_model: layer " + std::to_string(l + 1) + " shape " +
                             std::to_string(rows) + "x" + std::to_string(cols) +
                             " does not match dims");
        Vector entries;
        entries.reserve(static_cast<std::size_t>(rows) * cols);
        for (int i = 0; i < rows; ++i) {
            auto rs = next_line("layer row");
            double v;
            int count = 0;
            while (rs >> v) {
                entries.push_back(v);
                ++count;
            }
            if (count != cols)
                throw data_error("load_model: layer " + std::to_string(l + 1) + " row " +
                                 std::to_string(i + 1) + " has " + std::to_string(count) +
                                 " entries, expected " + std::to_string(cols));
        }
        layers.emplace_back(Matrix(rows, cols, std::move(entries)), mus[l]);
    }
    {
        auto ss = next_line("end");
        expect_tag(ss, "end");
    }
    return ModelFile{NetworkParams(std::move(layers)), y_max, gain, split_seed, train_fraction};
}

} // namespace sphnet
