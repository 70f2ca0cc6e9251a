#pragma once

#include "sentinel/grid.hpp"
#include "sentinel/io.hpp"
#include "sentinel/model.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testsupport {

using sentinel::Matrix;
using sentinel::Vector;

inline std::filesystem::path data_dir() { return SENTINEL_DATA_DIR; }

inline Matrix random_matrix(std::mt19937_64& rng, long rows, long cols) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix A(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) A(i, j) = n(rng);
    return A;
}

inline Vector random_vector(std::mt19937_64& rng, long n, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    Vector v(n);
    for (long i = 0; i < n; ++i) v[i] = d(rng);
    return v;
}

inline sentinel::grid::CaseFile fixture_case() {
    return sentinel::grid::parse_case(sentinel::io::read_file(data_dir() / "ieee14.case"));
}

inline Matrix fixture_H() {
    const auto c = fixture_case();
    return sentinel::grid::build_H(c.grid, c.placement);
}

inline Matrix ring3_H() {
    const auto c = sentinel::grid::parse_case(sentinel::io::read_file(data_dir() / "ring3.case"));
    return sentinel::grid::build_H(c.grid, c.placement);
}

inline Matrix ones(long rows, long cols) { return Matrix::Ones(rows, cols); }

}  // namespace testsupport
