#pragma once

#include <Eigen/Dense>

#include <random>
#include <stdexcept>
#include <string>

namespace kgml {

// All numeric values in the library are dense row-major double matrices.
// Vectors are 1xN rows.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad file contents, unknown entities, malformed records.
struct DataError : Error {
    using Error::Error;
};

// Shape mismatches, invalid hyperparameters, non-finite losses.
struct NumericError : Error {
    using Error::Error;
};

inline std::string shape_str(const Mat& m) {
    return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

// Uniform(-s, s) init, deterministic under a caller-owned generator.
inline Mat rand_uniform(Eigen::Index rows, Eigen::Index cols, double s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-s, s);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

}  // namespace kgml
