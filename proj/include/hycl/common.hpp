#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hycl {

// Row-major throughout: rows are per-node / per-hyperedge records and the
// aggregation kernels walk them contiguously.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user-supplied settings (rates, ratios, dimensions, flags).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or inconsistent input files / datasets.
struct DataError : Error {
  using Error::Error;
};

// API misuse: shape mismatches, out-of-range indices, broken preconditions.
struct ContractError : Error {
  using Error::Error;
};

// Non-finite values encountered where finiteness is an invariant.
struct NumericError : Error {
  using Error::Error;
};

inline void check_contract(bool ok, const std::string& msg) {
  if (!ok) throw ContractError(msg);
}

inline void check_config(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace hycl
