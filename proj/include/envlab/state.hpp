#pragma once

#include "envlab/config.hpp"
#include "envlab/rational.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace envlab {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

// Subsystems are positional: S is index 0, E index 1, the ancilla C index 2.
enum class Side : int { S = 0, E = 1, C = 2 };

std::string_view side_name(Side side);
Side parse_side(std::string_view name);
inline int side_index(Side side) { return static_cast<int>(side); }

// Exact annotation for states whose squared amplitudes are rationals:
// amplitude[i] = signs[i] * sqrt(num[i] / den), one entry per amplitude.
struct ExactAmplitudes {
  std::vector<std::int64_t> num;
  std::int64_t den = 1;
  std::vector<int> signs;

  Rational weight(std::size_t i) const { return make_rational(num[i], den); }
};

class PureState {
 public:
  PureState(std::vector<int> dims, CVector amplitudes, std::string label = {},
            const Tolerances& tol = {},
            std::size_t max_total_dim = kDefaultMaxTotalDim);

  // Builds the amplitudes from the exact annotation.
  static PureState from_exact(std::vector<int> dims, ExactAmplitudes exact,
                              std::string label = {});

  const std::vector<int>& dims() const { return dims_; }
  int dim(Side side) const { return dims_.at(side_index(side)); }
  int subsystem_count() const { return static_cast<int>(dims_.size()); }
  bool is_bipartite() const { return dims_.size() == 2; }
  std::size_t total_dim() const { return static_cast<std::size_t>(amps_.size()); }

  const CVector& amplitudes() const { return amps_; }
  const std::string& label() const { return label_; }
  const std::optional<ExactAmplitudes>& exact() const { return exact_; }

  // Bipartite amplitude matrix, rows indexed by S and columns by E.
  CMatrix as_matrix() const;

  PureState with_label(std::string label) const;
  PureState with_exact(ExactAmplitudes exact, const Tolerances& tol = {}) const;
  PureState without_exact() const;

 private:
  PureState() = default;

  std::vector<int> dims_;
  CVector amps_;
  std::string label_;
  std::optional<ExactAmplitudes> exact_;
};

// Bipartite state from its S x E amplitude matrix.
PureState state_from_matrix(const CMatrix& amplitudes, std::string label = {},
                            const Tolerances& tol = {},
                            std::size_t max_total_dim = kDefaultMaxTotalDim);

class LocalUnitary {
 public:
  LocalUnitary(Side side, CMatrix matrix, const Tolerances& tol = {});

  static LocalUnitary identity(Side side, int dim);
  // Skips the unitarity check; for matrices unitary by construction.
  static LocalUnitary unchecked(Side side, CMatrix matrix);

  Side side() const { return side_; }
  int dim() const { return static_cast<int>(matrix_.rows()); }
  const CMatrix& matrix() const { return matrix_; }

 private:
  LocalUnitary(Side side, CMatrix matrix, bool) : side_(side), matrix_(std::move(matrix)) {}

  Side side_;
  CMatrix matrix_;
};

class DensityMatrix {
 public:
  explicit DensityMatrix(CMatrix matrix, const Tolerances& tol = {});

  int dim() const { return static_cast<int>(matrix_.rows()); }
  const CMatrix& matrix() const { return matrix_; }

 private:
  CMatrix matrix_;
};

}  // namespace envlab
