#include "envlab/state.hpp"

#include "envlab/errors.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace envlab {

std::string_view side_name(Side side) {
  switch (side) {
    case Side::S: return "S";
    case Side::E: return "E";
    case Side::C: return "C";
  }
  return "?";
}

Side parse_side(std::string_view name) {
  if (name == "S") return Side::S;
  if (name == "E") return Side::E;
  if (name == "C") return Side::C;
  throw ValidationError("unknown subsystem label '" + std::string(name) + "'");
}

namespace {

void check_exact(const ExactAmplitudes& exact, std::size_t n) {
  if (exact.num.size() != n || exact.signs.size() != n) {
    throw ValidationError("exact annotation must have one entry per amplitude");
  }
  if (exact.den <= 0) throw ValidationError("exact annotation denominator must be positive");
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (exact.num[i] < 0) throw ValidationError("exact annotation numerators must be >= 0");
    if (exact.signs[i] != 1 && exact.signs[i] != -1) {
      throw ValidationError("exact annotation signs must be +1 or -1");
    }
    sum += exact.num[i];
  }
  if (sum != exact.den) {
    std::ostringstream os;
    os << "exact annotation is not normalized: sum num = " << sum << ", den = " << exact.den;
    throw ValidationError(os.str());
  }
}

}  // namespace

PureState::PureState(std::vector<int> dims, CVector amplitudes, std::string label,
                     const Tolerances& tol, std::size_t max_total_dim)
    : dims_(std::move(dims)), amps_(std::move(amplitudes)), label_(std::move(label)) {
  if (dims_.size() != 2 && dims_.size() != 3) {
    throw ValidationError("a state needs 2 or 3 subsystems, got " + std::to_string(dims_.size()));
  }
  std::size_t total = 1;
  for (int d : dims_) {
    if (d < 1) throw ValidationError("subsystem dimensions must be positive");
    total *= static_cast<std::size_t>(d);
    if (total > max_total_dim) {
      throw ValidationError("total dimension exceeds the cap of " + std::to_string(max_total_dim));
    }
  }
  if (static_cast<std::size_t>(amps_.size()) != total) {
    throw ValidationError("expected " + std::to_string(total) + " amplitudes, got " +
                          std::to_string(amps_.size()));
  }
  const double norm2 = amps_.squaredNorm();
  if (!std::isfinite(norm2) || std::abs(norm2 - 1.0) > tol.norm) {
    std::ostringstream os;
    os.precision(17);
    os << "state is not normalized: squared norm " << norm2 << ", norm deficit " << (1.0 - norm2);
    throw ValidationError(os.str());
  }
}

PureState PureState::from_exact(std::vector<int> dims, ExactAmplitudes exact, std::string label) {
  std::size_t total = 1;
  for (int d : dims) total *= static_cast<std::size_t>(std::max(d, 0));
  check_exact(exact, total);
  CVector amps(static_cast<Eigen::Index>(total));
  for (std::size_t i = 0; i < total; ++i) {
    const double mag = std::sqrt(static_cast<double>(exact.num[i]) / static_cast<double>(exact.den));
    amps[static_cast<Eigen::Index>(i)] = Complex(exact.signs[i] * mag, 0.0);
  }
  PureState state(std::move(dims), std::move(amps), std::move(label));
  state.exact_ = std::move(exact);
  return state;
}

CMatrix PureState::as_matrix() const {
  if (!is_bipartite()) throw ValidationError("amplitude matrix needs a bipartite state");
  const int ds = dims_[0];
  const int de = dims_[1];
  CMatrix m(ds, de);
  for (int a = 0; a < ds; ++a) {
    for (int b = 0; b < de; ++b) m(a, b) = amps_[a * de + b];
  }
  return m;
}

PureState PureState::with_label(std::string label) const {
  PureState copy = *this;
  copy.label_ = std::move(label);
  return copy;
}

PureState PureState::with_exact(ExactAmplitudes exact, const Tolerances& tol) const {
  check_exact(exact, total_dim());
  for (std::size_t i = 0; i < total_dim(); ++i) {
    const double mag = std::sqrt(static_cast<double>(exact.num[i]) / static_cast<double>(exact.den));
    const Complex expected(exact.signs[i] * mag, 0.0);
    if (std::abs(amps_[static_cast<Eigen::Index>(i)] - expected) > tol.state) {
      throw ValidationError("exact annotation disagrees with amplitude " + std::to_string(i));
    }
  }
  PureState copy = *this;
  copy.exact_ = std::move(exact);
  return copy;
}

PureState PureState::without_exact() const {
  PureState copy = *this;
  copy.exact_.reset();
  return copy;
}

PureState state_from_matrix(const CMatrix& amplitudes, std::string label, const Tolerances& tol,
                            std::size_t max_total_dim) {
  const int ds = static_cast<int>(amplitudes.rows());
  const int de = static_cast<int>(amplitudes.cols());
  CVector amps(static_cast<Eigen::Index>(ds) * de);
  for (int a = 0; a < ds; ++a) {
    for (int b = 0; b < de; ++b) amps[a * de + b] = amplitudes(a, b);
  }
  return PureState({ds, de}, std::move(amps), std::move(label), tol, max_total_dim);
}

LocalUnitary::LocalUnitary(Side side, CMatrix matrix, const Tolerances& tol)
    : side_(side), matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() < 1) {
    throw ValidationError("unitary must be a non-empty square matrix");
  }
  const CMatrix gram = matrix_.adjoint() * matrix_;
  const double dev = (gram - CMatrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
  if (!(dev <= tol.unitary)) {
    std::ostringstream os;
    os << "matrix is not unitary: max |U^dagger U - 1| = " << dev;
    throw ValidationError(os.str());
  }
}

LocalUnitary LocalUnitary::identity(Side side, int dim) {
  return LocalUnitary(side, CMatrix::Identity(dim, dim));
}

LocalUnitary LocalUnitary::unchecked(Side side, CMatrix matrix) {
  if (matrix.rows() != matrix.cols() || matrix.rows() < 1) {
    throw ValidationError("unitary must be a non-empty square matrix");
  }
  return LocalUnitary(side, std::move(matrix), true);
}

DensityMatrix::DensityMatrix(CMatrix matrix, const Tolerances& tol) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() < 1) {
    throw ValidationError("density matrix must be a non-empty square matrix");
  }
  const double herm = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > tol.state) throw ValidationError("density matrix is not Hermitian");
  const double trace = matrix_.trace().real();
  if (std::abs(trace - 1.0) > tol.norm) {
    throw ValidationError("density matrix trace is " + std::to_string(trace) + ", expected 1");
  }
  const CMatrix h = 0.5 * (matrix_ + matrix_.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(h, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -tol.state) {
    throw ValidationError("density matrix has a negative eigenvalue");
  }
}

}  // namespace envlab
