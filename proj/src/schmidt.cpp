#include "envlab/errors.hpp"
#include "envlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace envlab {

namespace {

// Coefficients at or below this are dropped from the Schmidt rank.
constexpr double kRankCutoff = 1e-10;

// Multiplies v by a phase so its largest-magnitude entry (lowest index among
// near-ties) is real and positive.
void fix_phase(Eigen::Ref<CVector> v) {
  const double peak = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > peak - 1e-12) {
      v *= std::conj(v[i]) / std::abs(v[i]);
      return;
    }
  }
}

void check_normalized(const PureState& state, const Tolerances& tol) {
  const double norm2 = state.amplitudes().squaredNorm();
  if (std::abs(norm2 - 1.0) > tol.norm) {
    std::ostringstream os;
    os.precision(17);
    os << "state is not normalized: norm deficit " << (1.0 - norm2);
    throw ValidationError(os.str());
  }
}

}  // namespace

SchmidtForm schmidt_decompose(const PureState& state, const Tolerances& tol) {
  if (!state.is_bipartite()) {
    throw ValidationError("Schmidt decomposition needs exactly 2 subsystems; merge factors first");
  }
  check_normalized(state, tol);
  const CMatrix a = state.as_matrix();

  // Diagonalize the smaller reduced state and read off S-side vectors.
  CMatrix s_vectors;
  if (a.rows() <= a.cols()) {
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(a * a.adjoint());
    s_vectors = eig.eigenvectors().rowwise().reverse();
  } else {
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(a.transpose() * a.conjugate());
    const CMatrix e_vectors = eig.eigenvectors().rowwise().reverse();
    s_vectors.resize(a.rows(), e_vectors.cols());
    for (Eigen::Index k = 0; k < e_vectors.cols(); ++k) {
      const CVector v = a * e_vectors.col(k).conjugate();
      const double n = v.norm();
      s_vectors.col(k) = n > kRankCutoff ? CVector(v / n) : CVector::Zero(a.rows());
    }
  }

  // Coefficients from partner norms keep small values accurate.
  struct Branch {
    double alpha;
    CVector sigma;
  };
  std::vector<Branch> branches;
  for (Eigen::Index k = 0; k < s_vectors.cols(); ++k) {
    const double alpha = (a.transpose() * s_vectors.col(k).conjugate()).norm();
    if (alpha > kRankCutoff) branches.push_back({alpha, s_vectors.col(k)});
  }
  std::stable_sort(branches.begin(), branches.end(),
                   [](const Branch& x, const Branch& y) { return x.alpha > y.alpha; });
  if (branches.empty()) throw Error("Schmidt decomposition found no support");

  const int r = static_cast<int>(branches.size());
  SchmidtForm form;
  form.basis_S.resize(a.rows(), r);
  for (int k = 0; k < r; ++k) form.basis_S.col(k) = branches[k].sigma;

  for (int begin = 0; begin < r;) {
    int end = begin + 1;
    while (end < r && branches[begin].alpha - branches[end].alpha < tol.spec) ++end;
    DegenerateBlock block{begin, end, branches[begin].alpha - branches[end - 1].alpha};
    if (block.size() > 1) {
      form.basis_S.middleCols(begin, block.size()) =
          canonical_span_basis(form.basis_S.middleCols(begin, block.size()));
    } else {
      fix_phase(form.basis_S.col(begin));
    }
    form.blocks.push_back(block);
    begin = end;
  }

  form.coefficients.resize(r);
  form.basis_E.resize(a.cols(), r);
  for (int k = 0; k < r; ++k) {
    const CVector partner = a.transpose() * form.basis_S.col(k).conjugate();
    const double alpha = partner.norm();
    form.coefficients[k] = alpha;
    form.basis_E.col(k) = partner / alpha;
  }
  return form;
}

SchmidtFrame schmidt_frame(const SchmidtForm& form) {
  SchmidtFrame frame;
  frame.coefficients = form.coefficients;
  frame.basis_S = complete_basis(form.basis_S);
  frame.basis_E = complete_basis(form.basis_E);
  return frame;
}

double reconstruction_error(const PureState& state, const SchmidtForm& form) {
  const CMatrix rebuilt = form.basis_S * form.coefficients.cast<Complex>().asDiagonal() *
                          form.basis_E.transpose();
  const CMatrix a = state.as_matrix();
  if (rebuilt.rows() != a.rows() || rebuilt.cols() != a.cols()) {
    throw ValidationError("Schmidt form does not match the state dimensions");
  }
  const Complex overlap = (rebuilt.conjugate().cwiseProduct(a)).sum();
  const Complex rot = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : Complex(1.0, 0.0);
  return (a - rot * rebuilt).norm();
}

}  // namespace envlab
