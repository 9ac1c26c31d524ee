#include "envlab/random.hpp"

#include <cmath>

namespace envlab {

namespace {

CMatrix gaussian_matrix(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CMatrix g(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      g(i, j) = Complex(re, im);
    }
  }
  return g;
}

}  // namespace

CMatrix haar_unitary(int dim, Rng& rng) {
  const CMatrix g = gaussian_matrix(dim, dim, rng);
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < dim; ++k) {
    const Complex d = r(k, k);
    const double mag = std::abs(d);
    q.col(k) *= mag > 0.0 ? d / mag : Complex(1.0, 0.0);
  }
  return q;
}

CVector random_unit_vector(int dim, Rng& rng) {
  CVector v = gaussian_matrix(dim, 1, rng).col(0);
  return v / v.norm();
}

PureState random_state(std::vector<int> dims, Rng& rng, std::string label) {
  int total = 1;
  for (int d : dims) total *= d;
  return PureState(std::move(dims), random_unit_vector(total, rng), std::move(label));
}

}  // namespace envlab
