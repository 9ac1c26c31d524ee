#include "envlab/nosignal.hpp"

#include "envlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace envlab {

double check_no_signalling(const PureState& state, const LocalUnitary& remote, Side local_side,
                           const Tolerances& tol) {
  if (local_side == remote.side()) {
    throw ValidationError("remote unitary must act on the side opposite to " +
                          std::string(side_name(local_side)));
  }
  const DensityMatrix before = partial_trace(state, local_side, tol);
  const DensityMatrix after = partial_trace(apply_local(state, remote, tol), local_side, tol);
  return trace_distance(before, after);
}

CMatrix hermitian_from_params(const std::vector<double>& params, int d) {
  if (static_cast<int>(params.size()) != d * d) {
    throw ValidationError("expected " + std::to_string(d * d) + " generator parameters");
  }
  CMatrix h = CMatrix::Zero(d, d);
  std::size_t p = 0;
  for (int i = 0; i < d; ++i) h(i, i) = params[p++];
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      h(i, j) = Complex(params[p], params[p + 1]);
      h(j, i) = std::conj(h(i, j));
      p += 2;
    }
  }
  return h;
}

CMatrix unitary_from_generator(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(h);
  const CVector phases = (eig.eigenvalues().cast<Complex>() * Complex(0.0, 1.0)).array().exp();
  return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

namespace {

// Objective kernel on stack-allocated matrices. B is local x remote; the
// remote unitary acts as B U^T.
template <int MaxLocal, int MaxRemote>
class Objective {
 public:
  using Mat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, 0, MaxLocal, MaxLocal>;
  using BMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, 0, MaxLocal, MaxRemote>;
  using UMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, 0, MaxRemote, MaxRemote>;

  explicit Objective(const CMatrix& b) : b_(b), rho_(b * b.adjoint()), d_(static_cast<int>(b.cols())) {}

  int remote_dim() const { return d_; }

  UMat unitary(const std::vector<double>& p) const {
    UMat h(d_, d_);
    std::size_t k = 0;
    for (int i = 0; i < d_; ++i) h(i, i) = p[k++];
    for (int i = 0; i < d_; ++i) {
      for (int j = i + 1; j < d_; ++j) {
        h(i, j) = Complex(p[k], p[k + 1]);
        h(j, i) = std::conj(h(i, j));
        k += 2;
      }
    }
    Eigen::SelfAdjointEigenSolver<UMat> eig(h);
    UMat v = eig.eigenvectors();
    UMat w = v;
    for (int j = 0; j < d_; ++j) w.col(j) *= std::polar(1.0, eig.eigenvalues()[j]);
    return w * v.adjoint();
  }

  double operator()(const std::vector<double>& p) const {
    const UMat u = unitary(p);
    const BMat bp = b_ * u.transpose();
    Mat diff = rho_ - bp * bp.adjoint();
    diff = (0.5 * (diff + diff.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<Mat> eig(diff, Eigen::EigenvaluesOnly);
    return 0.5 * eig.eigenvalues().cwiseAbs().sum();
  }

 private:
  BMat b_;
  Mat rho_;
  int d_;
};

template <int MaxLocal, int MaxRemote>
SignallingReport run_search(const CMatrix& b, Side remote_side, const SearchOptions& o) {
  const Objective<MaxLocal, MaxRemote> objective(b);
  const int d = objective.remote_dim();
  const std::size_t n = static_cast<std::size_t>(d) * d;

  SignallingReport report{0.0, LocalUnitary::identity(remote_side, d), remote_side,
                          o.restarts, o.iterations, o.seed, {}, 0};
  std::vector<double> best_params;
  bool have_best = false;

  for (int r = 0; r < o.restarts; ++r) {
    Rng rng(o.seed + static_cast<std::uint64_t>(r));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> p(n);
    for (auto& x : p) x = normal(rng);
    double f = objective(p);
    ++report.evaluations;
    double rate = o.initial_rate;
    std::vector<double> grad(n);
    std::vector<double> trial(n);
    for (int it = 0; it < o.iterations; ++it) {
      double norm2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double keep = p[i];
        p[i] = keep + o.step;
        grad[i] = (objective(p) - f) / o.step;
        p[i] = keep;
        norm2 += grad[i] * grad[i];
      }
      report.evaluations += n;
      if (!(norm2 > 0.0)) break;
      const double scale = rate / std::sqrt(norm2);
      for (std::size_t i = 0; i < n; ++i) trial[i] = p[i] + scale * grad[i];
      const double ft = objective(trial);
      ++report.evaluations;
      if (ft > f) {
        p.swap(trial);
        f = ft;
        rate *= 1.5;
      } else {
        rate *= 0.5;
      }
    }
    report.restart_best.push_back(f);
    if (!have_best || f > report.best_distance) {
      report.best_distance = f;
      best_params = p;
      have_best = true;
    }
  }
  if (have_best) {
    report.best_unitary = LocalUnitary::unchecked(remote_side, objective.unitary(best_params));
  }
  return report;
}

}  // namespace

SignallingReport adversarial_search(const PureState& state, Side remote_side, const SearchOptions& options,
                                    const Tolerances& tol) {
  if (!state.is_bipartite()) throw ValidationError("adversarial search needs a bipartite state");
  if (remote_side == Side::C) throw ValidationError("remote side must be S or E");
  if (options.restarts < 0 || options.iterations < 0) {
    throw ValidationError("restarts and iterations must be nonnegative");
  }
  (void)tol;
  const CMatrix a = state.as_matrix();
  // Local index as rows, remote as columns.
  const CMatrix b = remote_side == Side::E ? a : CMatrix(a.transpose());
  const int d = static_cast<int>(b.cols());
  if (d == 1) {
    // Only a global phase is available remotely.
    return SignallingReport{0.0, LocalUnitary::identity(remote_side, 1), remote_side, options.restarts,
                            options.iterations, options.seed, std::vector<double>(options.restarts, 0.0), 0};
  }
  if (b.rows() <= 8 && d <= 4) return run_search<8, 4>(b, remote_side, options);
  if (b.rows() <= 8 && d <= 8) return run_search<8, 8>(b, remote_side, options);
  return run_search<Eigen::Dynamic, Eigen::Dynamic>(b, remote_side, options);
}

double contextuality_check(const PureState& state, int k, const std::vector<CMatrix>& contexts,
                           const Tolerances& tol) {
  if (!state.is_bipartite()) throw ValidationError("contextuality check needs a bipartite state");
  const SchmidtForm form = schmidt_decompose(state, tol);
  if (k < 0 || k >= form.rank()) throw ValidationError("Schmidt index out of range");
  const CVector eps = form.basis_E.col(k);
  const int de = state.dim(Side::E);
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    const CMatrix& ctx = contexts[c];
    if (ctx.rows() != de || ctx.cols() != de) {
      throw ValidationError("context " + std::to_string(c) + " is not a basis of E");
    }
    if ((ctx.adjoint() * ctx - CMatrix::Identity(de, de)).cwiseAbs().maxCoeff() > tol.ortho) {
      throw ValidationError("context " + std::to_string(c) + " is not orthonormal");
    }
    Eigen::Index where = -1;
    for (Eigen::Index j = 0; j < de; ++j) {
      if (std::abs(std::abs(ctx.col(j).dot(eps)) - 1.0) <= tol.ortho) where = j;
    }
    if (where < 0) {
      throw PreconditionError("context " + std::to_string(c) + " does not contain the Schmidt vector " +
                              std::to_string(k));
    }
    const double p = born_probability(state, Side::E, CVector(ctx.col(where)));
    if (c == 0) {
      lo = hi = p;
    } else {
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
  }
  return hi - lo;
}

CMatrix random_context(const CVector& v, Rng& rng) {
  const Eigen::Index d = v.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  CMatrix m(d, d);
  m.col(0) = v.normalized();
  for (Eigen::Index j = 1; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) m(i, j) = Complex(normal(rng), normal(rng));
  }
  Eigen::HouseholderQR<CMatrix> qr(m);
  CMatrix q = qr.householderQ();
  // Undo the phase QR put on the first column so it equals v exactly in span.
  const Complex ph = q.col(0).dot(m.col(0));
  q.col(0) *= ph / std::abs(ph);
  return q;
}

}  // namespace envlab
