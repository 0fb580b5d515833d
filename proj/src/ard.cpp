#include "vidfp/ard.hpp"

#include <algorithm>
#include <cmath>

namespace vidfp {

namespace {

double columnWeight(const Eigen::MatrixXd& m, Eigen::Index col, ArdPrior prior) {
  return prior == ArdPrior::Gaussian ? m.col(col).squaredNorm() : m.col(col).lpNorm<1>();
}

double coreWeight(const Tensor3d& core, ArdPrior prior) {
  return prior == ArdPrior::Gaussian ? core.squaredNorm() : core.lpNorm1();
}

double clampAlpha(double numerator, double weight) {
  if (weight <= 0.0) return kArdAlphaCap;
  return std::min(numerator / weight, kArdAlphaCap);
}

// Matricization of core x_m A_m over the modes m != n; the factor-update
// design matrix (Jn rows).
Eigen::MatrixXd factorDesign(const TuckerModel<double>& model, int mode) {
  Tensor3d y = model.core;
  for (int m = 1; m <= 3; ++m) {
    if (m == mode) continue;
    y = modeProduct(y, model.factor(m), m);
  }
  return matricize(y, mode);
}

double softThreshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

constexpr int kInnerMaxIter = 1000;
constexpr double kInnerTol = 1e-8;

Eigen::MatrixXd solveFactorRidge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& b,
                                 const Eigen::VectorXd& alpha, double sigma2) {
  Eigen::MatrixXd gram = b * b.transpose();
  gram.diagonal() += sigma2 * alpha;
  // Complete orthogonal decomposition gives the minimum-norm solution when
  // the normal equations are singular (all-zero penalty on a dead component).
  return gram.completeOrthogonalDecomposition().solve(b * x.transpose()).transpose();
}

Eigen::MatrixXd solveFactorL1(const Eigen::MatrixXd& x, const Eigen::MatrixXd& b,
                              const Eigen::MatrixXd& init, const Eigen::VectorXd& alpha,
                              double sigma2) {
  const Eigen::MatrixXd gram = b * b.transpose();
  const Eigen::MatrixXd xbt = x * b.transpose();
  Eigen::MatrixXd a = init;
  for (int sweep = 0; sweep < kInnerMaxIter; ++sweep) {
    double delta = 0.0;
    for (Eigen::Index d = 0; d < a.cols(); ++d) {
      const double gd = gram(d, d);
      if (gd <= 0.0) {
        delta = std::max(delta, a.col(d).cwiseAbs().maxCoeff());
        a.col(d).setZero();
        continue;
      }
      const Eigen::VectorXd rho = xbt.col(d) - a * gram.col(d) + gd * a.col(d);
      const double thresh = sigma2 * alpha[d];
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double next = softThreshold(rho[i], thresh) / gd;
        delta = std::max(delta, std::abs(next - a(i, d)));
        a(i, d) = next;
      }
    }
    if (delta < kInnerTol) break;
  }
  return a;
}

Tensor3d solveCoreRidge(const Tensor3d& t, const TuckerModel<double>& model, double alpha_core,
                        double sigma2) {
  // (M^T M + sigma2*alpha I) vec(core) = M^T vec(t) with M = A3 (x) A2 (x) A1.
  // M^T M = G3 (x) G2 (x) G1 with Gn = An^T An, solved through the per-mode
  // eigendecompositions.
  std::array<Eigen::MatrixXd, 3> q;
  std::array<Eigen::VectorXd, 3> lambda;
  for (int n = 1; n <= 3; ++n) {
    const Eigen::MatrixXd& a = model.factor(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.transpose() * a);
    q[n - 1] = es.eigenvectors();
    lambda[n - 1] = es.eigenvalues();
  }
  Tensor3d z = t;
  for (int n = 1; n <= 3; ++n)
    z = modeProduct<double>(z, (model.factor(n) * q[n - 1]).transpose(), n);
  const Shape3 ranks = model.ranks();
  for (Eigen::Index k = 0; k < ranks[2]; ++k)
    for (Eigen::Index j = 0; j < ranks[1]; ++j)
      for (Eigen::Index i = 0; i < ranks[0]; ++i)
        z(i, j, k) /= lambda[0][i] * lambda[1][j] * lambda[2][k] + sigma2 * alpha_core;
  for (int n = 1; n <= 3; ++n) z = modeProduct(z, q[n - 1], n);
  return z;
}

Tensor3d solveCoreL1(const Tensor3d& t, const TuckerModel<double>& model, double alpha_core,
                     double sigma2) {
  const Shape3 ranks = model.ranks();
  const Eigen::Index p = ranks[0] * ranks[1] * ranks[2];
  std::array<Eigen::MatrixXd, 3> gram;
  for (int n = 1; n <= 3; ++n)
    gram[n - 1] = model.factor(n).transpose() * model.factor(n);

  Eigen::MatrixXd h(p, p);
  for (Eigen::Index qc = 0; qc < p; ++qc) {
    const Eigen::Index q1 = qc % ranks[0];
    const Eigen::Index q2 = (qc / ranks[0]) % ranks[1];
    const Eigen::Index q3 = qc / (ranks[0] * ranks[1]);
    for (Eigen::Index pc = 0; pc < p; ++pc) {
      const Eigen::Index p1 = pc % ranks[0];
      const Eigen::Index p2 = (pc / ranks[0]) % ranks[1];
      const Eigen::Index p3 = pc / (ranks[0] * ranks[1]);
      h(pc, qc) = gram[0](p1, q1) * gram[1](p2, q2) * gram[2](p3, q3);
    }
  }

  Tensor3d proj = t;
  for (int n = 1; n <= 3; ++n) proj = modeProduct<double>(proj, model.factor(n).transpose(), n);
  const Eigen::VectorXd c = proj.data();

  Eigen::VectorXd k = model.core.data();
  const double thresh = sigma2 * alpha_core;
  for (int sweep = 0; sweep < kInnerMaxIter; ++sweep) {
    double delta = 0.0;
    for (Eigen::Index pc = 0; pc < p; ++pc) {
      const double hpp = h(pc, pc);
      if (hpp <= 0.0) {
        delta = std::max(delta, std::abs(k[pc]));
        k[pc] = 0.0;
        continue;
      }
      const double rho = c[pc] - h.col(pc).dot(k) + hpp * k[pc];
      const double next = softThreshold(rho, thresh) / hpp;
      delta = std::max(delta, std::abs(next - k[pc]));
      k[pc] = next;
    }
    if (delta < kInnerTol) break;
  }
  Tensor3d core(ranks);
  core.data() = k;
  return core;
}

}  // namespace

double estimateSigmaFromSnr(const Tensor3d& t, double snr_db) {
  const double ms = t.squaredNorm() / static_cast<double>(t.size());
  if (ms <= 0.0)
    throw std::invalid_argument("estimateSigmaFromSnr: zero tensor has no defined SNR");
  return ms * std::pow(10.0, -snr_db / 10.0);
}

ArdState updateHyperparams(const TuckerModel<double>& model, const Tensor3d& t,
                           const ArdConfig& config) {
  for (int n = 1; n <= 3; ++n) {
    if (model.factor(n).rows() != t.dim(n))
      throw std::invalid_argument("updateHyperparams: model dims do not match tensor");
  }
  ArdState state;
  if (config.learn_sigma) {
    const double resid2 = std::pow(reconstructionError(t, model), 2);
    state.sigma2 = std::max(resid2 / static_cast<double>(t.size()), kArdSigma2Floor);
  } else {
    state.sigma2 = std::max(estimateSigmaFromSnr(t, config.snr_db), kArdSigma2Floor);
  }
  for (int n = 1; n <= 3; ++n) {
    const Eigen::MatrixXd& a = model.factor(n);
    Eigen::VectorXd alpha(a.cols());
    for (Eigen::Index d = 0; d < a.cols(); ++d)
      alpha[d] = clampAlpha(static_cast<double>(t.dim(n)), columnWeight(a, d, config.prior));
    state.alpha_factor[n - 1] = alpha;
  }
  state.alpha_core =
      clampAlpha(static_cast<double>(model.core.size()), coreWeight(model.core, config.prior));
  return state;
}

Eigen::MatrixXd solveRegularizedFactor(const Tensor3d& t, const TuckerModel<double>& model,
                                       int mode, const ArdState& state, ArdPrior prior) {
  detail::requireMode(mode);
  const Eigen::MatrixXd b = factorDesign(model, mode);
  const Eigen::MatrixXd x = matricize(t, mode);
  const Eigen::VectorXd& alpha = state.alpha_factor[mode - 1];
  if (prior == ArdPrior::Gaussian) return solveFactorRidge(x, b, alpha, state.sigma2);
  return solveFactorL1(x, b, model.factor(mode), alpha, state.sigma2);
}

Tensor3d solveRegularizedCore(const Tensor3d& t, const TuckerModel<double>& model,
                              const ArdState& state, ArdPrior prior) {
  if (prior == ArdPrior::Gaussian)
    return solveCoreRidge(t, model, state.alpha_core, state.sigma2);
  return solveCoreL1(t, model, state.alpha_core, state.sigma2);
}

double ardObjective(const Tensor3d& t, const TuckerModel<double>& model, const ArdState& state,
                    ArdPrior prior) {
  const double resid2 = std::pow(reconstructionError(t, model), 2);
  double obj = resid2 / (2.0 * state.sigma2) +
               0.5 * static_cast<double>(t.size()) * std::log(state.sigma2);
  const double w = prior == ArdPrior::Gaussian ? 0.5 : 1.0;
  for (int n = 1; n <= 3; ++n) {
    const Eigen::MatrixXd& a = model.factor(n);
    const Eigen::VectorXd& alpha = state.alpha_factor[n - 1];
    for (Eigen::Index d = 0; d < a.cols(); ++d) {
      obj += w * alpha[d] * columnWeight(a, d, prior) -
             w * static_cast<double>(t.dim(n)) * std::log(alpha[d]);
    }
  }
  obj += w * state.alpha_core * coreWeight(model.core, prior) -
         w * static_cast<double>(model.core.size()) * std::log(state.alpha_core);
  return obj;
}

ArdResult ardSelectRanks(const Tensor3d& t, const ArdConfig& config) {
  Shape3 max_ranks = config.max_ranks;
  for (int n = 0; n < 3; ++n) {
    if (max_ranks[n] < 1 || max_ranks[n] > t.dims()[n])
      throw std::invalid_argument("ardSelectRanks: max_ranks out of range");
  }
  if (!(config.prune_ratio > 0.0 && config.prune_ratio < 1.0) || config.max_iter < 1)
    throw std::invalid_argument("ardSelectRanks: invalid config");

  TuckerModel<double> model = hosvdInit(t, max_ranks);
  ArdResult result;
  double prev_obj = 0.0;
  bool have_prev = false;

  for (int iter = 0; iter < config.max_iter; ++iter) {
    const ArdState state = updateHyperparams(model, t, config);
    ArdIteration record;
    record.objective_before = ardObjective(t, model, state, config.prior);

    for (int n = 1; n <= 3; ++n)
      model.factor(n) = solveRegularizedFactor(t, model, n, state, config.prior);
    model.core = solveRegularizedCore(t, model, state, config.prior);
    record.objective_after = ardObjective(t, model, state, config.prior);

    bool pruned = false;
    for (int n = 1; n <= 3; ++n) {
      Eigen::MatrixXd& a = model.factor(n);
      Eigen::VectorXd norms(a.cols());
      for (Eigen::Index d = 0; d < a.cols(); ++d)
        norms[d] = config.prior == ArdPrior::Gaussian ? a.col(d).norm() : a.col(d).lpNorm<1>();
      const double max_norm = norms.maxCoeff();
      std::vector<Eigen::Index> keep;
      for (Eigen::Index d = 0; d < a.cols(); ++d)
        if (norms[d] >= config.prune_ratio * max_norm) keep.push_back(d);
      if (keep.empty()) {
        Eigen::Index best = 0;
        norms.maxCoeff(&best);
        keep.push_back(best);
      }
      if (static_cast<Eigen::Index>(keep.size()) == a.cols()) continue;
      pruned = true;
      Eigen::MatrixXd kept(a.rows(), static_cast<Eigen::Index>(keep.size()));
      for (std::size_t j = 0; j < keep.size(); ++j) kept.col(static_cast<Eigen::Index>(j)) = a.col(keep[j]);
      a = kept;
      // drop the matching core slices
      const Shape3 old_dims = model.core.dims();
      Shape3 new_dims = old_dims;
      new_dims[n - 1] = static_cast<Eigen::Index>(keep.size());
      Tensor3d core(new_dims);
      for (Eigen::Index k = 0; k < new_dims[2]; ++k)
        for (Eigen::Index j = 0; j < new_dims[1]; ++j)
          for (Eigen::Index i = 0; i < new_dims[0]; ++i) {
            Eigen::Index src[3] = {i, j, k};
            src[n - 1] = keep[static_cast<std::size_t>(src[n - 1])];
            core(i, j, k) = model.core(src[0], src[1], src[2]);
          }
      model.core = core;
    }

    record.active_ranks = model.ranks();
    result.trace.push_back(record);

    if (!pruned && have_prev &&
        std::abs(prev_obj - record.objective_after) <=
            config.tol * (1.0 + std::abs(prev_obj)))
      break;
    prev_obj = record.objective_after;
    have_prev = !pruned;
  }

  result.selected_ranks = model.ranks();
  result.model = tuckerHooi(t, result.selected_ranks).model;
  return result;
}

}  // namespace vidfp
