#pragma once

#include <Eigen/Dense>

#include <vector>

#include "vidfp/tensor.hpp"
#include "vidfp/tucker.hpp"

namespace vidfp {

enum class ArdPrior { Gaussian, Laplace };

/// Relevance precisions are capped and the noise variance floored so exact
/// fits cannot divide by zero.
inline constexpr double kArdAlphaCap = 1e12;
inline constexpr double kArdSigma2Floor = 1e-12;

struct ArdConfig {
  ArdPrior prior = ArdPrior::Gaussian;
  /// Signal-to-noise ratio (dB) used to estimate the noise variance when it
  /// is not learned from the residual.
  double snr_db = 20.0;
  bool learn_sigma = false;
  Shape3 max_ranks{0, 0, 0};
  double prune_ratio = 1e-2;
  int max_iter = 100;
  double tol = 1e-7;
};

struct ArdState {
  std::array<Eigen::VectorXd, 3> alpha_factor;  // per-mode, per-component precisions
  double alpha_core = 0.0;
  double sigma2 = 0.0;
};

struct ArdIteration {
  double objective_before = 0.0;  // with this iteration's hyperparameters, before updates
  double objective_after = 0.0;   // same hyperparameters, after the factor/core updates
  Shape3 active_ranks{0, 0, 0};
};

struct ArdResult {
  Shape3 selected_ranks{0, 0, 0};
  /// Orthonormal Tucker model re-fitted at the selected ranks.
  TuckerModel<double> model;
  std::vector<ArdIteration> trace;
};

/// Noise variance from an assumed SNR: mean squared entry times 10^(-snr/10).
double estimateSigmaFromSnr(const Tensor3d& t, double snr_db);

/// Stationary hyperparameters for the current model. Gaussian prior:
/// alpha_d = In / ||A_d||_F^2, alpha_core = J1 J2 J3 / ||core||_F^2;
/// Laplace prior uses 1-norms. sigma2 is the mean squared residual when
/// learned, otherwise held at the SNR estimate.
ArdState updateHyperparams(const TuckerModel<double>& model, const Tensor3d& t,
                           const ArdConfig& config);

/// Updated mode-n factor minimizing the penalized residual with everything
/// else fixed: ridge per column (Gaussian) or coordinate-descent
/// soft-thresholding at sigma2 * alpha_d (Laplace).
Eigen::MatrixXd solveRegularizedFactor(const Tensor3d& t, const TuckerModel<double>& model,
                                       int mode, const ArdState& state, ArdPrior prior);

/// Updated core with the factors fixed (ridge or L1, matching the prior).
Tensor3d solveRegularizedCore(const Tensor3d& t, const TuckerModel<double>& model,
                              const ArdState& state, ArdPrior prior);

/// Negative log-likelihood of the model under the given hyperparameters,
/// up to the additive constant.
double ardObjective(const Tensor3d& t, const TuckerModel<double>& model, const ArdState& state,
                    ArdPrior prior);

/// Automatic relevance determination over the multilinear ranks: starts from
/// a truncated HOSVD at max_ranks and alternates penalized factor/core
/// updates with hyperparameter re-estimation, pruning components whose
/// column norm falls below prune_ratio of the mode's largest. Pruned
/// components never return, so active ranks are non-increasing.
ArdResult ardSelectRanks(const Tensor3d& t, const ArdConfig& config);

}  // namespace vidfp
