#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpinn/util/error.hpp"

namespace dpinn {

enum class OptimizerKind { gd, adagrad, adam, lma };

inline std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::gd: return "gd";
    case OptimizerKind::adagrad: return "adagrad";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::lma: return "lma";
  }
  return "?";
}

inline OptimizerKind parse_optimizer(std::string_view name) {
  for (auto k : {OptimizerKind::gd, OptimizerKind::adagrad, OptimizerKind::adam, OptimizerKind::lma})
    if (to_string(k) == name) return k;
  throw Error(ErrorKind::invalid_input, "unknown optimizer '" + std::string(name) + "'");
}

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double delta = 1e-8;
  // Levenberg-Marquardt damping: initial mu and the factor it is divided by
  // on success and multiplied by on failure.
  double lma_mu = 1e-3;
  double lma_nu = 10.0;
  int lma_max_retries = 12;
};

/// Outcome of one damped least-squares step.
struct LmaStepReport {
  bool accepted = false;
  int retries = 0;
  double old_sq_norm = 0.0;
  double new_sq_norm = 0.0;
};

/// Increment  -(J^T J + mu I)^{-1} J^T e  from the precomputed products.
/// Throws singular-system when the damped normal matrix is numerically
/// singular.
inline Eigen::VectorXd lma_increment_normal(const Eigen::MatrixXd& jtj, const Eigen::VectorXd& jte, double mu,
                                            double rcond_floor = 1e-14) {
  Eigen::MatrixXd normal = jtj;
  normal.diagonal().array() += mu;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > rcond_floor))
    throw Error(ErrorKind::singular_system, "J^T J + mu I is singular");
  Eigen::VectorXd step = ldlt.solve(-jte);
  if (!step.allFinite()) throw Error(ErrorKind::singular_system, "J^T J + mu I is singular");
  return step;
}

inline Eigen::VectorXd lma_increment(const Eigen::MatrixXd& jac, const Eigen::VectorXd& residual, double mu,
                                     double rcond_floor = 1e-14) {
  if (jac.rows() != residual.size())
    throw Error(ErrorKind::invalid_input, "Jacobian rows must match the residual length");
  return lma_increment_normal(jac.transpose() * jac, jac.transpose() * residual, mu, rcond_floor);
}

/// Per-run optimizer state. Accumulator shapes follow the parameter count
/// fixed at construction.
class OptimizerState {
 public:
  OptimizerState(OptimizerSettings settings, std::size_t parameter_count)
      : settings_(settings), mu_(settings.lma_mu) {
    if (!(settings.learning_rate > 0.0) && settings.kind != OptimizerKind::lma)
      throw Error(ErrorKind::invalid_config, "learning rate must be positive");
    if (settings.kind == OptimizerKind::lma && !(settings.lma_mu > 0.0 && settings.lma_nu > 1.0))
      throw Error(ErrorKind::invalid_config, "LMA needs mu > 0 and nu > 1");
    switch (settings.kind) {
      case OptimizerKind::adagrad: accum_.assign(parameter_count, 0.0); break;
      case OptimizerKind::adam:
        first_.assign(parameter_count, 0.0);
        second_.assign(parameter_count, 0.0);
        break;
      default: break;
    }
    size_ = parameter_count;
  }

  const OptimizerSettings& settings() const { return settings_; }
  double mu() const { return mu_; }
  long timestep() const { return timestep_; }
  std::span<const double> adam_first_moment() const { return first_; }
  std::span<const double> adam_second_moment() const { return second_; }
  std::span<const double> adagrad_accumulator() const { return accum_; }

  /// GD:      theta -= lr g
  /// Adagrad: G += g^2,  theta -= lr g / sqrt(G + delta)
  /// Adam:    bias-corrected first and second moments.
  void step_first_order(std::span<double> params, std::span<const double> grad) {
    if (params.size() != size_ || grad.size() != size_)
      throw Error(ErrorKind::invalid_input, "parameter and gradient sizes must match the optimizer state");
    for (double g : grad)
      if (!std::isfinite(g)) throw Error(ErrorKind::diverged_training, "non-finite gradient");
    const double lr = settings_.learning_rate;
    switch (settings_.kind) {
      case OptimizerKind::gd:
        for (std::size_t k = 0; k < size_; ++k) params[k] -= lr * grad[k];
        break;
      case OptimizerKind::adagrad:
        for (std::size_t k = 0; k < size_; ++k) {
          accum_[k] += grad[k] * grad[k];
          params[k] -= lr * grad[k] / std::sqrt(accum_[k] + settings_.delta);
        }
        break;
      case OptimizerKind::adam: {
        ++timestep_;
        const double b1 = settings_.beta1, b2 = settings_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(timestep_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(timestep_));
        for (std::size_t k = 0; k < size_; ++k) {
          first_[k] = b1 * first_[k] + (1.0 - b1) * grad[k];
          second_[k] = b2 * second_[k] + (1.0 - b2) * grad[k] * grad[k];
          const double mhat = first_[k] / c1;
          const double vhat = second_[k] / c2;
          params[k] -= lr * mhat / (std::sqrt(vhat) + settings_.delta);
        }
        break;
      }
      case OptimizerKind::lma:
        throw Error(ErrorKind::invalid_config, "LMA needs residuals and a Jacobian, not a gradient");
    }
  }

  /// One Levenberg-Marquardt update  theta -= (J^T J + mu I)^{-1} J^T e.
  /// A step that lowers |e|^2 is accepted and mu shrinks by nu; otherwise mu
  /// grows by nu and the step is retried. `residual_at(params)` returns e.
  template <class ResidualFn>
  LmaStepReport step_lma(std::span<double> params, const Eigen::VectorXd& residual, const Eigen::MatrixXd& jac,
                         ResidualFn&& residual_at) {
    if (jac.rows() != residual.size())
      throw Error(ErrorKind::invalid_input, "Jacobian rows must match the residual length");
    return step_lma_normal(params, residual.squaredNorm(), jac.transpose() * jac, jac.transpose() * residual,
                           std::forward<ResidualFn>(residual_at));
  }

  /// Same update from  |e|^2,  J^T J  and  J^T e.
  template <class ResidualFn>
  LmaStepReport step_lma_normal(std::span<double> params, double sq_norm, const Eigen::MatrixXd& jtj,
                                const Eigen::VectorXd& jte, ResidualFn&& residual_at) {
    if (static_cast<std::size_t>(jtj.cols()) != params.size() || jtj.rows() != jtj.cols() || jte.size() != jtj.rows())
      throw Error(ErrorKind::invalid_input, "Jacobian columns must match the parameter count");
    LmaStepReport report;
    report.old_sq_norm = sq_norm;
    report.new_sq_norm = report.old_sq_norm;
    bool ever_solved = false;
    std::vector<double> trial(params.begin(), params.end());
    for (int attempt = 0; attempt <= settings_.lma_max_retries; ++attempt) {
      report.retries = attempt;
      Eigen::VectorXd step;
      try {
        step = lma_increment_normal(jtj, jte, mu_);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::singular_system) throw;
        mu_ *= settings_.lma_nu;
        continue;
      }
      ever_solved = true;
      for (std::size_t k = 0; k < params.size(); ++k) trial[k] = params[k] + step(static_cast<Eigen::Index>(k));
      const Eigen::VectorXd next = residual_at(std::span<const double>(trial));
      const double sq = next.squaredNorm();
      if (std::isfinite(sq) && sq < report.old_sq_norm) {
        std::copy(trial.begin(), trial.end(), params.begin());
        report.accepted = true;
        report.new_sq_norm = sq;
        mu_ = std::max(mu_ / settings_.lma_nu, 1e-300);
        return report;
      }
      mu_ *= settings_.lma_nu;
    }
    if (!ever_solved) throw Error(ErrorKind::singular_system, "J^T J + mu I stayed singular after damping escalation");
    return report;
  }

 private:
  OptimizerSettings settings_;
  std::size_t size_ = 0;
  double mu_ = 1e-3;
  long timestep_ = 0;
  std::vector<double> accum_;
  std::vector<double> first_;
  std::vector<double> second_;
};

}  // namespace dpinn
