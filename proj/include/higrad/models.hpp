#pragma once

// Per-datum loss gradients for the stochastic updates.
//
// Each oracle exposes the gradient of one observation's loss and the loss
// itself (the latter exists so finite-difference checks and diagnostics can
// confirm the pair match).  All oracles are stateless and safe to share
// across threads.

#include <Eigen/Dense>
#include <memory>
#include <string>

namespace higrad {

class GradientOracle {
 public:
  virtual ~GradientOracle() = default;

  virtual int dim() const = 0;

  // Writes the gradient of the loss at theta for the observation (x, y) into
  // grad.  grad must already have size dim(); theta and x are checked and a
  // DimensionMismatch is thrown when they disagree with dim().
  virtual void gradient(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                        double y, Eigen::VectorXd& grad) const = 0;

  // The corresponding loss value.
  virtual double loss(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                      double y) const = 0;

 protected:
  void check_dims(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const;
};

// Squared loss (y - x'theta)^2 / 2; gradient -(y - x'theta) x.
class LinearGradient final : public GradientOracle {
 public:
  explicit LinearGradient(int d) : d_(d) {}
  int dim() const override { return d_; }
  void gradient(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                double y, Eigen::VectorXd& grad) const override;
  double loss(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
              double y) const override;

 private:
  int d_;
};

// Logistic log-loss with labels y in {0, 1}:
// loss = log(1 + exp(x'theta)) - y x'theta; gradient (expit(x'theta) - y) x.
class LogisticGradient final : public GradientOracle {
 public:
  explicit LogisticGradient(int d) : d_(d) {}
  int dim() const override { return d_; }
  void gradient(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                double y, Eigen::VectorXd& grad) const override;
  double loss(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
              double y) const override;

 private:
  int d_;
};

// Canonical-link GLM negative log-likelihood plus a ridge penalty:
// loss = b(x'theta) - y x'theta + penalty * |theta|^2, gradient
// (b'(x'theta) - y) x + 2 penalty theta.  The cumulant b and its derivative
// are supplied; the stock factory uses the logistic pair
// b(u) = log(1 + e^u), b'(u) = expit(u).
class RidgeGlmGradient final : public GradientOracle {
 public:
  using Cumulant = double (*)(double);

  RidgeGlmGradient(int d, double penalty, Cumulant b, Cumulant b_prime);
  int dim() const override { return d_; }
  void gradient(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                double y, Eigen::VectorXd& grad) const override;
  double loss(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
              double y) const override;

 private:
  int d_;
  double penalty_;
  Cumulant b_;
  Cumulant b_prime_;
};

// Huber regression: rho(a) = a^2/2 for |a| <= threshold, else
// threshold (|a| - threshold/2), applied to the residual a = y - x'theta.
// Gradient -rho'(y - x'theta) x with rho'(a) = clamp(a, +-threshold).
class HuberGradient final : public GradientOracle {
 public:
  HuberGradient(int d, double threshold);
  int dim() const override { return d_; }
  void gradient(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                double y, Eigen::VectorXd& grad) const override;
  double loss(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
              double y) const override;

 private:
  int d_;
  double threshold_;
};

enum class ModelKind { linear, logistic, ridge, huber };

ModelKind model_kind_from_name(const std::string& name);
std::string model_kind_name(ModelKind kind);

// Builds the stock oracle for a model kind.  "penalty" is the ridge
// coefficient (ridge only); "threshold" the Huber clipping point (huber
// only); both are ignored elsewhere.
std::unique_ptr<GradientOracle> make_oracle(ModelKind kind, int d,
                                            double penalty = 1e-3,
                                            double threshold = 1.0);

}  // namespace higrad
