#include "higrad/models.hpp"

#include <cmath>

#include "higrad/errors.hpp"
#include "higrad/special_functions.hpp"

namespace higrad {

namespace {

// log(1 + exp(u)) without overflow for large |u|.
double softplus(double u) {
  if (u > 0.0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

}  // namespace

void GradientOracle::check_dims(const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& x) const {
  if (theta.size() != dim() || x.size() != dim()) {
    throw DimensionMismatch("oracle of dimension " + std::to_string(dim()) +
                            " got theta of size " + std::to_string(theta.size()) +
                            " and x of size " + std::to_string(x.size()));
  }
}

void LinearGradient::gradient(const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& x, double y,
                              Eigen::VectorXd& grad) const {
  check_dims(theta, x);
  const double residual = y - x.dot(theta);
  grad.noalias() = -residual * x;
}

double LinearGradient::loss(const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& x, double y) const {
  check_dims(theta, x);
  const double residual = y - x.dot(theta);
  return 0.5 * residual * residual;
}

void LogisticGradient::gradient(const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& x, double y,
                                Eigen::VectorXd& grad) const {
  check_dims(theta, x);
  const double u = x.dot(theta);
  grad.noalias() = (special::expit(u) - y) * x;
}

double LogisticGradient::loss(const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& x, double y) const {
  check_dims(theta, x);
  const double u = x.dot(theta);
  return softplus(u) - y * u;
}

RidgeGlmGradient::RidgeGlmGradient(int d, double penalty, Cumulant b,
                                   Cumulant b_prime)
    : d_(d), penalty_(penalty), b_(b), b_prime_(b_prime) {
  if (penalty < 0.0) {
    throw DomainError("ridge penalty must be >= 0, got " +
                      std::to_string(penalty));
  }
}

void RidgeGlmGradient::gradient(const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& x, double y,
                                Eigen::VectorXd& grad) const {
  check_dims(theta, x);
  const double u = x.dot(theta);
  grad.noalias() = (b_prime_(u) - y) * x + 2.0 * penalty_ * theta;
}

double RidgeGlmGradient::loss(const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& x, double y) const {
  check_dims(theta, x);
  const double u = x.dot(theta);
  return b_(u) - y * u + penalty_ * theta.squaredNorm();
}

HuberGradient::HuberGradient(int d, double threshold)
    : d_(d), threshold_(threshold) {
  if (!(threshold > 0.0)) {
    throw DomainError("huber threshold must be > 0, got " +
                      std::to_string(threshold));
  }
}

void HuberGradient::gradient(const Eigen::VectorXd& theta,
                             const Eigen::VectorXd& x, double y,
                             Eigen::VectorXd& grad) const {
  check_dims(theta, x);
  const double residual = y - x.dot(theta);
  const double clipped =
      std::min(std::max(residual, -threshold_), threshold_);
  grad.noalias() = -clipped * x;
}

double HuberGradient::loss(const Eigen::VectorXd& theta,
                           const Eigen::VectorXd& x, double y) const {
  check_dims(theta, x);
  const double a = std::abs(y - x.dot(theta));
  if (a <= threshold_) return 0.5 * a * a;
  return threshold_ * (a - 0.5 * threshold_);
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "linear") return ModelKind::linear;
  if (name == "logistic") return ModelKind::logistic;
  if (name == "ridge") return ModelKind::ridge;
  if (name == "huber") return ModelKind::huber;
  throw DomainError("unknown model '" + name + "'");
}

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear: return "linear";
    case ModelKind::logistic: return "logistic";
    case ModelKind::ridge: return "ridge";
    case ModelKind::huber: return "huber";
  }
  throw DomainError("unknown model kind");
}

std::unique_ptr<GradientOracle> make_oracle(ModelKind kind, int d,
                                            double penalty, double threshold) {
  if (d < 1) throw BadDimension("oracle dimension must be >= 1, got " + std::to_string(d));
  switch (kind) {
    case ModelKind::linear:
      return std::make_unique<LinearGradient>(d);
    case ModelKind::logistic:
      return std::make_unique<LogisticGradient>(d);
    case ModelKind::ridge:
      return std::make_unique<RidgeGlmGradient>(
          d, penalty, +[](double u) { return u > 0.0 ? u + std::log1p(std::exp(-u))
                                                     : std::log1p(std::exp(u)); },
          +[](double u) { return special::expit(u); });
    case ModelKind::huber:
      return std::make_unique<HuberGradient>(d, threshold);
  }
  throw DomainError("unknown model kind");
}

}  // namespace higrad
