#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rfnt {

/// An activation sigma with its weak derivative and kink locations.
///
/// Built-in kinds get vectorized evaluation paths; `custom` goes through the
/// stored callables.
struct ActivationSpec {
  enum class Kind { shifted_relu, identity, constant, step, custom };

  Kind kind = Kind::custom;
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  std::vector<double> kinks;  // sorted
  std::optional<double> shift;

  double operator()(double u) const { return value(u); }

  /// sigma applied entrywise, in place.
  void apply(Eigen::Ref<Eigen::MatrixXd> a) const {
    switch (kind) {
      case Kind::shifted_relu: {
        const double u0 = *shift;
        a = (a.array() - u0).cwiseMax(0.0).matrix();
        return;
      }
      case Kind::identity:
        return;
      case Kind::constant:
        a.setConstant(value(0.0));
        return;
      case Kind::step: {
        const double u0 = shift.value_or(0.0);
        a = (a.array() >= u0).cast<double>().matrix();
        return;
      }
      case Kind::custom:
        a = a.unaryExpr([this](double u) { return value(u); });
        return;
    }
  }

  /// sigma' applied entrywise, in place.
  void apply_derivative(Eigen::Ref<Eigen::MatrixXd> a) const {
    switch (kind) {
      case Kind::shifted_relu:
        a = (a.array() >= *shift).cast<double>().matrix();
        return;
      case Kind::identity:
        a.setOnes();
        return;
      case Kind::constant:
      case Kind::step:
        a.setZero();
        return;
      case Kind::custom:
        if (!derivative) throw std::logic_error("activation '" + name + "' has no derivative");
        a = a.unaryExpr([this](double u) { return derivative(u); });
        return;
    }
  }

  /// The derivative viewed as an activation in its own right.
  ActivationSpec derivative_spec() const;
};

/// sigma(u) = max(u - u0, 0), sigma'(u) = 1{u >= u0}.
inline ActivationSpec shifted_relu(double u0 = 0.5) {
  ActivationSpec s;
  s.kind = ActivationSpec::Kind::shifted_relu;
  s.name = "shifted_relu";
  s.value = [u0](double u) { return u > u0 ? u - u0 : 0.0; };
  s.derivative = [u0](double u) { return u >= u0 ? 1.0 : 0.0; };
  s.kinks = {u0};
  s.shift = u0;
  return s;
}

/// sigma(u) = 1{u >= u0}; the weak derivative is a point mass and is not
/// representable, so it is reported as zero.
inline ActivationSpec step(double u0 = 0.0) {
  ActivationSpec s;
  s.kind = ActivationSpec::Kind::step;
  s.name = "step";
  s.value = [u0](double u) { return u >= u0 ? 1.0 : 0.0; };
  s.derivative = [](double) { return 0.0; };
  s.kinks = {u0};
  s.shift = u0;
  return s;
}

inline ActivationSpec identity_activation() {
  ActivationSpec s;
  s.kind = ActivationSpec::Kind::identity;
  s.name = "identity";
  s.value = [](double u) { return u; };
  s.derivative = [](double) { return 1.0; };
  return s;
}

inline ActivationSpec constant_activation(double c = 1.0) {
  ActivationSpec s;
  s.kind = ActivationSpec::Kind::constant;
  s.name = "constant";
  s.value = [c](double) { return c; };
  s.derivative = [](double) { return 0.0; };
  return s;
}

inline ActivationSpec custom_activation(std::string name, std::function<double(double)> value,
                                        std::function<double(double)> derivative = {},
                                        std::vector<double> kinks = {}) {
  ActivationSpec s;
  s.kind = ActivationSpec::Kind::custom;
  s.name = std::move(name);
  s.value = std::move(value);
  s.derivative = std::move(derivative);
  std::sort(kinks.begin(), kinks.end());
  s.kinks = std::move(kinks);
  return s;
}

inline ActivationSpec ActivationSpec::derivative_spec() const {
  switch (kind) {
    case Kind::shifted_relu:
      return step(*shift);
    case Kind::identity:
      return constant_activation(1.0);
    case Kind::constant:
    case Kind::step:
      return constant_activation(0.0);
    case Kind::custom:
      break;
  }
  if (!derivative) throw std::logic_error("activation '" + name + "' has no derivative");
  return custom_activation(name + "'", derivative, {}, kinks);
}

/// Look up a built-in by name; `shift` feeds shifted_relu and step.
inline ActivationSpec activation_by_name(const std::string& name, double shift = 0.5) {
  if (name == "shifted_relu" || name == "relu") return shifted_relu(name == "relu" ? 0.0 : shift);
  if (name == "step") return step(shift);
  if (name == "identity") return identity_activation();
  if (name == "constant") return constant_activation(1.0);
  throw std::invalid_argument("unknown activation '" + name + "'");
}

}  // namespace rfnt
