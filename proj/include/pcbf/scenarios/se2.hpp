#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "pcbf/linalg.hpp"

namespace pcbf {

/// Planar rigid motion acting on rover states (x1, x2, speed, heading).
struct Se2Element
{
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  double psi = 0.0;

  static Se2Element identity() { return {}; }

  Eigen::Matrix2d rotation() const { return Eigen::Rotation2Dd(psi).toRotationMatrix(); }

  /// Rotates and translates the pose part; speed is untouched.
  Vec act(const Vec & x) const
  {
    Vec out = x;
    out.head<2>() = rotation() * x.head<2>() + p;
    out(3) = x(3) + psi;
    return out;
  }

  Vec inverse_act(const Vec & x) const
  {
    Vec out = x;
    out.head<2>() = rotation().transpose() * (x.head<2>() - p);
    out(3) = x(3) - psi;
    return out;
  }

  /// (this * other)(x) = this(other(x)).
  Se2Element compose(const Se2Element & other) const { return {p + rotation() * other.p, psi + other.psi}; }

  Se2Element inverse() const { return {-(rotation().transpose() * p), -psi}; }
};

}  // namespace pcbf
