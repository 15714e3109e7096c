#pragma once

// Orientation search tree. A state is a box of Euler-angle ranges; actions
// either keep it or halve one axis range toward its lower or upper side.
// The anchor of a state is the rotation at the range midpoints. A greedy
// descent picks, per step, the action whose anchor normal is most aligned
// with a target normal.

#include "ogrid/core.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace ogrid {

enum class OrientAction : std::uint8_t {
  Keep = 0,
  XLower, XUpper,
  YLower, YUpper,
  ZLower, ZUpper,
};

inline constexpr std::array<OrientAction, 7> kOrientActions = {
    OrientAction::Keep,   OrientAction::XLower, OrientAction::XUpper, OrientAction::YLower,
    OrientAction::YUpper, OrientAction::ZLower, OrientAction::ZUpper};

struct OrientationState {
  std::array<double, 3> lo;
  std::array<double, 3> hi;

  static OrientationState initial() {
    return {{-kPi, -kPi, -kPi}, {kPi, kPi, kPi}};
  }

  std::array<double, 3> midpoint() const {
    return {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])};
  }

  bool operator==(const OrientationState&) const = default;
};

inline OrientationState transition(const OrientationState& s, OrientAction a) {
  OrientationState next = s;
  if (a == OrientAction::Keep) return next;
  const int axis = (static_cast<int>(a) - 1) / 2;
  const bool upper = ((static_cast<int>(a) - 1) % 2) != 0;
  const double mid = 0.5 * (s.lo[axis] + s.hi[axis]);
  if (upper)
    next.lo[axis] = mid;
  else
    next.hi[axis] = mid;
  return next;
}

inline Mat3 rotation_x(double a) {
  Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}

inline Mat3 rotation_y(double a) {
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

inline Mat3 rotation_z(double a) {
  Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

struct RotationAnchor {
  std::array<double, 3> euler;  // (rx, ry, rz)
  Mat3 rotation;                // Rz(rz) * Ry(ry) * Rx(rx)
  Vec3 normal;                  // rotation * e_z
};

inline RotationAnchor anchor_of(const OrientationState& s) {
  RotationAnchor a;
  a.euler = s.midpoint();
  a.rotation = rotation_z(a.euler[2]) * rotation_y(a.euler[1]) * rotation_x(a.euler[0]);
  a.normal = a.rotation.col(2);
  return a;
}

inline RotationAnchor identity_anchor() { return anchor_of(OrientationState::initial()); }

struct OrientSearchStep {
  OrientAction action;
  OrientationState state;  // state after the action
  RotationAnchor anchor;
};

// Greedy descent of `depth` steps from the initial state. Each step takes the
// action maximizing cos(anchor normal, target); ties keep the earlier action
// in kOrientActions order, so Keep wins over a split that changes nothing.
inline std::vector<OrientSearchStep> search_orientation(const Vec3& target, int depth) {
  if (std::abs(target.norm() - 1.0) > 1e-6)
    throw NonUnitNormalError("search_orientation: target normal must be unit length");
  if (depth < 0) throw InvalidConfigError("search_orientation: negative depth");
  std::vector<OrientSearchStep> steps;
  steps.reserve(static_cast<std::size_t>(depth));
  OrientationState state = OrientationState::initial();
  for (int d = 0; d < depth; ++d) {
    OrientAction best_action = OrientAction::Keep;
    OrientationState best_state = state;
    RotationAnchor best_anchor = anchor_of(state);
    double best_cos = best_anchor.normal.dot(target);
    for (std::size_t i = 1; i < kOrientActions.size(); ++i) {
      const OrientationState cand = transition(state, kOrientActions[i]);
      const RotationAnchor anchor = anchor_of(cand);
      const double c = anchor.normal.dot(target);
      if (c > best_cos) {
        best_cos = c;
        best_action = kOrientActions[i];
        best_state = cand;
        best_anchor = anchor;
      }
    }
    state = best_state;
    steps.push_back({best_action, best_state, best_anchor});
  }
  return steps;
}

// Anchor reached after a fixed-depth greedy search; depth 0 yields the
// identity anchor.
inline RotationAnchor search_anchor(const Vec3& target, int depth) {
  if (depth == 0) return identity_anchor();
  return search_orientation(target, depth).back().anchor;
}

}  // namespace ogrid
