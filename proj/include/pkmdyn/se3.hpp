#pragma once

// Lie-group primitives for rigid body kinematics on SE(3): poses, twists,
// wrenches, screw coordinates, exponential maps, adjoints and spatial inertia.
//
// Conventions used throughout the library:
//   - twists are stored angular-first,  V = (omega, v)
//   - wrenches are stored torque-first, W = (tau, f)
//   - a pose is the pair (R, r) of the homogeneous transform [[R, r], [0, 1]]

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace pkmdyn {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat4 = Eigen::Matrix4d;

// Errors thrown by the library. The CLI maps these onto exit codes.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GeometryError : ValidationError {
  using ValidationError::ValidationError;
};
struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Mat3 skew(const Vec3& x) {
  Mat3 s;
  s << 0.0, -x.z(), x.y(), x.z(), 0.0, -x.x(), -x.y(), x.x(), 0.0;
  return s;
}

inline Vec3 unskew(const Mat3& s) {
  return Vec3(s(2, 1), s(0, 2), s(1, 0));
}

// Rigid body pose: rotation R and position r of a frame w.r.t. a reference.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 r = Vec3::Zero();

  Pose() = default;
  Pose(const Mat3& R_, const Vec3& r_) : R(R_), r(r_) {}

  static Pose Identity() { return Pose(); }

  Pose operator*(const Pose& o) const { return Pose(R * o.R, r + R * o.r); }

  Pose inverse() const { return Pose(R.transpose(), -(R.transpose() * r)); }

  Vec3 apply(const Vec3& p) const { return R * p + r; }

  Mat4 homogeneous() const {
    Mat4 h = Mat4::Identity();
    h.topLeftCorner<3, 3>() = R;
    h.topRightCorner<3, 1>() = r;
    return h;
  }

  static Pose FromHomogeneous(const Mat4& h) {
    return Pose(h.topLeftCorner<3, 3>(), h.topRightCorner<3, 1>());
  }

  // Orthonormality check used when ingesting user-supplied poses.
  bool is_valid(double tol = 1e-9) const {
    return (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
           std::abs(R.determinant() - 1.0) < tol;
  }
};

// Frame transformation of screw coordinates, Ad = [[R, 0], [r~ R, R]].
inline Mat6 adjoint(const Pose& c) {
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = c.R;
  ad.bottomRightCorner<3, 3>() = c.R;
  ad.bottomLeftCorner<3, 3>() = skew(c.r) * c.R;
  return ad;
}

inline Mat6 adjoint_inverse(const Pose& c) { return adjoint(c.inverse()); }

// Screw Lie bracket operator, ad_X = [[xi~, 0], [eta~, xi~]] for X = (xi, eta).
inline Mat6 ad_small(const Vec6& x) {
  Mat6 a = Mat6::Zero();
  const Mat3 w = skew(x.head<3>());
  a.topLeftCorner<3, 3>() = w;
  a.bottomRightCorner<3, 3>() = w;
  a.bottomLeftCorner<3, 3>() = skew(x.tail<3>());
  return a;
}

// Gyroscopic matrix G(V) = -ad_V^T = [[w~, v~], [0, w~]].
inline Mat6 gyroscopic_matrix(const Vec6& v) {
  Mat6 g = Mat6::Zero();
  const Mat3 w = skew(v.head<3>());
  g.topLeftCorner<3, 3>() = w;
  g.topRightCorner<3, 3>() = skew(v.tail<3>());
  g.bottomRightCorner<3, 3>() = w;
  return g;
}

enum class JointKind { Revolute, Prismatic, Helical };

inline std::string to_string(JointKind k) {
  switch (k) {
    case JointKind::Revolute: return "revolute";
    case JointKind::Prismatic: return "prismatic";
    case JointKind::Helical: return "helical";
  }
  return "?";
}

// Frame a screw coordinate vector is represented in: spatial (at the zero
// reference) or body-fixed.
enum class ScrewFrame { Spatial, Body };

// Unit screw coordinates of a 1-DOF lower pair joint.
struct ScrewAxis {
  Vec6 coords = Vec6::Zero();  // (angular, linear)
  JointKind kind = JointKind::Revolute;
  ScrewFrame frame = ScrewFrame::Spatial;
  double pitch = 0.0;  // m/rad; prismatic joints encode the infinite pitch by kind

  Vec3 angular() const { return coords.head<3>(); }
  Vec3 linear() const { return coords.tail<3>(); }
};

// Screw coordinates from axis geometry: direction e, point y on the axis and
// pitch h. Revolute: (e, y x e); prismatic: (0, e); helical: (e, y x e + h e).
inline ScrewAxis screw_from_geometry(const Vec3& e, const Vec3& y, double h,
                                     JointKind kind = JointKind::Revolute) {
  ScrewAxis s;
  s.kind = kind;
  s.pitch = h;
  if (kind == JointKind::Prismatic) {
    if (std::abs(e.norm() - 1.0) > 1e-9)
      throw ValidationError("screw_from_geometry: prismatic direction must be a unit vector");
    s.coords.head<3>().setZero();
    s.coords.tail<3>() = e;
    return s;
  }
  if (std::abs(e.norm() - 1.0) > 1e-9)
    throw ValidationError("screw_from_geometry: joint axis must be a unit vector");
  s.coords.head<3>() = e;
  s.coords.tail<3>() = y.cross(e);
  if (kind == JointKind::Helical) s.coords.tail<3>() += h * e;
  return s;
}

namespace detail {

// Rodrigues formula for a unit rotation axis; free of 0/0 coefficients.
inline Mat3 rot_axis_angle(const Vec3& e, double theta) {
  const Mat3 et = skew(e);
  return Mat3::Identity() + std::sin(theta) * et + (1.0 - std::cos(theta)) * (et * et);
}

// Translation factor of the SE(3) exponential for a unit rotation axis:
// G(theta) = I*theta + (1 - cos theta) e~ + (theta - sin theta) e~^2.
inline Mat3 exp_translation_factor(const Vec3& e, double theta) {
  const Mat3 et = skew(e);
  return Mat3::Identity() * theta + (1.0 - std::cos(theta)) * et +
         (theta - std::sin(theta)) * (et * et);
}

constexpr double kSmallAngle = 1e-7;

}  // namespace detail

// exp(theta * axis) in closed form. Total function; exp(0) = identity.
inline Pose exp_screw(const ScrewAxis& axis, double theta) {
  if (axis.kind == JointKind::Prismatic)
    return Pose(Mat3::Identity(), theta * axis.linear());
  const Vec3 e = axis.angular();
  return Pose(detail::rot_axis_angle(e, theta),
              detail::exp_translation_factor(e, theta) * axis.linear());
}

// Exponential of an arbitrary twist xi = (omega, v), angle not normalized.
// Small angles use a 4th-order Taylor expansion of the Rodrigues coefficients.
inline Pose exp_twist(const Vec6& xi) {
  const Vec3 w = xi.head<3>();
  const Vec3 v = xi.tail<3>();
  const double th = w.norm();
  const Mat3 wt = skew(w);
  double a, b, c;  // R = I + a w~ + b w~^2, p = (I + b w~ + c w~^2) v
  if (th < detail::kSmallAngle) {
    const double th2 = th * th;
    a = 1.0 - th2 / 6.0 + th2 * th2 / 120.0;
    b = 0.5 - th2 / 24.0 + th2 * th2 / 720.0;
    c = 1.0 / 6.0 - th2 / 120.0 + th2 * th2 / 5040.0;
  } else {
    a = std::sin(th) / th;
    b = (1.0 - std::cos(th)) / (th * th);
    c = (th - std::sin(th)) / (th * th * th);
  }
  const Mat3 wt2 = wt * wt;
  return Pose(Mat3::Identity() + a * wt + b * wt2,
              (Mat3::Identity() + b * wt + c * wt2) * v);
}

// Logarithm on SO(3).
inline Vec3 log_rotation(const Mat3& R) {
  const double tr = R.trace();
  double cos_th = 0.5 * (tr - 1.0);
  cos_th = std::min(1.0, std::max(-1.0, cos_th));
  const double th = std::acos(cos_th);
  if (th < detail::kSmallAngle) {
    const Vec3 w = unskew(R - R.transpose()) * 0.5;
    return w * (1.0 + th * th / 6.0);
  }
  if (th > M_PI - 1e-6) {
    // Near pi the skew part degenerates; recover the axis from R + I.
    const Mat3 B = 0.5 * (R + Mat3::Identity());
    int k;
    B.diagonal().maxCoeff(&k);
    Vec3 e = B.col(k) / std::sqrt(B(k, k));
    // Fix the sign using the (small but generically non-zero) skew part.
    const Vec3 w = unskew(R - R.transpose());
    if (e.dot(w) < 0.0) e = -e;
    return th * e.normalized();
  }
  return th / (2.0 * std::sin(th)) * unskew(R - R.transpose());
}

// Logarithm on SE(3), inverse of exp_twist.
inline Vec6 log_pose(const Pose& c) {
  const Vec3 w = log_rotation(c.R);
  const double th = w.norm();
  const Mat3 wt = skew(w);
  Mat3 vinv;
  if (th < detail::kSmallAngle) {
    vinv = Mat3::Identity() - 0.5 * wt + (1.0 / 12.0) * (wt * wt);
  } else {
    const double half = 0.5 * th;
    const double cot = half / std::tan(half);
    vinv = Mat3::Identity() - 0.5 * wt + (1.0 - cot) / (th * th) * (wt * wt);
  }
  Vec6 xi;
  xi.head<3>() = w;
  xi.tail<3>() = vinv * c.r;
  return xi;
}

// Left-trivialized differential of the SO(3) exponential:
// d/dt exp(x(t)~) = exp(x~) (dexp_{-x}(xdot))~.
inline Mat3 dexp_so3(const Vec3& x) {
  const double th = x.norm();
  const Mat3 xt = skew(x);
  double b, c;
  if (th < detail::kSmallAngle) {
    const double th2 = th * th;
    b = 0.5 - th2 / 24.0 + th2 * th2 / 720.0;
    c = 1.0 / 6.0 - th2 / 120.0 + th2 * th2 / 5040.0;
  } else {
    b = (1.0 - std::cos(th)) / (th * th);
    c = (th - std::sin(th)) / (th * th * th);
  }
  return Mat3::Identity() + b * xt + c * (xt * xt);
}

// Change of representation of a screw: body-fixed X = Ad(A)^-1 Y for a body
// whose zero reference configuration is A.
inline ScrewAxis spatial_to_body(const ScrewAxis& y, const Pose& a) {
  ScrewAxis x = y;
  x.coords = adjoint_inverse(a) * y.coords;
  x.frame = ScrewFrame::Body;
  return x;
}

inline ScrewAxis body_to_spatial(const ScrewAxis& x, const Pose& a) {
  ScrewAxis y = x;
  y.coords = adjoint(a) * x.coords;
  y.frame = ScrewFrame::Spatial;
  return y;
}

// Constant body-fixed inertia of a rigid body: mass m, COM offset d and
// rotational inertia Theta, all w.r.t. the body reference frame.
struct SpatialInertia {
  double m = 0.0;
  Vec3 d = Vec3::Zero();
  Mat3 Theta = Mat3::Zero();

  // 6x6 matrix [[Theta, m d~], [-m d~, m I]].
  Mat6 matrix() const {
    Mat6 M = Mat6::Zero();
    M.topLeftCorner<3, 3>() = Theta;
    M.topRightCorner<3, 3>() = m * skew(d);
    M.bottomLeftCorner<3, 3>() = -m * skew(d);
    M.bottomRightCorner<3, 3>() = m * Mat3::Identity();
    return M;
  }

  void validate() const {
    if (m < 0.0) throw ValidationError("inertia: negative mass");
    if ((Theta - Theta.transpose()).cwiseAbs().maxCoeff() > 1e-9)
      throw ValidationError("inertia: Theta not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(Theta);
    if (es.eigenvalues().minCoeff() < -1e-12)
      throw ValidationError("inertia: Theta not positive semidefinite");
  }
};

}  // namespace pkmdyn
