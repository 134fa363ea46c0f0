#pragma once

// Forward kinematics of a limb's tree-topology system: body poses via the
// product of exponentials, body and system geometric Jacobians in body-fixed
// representation, and their analytic time derivatives.

#include <vector>

#include "pkmdyn/model.hpp"
#include "pkmdyn/se3.hpp"

namespace pkmdyn {

struct TreeJointState {
  Eigen::VectorXd theta;
  Eigen::VectorXd thetad;
  Eigen::VectorXd thetadd;
};

// Kinematics cache of one limb instance. Single-writer: any position write
// invalidates poses, Jacobians and derivative caches. Distinct instances may
// be evaluated concurrently.
class TreeKinematics {
 public:
  explicit TreeKinematics(const RepresentativeLimb& limb) : limb_(&limb) {
    const int n = limb.n;
    theta_ = Eigen::VectorXd::Zero(n);
    thetad_ = Eigen::VectorXd::Zero(n);
    f_.resize(n + 1);
    C_.resize(n + 1);
    on_path_.assign(n + 1, std::vector<bool>(n + 1, false));
    for (int k = 1; k <= n; ++k) {
      int j = k;
      while (j != 0) {
        on_path_[k][j] = true;
        j = limb.joints[j - 1].pred;
      }
    }
    set_positions(theta_);
    set_rates(thetad_);
  }

  const RepresentativeLimb& limb() const { return *limb_; }
  int n() const { return limb_->n; }

  void set_positions(const Eigen::VectorXd& theta) {
    if (theta.size() != n()) throw ValidationError("tree kinematics: theta size mismatch");
    theta_ = theta;
    f_[0] = Pose::Identity();
    C_[0] = Pose::Identity();
    for (int i = 1; i <= n(); ++i) {
      const auto& j = limb_->joints[i - 1];
      f_[i] = f_[j.pred] * exp_screw(j.Y, theta_(i - 1));
      C_[i] = f_[i] * limb_->bodies[i - 1].A;
    }
    build_system_jacobian();
    rates_valid_ = false;
  }

  void set_rates(const Eigen::VectorXd& thetad) {
    if (thetad.size() != n()) throw ValidationError("tree kinematics: rate size mismatch");
    thetad_ = thetad;
    V_ = J_ * thetad_;
    // Time derivative of the system Jacobian, Jdot = -A a(thetad) J with
    // a = diag(thetad_i ad_{X_i}).
    Eigen::MatrixXd aJ = Eigen::MatrixXd::Zero(6 * n(), n());
    for (int i = 1; i <= n(); ++i)
      aJ.middleRows(6 * (i - 1), 6) =
          thetad_(i - 1) * ad_small(limb_->joints[i - 1].X) * J_.middleRows(6 * (i - 1), 6);
    Jdot_ = -A_ * aJ;
    rates_valid_ = true;
  }

  const Eigen::VectorXd& positions() const { return theta_; }
  const Eigen::VectorXd& rates() const { return thetad_; }

  // Pose of body k w.r.t. the construction frame, C_k = f_k A_k.
  const Pose& body_pose(int k) const {
    check_body(k);
    return C_[k];
  }

  // POE partial product f_k (pose of body k's frame with A_k = identity).
  const Pose& poe_product(int k) const {
    check_body(k);
    return f_[k];
  }

  Pose relative_pose(int k, int i) const {
    check_body(k);
    check_body(i);
    return C_[k].inverse() * C_[i];
  }

  bool joint_on_path(int k, int i) const { return on_path_[k][i]; }

  // 6 x n body-fixed geometric Jacobian of body k (row block of J = A X).
  Eigen::Matrix<double, 6, Eigen::Dynamic> body_jacobian(int k) const {
    check_body(k);
    return J_.middleRows(6 * (k - 1), 6);
  }

  const Eigen::MatrixXd& system_jacobian() const { return J_; }
  const Eigen::MatrixXd& system_A() const { return A_; }

  Eigen::MatrixXd system_X() const {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(6 * n(), n());
    for (int i = 1; i <= n(); ++i) X.block(6 * (i - 1), i - 1, 6, 1) = limb_->joints[i - 1].X;
    return X;
  }

  const Eigen::MatrixXd& system_jacobian_dot() const {
    check_rates();
    return Jdot_;
  }

  Eigen::Matrix<double, 6, Eigen::Dynamic> body_jacobian_dot(int k) const {
    check_body(k);
    check_rates();
    return Jdot_.middleRows(6 * (k - 1), 6);
  }

  // Column-wise closed form Jdot_{k,j} = sum_{j < i <= k} ad_{J_{k,j}} J_{k,i} thetad_i,
  // equivalent to the system form; kept as an independent arithmetic route.
  Eigen::Matrix<double, 6, Eigen::Dynamic> body_jacobian_dot_columnwise(int k) const {
    check_body(k);
    check_rates();
    Eigen::Matrix<double, 6, Eigen::Dynamic> jd = Eigen::MatrixXd::Zero(6, n());
    const auto Jk = body_jacobian(k);
    for (int j = 1; j <= n(); ++j) {
      if (!on_path_[k][j]) continue;
      Vec6 col = Vec6::Zero();
      for (int i = 1; i <= n(); ++i) {
        if (i == j || !on_path_[k][i]) continue;
        // strict successor of j on the path to k
        if (!on_path_[i][j]) continue;
        col += ad_small(Jk.col(j - 1)) * Jk.col(i - 1) * thetad_(i - 1);
      }
      jd.col(j - 1) = col;
    }
    return jd;
  }

  // Body twist V_k = J_k thetad.
  Vec6 body_twist(int k) const {
    check_body(k);
    check_rates();
    return V_.segment<6>(6 * (k - 1));
  }

  const Eigen::VectorXd& system_twist() const {
    check_rates();
    return V_;
  }

  // (V_k, Vdot_k) for given accelerations.
  std::pair<Vec6, Vec6> body_twist_and_acc(int k, const Eigen::VectorXd& thetadd) const {
    check_body(k);
    check_rates();
    const auto Jk = body_jacobian(k);
    const auto Jkd = body_jacobian_dot(k);
    return {Jk * thetad_, Jk * thetadd + Jkd * thetad_};
  }

  // Instantaneous spatial screw of tree joint i at the current configuration,
  // S_i = Ad_{f_pred} Y_i.
  Vec6 spatial_joint_screw(int i) const {
    check_body(i);
    return adjoint(f_[limb_->joints[i - 1].pred]) * limb_->joints[i - 1].Y.coords;
  }

 private:
  void build_system_jacobian() {
    const int n = limb_->n;
    A_ = Eigen::MatrixXd::Zero(6 * n, 6 * n);
    for (int i = 1; i <= n; ++i) {
      A_.block(6 * (i - 1), 6 * (i - 1), 6, 6).setIdentity();
      for (int j = 1; j < i; ++j)
        if (on_path_[i][j])
          A_.block(6 * (i - 1), 6 * (j - 1), 6, 6) = adjoint(C_[i].inverse() * C_[j]);
    }
    J_ = A_ * system_X();
  }

  void check_body(int k) const {
    if (k < 1 || k > n()) throw ValidationError("tree kinematics: unknown body id");
  }
  void check_rates() const {
    if (!rates_valid_) throw ValidationError("tree kinematics: rates not set");
  }

  const RepresentativeLimb* limb_;
  Eigen::VectorXd theta_, thetad_;
  std::vector<Pose> f_, C_;
  std::vector<std::vector<bool>> on_path_;
  Eigen::MatrixXd A_, J_, Jdot_;
  Eigen::VectorXd V_;
  bool rates_valid_ = false;
};

}  // namespace pkmdyn
