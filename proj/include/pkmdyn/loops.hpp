#pragma once

// Loop-closure constraints per fundamental cycle: cut-joint elementary
// constraints, cut-body POE constraints, the block-partitioned velocity
// solution H = [-Gy^-1 Gq; I] with its analytic time derivative, and the
// assembly of the limb-level H matrix.

#include <algorithm>
#include <optional>
#include <vector>

#include "pkmdyn/model.hpp"
#include "pkmdyn/se3.hpp"
#include "pkmdyn/tree_kin.hpp"

namespace pkmdyn {

// Result of cut_joint_rows: residual and velocity-constraint rows over the
// full tree-joint vector. Rows outside the cycle's columns vanish.
struct CutJointRows {
  Eigen::VectorXd residual;  // m
  Eigen::MatrixXd G;         // m x n_l
  Eigen::MatrixXd Gdot;      // m x n_l (only when rates were requested)
};

inline CutJointRows cut_joint_rows(const CutJointModel& cut, const TreeKinematics& kin,
                                   bool with_dot = false) {
  if (cut.recipe.rows() == 0)
    throw ValidationError("cut joint " + cut.name + ": empty constraint row set");

  const int n = kin.n();
  const int k = cut.body_k, r = cut.body_r;
  const Pose& Ck = kin.body_pose(k);
  const Pose& Cr = kin.body_pose(r);
  const Mat3 Rkr = Ck.R.transpose() * Cr.R;
  const Mat3 Rkl = cut.S_k.R;  // J_k frame in body-k coordinates
  const Mat3 Rrl = cut.S_r.R;
  const Vec3 dk = cut.S_k.r;
  const Vec3 dr = cut.S_r.r;

  // Relative joint-frame displacement in body-k coordinates and in J_k.
  const Vec3 P = Ck.R.transpose() * (Cr.r - Ck.r) + Rkr * dr;  // = kDelta + dk
  const Vec3 delta = Rkl.transpose() * (P - dk);
  const Mat3 Rlr = Rkl.transpose() * Rkr;

  const auto Jk = kin.body_jacobian(k);
  const auto Jr = kin.body_jacobian(r);

  const int m = cut.recipe.rows();
  CutJointRows out;
  out.residual.resize(m);
  out.G.setZero(m, n);
  if (with_dot) out.Gdot.setZero(m, n);

  Vec6 Vk = Vec6::Zero(), Vr = Vec6::Zero();
  Mat3 Rkr_dot = Mat3::Zero();
  Vec3 P_dot = Vec3::Zero();
  if (with_dot) {
    Vk = kin.body_twist(k);
    Vr = kin.body_twist(r);
    const Vec3 wk = Vk.head<3>(), vk = Vk.tail<3>(), wr = Vr.head<3>(), vr = Vr.tail<3>();
    Rkr_dot = Rkr * skew(wr) - skew(wk) * Rkr;
    P_dot = -wk.cross(P) + Rkr * (vr + wr.cross(dr)) - vk;
  }

  int row = 0;
  // Distance rows: selected components of delta in the J_k frame.
  Eigen::Matrix<double, 3, 6> Wk, Wr;  // row blocks acting on (V_k, V_r)
  Wk.leftCols<3>() = Rkl.transpose() * skew(P);
  Wk.rightCols<3>() = -Rkl.transpose();
  Wr.leftCols<3>() = -Rlr * skew(dr);
  Wr.rightCols<3>() = Rlr;
  Eigen::Matrix<double, 3, 6> Wk_dot = Eigen::Matrix<double, 3, 6>::Zero();
  Eigen::Matrix<double, 3, 6> Wr_dot = Eigen::Matrix<double, 3, 6>::Zero();
  if (with_dot) {
    const Mat3 Rlr_dot = Rkl.transpose() * Rkr_dot;
    Wk_dot.leftCols<3>() = Rkl.transpose() * skew(P_dot);
    Wr_dot.leftCols<3>() = -Rlr_dot * skew(dr);
    Wr_dot.rightCols<3>() = Rlr_dot;
  }
  const Eigen::MatrixXd Gdist = Wk * Jk + Wr * Jr;
  for (int c = 0; c < 3; ++c) {
    if (!cut.recipe.dist[c]) continue;
    out.residual(row) = delta(c);
    out.G.row(row) = Gdist.row(c);
    if (with_dot)
      out.Gdot.row(row) = (Wk_dot * Jk + Wk * kin.body_jacobian_dot(k) + Wr_dot * Jr +
                           Wr * kin.body_jacobian_dot(r))
                              .row(c);
    ++row;
  }

  // Orientation rows: e_k^T DeltaR e_r stays zero for each recipe pair.
  for (auto [ak, ar] : cut.recipe.ori) {
    const Vec3 ek_k = Rkl.col(ak);        // constant in body k
    const Vec3 er_r = Rrl.col(ar);        // constant in body r
    const Vec3 er_k = Rkr * er_r;
    const Vec3 ek_r = Rkr.transpose() * ek_k;
    out.residual(row) = ek_k.dot(er_k);
    out.G.row(row) = (ek_k.cross(er_k)).transpose() * Jk.topRows<3>() -
                     (ek_r.cross(er_r)).transpose() * Jr.topRows<3>();
    if (with_dot) {
      const Vec3 er_k_dot = Rkr_dot * er_r;
      const Vec3 ek_r_dot = Rkr_dot.transpose() * ek_k;
      out.Gdot.row(row) =
          (ek_k.cross(er_k_dot)).transpose() * Jk.topRows<3>() +
          (ek_k.cross(er_k)).transpose() * kin.body_jacobian_dot(k).topRows<3>() -
          (ek_r_dot.cross(er_r)).transpose() * Jr.topRows<3>() -
          (ek_r.cross(er_r)).transpose() * kin.body_jacobian_dot(r).topRows<3>();
    }
    ++row;
  }
  return out;
}

// Cut-body loop constraint of one fundamental cycle: the POE residual
// g = exp(sigma th Y) ... traversed from the last edge back to the cut-edge,
// and its Jacobian columns sigma_i S_i (identity residual at closure).
struct CutBodyConstraint {
  Pose g;
  Eigen::MatrixXd G;           // 6 x N_cycle
  Eigen::MatrixXd Gdot;        // 6 x N_cycle
  std::vector<int> joint_ids;  // column order: cycle joints ascending, cut last
};

inline CutBodyConstraint cut_body_constraint(const LimbCycle& cy, const RepresentativeLimb& limb,
                                             const TreeKinematics& kin, double theta_cut,
                                             double thetad_cut = 0.0, bool with_dot = false) {
  const int K = static_cast<int>(cy.order.size());
  const int cut_id = limb.cut_joint_id(cy.cut_index);

  auto screw_of = [&](int id) -> const ScrewAxis& {
    return id == cut_id ? limb.cuts[cy.cut_index].Y : limb.joints[id - 1].Y;
  };
  auto value_of = [&](int id) {
    return id == cut_id ? theta_cut : kin.positions()(id - 1);
  };
  auto rate_of = [&](int id) {
    return id == cut_id ? thetad_cut : kin.rates()(id - 1);
  };

  // Traversal-order factors E_j and suffix products L_j = E_{K-1} ... E_{j+1}.
  std::vector<Pose> E(K);
  for (int j = 0; j < K; ++j)
    E[j] = exp_screw(screw_of(cy.order[j]), cy.sigma[j] * value_of(cy.order[j]));
  std::vector<Pose> L(K);
  L[K - 1] = Pose::Identity();
  for (int j = K - 2; j >= 0; --j) L[j] = L[j + 1] * E[j + 1];

  CutBodyConstraint out;
  out.g = L[0] * E[0];

  std::vector<Vec6> col(K);
  for (int j = 0; j < K; ++j)
    col[j] = adjoint(L[j]) * (cy.sigma[j] * screw_of(cy.order[j]).coords);

  std::vector<Vec6> col_dot(K, Vec6::Zero());
  if (with_dot) {
    Vec6 zeta = Vec6::Zero();  // sum of thetad_m * col_m over edges after j
    for (int j = K - 1; j >= 0; --j) {
      col_dot[j] = ad_small(zeta) * col[j];
      zeta += rate_of(cy.order[j]) * col[j];
    }
  }

  out.joint_ids = cy.members;
  out.joint_ids.push_back(cut_id);
  out.G.setZero(6, K);
  if (with_dot) out.Gdot.setZero(6, K);
  for (int j = 0; j < K; ++j) {
    const auto it = std::find(out.joint_ids.begin(), out.joint_ids.end(), cy.order[j]);
    const int c = static_cast<int>(it - out.joint_ids.begin());
    out.G.col(c) = col[j];
    if (with_dot) out.Gdot.col(c) = col_dot[j];
  }
  return out;
}

// Independent/dependent coordinate split used to solve G etadot = 0.
struct PartitionSpec {
  std::vector<int> q;  // local column indices of independent coordinates; empty = auto
};

// Partitioned velocity-constraint solution of one cycle. Rows of H are in
// partition order: dependents y first, independents q last (identity block).
struct LoopSolution {
  Eigen::MatrixXd H;     // n_loc x delta
  std::vector<int> y;    // local column indices, order of the top rows
  std::vector<int> q;    // local column indices, order of the bottom rows
  Eigen::MatrixXd T;     // r x m row-space reduction applied to G
  Eigen::MatrixXd Gy;    // r x r reduced dependent block
  Eigen::MatrixXd Gq;    // r x delta
  double cond_Gy = 0.0;
  int rank = 0;

  int n_local() const { return static_cast<int>(y.size() + q.size()); }
};

// Solve G etadot = 0 for the dependent rates. Rank-deficient G (redundant
// constraints) is reduced to an independent row set first; singular values
// below rank_tol * sigma_max count as zero.
inline LoopSolution solve_velocity_constraints(const Eigen::MatrixXd& G,
                                               const PartitionSpec& part = {},
                                               double rank_tol = 1e-9,
                                               double cond_limit = 1e8) {
  const int m = static_cast<int>(G.rows());
  const int n = static_cast<int>(G.cols());
  LoopSolution sol;

  int r = 0;
  if (m == 0) {
    sol.T.resize(0, 0);
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > rank_tol * smax) ++r;
    sol.T = svd.matrixU().leftCols(r).transpose();  // r x m
  }
  sol.rank = r;
  const Eigen::MatrixXd A = (m == 0) ? Eigen::MatrixXd::Zero(0, n) : Eigen::MatrixXd(sol.T * G);

  if (!part.q.empty()) {
    if (static_cast<int>(part.q.size()) != n - r)
      throw SingularityError(
          "solve_velocity_constraints: pinned independent set of size " +
          std::to_string(part.q.size()) + " incompatible with constraint rank " +
          std::to_string(r));
    sol.q = part.q;
    for (int c = 0; c < n; ++c)
      if (std::find(sol.q.begin(), sol.q.end(), c) == sol.q.end()) sol.y.push_back(c);
  } else {
    // Auto partition: column-pivoted QR picks a well-conditioned Gy.
    if (r > 0) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
      const auto perm = qr.colsPermutation().indices();
      for (int i = 0; i < r; ++i) sol.y.push_back(perm(i));
      std::sort(sol.y.begin(), sol.y.end());
    }
    for (int c = 0; c < n; ++c)
      if (std::find(sol.y.begin(), sol.y.end(), c) == sol.y.end()) sol.q.push_back(c);
  }

  const int delta = static_cast<int>(sol.q.size());
  sol.Gy.resize(r, r);
  sol.Gq.resize(r, delta);
  for (size_t i = 0; i < sol.y.size(); ++i) sol.Gy.col(static_cast<int>(i)) = A.col(sol.y[i]);
  for (size_t i = 0; i < sol.q.size(); ++i) sol.Gq.col(static_cast<int>(i)) = A.col(sol.q[i]);

  sol.H.resize(n, delta);
  if (r > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> gysvd(sol.Gy);
    const double smin = gysvd.singularValues()(r - 1);
    const double smax = gysvd.singularValues()(0);
    sol.cond_Gy = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(smin > 0.0) || sol.cond_Gy > cond_limit)
      throw SingularityError("solve_velocity_constraints: singular partition, cond(Gy) = " +
                             std::to_string(sol.cond_Gy));
    sol.H.topRows(r) = -sol.Gy.partialPivLu().solve(sol.Gq);
  }
  sol.H.bottomRows(delta).setIdentity();
  return sol;
}

// Hdot for the same partition: top block Gy^-1 (Gydot Gy^-1 Gq - Gqdot),
// bottom block zero. Gdot must be the analytic derivative of the G that was
// solved (full row set; the stored reduction is re-applied).
inline Eigen::MatrixXd loop_solution_dot(const LoopSolution& sol, const Eigen::MatrixXd& Gdot) {
  const int n = sol.n_local();
  const int delta = static_cast<int>(sol.q.size());
  Eigen::MatrixXd Hdot = Eigen::MatrixXd::Zero(n, delta);
  if (sol.rank == 0) return Hdot;
  const Eigen::MatrixXd Adot = sol.T * Gdot;
  Eigen::MatrixXd Gydot(sol.rank, sol.rank), Gqdot(sol.rank, delta);
  for (size_t i = 0; i < sol.y.size(); ++i) Gydot.col(static_cast<int>(i)) = Adot.col(sol.y[i]);
  for (size_t i = 0; i < sol.q.size(); ++i) Gqdot.col(static_cast<int>(i)) = Adot.col(sol.q[i]);
  auto lu = sol.Gy.partialPivLu();
  Hdot.topRows(sol.rank) = lu.solve(Gydot * lu.solve(sol.Gq) - Gqdot);
  return Hdot;
}

// Limb-level solution: tree-joint rates in terms of the independent rates,
// thetadot = H qdot, with rows in canonical joint order and columns ordered
// as (cycle-1 pins, ..., cycle-gamma pins, free joints).
struct LimbLoopData {
  Eigen::MatrixXd H;     // n x delta_l
  Eigen::MatrixXd Hdot;  // n x delta_l
  std::vector<LoopSolution> per_cycle;
  std::vector<int> q_joints;  // column -> tree joint id
};

namespace detail {

// Scatter a per-cycle solution into the limb H (canonical rows).
inline void scatter_cycle(const LimbCycle& cy, const std::vector<int>& local_joint_ids,
                          const LoopSolution& sol, const Eigen::MatrixXd& Hcy,
                          const Eigen::MatrixXd& Hcydot, int col_offset, int skip_joint,
                          Eigen::MatrixXd& H, Eigen::MatrixXd& Hdot) {
  std::vector<int> row_joints;  // partition-order rows -> joint ids
  for (int idx : sol.y) row_joints.push_back(local_joint_ids[idx]);
  for (int idx : sol.q) row_joints.push_back(local_joint_ids[idx]);
  for (size_t i = 0; i < row_joints.size(); ++i) {
    if (row_joints[i] == skip_joint) continue;
    H.block(row_joints[i] - 1, col_offset, 1, Hcy.cols()) = Hcy.row(static_cast<int>(i));
    Hdot.block(row_joints[i] - 1, col_offset, 1, Hcy.cols()) = Hcydot.row(static_cast<int>(i));
  }
}

}  // namespace detail

// Evaluate and assemble the limb H and Hdot at the current tree state. The
// cut-joint formulation is the default; the cut-body route needs the cut
// joint variables, which are reconstructed from the tree state by closing
// each loop's POE residual in its cut coordinate.
inline LimbLoopData assemble_limb_H(const RepresentativeLimb& limb, const TreeKinematics& kin,
                                    double cond_limit = 1e8) {
  const int n = limb.n;
  const int delta = limb.dof();
  LimbLoopData out;
  out.H.setZero(n, delta);
  out.Hdot.setZero(n, delta);
  out.q_joints = limb.q_joints;

  int col = 0;
  for (const auto& cy : limb.cycles) {
    const auto& cut = limb.cuts[cy.cut_index];
    if (limb.loop_formulation == LoopFormulation::CutJoint) {
      auto rows = cut_joint_rows(cut, kin, true);
      // Columns of the cycle members only; the shared-path columns vanish.
      const int nloc = static_cast<int>(cy.members.size());
      Eigen::MatrixXd G(rows.G.rows(), nloc), Gdot(rows.G.rows(), nloc);
      for (int i = 0; i < nloc; ++i) {
        G.col(i) = rows.G.col(cy.members[i] - 1);
        Gdot.col(i) = rows.Gdot.col(cy.members[i] - 1);
      }
      PartitionSpec part;
      for (int qj : cy.q_members)
        part.q.push_back(static_cast<int>(
            std::find(cy.members.begin(), cy.members.end(), qj) - cy.members.begin()));
      LoopSolution sol = solve_velocity_constraints(G, part, 1e-9, cond_limit);
      Eigen::MatrixXd Hdot_cy = loop_solution_dot(sol, Gdot);
      detail::scatter_cycle(cy, cy.members, sol, sol.H, Hdot_cy, col, -1, out.H, out.Hdot);
      out.per_cycle.push_back(std::move(sol));
    } else {
      // Cut-body: solve in all cycle coordinates including the cut joint,
      // then drop the cut-joint row. The cut variable follows from closing
      // the loop in that single coordinate.
      const double theta_cut = detail_solve_cut_variable(limb, kin, cy);
      const int cut_id = limb.cut_joint_id(cy.cut_index);
      auto first = cut_body_constraint(cy, limb, kin, theta_cut, 0.0, false);
      PartitionSpec part;
      for (int qj : cy.q_members)
        part.q.push_back(static_cast<int>(
            std::find(first.joint_ids.begin(), first.joint_ids.end(), qj) -
            first.joint_ids.begin()));
      LoopSolution sol = solve_velocity_constraints(first.G, part, 1e-9, cond_limit);
      // Rate of the cut variable for Gdot, from the solved H and the tree rates.
      double thetad_cut = 0.0;
      {
        Eigen::VectorXd qdot(cy.q_members.size());
        for (size_t i = 0; i < cy.q_members.size(); ++i)
          qdot(static_cast<int>(i)) = kin.rates()(cy.q_members[i] - 1);
        Eigen::VectorXd full = Eigen::VectorXd::Zero(first.G.cols());
        Eigen::VectorXd ordered = sol.H * qdot;  // partition order: y then q
        for (size_t i = 0; i < sol.y.size(); ++i) full(sol.y[i]) = ordered(static_cast<int>(i));
        for (size_t i = 0; i < sol.q.size(); ++i)
          full(sol.q[i]) = ordered(static_cast<int>(sol.y.size() + i));
        const int cut_col = static_cast<int>(
            std::find(first.joint_ids.begin(), first.joint_ids.end(), cut_id) -
            first.joint_ids.begin());
        thetad_cut = full(cut_col);
      }
      auto cb = cut_body_constraint(cy, limb, kin, theta_cut, thetad_cut, true);
      Eigen::MatrixXd Hdot_cy = loop_solution_dot(sol, cb.Gdot);
      detail::scatter_cycle(cy, cb.joint_ids, sol, sol.H, Hdot_cy, col, cut_id, out.H, out.Hdot);
      out.per_cycle.push_back(std::move(sol));
    }
    col += static_cast<int>(cy.q_members.size());
  }
  for (int f : limb.free_joints) {
    out.H(f - 1, col) = 1.0;
    ++col;
  }
  return out;
}

// Close one loop's POE residual in the cut coordinate alone (tree joints
// fixed): Newton iteration on the cut-joint angle.
inline double detail_solve_cut_variable(const RepresentativeLimb& limb, const TreeKinematics& kin,
                                        const LimbCycle& cy) {
  const int cut_id = limb.cut_joint_id(cy.cut_index);
  double th = 0.0;
  for (int it = 0; it < 50; ++it) {
    auto cb = cut_body_constraint(cy, limb, kin, th, 0.0, false);
    const Vec6 res = log_pose(cb.g);
    if (res.norm() < 1e-12) return th;
    const int cut_col = static_cast<int>(
        std::find(cb.joint_ids.begin(), cb.joint_ids.end(), cut_id) - cb.joint_ids.begin());
    const Vec6 dir = cb.G.col(cut_col);
    const double denom = dir.squaredNorm();
    if (denom < 1e-14)
      throw SingularityError("cut-body: degenerate cut-joint direction");
    th -= dir.dot(res) / denom;
  }
  throw DivergenceError("cut-body: cut-joint closure did not converge");
}

}  // namespace pkmdyn
