#pragma once

// Data model of a PKM: a representative limb defined against construction
// frames, mount transforms that stamp the L limb instances, the platform body
// and the taskspace chart.

#include <array>
#include <string>
#include <vector>

#include "pkmdyn/se3.hpp"
#include "pkmdyn/topology.hpp"

namespace pkmdyn {

struct BodyModel {
  std::string name;
  SpatialInertia inertia;
  Pose A;  // zero reference configuration w.r.t. the construction frame
};

// Tree joint i connects body i to its predecessor. X is the body-fixed screw
// of the distal body, X = Ad(A_i)^-1 Y.
struct TreeJointModel {
  std::string name;
  JointKind kind = JointKind::Revolute;
  ScrewAxis Y;
  Vec6 X = Vec6::Zero();
  int body = -1;  // distal body index (1..n)
  int pred = 0;   // predecessor body (0 = ground)
  bool actuated = false;
  double viscous_friction = 0.0;  // N m s/rad on this joint's rate
};

// Elementary constraint recipe of a cut joint: which components of the
// relative joint-frame displacement vanish, and which orientation pairs
// e_k^T DeltaR e_r stay zero.
struct CutConstraintRecipe {
  std::array<bool, 3> dist = {true, true, true};
  std::vector<std::pair<int, int>> ori;  // (axis index on J_k, axis index on J_r)

  int rows() const {
    int r = 0;
    for (bool b : dist)
      if (b) ++r;
    return r + static_cast<int>(ori.size());
  }

  static CutConstraintRecipe ForKind(JointKind kind) {
    CutConstraintRecipe r;
    switch (kind) {
      case JointKind::Revolute:
        // Axis along the 3-axes of both joint frames; (3,1)- and
        // (3,2)-elements of DeltaR vanish.
        r.ori = {{2, 0}, {2, 1}};
        break;
      case JointKind::Prismatic:
        throw ValidationError("cut joint: prismatic cut joints are not supported");
      case JointKind::Helical:
        throw ValidationError("cut joint: helical cut joints are not supported");
    }
    return r;
  }

  static CutConstraintRecipe Spherical() { return CutConstraintRecipe{}; }

  static CutConstraintRecipe Universal() {
    // Rotation axes along the 1-axis of J_k and the 2-axis of J_r; the
    // (1,2)-element of DeltaR vanishes.
    CutConstraintRecipe r;
    r.ori = {{0, 1}};
    return r;
  }
};

struct CutJointModel {
  std::string name;
  JointKind kind = JointKind::Revolute;
  ScrewAxis Y;        // spatial screw at the zero reference (cut-body route)
  int from_body = -1;  // edge direction from -> to
  int to_body = -1;
  // Cut-joint constraint frames: J_k on body k carries the constraint frame,
  // J_r sits on body r. S maps joint-frame coordinates into body coordinates.
  int body_k = -1;
  int body_r = -1;
  Pose S_k;
  Pose S_r;
  CutConstraintRecipe recipe;
};

enum class LoopFormulation { CutJoint, CutBody };

// One fundamental cycle of the limb, resolved to model indices. Traversal
// starts at the cut joint (id n + 1 + cut_index) with sigma = +1.
struct LimbCycle {
  int cut_index = 0;             // into RepresentativeLimb::cuts
  std::vector<int> members;      // tree joints of the cycle, ascending
  std::vector<int> order;        // traversal order of joint ids (cut first)
  std::vector<int> sigma;        // parallel to order
  std::vector<int> q_members;    // pinned independent tree joints of this cycle
  std::vector<int> y_members;    // dependent tree joints, ascending
};

struct RepresentativeLimb {
  std::string name;
  int n = 0;                            // tree joints, incl. the platform joint
  std::vector<BodyModel> bodies;        // bodies[i-1] is body i; body n is the platform
  std::vector<TreeJointModel> joints;   // joints[i-1] is tree joint i
  std::vector<CutJointModel> cuts;
  std::vector<LimbCycle> cycles;        // one per cut, filled by finalize()
  std::vector<int> free_joints;         // tree joints in no cycle, ascending
  std::vector<int> q_joints;            // q order: cycle pins, then free joints
  std::vector<int> row_selection;       // rows of L_p' forming L_t (0-based)
  LoopFormulation loop_formulation = LoopFormulation::CutJoint;

  int platform_body() const { return n; }
  int nbar() const { return n - 1; }    // tree joints with the platform removed
  int dof() const { return static_cast<int>(q_joints.size()); }

  const Pose& platform_reference() const { return bodies.back().A; }

  int cut_joint_id(int cut_index) const { return n + 1 + cut_index; }

  // Derive cycles, sigma bookkeeping and the q ordering from the stored
  // joints. `pins` lists the user-pinned independent tree joints per cut.
  void finalize(const std::vector<std::vector<int>>& pins);

  MechanismGraph graph() const;

  std::vector<int> actuated_q_rows() const {
    std::vector<int> rows;
    for (size_t i = 0; i < q_joints.size(); ++i)
      if (joints[q_joints[i] - 1].actuated) rows.push_back(static_cast<int>(i));
    return rows;
  }
};

enum class ChartKind { Translation, Rotation, Planar, Scara, FixedAxis };

// Taskspace chart: coordinates x with V_t = H_t(x) xdot and the velocity
// distribution V_p = P_p V_t.
struct TaskspaceChart {
  ChartKind kind = ChartKind::Translation;
  Vec3 axis = Vec3::UnitZ();  // FixedAxis only: rotation axis in the platform frame
  Pose A_p;                   // platform world reference pose (shared by all limbs)

  int dof() const {
    switch (kind) {
      case ChartKind::Translation: return 3;
      case ChartKind::Rotation: return 3;
      case ChartKind::Planar: return 3;
      case ChartKind::Scara: return 4;
      case ChartKind::FixedAxis: return 1;
    }
    return 0;
  }

  Eigen::MatrixXd P_p() const {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(6, dof());
    switch (kind) {
      case ChartKind::Translation:
        P.bottomRows(3).setIdentity();
        break;
      case ChartKind::Rotation:
        P.topRows(3).setIdentity();
        break;
      case ChartKind::Planar:
        P(2, 0) = 1.0;
        P(3, 1) = 1.0;
        P(4, 2) = 1.0;
        break;
      case ChartKind::Scara:
        P(2, 0) = 1.0;
        P(3, 1) = 1.0;
        P(4, 2) = 1.0;
        P(5, 3) = 1.0;
        break;
      case ChartKind::FixedAxis:
        P.col(0).head<3>() = axis;
        break;
    }
    return P;
  }

  // V_t = H_t(x) xdot. Identity for translation-only charts; the rotation
  // block uses the left-trivialized differential of the exponential map.
  Eigen::MatrixXd H_t(const Eigen::VectorXd& x) const {
    const int d = dof();
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d);
    switch (kind) {
      case ChartKind::Translation:
      case ChartKind::FixedAxis:
        break;
      case ChartKind::Rotation: {
        if (x.head<3>().norm() > 2.0 * M_PI - 1e-6)
          throw SingularityError("taskspace chart: axis-angle chart boundary");
        H = dexp_so3(-x.head<3>());
        break;
      }
      case ChartKind::Planar: {
        const double c = std::cos(x(0)), s = std::sin(x(0));
        H(1, 1) = c;
        H(1, 2) = s;
        H(2, 1) = -s;
        H(2, 2) = c;
        break;
      }
      case ChartKind::Scara: {
        const double c = std::cos(x(0)), s = std::sin(x(0));
        H(1, 1) = c;
        H(1, 2) = s;
        H(2, 1) = -s;
        H(2, 2) = c;
        break;
      }
    }
    return H;
  }

  // Platform pose for given taskspace coordinates.
  Pose pose_from_x(const Eigen::VectorXd& x) const {
    switch (kind) {
      case ChartKind::Translation:
        return Pose(A_p.R, x.head<3>());
      case ChartKind::Rotation: {
        Vec6 xi = Vec6::Zero();
        xi.head<3>() = x.head<3>();
        return Pose(A_p.R * exp_twist(xi).R, A_p.r);
      }
      case ChartKind::Planar: {
        const Mat3 Rz = detail::rot_axis_angle(Vec3::UnitZ(), x(0));
        return Pose(A_p.R * Rz, Vec3(x(1), x(2), A_p.r.z()));
      }
      case ChartKind::Scara: {
        const Mat3 Rz = detail::rot_axis_angle(Vec3::UnitZ(), x(0));
        return Pose(A_p.R * Rz, Vec3(x(1), x(2), x(3)));
      }
      case ChartKind::FixedAxis:
        return Pose(A_p.R * detail::rot_axis_angle(axis, x(0)), A_p.r);
    }
    throw ValidationError("chart: unknown kind");
  }

  Eigen::VectorXd x_of_pose(const Pose& c) const {
    Eigen::VectorXd x(dof());
    switch (kind) {
      case ChartKind::Translation:
        x = c.r;
        break;
      case ChartKind::Rotation:
        x = log_rotation(A_p.R.transpose() * c.R);
        break;
      case ChartKind::Planar: {
        const Vec3 w = log_rotation(A_p.R.transpose() * c.R);
        x << w.z(), c.r.x(), c.r.y();
        break;
      }
      case ChartKind::Scara: {
        const Vec3 w = log_rotation(A_p.R.transpose() * c.R);
        x << w.z(), c.r.x(), c.r.y(), c.r.z();
        break;
      }
      case ChartKind::FixedAxis:
        x(0) = axis.dot(log_rotation(A_p.R.transpose() * c.R));
        break;
    }
    return x;
  }

  // First-order taskspace displacement from pose `c` toward coordinates
  // `x_target`, expressed in V_t coordinates.
  Eigen::VectorXd delta(const Eigen::VectorXd& x_target, const Pose& c) const {
    switch (kind) {
      case ChartKind::Translation:
        return c.R.transpose() * (x_target.head<3>() - c.r);
      case ChartKind::Rotation:
        return log_rotation(c.R.transpose() * pose_from_x(x_target).R);
      case ChartKind::Planar: {
        Eigen::VectorXd d(3);
        const Vec3 w = log_rotation(A_p.R.transpose() * c.R);
        const Vec3 dr = c.R.transpose() * (Vec3(x_target(1), x_target(2), A_p.r.z()) - c.r);
        d << x_target(0) - w.z(), dr.x(), dr.y();
        return d;
      }
      case ChartKind::Scara: {
        Eigen::VectorXd d(4);
        const Vec3 w = log_rotation(A_p.R.transpose() * c.R);
        const Vec3 dr = c.R.transpose() * (Vec3(x_target(1), x_target(2), x_target(3)) - c.r);
        d << x_target(0) - w.z(), dr;
        return d;
      }
      case ChartKind::FixedAxis: {
        Eigen::VectorXd d(1);
        d(0) = x_target(0) - x_of_pose(c)(0);
        return d;
      }
    }
    throw ValidationError("chart: unknown kind");
  }
};

struct MountSet {
  Pose S_0;  // base mount -> world IFR
  Pose S_p;  // platform mount -> platform frame
};

struct AssembledPKM {
  std::string name;
  RepresentativeLimb limb;
  std::vector<MountSet> mounts;  // one per limb instance
  SpatialInertia platform;
  TaskspaceChart chart;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);

  int limb_count() const { return static_cast<int>(mounts.size()); }

  // World reference pose of the platform, A_p = S_0 A_p' S_p^-1. The paper's
  // modular construction requires this to agree across limbs.
  Pose platform_world_reference(int l) const {
    return mounts[l].S_0 * limb.platform_reference() * mounts[l].S_p.inverse();
  }

  void validate() const {
    if (mounts.empty()) throw ValidationError("pkm: no mounts");
    const Pose a0 = platform_world_reference(0);
    for (int l = 1; l < limb_count(); ++l) {
      const Pose al = platform_world_reference(l);
      if ((al.R - a0.R).cwiseAbs().maxCoeff() > 1e-9 ||
          (al.r - a0.r).cwiseAbs().maxCoeff() > 1e-9)
        throw ValidationError("pkm: platform reference differs between limbs");
    }
    platform.validate();
    for (const auto& b : limb.bodies) b.inertia.validate();
  }

  MechanismGraph mechanism_graph() const;
};

inline void RepresentativeLimb::finalize(const std::vector<std::vector<int>>& pins) {
  if (pins.size() != cuts.size())
    throw ValidationError("limb: one pin set per cut joint required");

  MechanismGraph g = graph();
  LimbSubgraph sub;
  sub.index = 0;
  for (int v = 0; v <= n; ++v) sub.vertices.push_back(v);
  for (const auto& e : g.edges) sub.edge_ids.push_back(e.id);
  sub.cycle_count = static_cast<int>(cuts.size());

  std::vector<int> cut_ids;
  for (size_t c = 0; c < cuts.size(); ++c) cut_ids.push_back(cut_joint_id(static_cast<int>(c)));
  auto fcs = fundamental_cycles(g, sub, cut_ids);
  if (!is_hybrid(fcs))
    throw ValidationError("limb: fundamental cycles are not edge-disjoint (non-hybrid limb)");

  cycles.clear();
  std::vector<bool> in_cycle(n + 1, false);
  for (size_t c = 0; c < fcs.size(); ++c) {
    LimbCycle cy;
    cy.cut_index = static_cast<int>(c);
    cy.order = fcs[c].edge_order;
    cy.sigma = fcs[c].sigma;
    for (int id : cy.order)
      if (id <= n) {
        cy.members.push_back(id);
        in_cycle[id] = true;
      }
    std::sort(cy.members.begin(), cy.members.end());
    cy.q_members = pins[c];
    for (int q : cy.q_members)
      if (std::find(cy.members.begin(), cy.members.end(), q) == cy.members.end())
        throw ValidationError("limb: pinned coordinate " + std::to_string(q) +
                              " is not a member of its cycle");
    for (int mjoint : cy.members)
      if (std::find(cy.q_members.begin(), cy.q_members.end(), mjoint) == cy.q_members.end())
        cy.y_members.push_back(mjoint);
    cycles.push_back(std::move(cy));
  }

  free_joints.clear();
  for (int i = 1; i <= n; ++i)
    if (!in_cycle[i]) free_joints.push_back(i);

  q_joints.clear();
  for (const auto& cy : cycles)
    for (int q : cy.q_members) q_joints.push_back(q);
  for (int f : free_joints) q_joints.push_back(f);

  for (const auto& j : joints)
    if (j.actuated &&
        std::find(q_joints.begin(), q_joints.end(), j.body) == q_joints.end())
      throw ValidationError("limb: actuated joint " + j.name +
                            " is not among the independent coordinates");
}

inline MechanismGraph RepresentativeLimb::graph() const {
  MechanismGraph g;
  g.num_vertices = n + 1;
  g.ground = 0;
  g.platform = n;
  for (const auto& j : joints) {
    JointEdge e;
    e.id = j.body;
    e.from = j.body;
    e.to = j.pred;
    e.kind = j.kind;
    e.actuated = j.actuated;
    e.name = j.name;
    g.edges.push_back(e);
  }
  for (size_t c = 0; c < cuts.size(); ++c) {
    JointEdge e;
    e.id = cut_joint_id(static_cast<int>(c));
    e.from = cuts[c].from_body;
    e.to = cuts[c].to_body;
    e.kind = cuts[c].kind;
    e.name = cuts[c].name;
    g.edges.push_back(e);
  }
  return g;
}

// Mechanism graph of the assembled PKM: ground 0, platform 1, then the limb
// bodies of each instance.
inline MechanismGraph AssembledPKM::mechanism_graph() const {
  MechanismGraph g;
  g.ground = 0;
  g.platform = 1;
  const int nb = limb.n - 1;  // interior bodies per limb (platform shared)
  g.num_vertices = 2 + limb_count() * nb;
  int next_edge = 1;
  for (int l = 0; l < limb_count(); ++l) {
    auto map_body = [&](int b) {
      if (b == 0) return 0;
      if (b == limb.platform_body()) return 1;
      return 2 + l * nb + (b - 1);
    };
    for (const auto& j : limb.joints) {
      JointEdge e;
      e.id = next_edge++;
      e.from = map_body(j.body);
      e.to = map_body(j.pred);
      e.kind = j.kind;
      e.actuated = j.actuated;
      e.name = limb.name + "/" + j.name + "(" + std::to_string(l + 1) + ")";
      g.edges.push_back(e);
    }
    for (const auto& c : limb.cuts) {
      JointEdge e;
      e.id = next_edge++;
      e.from = map_body(c.from_body);
      e.to = map_body(c.to_body);
      e.kind = c.kind;
      e.name = limb.name + "/" + c.name + "(" + std::to_string(l + 1) + ")";
      g.edges.push_back(e);
    }
  }
  return g;
}

}  // namespace pkmdyn
