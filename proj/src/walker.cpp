#include "sde/walker.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include <json.hpp>

#include "sde/mat.hpp"
#include "sde/rng.hpp"

namespace sde {

namespace {

constexpr int kTorso = 0;
inline int thigh_idx(int side) { return 1 + kBodiesPerLeg * side; }
inline int shank_idx(int side) { return 2 + kBodiesPerLeg * side; }
inline int foot_idx(int side) { return 3 + kBodiesPerLeg * side; }
inline int toe_idx(int side) { return 4 + kBodiesPerLeg * side; }
inline int hip_dof(int side) { return 3 + kJointsPerLeg * side; }

inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

// --- small fixed-size SPD solves (n <= 4) ----------------------------------

struct SmallChol {
    int n = 0;
    double l[16]{};

    void factor(const double* m, int dim) {
        n = dim;
        for (int j = 0; j < n; ++j) {
            double d = m[j * n + j];
            for (int k = 0; k < j; ++k) d -= l[j * n + k] * l[j * n + k];
            if (!(d > 0.0)) throw std::domain_error("SmallChol: block not positive definite");
            l[j * n + j] = std::sqrt(d);
            for (int i = j + 1; i < n; ++i) {
                double s = m[i * n + j];
                for (int k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }

    void solve(const double* b, double* x) const {
        double y[4];
        for (int i = 0; i < n; ++i) {
            double s = b[i];
            for (int k = 0; k < i; ++k) s -= l[i * n + k] * y[k];
            y[i] = s / l[i * n + i];
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = y[i];
            for (int k = i + 1; k < n; ++k) s -= l[k * n + i] * x[k];
            x[i] = s / l[i * n + i];
        }
    }
};

// --- forward kinematics -----------------------------------------------------

struct BodyKin {
    double phi = 0.0, omega = 0.0;
    Vec2 com, com_vel, com_acc0; // acc0: velocity-product acceleration (qdd = 0)
};

struct Kin {
    BodyKin body[kNumBodies];
    Vec2 hip, hip_vel;
    // per-side chain anchors: [0] knee, [1] ankle, [2] toe base (ball)
    Vec2 anchor[2][3], anchor_vel[2][3], anchor_acc0[2][3];
    Vec2 heel[2], heel_vel[2], ball[2], ball_vel[2], toe_tip[2];
};

Kin compute_kinematics(const WalkerModel& model, const SimState& s) {
    Kin k;
    const auto& q = s.q;
    const auto& qd = s.qdot;
    k.hip = {q[0], q[1]};
    k.hip_vel = {qd[0], qd[1]};

    {
        BodyKin& t = k.body[kTorso];
        const SegmentDef& seg = model.segments[kTorso];
        t.phi = q[2] + M_PI / 2.0;
        t.omega = qd[2];
        const Vec2 r = unit(t.phi) * (seg.com_frac * seg.length);
        t.com = k.hip + r;
        t.com_vel = k.hip_vel + perp(r) * t.omega;
        t.com_acc0 = r * (-t.omega * t.omega);
    }

    for (int side = 0; side < 2; ++side) {
        const int h = hip_dof(side);
        const SegmentDef& thigh = model.segments[thigh_idx(side)];
        const SegmentDef& shank = model.segments[shank_idx(side)];
        const SegmentDef& foot = model.segments[foot_idx(side)];
        const SegmentDef& toe = model.segments[toe_idx(side)];

        BodyKin& bt = k.body[thigh_idx(side)];
        bt.phi = q[2] - M_PI / 2.0 + q[h];
        bt.omega = qd[2] + qd[h];
        {
            const Vec2 axis = unit(bt.phi);
            const Vec2 rc = axis * (thigh.com_frac * thigh.length);
            bt.com = k.hip + rc;
            bt.com_vel = k.hip_vel + perp(rc) * bt.omega;
            bt.com_acc0 = rc * (-bt.omega * bt.omega);
            const Vec2 rk = axis * thigh.length;
            k.anchor[side][0] = k.hip + rk;
            k.anchor_vel[side][0] = k.hip_vel + perp(rk) * bt.omega;
            k.anchor_acc0[side][0] = rk * (-bt.omega * bt.omega);
        }

        BodyKin& bs = k.body[shank_idx(side)];
        bs.phi = bt.phi + q[h + 1];
        bs.omega = bt.omega + qd[h + 1];
        {
            const Vec2 axis = unit(bs.phi);
            const Vec2 rc = axis * (shank.com_frac * shank.length);
            bs.com = k.anchor[side][0] + rc;
            bs.com_vel = k.anchor_vel[side][0] + perp(rc) * bs.omega;
            bs.com_acc0 = k.anchor_acc0[side][0] + rc * (-bs.omega * bs.omega);
            const Vec2 ra = axis * shank.length;
            k.anchor[side][1] = k.anchor[side][0] + ra;
            k.anchor_vel[side][1] = k.anchor_vel[side][0] + perp(ra) * bs.omega;
            k.anchor_acc0[side][1] = k.anchor_acc0[side][0] + ra * (-bs.omega * bs.omega);
        }

        BodyKin& bf = k.body[foot_idx(side)];
        bf.phi = bs.phi + M_PI / 2.0 + q[h + 2]; // horizontal at the nominal pose
        bf.omega = bs.omega + qd[h + 2];
        {
            const Vec2 axis = unit(bf.phi);
            const double heel_back = model.foot_heel_back;
            const Vec2 rc = axis * (foot.com_frac * foot.length - heel_back);
            bf.com = k.anchor[side][1] + rc;
            bf.com_vel = k.anchor_vel[side][1] + perp(rc) * bf.omega;
            bf.com_acc0 = k.anchor_acc0[side][1] + rc * (-bf.omega * bf.omega);
            const Vec2 rheel = axis * (-heel_back);
            const Vec2 rball = axis * (foot.length - heel_back);
            k.heel[side] = k.anchor[side][1] + rheel;
            k.heel_vel[side] = k.anchor_vel[side][1] + perp(rheel) * bf.omega;
            k.ball[side] = k.anchor[side][1] + rball;
            k.ball_vel[side] = k.anchor_vel[side][1] + perp(rball) * bf.omega;
            k.anchor[side][2] = k.ball[side];
            k.anchor_vel[side][2] = k.ball_vel[side];
            k.anchor_acc0[side][2] =
                k.anchor_acc0[side][1] + rball * (-bf.omega * bf.omega);
        }

        BodyKin& bo = k.body[toe_idx(side)];
        bo.phi = bf.phi + q[h + 3];
        bo.omega = bf.omega + qd[h + 3];
        {
            const Vec2 axis = unit(bo.phi);
            const Vec2 rc = axis * (toe.com_frac * toe.length);
            bo.com = k.anchor[side][2] + rc;
            bo.com_vel = k.anchor_vel[side][2] + perp(rc) * bo.omega;
            bo.com_acc0 = k.anchor_acc0[side][2] + rc * (-bo.omega * bo.omega);
            k.toe_tip[side] = k.anchor[side][2] + axis * toe.length;
        }
    }
    return k;
}

// --- mass matrix / rhs assembly ---------------------------------------------
//
// The system has tree structure: legs couple only through the torso block.
// All torso-block sums are accumulated as torso + (left + right), so a
// left/right swap of the state produces bit-identical torso quantities and
// mirrored trajectories are exact.

struct Blocks {
    double a_torso[9]{}; // torso-body contribution to the torso block
    double a_chain[2][9]{};
    double b[2][3 * kJointsPerLeg]{}; // torso rows x chain columns
    double d[2][kJointsPerLeg * kJointsPerLeg]{};
    double r_torso[3]{};
    double r_torso_chain[2][3]{};
    double r_chain[2][kJointsPerLeg]{};
};

// Jacobian of one body: 3 torso dofs plus up to kJointsPerLeg chain dofs.
struct BodyJac {
    Vec2 jv[3 + kJointsPerLeg];
    double jphi[3 + kJointsPerLeg];
    int n_chain = 0;
};

BodyJac body_jacobian(const Kin& k, const BodyKin& b, int n_chain, int side) {
    BodyJac j{};
    j.n_chain = n_chain;
    j.jv[0] = {1.0, 0.0};
    j.jv[1] = {0.0, 1.0};
    j.jv[2] = perp(b.com - k.hip);
    j.jphi[0] = 0.0;
    j.jphi[1] = 0.0;
    j.jphi[2] = 1.0;
    for (int c = 0; c < n_chain; ++c) {
        const Vec2 pivot = (c == 0) ? k.hip : k.anchor[side][c - 1];
        j.jv[3 + c] = perp(b.com - pivot);
        j.jphi[3 + c] = 1.0;
    }
    return j;
}

void accumulate_body(Blocks& bl, const Kin& k, const WalkerModel& model, int body_index,
                     int n_chain, int side) {
    const SegmentDef& seg = model.segments[body_index];
    const BodyKin& b = k.body[body_index];
    const BodyJac j = body_jacobian(k, b, n_chain, side);
    const int nd = 3 + n_chain;
    constexpr int jl = kJointsPerLeg;

    for (int a = 0; a < nd; ++a) {
        for (int c = a; c < nd; ++c) {
            const double v = seg.mass * j.jv[a].dot(j.jv[c]) + seg.inertia * j.jphi[a] * j.jphi[c];
            if (a < 3 && c < 3) {
                double* dst = (n_chain == 0) ? bl.a_torso : bl.a_chain[side];
                dst[a * 3 + c] += v;
                if (a != c) dst[c * 3 + a] += v;
            } else if (a < 3) {
                bl.b[side][a * jl + (c - 3)] += v;
            } else {
                bl.d[side][(a - 3) * jl + (c - 3)] += v;
                if (a != c) bl.d[side][(c - 3) * jl + (a - 3)] += v;
            }
        }
    }

    // rhs: gravity minus velocity-product inertial terms (alpha0 = 0 in 2-D)
    const Vec2 f_eff = Vec2{0.0, -kGravity * seg.mass} - b.com_acc0 * seg.mass;
    for (int a = 0; a < nd; ++a) {
        const double v = f_eff.dot(j.jv[a]);
        if (a < 3) {
            double* dst = (n_chain == 0) ? bl.r_torso : bl.r_torso_chain[side];
            dst[a] += v;
        } else {
            bl.r_chain[side][a - 3] += v;
        }
    }
}

// Contact points live on the foot body (chain depth 3): generalized force
// columns stop at the ankle.
void accumulate_point_force(Blocks& bl, const Kin& k, int side, Vec2 p, Vec2 f) {
    bl.r_torso_chain[side][0] += f.x;
    bl.r_torso_chain[side][1] += f.z;
    bl.r_torso_chain[side][2] += f.dot(perp(p - k.hip));
    bl.r_chain[side][0] += f.dot(perp(p - k.hip));
    bl.r_chain[side][1] += f.dot(perp(p - k.anchor[side][0]));
    bl.r_chain[side][2] += f.dot(perp(p - k.anchor[side][1]));
}

// Velocity-proportional forces are integrated semi-implicitly: the force at
// the pre-step velocity stays on the rhs, and its derivative d goes into the
// system matrix as dt * d * (dp/dq)(dp/dq)^T, which keeps stiff contact
// damping stable at dt = 2 ms on the light distal segments.
void accumulate_point_damping(Blocks& bl, const Kin& k, int side, Vec2 p, double d_dt) {
    constexpr int jl = kJointsPerLeg;
    // z-components of the point Jacobian: contact damping acts vertically
    double rt[3], rc[jl];
    rt[0] = 0.0;
    rt[1] = 1.0;
    rt[2] = perp(p - k.hip).z;
    rc[0] = perp(p - k.hip).z;
    rc[1] = perp(p - k.anchor[side][0]).z;
    rc[2] = perp(p - k.anchor[side][1]).z;
    rc[3] = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) bl.a_chain[side][i * 3 + j] += d_dt * rt[i] * rt[j];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < jl; ++j) bl.b[side][i * jl + j] += d_dt * rt[i] * rc[j];
    for (int i = 0; i < jl; ++i)
        for (int j = 0; j < jl; ++j) bl.d[side][i * jl + j] += d_dt * rc[i] * rc[j];
}

Blocks assemble(const WalkerModel& model, const SimState& s, const Kin& k,
                const std::array<double, kNumJoints>& applied_joint_torques,
                const TerrainProfile& terrain, double dt) {
    Blocks bl{};
    accumulate_body(bl, k, model, kTorso, 0, 0);
    for (int side = 0; side < 2; ++side) {
        accumulate_body(bl, k, model, thigh_idx(side), 1, side);
        accumulate_body(bl, k, model, shank_idx(side), 2, side);
        accumulate_body(bl, k, model, foot_idx(side), 3, side);
        accumulate_body(bl, k, model, toe_idx(side), 4, side);

        const Vec2 pts[2] = {k.heel[side], k.ball[side]};
        const Vec2 vels[2] = {k.heel_vel[side], k.ball_vel[side]};
        for (int c = 0; c < 2; ++c) {
            const double pen = terrain.height(pts[c].x) - pts[c].z;
            if (pen <= 0.0) continue;
            double n = kContactStiffness * pen - kContactDamping * vels[c].z;
            if (n < 0.0) n = 0.0;
            double ft = -kContactDamping * vels[c].x;
            const double cap = kFrictionCoeff * n;
            ft = std::clamp(ft, -cap, cap);
            accumulate_point_force(bl, k, side, pts[c], {ft, n});
            if (n > 0.0) accumulate_point_damping(bl, k, side, pts[c], kContactDamping * dt);
        }

        for (int j = 0; j < kJointsPerLeg; ++j) {
            const int dof = hip_dof(side) + j;
            double tau = applied_joint_torques[kJointsPerLeg * side + j];
            double damping = 0.0;
            const JointDef& jd = model.joints[kJointsPerLeg * side + j];
            const double qj = s.q[dof];
            if (jd.passive_stiffness != 0.0) {
                tau += -jd.passive_stiffness * qj - jd.passive_damping * s.qdot[dof];
                damping += jd.passive_damping;
            }
            if (qj > jd.limit_hi) {
                tau += -kJointLimitStiffness * (qj - jd.limit_hi) - kJointLimitDamping * s.qdot[dof];
                damping += kJointLimitDamping;
            } else if (qj < jd.limit_lo) {
                tau += -kJointLimitStiffness * (qj - jd.limit_lo) - kJointLimitDamping * s.qdot[dof];
                damping += kJointLimitDamping;
            }
            bl.r_chain[side][j] += tau;
            bl.d[side][j * kJointsPerLeg + j] += dt * damping;
        }
    }
    return bl;
}

void solve_blocks(const Blocks& bl, std::array<double, kNumDof>& qdd) {
    constexpr int jl = kJointsPerLeg;
    double a[9];
    double rt[3];
    for (int i = 0; i < 9; ++i) a[i] = bl.a_torso[i] + (bl.a_chain[0][i] + bl.a_chain[1][i]);
    for (int i = 0; i < 3; ++i)
        rt[i] = bl.r_torso[i] + (bl.r_torso_chain[0][i] + bl.r_torso_chain[1][i]);

    double z[2][jl * 3];  // D^-1 B^T
    double y[2][jl];      // D^-1 r_chain
    double p[2][9]{};     // B D^-1 B^T
    double u[2][3]{};     // B D^-1 r_chain
    for (int s = 0; s < 2; ++s) {
        SmallChol chol;
        chol.factor(bl.d[s], jl);
        chol.solve(bl.r_chain[s], y[s]);
        for (int col = 0; col < 3; ++col) {
            double bt_col[jl], zc[jl];
            for (int m = 0; m < jl; ++m) bt_col[m] = bl.b[s][col * jl + m];
            chol.solve(bt_col, zc);
            for (int m = 0; m < jl; ++m) z[s][m * 3 + col] = zc[m];
        }
        for (int i = 0; i < 3; ++i) {
            for (int jj = 0; jj < 3; ++jj) {
                double v = 0.0;
                for (int m = 0; m < jl; ++m) v += bl.b[s][i * jl + m] * z[s][m * 3 + jj];
                p[s][i * 3 + jj] = v;
            }
            double w = 0.0;
            for (int m = 0; m < jl; ++m) w += bl.b[s][i * jl + m] * y[s][m];
            u[s][i] = w;
        }
    }

    double schur[9], rs[3], xt[3];
    for (int i = 0; i < 9; ++i) schur[i] = a[i] - (p[0][i] + p[1][i]);
    for (int i = 0; i < 3; ++i) rs[i] = rt[i] - (u[0][i] + u[1][i]);
    SmallChol schol;
    schol.factor(schur, 3);
    schol.solve(rs, xt);

    qdd[0] = xt[0];
    qdd[1] = xt[1];
    qdd[2] = xt[2];
    for (int s = 0; s < 2; ++s)
        for (int i = 0; i < jl; ++i) {
            double v = y[s][i];
            for (int j = 0; j < 3; ++j) v -= z[s][i * 3 + j] * xt[j];
            qdd[3 + jl * s + i] = v;
        }
}

void solve_dense(const Blocks& bl, std::array<double, kNumDof>& qdd) {
    constexpr int jl = kJointsPerLeg;
    Mat m(kNumDof, kNumDof);
    std::vector<double> rhs(kNumDof, 0.0);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j)
            m(i, j) = bl.a_torso[i * 3 + j] + (bl.a_chain[0][i * 3 + j] + bl.a_chain[1][i * 3 + j]);
        rhs[i] = bl.r_torso[i] + (bl.r_torso_chain[0][i] + bl.r_torso_chain[1][i]);
    }
    for (int s = 0; s < 2; ++s) {
        const int o = 3 + jl * s;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < jl; ++j) {
                m(i, o + j) = bl.b[s][i * jl + j];
                m(o + j, i) = bl.b[s][i * jl + j];
            }
        for (int i = 0; i < jl; ++i) {
            for (int j = 0; j < jl; ++j) m(o + i, o + j) = bl.d[s][i * jl + j];
            rhs[o + i] = bl.r_chain[s][i];
        }
    }
    const std::vector<double> x = cholesky_solve(m, rhs);
    for (int i = 0; i < kNumDof; ++i) qdd[i] = x[i];
}

}  // namespace

// --- model -------------------------------------------------------------------

int WalkerModel::num_groups() const {
    int g = -1;
    for (const auto& m : muscles) g = std::max(g, m.group_id);
    return g + 1;
}

void WalkerModel::validate() const {
    if (static_cast<int>(segments.size()) != kNumBodies)
        throw std::invalid_argument("model: expected 9 segments");
    if (static_cast<int>(joints.size()) != kNumJoints)
        throw std::invalid_argument("model: expected 8 joints");
    for (const auto& seg : segments) {
        if (!(seg.mass > 0.0 && seg.length > 0.0 && seg.inertia > 0.0))
            throw std::invalid_argument("model: segment " + seg.name + " has non-positive properties");
    }
    for (const auto& j : joints) {
        if (!std::isfinite(j.limit_lo) || !std::isfinite(j.limit_hi) || !(j.limit_lo < j.limit_hi))
            throw std::invalid_argument("model: joint " + j.name + " has invalid limits");
    }
    for (const auto& m : muscles) {
        bool any_arm = false;
        for (double r : m.moment_arms) any_arm |= (r != 0.0);
        if (!any_arm) throw std::invalid_argument("model: muscle " + m.name + " has no moment arm");
        if (!(m.rest_length_geom > 0.0))
            throw std::invalid_argument("model: muscle " + m.name + " has non-positive rest length");
        if (m.side != 0 && m.side != 1)
            throw std::invalid_argument("model: muscle " + m.name + " has invalid side");
    }
    for (auto [l, r] : symmetry_pairs) {
        if (l < 0 || r < 0 || l >= num_muscles() || r >= num_muscles())
            throw std::invalid_argument("model: symmetry pair index out of range");
        const MuscleDescriptor& a = muscles[l];
        const MuscleDescriptor& b = muscles[r];
        if (a.side != 0 || b.side != 1)
            throw std::invalid_argument("model: symmetry pair sides must be (left, right)");
        if (a.group_id != b.group_id || a.rest_length_geom != b.rest_length_geom ||
            a.moment_arms != b.moment_arms || a.params.f0_ref != b.params.f0_ref ||
            a.params.vmax_ref != b.params.vmax_ref || a.params.l_max != b.params.l_max)
            throw std::invalid_argument("model: bilateral pair constants differ");
    }
}

WalkerModel WalkerModel::default_model() {
    WalkerModel m;
    auto rod = [](const std::string& name, double mass, double length) {
        return SegmentDef{name, mass, length, mass * length * length / 12.0, 0.5};
    };
    m.segments = {rod("torso", 10.0, 0.5)};
    for (int side = 0; side < 2; ++side) {
        const std::string s = side == 0 ? "_l" : "_r";
        m.segments.push_back(rod("thigh" + s, 3.0, 0.45));
        m.segments.push_back(rod("shank" + s, 1.5, 0.45));
        // distal segments carry more than the slender-rod inertia (shoe mass,
        // soft tissue); the extra inertia also keeps the stiff contact modes
        // inside the integrator's stability region at dt = 2 ms
        SegmentDef foot = rod("foot" + s, 0.5, 0.14);
        foot.inertia = 2.5e-3;
        m.segments.push_back(foot);
        SegmentDef toe = rod("toe" + s, 0.15, 0.10);
        toe.inertia = 1.2e-3;
        m.segments.push_back(toe);
    }
    for (int side = 0; side < 2; ++side) {
        const std::string s = side == 0 ? "_l" : "_r";
        m.joints.push_back(JointDef{"hip" + s, -0.8, 1.6, 0.0, 0.0});
        m.joints.push_back(JointDef{"knee" + s, -2.4, 0.02, 0.0, 0.0});
        m.joints.push_back(JointDef{"ankle" + s, -0.9, 0.9, 0.0, 0.0});
        m.joints.push_back(JointDef{"toe" + s, -0.6, 0.6, 5.0, 0.05});
    }
    m.foot_heel_back = 0.05;
    m.standing_height = 0.9;

    struct Proto {
        const char* name;
        double rest, arm_hip, arm_knee, arm_ankle, arm_toe, f0;
    };
    // the dorsiflexor tendon runs over the toe: its length picks up the toe
    // coordinate, giving the grouped length dynamics a fourth principal axis
    const Proto protos[] = {
        {"hip_flex", 0.40, 0.05, 0.0, 0.0, 0.0, 1200.0},
        {"hip_ext", 0.40, -0.05, 0.0, 0.0, 0.0, 1500.0},
        {"knee_ext", 0.35, 0.0, 0.04, 0.0, 0.0, 1200.0},
        {"knee_flex", 0.35, 0.0, -0.04, 0.0, 0.0, 800.0},
        {"ankle_dorsi", 0.30, 0.0, 0.0, 0.03, 0.012, 400.0},
        {"ankle_plant", 0.30, 0.0, 0.0, -0.04, -0.004, 1600.0},
        {"hamstring", 0.50, -0.05, -0.035, 0.0, 0.0, 1200.0},
        {"rectus", 0.50, 0.045, 0.035, 0.0, 0.0, 1000.0},
    };
    for (int side = 0; side < 2; ++side) {
        int group = 0;
        for (const Proto& p : protos) {
            MuscleDescriptor d;
            d.name = std::string(p.name) + (side == 0 ? "_l" : "_r");
            d.rest_length_geom = p.rest;
            d.moment_arms = {p.arm_hip, p.arm_knee, p.arm_ankle, p.arm_toe};
            d.params.f0_ref = p.f0;
            d.params.vmax_ref = 10.0;
            d.group_id = group++;
            d.side = side;
            m.muscles.push_back(d);
        }
    }
    const int half = 8;
    for (int g = 0; g < half; ++g) m.symmetry_pairs.emplace_back(g, g + half);
    m.validate();
    return m;
}

// --- muscle geometry ----------------------------------------------------------

double muscle_length(const std::array<double, kNumDof>& q, const MuscleDescriptor& d) {
    double len = d.rest_length_geom;
    for (int j = 0; j < kJointsPerLeg; ++j) len -= d.moment_arms[j] * q[hip_dof(d.side) + j];
    return std::max(kMinNormalizedLength, len / d.rest_length_geom);
}

double muscle_velocity(const std::array<double, kNumDof>& qdot, const MuscleDescriptor& d) {
    double v = 0.0;
    for (int j = 0; j < kJointsPerLeg; ++j) v += d.moment_arms[j] * qdot[hip_dof(d.side) + j];
    return v / d.rest_length_geom;
}

std::array<double, kNumJoints> joint_torques(const std::vector<double>& force_magnitudes,
                                             const WalkerModel& model) {
    if (force_magnitudes.size() != model.muscles.size())
        throw std::invalid_argument("joint_torques: force count mismatch");
    std::array<double, kNumJoints> tau{};
    for (size_t i = 0; i < model.muscles.size(); ++i) {
        const MuscleDescriptor& d = model.muscles[i];
        const double f = force_magnitudes[i];
        if (f < 0.0) throw std::invalid_argument("joint_torques: forces must be magnitudes");
        for (int j = 0; j < kJointsPerLeg; ++j) tau[kJointsPerLeg * d.side + j] += d.moment_arms[j] * f;
    }
    return tau;
}

// --- dynamics ------------------------------------------------------------------

void forward_dynamics(const WalkerModel& model, const SimState& state,
                      const std::array<double, kNumJoints>& applied_joint_torques,
                      const TerrainProfile& terrain, double dt, std::array<double, kNumDof>& qdd,
                      bool dense_reference) {
    const Kin k = compute_kinematics(model, state);
    const Blocks bl = assemble(model, state, k, applied_joint_torques, terrain, dt);
    if (dense_reference)
        solve_dense(bl, qdd);
    else
        solve_blocks(bl, qdd);
}

void dynamics_step(SimState& state, const std::vector<double>& excitations,
                   const WalkerModel& model, const TerrainProfile& terrain, double dt) {
    if (!(dt > 0.0)) throw std::domain_error("dynamics_step: dt must be positive");
    if (state.done) throw std::domain_error("dynamics_step: state is terminal");
    if (excitations.size() != model.muscles.size())
        throw std::invalid_argument("dynamics_step: excitation count mismatch");
    for (double u : excitations)
        if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("dynamics_step: excitation outside [0, 1]");

    const int n = model.num_muscles();
    std::vector<double> forces(n);
    for (int i = 0; i < n; ++i) {
        state.activations[i] = activation_step(state.activations[i], excitations[i], dt);
        MuscleState ms;
        ms.length = muscle_length(state.q, model.muscles[i]);
        ms.velocity = muscle_velocity(state.qdot, model.muscles[i]);
        ms.activation = state.activations[i];
        forces[i] = -muscle_force(ms, model.muscles[i].params); // magnitude of the tensile pull
    }
    const std::array<double, kNumJoints> tau = joint_torques(forces, model);

    std::array<double, kNumDof> qdd{};
    forward_dynamics(model, state, tau, terrain, dt, qdd);

    for (int i = 0; i < kNumDof; ++i) {
        state.qdot[i] += dt * qdd[i];
        state.q[i] += dt * state.qdot[i];
    }
    state.t += 1;

    bool finite = true;
    for (int i = 0; i < kNumDof; ++i)
        finite = finite && std::isfinite(state.q[i]) && std::isfinite(state.qdot[i]);
    if (!finite) {
        state.fault = true;
        state.done = true;
        return;
    }
    if (state.q[1] < kFallHeightFraction * model.standing_height ||
        std::fabs(state.q[2]) > kFallPitchLimit) {
        state.fell = true;
        state.done = true;
    } else if (state.t >= kHorizonPhysicsSteps) {
        state.done = true;
    }
}

// --- reward / observation / reset ---------------------------------------------

double reward(const SimState& prev, const SimState& next, const std::vector<double>& excitations) {
    const double progress = (next.q[0] - prev.q[0]) / kDtControl;
    const double balance = std::exp(-next.q[2] * next.q[2] / kBalancePitchScale);
    double effort = 0.0;
    for (double u : excitations) effort += u * u;
    if (!excitations.empty()) effort /= static_cast<double>(excitations.size());
    double r = kRewardForward * progress + kRewardBalance * balance - kRewardEffort * effort;
    if (next.fell && !prev.fell) r -= kFallPenalty;
    return r;
}

int observation_size(const WalkerModel& model, int theta_dim) {
    return kNumJoints * 2 + 5 + 1 + static_cast<int>(kLookaheadOffsets.size()) +
           3 * model.num_muscles() + theta_dim;
}

std::vector<double> observe(const SimState& state, const std::vector<double>& theta_normalized,
                            const WalkerModel& model, const TerrainProfile& terrain) {
    std::vector<double> obs;
    obs.reserve(observation_size(model, static_cast<int>(theta_normalized.size())));
    for (int j = 0; j < kNumJoints; ++j) obs.push_back(state.q[3 + j]);
    for (int j = 0; j < kNumJoints; ++j) obs.push_back(state.qdot[3 + j]);
    obs.push_back(state.q[1]);
    obs.push_back(state.q[2]);
    obs.push_back(state.qdot[0]);
    obs.push_back(state.qdot[1]);
    obs.push_back(state.qdot[2]);
    const double ground = terrain.height(state.q[0]);
    obs.push_back(state.q[1] - ground);
    for (double d : kLookaheadOffsets) obs.push_back(terrain.height(state.q[0] + d) - ground);
    for (int i = 0; i < model.num_muscles(); ++i) {
        obs.push_back(muscle_length(state.q, model.muscles[i]));
        obs.push_back(muscle_velocity(state.qdot, model.muscles[i]));
        obs.push_back(state.activations[i]);
    }
    obs.insert(obs.end(), theta_normalized.begin(), theta_normalized.end());
    return obs;
}

SimState reset(const WalkerModel& model, const TerrainProfile& terrain, std::uint64_t seed,
               double perturbation) {
    (void)terrain;
    SimState s;
    double total_mass = 0.0;
    for (const auto& seg : model.segments) total_mass += seg.mass;
    // pre-settle the vertical contact penetration (4 endpoints share the weight)
    const double static_pen = total_mass * kGravity / (4.0 * kContactStiffness);
    s.q[1] = model.standing_height - static_pen;
    Rng rng(derive_seed(seed, 0x5e5e7u));
    s.q[2] = rng.uniform(-perturbation, perturbation);
    for (int j = 0; j < kNumJoints; ++j) s.q[3 + j] = rng.uniform(-perturbation, perturbation);
    s.activations.assign(model.muscles.size(), 0.0);
    return s;
}

std::vector<int> observation_mirror_permutation(const WalkerModel& model, int theta_dim) {
    const int n = observation_size(model, theta_dim);
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int j = 0; j < kJointsPerLeg; ++j) {
        std::swap(p[j], p[j + kJointsPerLeg]); // joint angles
        std::swap(p[kNumJoints + j], p[kNumJoints + j + kJointsPerLeg]); // joint velocities
    }
    const int muscle_base = kNumJoints * 2 + 5 + 1 + static_cast<int>(kLookaheadOffsets.size());
    const int half = model.num_muscles() / 2;
    for (int m = 0; m < half; ++m)
        for (int c = 0; c < 3; ++c)
            std::swap(p[muscle_base + 3 * m + c], p[muscle_base + 3 * (m + half) + c]);
    // group-level morphology slice is symmetric: untouched
    return p;
}

SimState mirror_state(const SimState& state) {
    SimState m = state;
    for (int j = 0; j < kJointsPerLeg; ++j) {
        std::swap(m.q[3 + j], m.q[3 + kJointsPerLeg + j]);
        std::swap(m.qdot[3 + j], m.qdot[3 + kJointsPerLeg + j]);
    }
    const size_t half = state.activations.size() / 2;
    for (size_t i = 0; i < half; ++i) std::swap(m.activations[i], m.activations[i + half]);
    return m;
}

std::uint64_t morphology_hash(const WalkerModel& model) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffu;
            h *= 0x00000100000001b3ull;
        }
    };
    for (const auto& m : model.muscles) {
        mix(m.params.sigma);
        mix(m.params.nu);
        mix(m.params.kappa);
    }
    return h;
}

WalkerDiagnostics diagnostics(const WalkerModel& model, const SimState& state) {
    const Kin k = compute_kinematics(model, state);
    WalkerDiagnostics d;
    for (int s = 0; s < 2; ++s) {
        d.heel[s] = k.heel[s];
        d.ball[s] = k.ball[s];
        d.toe_tip[s] = k.toe_tip[s];
    }
    double mass = 0.0;
    Vec2 weighted{};
    for (int b = 0; b < kNumBodies; ++b) {
        const SegmentDef& seg = model.segments[b];
        const BodyKin& bk = k.body[b];
        mass += seg.mass;
        weighted = weighted + bk.com * seg.mass;
        d.kinetic_energy += 0.5 * seg.mass * bk.com_vel.dot(bk.com_vel) +
                            0.5 * seg.inertia * bk.omega * bk.omega;
        d.potential_energy += seg.mass * kGravity * bk.com.z;
        d.com_momentum_x += seg.mass * bk.com_vel.x;
    }
    for (int j = 0; j < kNumJoints; ++j) {
        const JointDef& jd = model.joints[j];
        if (jd.passive_stiffness != 0.0)
            d.potential_energy += 0.5 * jd.passive_stiffness * state.q[3 + j] * state.q[3 + j];
    }
    d.com = weighted * (1.0 / mass);
    return d;
}

// --- environment ----------------------------------------------------------------

WalkerEnv::WalkerEnv(WalkerModel model, TerrainProfile terrain)
    : model_(std::move(model)), terrain_(std::move(terrain)) {
    model_.validate();
    state_ = reset(model_, terrain_, 0, 0.0);
    theta_norm_.assign(3 * model_.num_groups(), 0.0);
}

SimState& WalkerEnv::reset_env(std::uint64_t seed, double perturbation) {
    state_ = reset(model_, terrain_, seed, perturbation);
    control_steps_ = 0;
    return state_;
}

void WalkerEnv::set_theta_observation(std::vector<double> theta_normalized) {
    theta_norm_ = std::move(theta_normalized);
}

std::vector<double> WalkerEnv::observation() const {
    return observe(state_, theta_norm_, model_, terrain_);
}

WalkerEnv::StepResult WalkerEnv::step(const std::vector<double>& excitations) {
    if (state_.done) throw std::domain_error("WalkerEnv::step: episode already terminated");
    const SimState prev = state_;
    for (int i = 0; i < kSubstepsPerControl && !state_.done; ++i)
        dynamics_step(state_, excitations, model_, terrain_, kDtPhysics);
    ++control_steps_;
    StepResult r;
    r.reward = reward(prev, state_, excitations);
    r.done = state_.done;
    r.fell = state_.fell;
    r.fault = state_.fault;
    return r;
}

// --- model JSON -------------------------------------------------------------------

std::string WalkerModel::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["standing_height"] = standing_height;
    j["foot_heel_back"] = foot_heel_back;
    for (const auto& s : segments)
        j["segments"].push_back({{"name", s.name},
                                 {"mass", s.mass},
                                 {"length", s.length},
                                 {"inertia", s.inertia},
                                 {"com_frac", s.com_frac}});
    for (const auto& jt : joints)
        j["joints"].push_back({{"name", jt.name},
                               {"limit_lo", jt.limit_lo},
                               {"limit_hi", jt.limit_hi},
                               {"passive_stiffness", jt.passive_stiffness},
                               {"passive_damping", jt.passive_damping}});
    for (const auto& m : muscles)
        j["muscles"].push_back({{"name", m.name},
                                {"rest_length", m.rest_length_geom},
                                {"moment_arms", m.moment_arms},
                                {"f0_ref", m.params.f0_ref},
                                {"vmax_ref", m.params.vmax_ref},
                                {"l_max", m.params.l_max},
                                {"group", m.group_id},
                                {"side", m.side}});
    for (auto [l, r] : symmetry_pairs) j["symmetry_pairs"].push_back({l, r});
    return j.dump(2);
}

WalkerModel WalkerModel::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("model: JSON parse error: ") + e.what());
    }
    WalkerModel m;
    try {
        if (j.at("version").get<int>() != 1) throw std::invalid_argument("model: unsupported version");
        m.standing_height = j.at("standing_height").get<double>();
        m.foot_heel_back = j.at("foot_heel_back").get<double>();
        for (const auto& s : j.at("segments"))
            m.segments.push_back({s.at("name").get<std::string>(), s.at("mass").get<double>(),
                                  s.at("length").get<double>(), s.at("inertia").get<double>(),
                                  s.at("com_frac").get<double>()});
        for (const auto& jt : j.at("joints"))
            m.joints.push_back({jt.at("name").get<std::string>(), jt.at("limit_lo").get<double>(),
                                jt.at("limit_hi").get<double>(),
                                jt.at("passive_stiffness").get<double>(),
                                jt.at("passive_damping").get<double>()});
        for (const auto& mu : j.at("muscles")) {
            MuscleDescriptor d;
            d.name = mu.at("name").get<std::string>();
            d.rest_length_geom = mu.at("rest_length").get<double>();
            d.moment_arms = mu.at("moment_arms").get<std::array<double, kJointsPerLeg>>();
            d.params.f0_ref = mu.at("f0_ref").get<double>();
            d.params.vmax_ref = mu.at("vmax_ref").get<double>();
            d.params.l_max = mu.at("l_max").get<double>();
            d.group_id = mu.at("group").get<int>();
            d.side = mu.at("side").get<int>();
            m.muscles.push_back(d);
        }
        for (const auto& p : j.at("symmetry_pairs"))
            m.symmetry_pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("model: missing or malformed field: ") + e.what());
    }
    m.validate();
    return m;
}

}  // namespace sde
