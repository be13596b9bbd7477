#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "sde/rng.hpp"
#include "sde/spectral.hpp"
#include "sde/walker.hpp"

using namespace sde;

namespace {
bool states_equal(const SimState& a, const SimState& b) {
    return a.q == b.q && a.qdot == b.qdot && a.activations == b.activations && a.t == b.t &&
           a.done == b.done;
}
}  // namespace

TEST_CASE("terrain heights") {
    SUBCASE("walk is flat") {
        const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 42);
        for (double x : {-3.0, 0.0, 1.7, 12.0, 40.0}) CHECK(terrain_height(x, t) == 0.0);
    }
    SUBCASE("stairs rise in fixed steps") {
        const TerrainProfile t = TerrainProfile::make(TerrainKind::stair, 0);
        CHECK(terrain_height(0.9, t) == doctest::Approx(0.2).epsilon(1e-12));
        CHECK(terrain_height(0.1, t) == 0.0);
        CHECK(terrain_height(-2.0, t) == 0.0);
        double prev = -1.0;
        for (int i = 0; i <= 400; ++i) {
            const double h = terrain_height(0.1 * i - 5.0, t);
            CHECK(h >= prev);
            prev = h;
        }
    }
    SUBCASE("rough is deterministic, bounded, and slope-limited") {
        const TerrainProfile a = TerrainProfile::make(TerrainKind::rough, 7);
        const TerrainProfile b = TerrainProfile::make(TerrainKind::rough, 7);
        const TerrainProfile c = TerrainProfile::make(TerrainKind::rough, 8);
        bool differs = false;
        for (int i = 0; i <= 3000; ++i) {
            const double x = -2.0 + 0.012 * i;
            CHECK(terrain_height(x, a) == terrain_height(x, b));
            differs |= terrain_height(x, a) != terrain_height(x, c);
            CHECK(std::fabs(terrain_height(x, a)) <= 0.05 + 1e-12);
        }
        CHECK(differs);
        for (int i = 1; i <= 3000; ++i) {
            const double x = -2.0 + 0.012 * i;
            const double slope = (terrain_height(x, a) - terrain_height(x - 0.012, a)) / 0.012;
            CHECK(std::fabs(slope) <= 0.6);
        }
    }
    SUBCASE("hilly is bounded with bounded slope and flat start") {
        const TerrainProfile t = TerrainProfile::make(TerrainKind::hilly, 3);
        CHECK(terrain_height(0.0, t) == 0.0);
        for (int i = 1; i <= 3000; ++i) {
            const double x = -1.0 + 0.012 * i;
            CHECK(std::fabs(terrain_height(x, t)) <= 0.25);
            const double slope = (terrain_height(x, t) - terrain_height(x - 0.012, t)) / 0.012;
            CHECK(std::fabs(slope) <= 0.7);
        }
    }
}

TEST_CASE("muscle geometry") {
    const WalkerModel m = WalkerModel::default_model();

    SUBCASE("rest configuration gives unit length") {
        std::array<double, kNumDof> q{};
        for (const auto& d : m.muscles) CHECK(muscle_length(q, d) == 1.0);
    }
    SUBCASE("single-joint excursion") {
        MuscleDescriptor d;
        d.rest_length_geom = 0.5;
        d.moment_arms = {0.05, 0.0, 0.0, 0.0};
        d.side = 0;
        std::array<double, kNumDof> q{};
        q[3] = 1.0;
        CHECK(muscle_length(q, d) == doctest::Approx(0.9).epsilon(1e-14));
    }
    SUBCASE("mirrored configurations give equal lengths on bilateral pairs") {
        std::array<double, kNumDof> q{};
        q[3] = 0.3;
        q[4] = -0.7;
        q[5] = 0.2;
        q[6] = 0.1;
        std::array<double, kNumDof> qm{};
        for (int j = 0; j < kJointsPerLeg; ++j) qm[3 + kJointsPerLeg + j] = q[3 + j];
        for (auto [l, r] : m.symmetry_pairs)
            CHECK(muscle_length(q, m.muscles[l]) == muscle_length(qm, m.muscles[r]));
    }
    SUBCASE("length clamps at the floor") {
        MuscleDescriptor d;
        d.rest_length_geom = 0.3;
        d.moment_arms = {0.3, 0.0, 0.0, 0.0};
        std::array<double, kNumDof> q{};
        q[3] = 1.0;
        CHECK(muscle_length(q, d) == kMinNormalizedLength);
    }
    SUBCASE("shortening velocity is positive when the joint tightens the path") {
        MuscleDescriptor d;
        d.rest_length_geom = 0.5;
        d.moment_arms = {0.05, 0.0, 0.0, 0.0};
        std::array<double, kNumDof> qd{};
        qd[3] = 2.0;
        CHECK(muscle_velocity(qd, d) == doctest::Approx(0.2).epsilon(1e-14));
    }
}

TEST_CASE("joint torque mapping") {
    const WalkerModel m = WalkerModel::default_model();
    std::vector<double> f(m.num_muscles(), 0.0);

    SUBCASE("zero forces give zero torques") {
        for (double tau : joint_torques(f, m)) CHECK(tau == 0.0);
    }
    SUBCASE("single muscle maps through its moment arm") {
        f[0] = 100.0; // left hip flexor, arm +0.05
        const auto tau = joint_torques(f, m);
        CHECK(tau[0] == doctest::Approx(5.0).epsilon(1e-14));
        for (int j = 1; j < kNumJoints; ++j) CHECK(tau[j] == 0.0);
    }
    SUBCASE("antagonists with matched lever arms cancel") {
        f[0] = 200.0; // hip flexor +0.05
        f[1] = 200.0; // hip extensor -0.05
        CHECK(joint_torques(f, m)[0] == 0.0);
    }
    SUBCASE("magnitude contract") {
        f[0] = -1.0;
        CHECK_THROWS_AS(joint_torques(f, m), std::invalid_argument);
        CHECK_THROWS_AS(joint_torques(std::vector<double>(3, 0.0), m), std::invalid_argument);
    }
}

TEST_CASE("dynamics guards") {
    const WalkerModel m = WalkerModel::default_model();
    const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 0);
    SimState s = reset(m, t, 0, 0.0);
    std::vector<double> u(m.num_muscles(), 0.0);

    CHECK_THROWS_AS(dynamics_step(s, u, m, t, 0.0), std::domain_error);
    std::vector<double> bad = u;
    bad[0] = 1.5;
    CHECK_THROWS_AS(dynamics_step(s, bad, m, t, kDtPhysics), std::domain_error);
    s.done = true;
    CHECK_THROWS_AS(dynamics_step(s, u, m, t, kDtPhysics), std::domain_error);
}

TEST_CASE("dynamics determinism is bit-exact") {
    const WalkerModel m = WalkerModel::default_model();
    const TerrainProfile t = TerrainProfile::make(TerrainKind::rough, 11);
    Rng rng(5);
    std::vector<std::vector<double>> actions;
    for (int i = 0; i < 50; ++i) {
        std::vector<double> u(m.num_muscles());
        for (double& x : u) x = rng.uniform();
        actions.push_back(u);
    }
    auto run = [&]() {
        WalkerEnv env(m, t);
        env.reset_env(3);
        for (const auto& u : actions)
            if (!env.state().done) env.step(u);
        return env.state();
    };
    const SimState a = run();
    const SimState b = run();
    CHECK(states_equal(a, b));
}

TEST_CASE("block solver matches the dense reference") {
    const WalkerModel m = WalkerModel::default_model();
    const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 0);
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        SimState s = reset(m, t, trial, 0.1);
        for (int i = 0; i < kNumDof; ++i) s.qdot[i] = rng.uniform(-2.0, 2.0);
        std::array<double, kNumJoints> tau;
        for (double& v : tau) v = rng.uniform(-20.0, 20.0);
        std::array<double, kNumDof> qb{}, qd{};
        forward_dynamics(m, s, tau, t, kDtPhysics, qb, false);
        forward_dynamics(m, s, tau, t, kDtPhysics, qd, true);
        for (int i = 0; i < kNumDof; ++i)
            CHECK(qb[i] == doctest::Approx(qd[i]).epsilon(1e-9));
    }
}

TEST_CASE("free fall: uniform gravity leaves joints untouched and drains no energy") {
    const WalkerModel m = WalkerModel::default_model();
    const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 0);
    SimState s = reset(m, t, 0, 0.0);
    s.q[1] = 6.0;
    std::vector<double> u(m.num_muscles(), 0.0);
    double e_prev = 0.0;
    for (int i = 0; i < 200; ++i) {
        const WalkerDiagnostics d = diagnostics(m, s);
        const double e = d.kinetic_energy + d.potential_energy;
        if (i > 0) CHECK(std::fabs(e - e_prev) <= 1e-2);
        e_prev = e;
        dynamics_step(s, u, m, t, kDtPhysics);
        for (int j = 3; j < kNumDof; ++j) CHECK(std::fabs(s.qdot[j]) <= 1e-12);
    }
}

TEST_CASE("flight with swinging limbs conserves horizontal momentum") {
    const WalkerModel m = WalkerModel::default_model();
    const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 0);
    SimState s = reset(m, t, 0, 0.0);
    s.q[1] = 6.0;
    s.qdot = {0.3, 0.5, 0.4, 1.0, -2.0, 1.5, 0.5, -1.0, 2.0, -1.5, 0.8};
    std::vector<double> u(m.num_muscles(), 0.0);
    const double p0 = diagnostics(m, s).com_momentum_x;
    for (int i = 0; i < 300 && !s.done; ++i) {
        dynamics_step(s, u, m, t, kDtPhysics);
        CHECK(std::fabs(diagnostics(m, s).com_momentum_x - p0) <= 5e-3);
    }
}

TEST_CASE("standing settles: steady torso height and bounded penetration") {
    const WalkerModel m = WalkerModel::default_model();
    const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 0);
    std::vector<double> u(m.num_muscles(), 0.0);
    SimState s = reset(m, t, 0, 0.0);
    for (int i = 0; i < 250; ++i) dynamics_step(s, u, m, t, kDtPhysics);

    double mass = 0.0;
    for (const auto& seg : m.segments) mass += seg.mass;
    const double pen_bound = mass * kGravity / kContactStiffness;

    double zmin = s.q[1], zmax = zmin;
    for (int i = 0; i < 100; ++i) {
        dynamics_step(s, u, m, t, kDtPhysics);
        zmin = std::min(zmin, s.q[1]);
        zmax = std::max(zmax, s.q[1]);
        const WalkerDiagnostics d = diagnostics(m, s);
        for (int side = 0; side < 2; ++side) {
            CHECK(-d.heel[side].z <= pen_bound);
            CHECK(-d.ball[side].z <= pen_bound);
        }
    }
    CHECK(zmax - zmin <= 1e-3);
    CHECK_FALSE(s.done);
}

TEST_CASE("falls terminate on the step they happen") {
    const WalkerModel m = WalkerModel::default_model();
    const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 0);
    std::vector<double> u(m.num_muscles(), 0.0);

    SUBCASE("low torso") {
        SimState s = reset(m, t, 0, 0.0);
        s.q[1] = 0.40; // below the threshold; knees tucked so the feet stay airborne
        s.q[4] = -2.4;
        s.q[8] = -2.4;
        dynamics_step(s, u, m, t, kDtPhysics);
        CHECK(s.done);
        CHECK(s.fell);
    }
    SUBCASE("excess pitch") {
        SimState s = reset(m, t, 0, 0.0);
        s.q[2] = 1.2;
        dynamics_step(s, u, m, t, kDtPhysics);
        CHECK(s.done);
        CHECK(s.fell);
    }
    SUBCASE("healthy state does not terminate") {
        SimState s = reset(m, t, 0, 0.0);
        dynamics_step(s, u, m, t, kDtPhysics);
        CHECK_FALSE(s.done);
    }
    SUBCASE("horizon expiry terminates without a fall") {
        SimState s = reset(m, t, 0, 0.0);
        s.t = kHorizonPhysicsSteps - 1;
        dynamics_step(s, u, m, t, kDtPhysics);
        CHECK(s.done);
        CHECK_FALSE(s.fell);
    }
}

TEST_CASE("non-finite coordinates raise the fault flag") {
    const WalkerModel m = WalkerModel::default_model();
    const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 0);
    SimState s = reset(m, t, 0, 0.0);
    s.qdot[0] = std::numeric_limits<double>::infinity();
    std::vector<double> u(m.num_muscles(), 0.0);
    dynamics_step(s, u, m, t, kDtPhysics);
    CHECK(s.fault);
    CHECK(s.done);
}

TEST_CASE("mirrored trajectories are mirror images") {
    const WalkerModel m = WalkerModel::default_model();
    const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 0);
    WalkerEnv a(m, t), b(m, t);
    a.reset_env(3, kResetPerturbation);
    b.set_state(mirror_state(a.state()));
    Rng rng(7);
    const int half = m.num_muscles() / 2;
    double max_err = 0.0;
    for (int i = 0; i < 200 && !a.state().done && !b.state().done; ++i) {
        std::vector<double> u(m.num_muscles()), um(m.num_muscles());
        for (double& x : u) x = rng.uniform();
        for (int j = 0; j < half; ++j) {
            um[j] = u[j + half];
            um[j + half] = u[j];
        }
        a.step(u);
        b.step(um);
        const SimState bm = mirror_state(b.state());
        for (int j = 0; j < kNumDof; ++j) {
            max_err = std::max(max_err, std::fabs(bm.q[j] - a.state().q[j]));
            max_err = std::max(max_err, std::fabs(bm.qdot[j] - a.state().qdot[j]));
        }
    }
    CHECK(max_err <= 1e-9);
}

TEST_CASE("reward terms") {
    const WalkerModel m = WalkerModel::default_model();
    const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 0);
    SimState prev = reset(m, t, 0, 0.0);
    prev.q[2] = 0.0;
    std::vector<double> zero(m.num_muscles(), 0.0);

    SUBCASE("stationary upright pays only the balance term") {
        CHECK(reward(prev, prev, zero) == doctest::Approx(kRewardBalance).epsilon(1e-12));
    }
    SUBCASE("forward displacement at control rate") {
        SimState next = prev;
        next.q[0] += 0.02;
        const double r = reward(prev, next, zero);
        CHECK(r == doctest::Approx(1.0 + kRewardBalance).epsilon(1e-12));
    }
    SUBCASE("effort penalty") {
        std::vector<double> u(m.num_muscles(), 0.5);
        CHECK(reward(prev, prev, u) ==
              doctest::Approx(kRewardBalance - kRewardEffort * 0.25).epsilon(1e-12));
    }
    SUBCASE("fall penalty applies exactly once") {
        SimState next = prev;
        next.fell = true;
        next.done = true;
        CHECK(reward(prev, next, zero) ==
              doctest::Approx(kRewardBalance - kFallPenalty).epsilon(1e-12));
        CHECK(reward(next, next, zero) == doctest::Approx(kRewardBalance).epsilon(1e-12));
    }
}

TEST_CASE("observation layout") {
    const WalkerModel m = WalkerModel::default_model();
    const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 0);
    const MorphologyVector bar = default_morphology(m.num_groups());
    const std::vector<double> theta_norm = normalize_theta(bar);

    SUBCASE("default morphology occupies the tail with exact zeros") {
        const SimState s = reset(m, t, 0, 0.0);
        const std::vector<double> obs = observe(s, theta_norm, m, t);
        REQUIRE(static_cast<int>(obs.size()) == observation_size(m, 3 * m.num_groups()));
        for (size_t i = obs.size() - theta_norm.size(); i < obs.size(); ++i) CHECK(obs[i] == 0.0);
    }
    SUBCASE("mirrored states permute the observation") {
        SimState s = reset(m, t, 9, 0.1);
        s.qdot[3] = 1.0;
        s.qdot[8] = -0.4;
        s.activations[2] = 0.7;
        s.activations[13] = 0.3;
        const std::vector<double> obs = observe(s, theta_norm, m, t);
        const std::vector<double> mobs = observe(mirror_state(s), theta_norm, m, t);
        const std::vector<int> p = observation_mirror_permutation(m, 3 * m.num_groups());
        REQUIRE(p.size() == obs.size());
        for (size_t i = 0; i < obs.size(); ++i) CHECK(mobs[i] == obs[p[i]]);
    }
    SUBCASE("length stays constant across an episode") {
        WalkerEnv env(m, t);
        env.reset_env(4);
        const size_t n = env.observation().size();
        std::vector<double> u(m.num_muscles(), 0.3);
        for (int i = 0; i < 20 && !env.state().done; ++i) {
            env.step(u);
            CHECK(env.observation().size() == n);
        }
    }
    SUBCASE("look-ahead sees upcoming terrain") {
        const TerrainProfile stair = TerrainProfile::make(TerrainKind::stair, 0);
        SimState s = reset(m, stair, 0, 0.0);
        const std::vector<double> obs = observe(s, theta_norm, m, stair);
        const int base = kNumJoints * 2 + 5 + 1;
        CHECK(obs[base + 5] == doctest::Approx(terrain_height(s.q[0] + 1.2, stair)).epsilon(1e-12));
    }
}

TEST_CASE("reset contract") {
    const WalkerModel m = WalkerModel::default_model();
    const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 0);
    const SimState a = reset(m, t, 123);
    const SimState b = reset(m, t, 123);
    CHECK(states_equal(a, b));
    const SimState c = reset(m, t, 124);
    CHECK_FALSE(states_equal(a, c));

    const SimState nominal = reset(m, t, 5, 0.0);
    for (int j = 3; j < kNumDof; ++j) CHECK(nominal.q[j] == 0.0);
    CHECK(nominal.q[2] == 0.0);
    CHECK_FALSE(nominal.done);
    for (double act : nominal.activations) CHECK(act == 0.0);
}

TEST_CASE("model JSON round-trips behaviorally") {
    const WalkerModel m = WalkerModel::default_model();
    const WalkerModel m2 = WalkerModel::from_json(m.to_json());
    const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 0);

    WalkerEnv a(m, t), b(m2, t);
    a.reset_env(3);
    b.reset_env(3);
    Rng rng(8);
    for (int i = 0; i < 30 && !a.state().done; ++i) {
        std::vector<double> u(m.num_muscles());
        for (double& x : u) x = rng.uniform();
        a.step(u);
        b.step(u);
    }
    CHECK(states_equal(a.state(), b.state()));

    CHECK_THROWS_AS(WalkerModel::from_json("{"), std::invalid_argument);
    CHECK_THROWS_AS(WalkerModel::from_json("{\"version\": 1}"), std::invalid_argument);
}

TEST_CASE("environment guards") {
    const WalkerModel m = WalkerModel::default_model();
    const TerrainProfile t = TerrainProfile::make(TerrainKind::walk, 0);
    WalkerEnv env(m, t);
    env.reset_env(1, 0.0);
    SimState s = env.state();
    s.done = true;
    env.set_state(s);
    CHECK_THROWS_AS(env.step(std::vector<double>(m.num_muscles(), 0.0)), std::domain_error);
}

TEST_CASE("morphology hash tracks the applied triads") {
    WalkerModel m = WalkerModel::default_model();
    const std::uint64_t h0 = morphology_hash(m);
    CHECK(morphology_hash(m) == h0);
    m.muscles[0].params.sigma = 1.2;
    CHECK(morphology_hash(m) != h0);
}
