#include "pih/hand.hpp"

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pih/rng.hpp"

using namespace pih;
using namespace pih::hand;

namespace {

ContactSet xy_contacts() {
    ContactSet cs;
    cs.p = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0)};
    return cs;
}

std::array<JointPair, 3> mid_grasp() {
    return {JointPair(0.6, 0.8), JointPair(0.6, 0.8), JointPair(0.6, 0.8)};
}

}  // namespace

TEST_CASE("contact triangle distances") {
    ContactTriangle t = contact_triangle(xy_contacts());
    CHECK(t.t12 == doctest::Approx(1.0));
    CHECK(t.t23 == doctest::Approx(std::sqrt(2.0)));
    CHECK(t.t31 == doctest::Approx(1.0));

    ContactSet eq;
    const double s = 17.0;
    eq.p = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(s, 0, 0),
            Eigen::Vector3d(s / 2, s * std::sqrt(3) / 2, 0)};
    ContactTriangle te = contact_triangle(eq);
    CHECK(te.t12 == doctest::Approx(s));
    CHECK(te.t23 == doctest::Approx(s));
    CHECK(te.t31 == doctest::Approx(s));

    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        ContactSet cs;
        for (auto& p : cs.p) {
            p = Eigen::Vector3d(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50));
        }
        try {
            ContactTriangle t2 = contact_triangle(cs);
            CHECK(t2.t12 == doctest::Approx((cs.p[0] - cs.p[1]).norm()).epsilon(1e-12));
            CHECK(t2.t23 == doctest::Approx((cs.p[1] - cs.p[2]).norm()).epsilon(1e-12));
            CHECK(t2.t31 == doctest::Approx((cs.p[2] - cs.p[0]).norm()).epsilon(1e-12));
        } catch (const CollinearContacts&) {
        }
    }

    ContactSet col;
    col.p = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 1, 1), Eigen::Vector3d(2, 2, 2)};
    CHECK_THROWS_AS(contact_triangle(col), CollinearContacts);
}

TEST_CASE("object frame convention") {
    Pose x = object_frame(xy_contacts());
    CHECK((x.translation() - Eigen::Vector3d(1.0 / 3, 1.0 / 3, 0)).norm() < 1e-12);
    CHECK(x.rotation().isApprox(Eigen::Matrix3d::Identity(), 1e-12));

    ContactSet swapped = xy_contacts();
    std::swap(swapped.p[1], swapped.p[2]);
    Pose xs = object_frame(swapped);
    CHECK((xs.rotation().col(2) + Eigen::Vector3d::UnitZ()).norm() < 1e-12);
}

TEST_CASE("object frame rotates with the contacts") {
    Rng rng(8);
    for (int i = 0; i < 50; ++i) {
        ContactSet cs;
        for (auto& p : cs.p) {
            p = Eigen::Vector3d(rng.uniform(-40, 40), rng.uniform(-40, 40), rng.uniform(-40, 40));
        }
        Twist xi;
        xi.omega = Eigen::Vector3d(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
        xi.v = Eigen::Vector3d(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20));
        Pose g = exp(xi);
        ContactSet rotated;
        for (int k = 0; k < 3; ++k) rotated.p[k] = g * cs.p[k];
        try {
            Pose a = object_frame(cs);
            Pose b = object_frame(rotated);
            Pose expected = g * a;
            CHECK((b.translation() - expected.translation()).norm() < 1e-9);
            CHECK(b.rotation().isApprox(expected.rotation(), 1e-9));
        } catch (const CollinearContacts&) {
        }
    }
}

TEST_CASE("finger forward kinematics") {
    FingerParams f;
    CHECK((finger_fk2(JointPair(0, 0), f) - Eigen::Vector2d(f.l_p + f.l_d, 0)).norm() < 1e-12);
    CHECK((finger_fk2(JointPair(M_PI / 2, 0), f) - Eigen::Vector2d(0, f.l_p + f.l_d)).norm() <
          1e-12);
    CHECK_THROWS_AS(finger_fk2(JointPair(-0.1, 0), f), JointLimit);
    CHECK_THROWS_AS(finger_fk2(JointPair(0, 2.0), f), JointLimit);

    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        JointPair q(rng.uniform(0, M_PI / 2), rng.uniform(0, M_PI / 2));
        Eigen::Rotation2Dd r1(q[0]), r12(q[0] + q[1]);
        Eigen::Vector2d oracle = r1 * Eigen::Vector2d(f.l_p, 0) + r12 * Eigen::Vector2d(f.l_d, 0);
        CHECK((finger_fk2(q, f) - oracle).norm() < 1e-12);
    }
}

TEST_CASE("finger energy and its gradient") {
    FingerParams f;
    f.k_p = 1.0;
    f.k_d = 1.0;
    CHECK(finger_energy(JointPair(0, 0), f) == doctest::Approx(0.0));
    CHECK(finger_energy(JointPair(1, 1), f) == doctest::Approx(1.0));

    f.k_d = 1.5;
    Rng rng(6);
    for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd q(2);
        q << rng.uniform(0, 1.5), rng.uniform(0, 1.5);
        auto energy = [&f](const Eigen::VectorXd& v) {
            return finger_energy(JointPair(v[0], v[1]), f);
        };
        Eigen::Vector2d g = finger_energy_gradient(JointPair(q[0], q[1]), f);
        for (int k = 0; k < 2; ++k) {
            const double fd = oracles::finite_difference(energy, q, k);
            CHECK(g[k] == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("tendon residual") {
    FingerParams f;
    f.r_a = f.r_p = f.r_d = 1.0;
    CHECK(tendon_residual(JointPair(1, 0), 1.0, f) == doctest::Approx(0.0));
    CHECK(tendon_residual(JointPair(1, 1), 2.0, f) == doctest::Approx(0.0));
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        FingerParams g;
        g.r_a = rng.uniform(1, 10);
        g.r_p = rng.uniform(1, 10);
        g.r_d = rng.uniform(1, 10);
        JointPair qd(rng.uniform(-1, 1), rng.uniform(-1, 1));
        const double ad = rng.uniform(-1, 1);
        CHECK(tendon_residual(qd, ad, g) ==
              doctest::Approx(g.r_a * ad - g.r_p * qd[0] - g.r_d * qd[1]).epsilon(1e-15));
    }
}

TEST_CASE("single-finger equilibrium matches the closed-form KKT oracle") {
    FingerParams f;
    f.k_p = f.k_d = 1.0;
    f.r_a = f.r_p = f.r_d = 1.0;
    JointPair q = finger_equilibrium(f, JointPair(0, 0), 0.0, 1.0);
    CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(q[1] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(finger_energy(q, f) == doctest::Approx(0.25).epsilon(1e-6));

    FingerParams stiff = f;
    stiff.k_d = 1e6;
    JointPair qs = finger_equilibrium(stiff, JointPair(0, 0), 0.0, 1.0);
    CHECK(qs[1] == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(qs[0] == doctest::Approx(1.0).epsilon(1e-3));

    Rng rng(77);
    for (int i = 0; i < 1000; ++i) {
        FingerParams g;
        g.k_p = rng.uniform(0.2, 5);
        g.k_d = rng.uniform(0.2, 5);
        g.r_a = rng.uniform(2, 8);
        g.r_p = rng.uniform(2, 8);
        g.r_d = rng.uniform(2, 8);
        const double da = rng.uniform(0.0, 0.6);
        auto kkt = oracles::single_finger_kkt(g.k_p, g.k_d, g.r_p, g.r_d, g.r_a, da);
        if (kkt.qp > M_PI / 2 || kkt.qd > M_PI / 2) continue;
        JointPair qq = finger_equilibrium(g, JointPair(0, 0), 0.0, da);
        CHECK(qq[0] == doctest::Approx(kkt.qp).epsilon(1e-6));
        CHECK(qq[1] == doctest::Approx(kkt.qd).epsilon(1e-6));
    }
}

TEST_CASE("equilibrium with a = a0 is a fixed point") {
    HandParams hp;
    Hand hand(hp, mid_grasp(), Eigen::Vector3d::Zero());
    StepResult r = hand.step(Eigen::Vector3d::Zero(), 1.0 / 30.0);
    CHECK(r.x_dot.norm() < 1e-6);
    for (int i = 0; i < 3; ++i) {
        CHECK(hand.config().q[i][0] == doctest::Approx(0.6).epsilon(1e-6));
        CHECK(hand.config().q[i][1] == doctest::Approx(0.8).epsilon(1e-6));
    }
}

TEST_CASE("triangle preserved across steps") {
    HandParams hp;
    Hand hand(hp, mid_grasp(), Eigen::Vector3d::Zero());
    ContactTriangle t0 = hand.triangle();
    Rng rng(3);
    for (int i = 0; i < 60; ++i) {
        Eigen::Vector3d a_dot(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                              rng.uniform(-0.5, 0.5));
        hand.step(a_dot, 1.0 / 30.0);
        ContactTriangle t = contact_triangle(hand.contacts());
        CHECK(std::abs(t.t12 - t0.t12) <= 1e-3);
        CHECK(std::abs(t.t23 - t0.t23) <= 1e-3);
        CHECK(std::abs(t.t31 - t0.t31) <= 1e-3);
    }
}

TEST_CASE("symmetric actuation on a symmetric grasp translates without rotation") {
    HandParams hp;
    Hand hand(hp, mid_grasp(), Eigen::Vector3d::Zero());
    const Pose x0 = hand.object_pose();
    Eigen::Matrix<double, 6, 1> acc = Eigen::Matrix<double, 6, 1>::Zero();
    for (int i = 0; i < 20; ++i) {
        StepResult r = hand.step(Eigen::Vector3d::Constant(0.3), 1.0 / 30.0);
        acc += r.x_dot;
    }
    const Pose x1 = hand.object_pose();
    Eigen::Vector3d moved = x1.translation() - x0.translation();
    CHECK(std::abs(moved.x()) < 1e-6);
    CHECK(std::abs(moved.y()) < 1e-6);
    CHECK(std::abs(moved.z()) > 0.05);
    CHECK(std::abs(acc[3]) < 1e-6);
    CHECK(std::abs(acc[4]) < 1e-6);
    CHECK(std::abs(acc[5]) < 1e-6);
}

TEST_CASE("two half steps agree with one full step") {
    HandParams hp;
    Eigen::Vector3d a_dot(0.2, -0.1, 0.05);
    Hand full(hp, mid_grasp(), Eigen::Vector3d::Zero());
    Hand halves(hp, mid_grasp(), Eigen::Vector3d::Zero());
    const double dt = 1.0 / 30.0;
    full.step(a_dot, dt);
    halves.step(a_dot, dt / 2);
    halves.step(a_dot, dt / 2);
    CHECK((full.object_pose().translation() - halves.object_pose().translation()).norm() < 1e-4);
    CHECK(full.object_pose().rotation().isApprox(halves.object_pose().rotation(), 1e-4));
}

TEST_CASE("local minimum: feasible perturbations do not lower the energy") {
    HandParams hp;
    Hand hand(hp, mid_grasp(), Eigen::Vector3d::Zero());
    hand.step(Eigen::Vector3d(0.2, -0.3, 0.1), 1.0 / 30.0);

    auto total_energy = [&hp](const std::array<JointPair, 3>& q) {
        double e = 0;
        for (const auto& qi : q) e += finger_energy(qi, hp.finger);
        return e;
    };
    const double e_star = total_energy(hand.config().q);

    Rng rng(10);
    const ContactTriangle t0 = hand.triangle();
    const double ratio = hp.finger.r_d / hp.finger.r_p;
    auto triangle_residual = [&](const std::array<JointPair, 3>& q, ContactSet* cs_out) {
        ContactSet cs;
        for (int i = 0; i < 3; ++i) {
            cs.p[i] = finger_fk(JointPair(std::clamp(q[i][0], 0.0, M_PI / 2),
                                          std::clamp(q[i][1], 0.0, M_PI / 2)),
                                hp.finger, hp.base_pose(i));
        }
        if (cs_out) *cs_out = cs;
        return Eigen::Vector3d((cs.p[0] - cs.p[1]).norm() - t0.t12,
                               (cs.p[1] - cs.p[2]).norm() - t0.t23,
                               (cs.p[2] - cs.p[0]).norm() - t0.t31);
    };

    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::array<JointPair, 3> q = hand.config().q;
        for (int i = 0; i < 3; ++i) {
            const double ds = rng.uniform(-0.04, 0.04);
            q[i][1] += ds;
            q[i][0] -= ratio * ds;  // stay on the tendon constraint
        }
        bool ok = true;
        for (int it = 0; it < 60; ++it) {  // constraint-only Newton projection
            Eigen::Vector3d c = triangle_residual(q, nullptr);
            if (c.lpNorm<Eigen::Infinity>() < 1e-9) break;
            Eigen::Matrix3d jac;
            const double h = 1e-7;
            for (int i = 0; i < 3; ++i) {
                auto qp = q;
                qp[i][1] += h;
                qp[i][0] -= ratio * h;
                jac.col(i) = (triangle_residual(qp, nullptr) - c) / h;
            }
            Eigen::Vector3d step = jac.fullPivLu().solve(-c);
            if (!step.allFinite()) {
                ok = false;
                break;
            }
            for (int i = 0; i < 3; ++i) {
                q[i][1] += step[i];
                q[i][0] -= ratio * step[i];
            }
        }
        for (int i = 0; i < 3 && ok; ++i) {
            if (q[i][0] < 0 || q[i][0] > M_PI / 2 || q[i][1] < 0 || q[i][1] > M_PI / 2) ok = false;
        }
        if (!ok) continue;
        if (triangle_residual(q, nullptr).lpNorm<Eigen::Infinity>() > 1e-6) continue;
        ++checked;
        CHECK(total_energy(q) >= e_star - 1e-9);
    }
    CHECK(checked > 20);
}

TEST_CASE("dataset generation is deterministic and preserves triangles") {
    DatasetStats stats;
    auto a = generate_dataset(4, 400, 99, HandParams{}, &stats);
    auto b = generate_dataset(4, 400, 99);
    REQUIRE(a.size() == b.size());
    CHECK(hash_dataset(a) == hash_dataset(b));
    CHECK(stats.generated == 400);
    CHECK(generate_dataset(3, 0, 1).empty());
}
