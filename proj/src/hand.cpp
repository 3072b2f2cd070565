#include "pih/hand.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pih/rng.hpp"

namespace pih::hand {

namespace {

double wrap_angle(double a) {
    while (a > M_PI) a -= 2 * M_PI;
    while (a < -M_PI) a += 2 * M_PI;
    return a;
}

}  // namespace

void FingerParams::validate() const {
    if (k_p <= 0 || k_d <= 0 || r_a <= 0 || r_p <= 0 || r_d <= 0 || l_p <= 0 || l_d <= 0) {
        throw InvalidDimension("finger parameters must be positive");
    }
}

Pose HandParams::base_pose(int i) const {
    const double phi = azimuth(i);
    const double c = std::cos(phi), s = std::sin(phi);
    // in-plane x -> straight down, in-plane y -> inward radial
    Eigen::Matrix3d r;
    r.col(0) = Eigen::Vector3d(0, 0, -1);
    r.col(1) = Eigen::Vector3d(-c, -s, 0);
    r.col(2) = Eigen::Vector3d(-s, c, 0);
    return Pose(r, Eigen::Vector3d(palm_radius * c, palm_radius * s, 0));
}

ContactTriangle contact_triangle(const ContactSet& contacts) {
    const auto& p = contacts.p;
    Eigen::Vector3d cr = (p[1] - p[0]).cross(p[2] - p[0]);
    const double scale = std::max({(p[1] - p[0]).norm(), (p[2] - p[0]).norm(), 1.0});
    if (cr.norm() <= 1e-9 * scale * scale) throw CollinearContacts("contacts are collinear");
    ContactTriangle t;
    t.t12 = (p[0] - p[1]).norm();
    t.t23 = (p[1] - p[2]).norm();
    t.t31 = (p[2] - p[0]).norm();
    return t;
}

void ContactTriangle::validate() const {
    if (!(t12 + t23 > t31 && t23 + t31 > t12 && t31 + t12 > t23)) {
        throw CollinearContacts("contact triangle violates the strict triangle inequality");
    }
}

Pose object_frame(const ContactSet& contacts) {
    const auto& p = contacts.p;
    Eigen::Vector3d e1 = p[1] - p[0];
    Eigen::Vector3d cr = e1.cross(p[2] - p[0]);
    const double scale = std::max({e1.norm(), (p[2] - p[0]).norm(), 1.0});
    if (cr.norm() <= 1e-9 * scale * scale) throw CollinearContacts("contacts are collinear");
    Eigen::Vector3d x = e1.normalized();
    Eigen::Vector3d z = cr.normalized();
    Eigen::Vector3d y = z.cross(x);
    Eigen::Matrix3d r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return Pose(r, (p[0] + p[1] + p[2]) / 3.0);
}

Eigen::Vector2d finger_fk2(const JointPair& q, const FingerParams& params) {
    if (q[0] < kJointMin - 1e-9 || q[0] > kJointMax + 1e-9 || q[1] < kJointMin - 1e-9 ||
        q[1] > kJointMax + 1e-9) {
        throw JointLimit("joint angle outside [0, pi/2]");
    }
    const double c1 = std::cos(q[0]), s1 = std::sin(q[0]);
    const double c12 = std::cos(q[0] + q[1]), s12 = std::sin(q[0] + q[1]);
    return {params.l_p * c1 + params.l_d * c12, params.l_p * s1 + params.l_d * s12};
}

Eigen::Vector3d finger_fk(const JointPair& q, const FingerParams& params, const Pose& base) {
    Eigen::Vector2d t = finger_fk2(q, params);
    return base * Eigen::Vector3d(t.x(), t.y(), 0.0);
}

double finger_energy(const JointPair& q, const FingerParams& params) {
    return 0.5 * (params.k_p * q[0] * q[0] + params.k_d * q[1] * q[1]);
}

Eigen::Vector2d finger_energy_gradient(const JointPair& q, const FingerParams& params) {
    return {params.k_p * q[0], params.k_d * q[1]};
}

double tendon_residual(const JointPair& q_dot, double a_dot, const FingerParams& params) {
    return params.r_a * a_dot - params.r_p * q_dot[0] - params.r_d * q_dot[1];
}

namespace {

/// Tendon-feasible parametrization: s_i = q_d of finger i; q_p follows from
/// the integrated transmission constraint.
struct Parametrization {
    double ratio;                    // r_d / r_p
    Eigen::Vector3d c;               // q_p(s) = c - ratio * s
    Eigen::Vector3d lo, hi;          // box on s from the joint limits

    Parametrization(const HandParams& hp, const TendonRef& ref, const Eigen::Vector3d& a) {
        const auto& f = hp.finger;
        ratio = f.r_d / f.r_p;
        for (int i = 0; i < 3; ++i) {
            const double da = a[i] - ref.a[i];
            c[i] = ref.q[i][0] + (f.r_a * da + f.r_d * ref.q[i][1]) / f.r_p;
            const double s_from_qp_hi = c[i] / ratio;                    // q_p >= 0
            const double s_from_qp_lo = (c[i] - kJointMax) / ratio;      // q_p <= pi/2
            lo[i] = std::max(kJointMin, s_from_qp_lo);
            hi[i] = std::min(kJointMax, s_from_qp_hi);
            if (lo[i] > hi[i] + 1e-12) {
                throw JointLimit("tendon target incompatible with joint limits");
            }
            hi[i] = std::max(hi[i], lo[i]);
        }
    }

    std::array<JointPair, 3> joints(const Eigen::Vector3d& s) const {
        std::array<JointPair, 3> q;
        for (int i = 0; i < 3; ++i) q[i] = JointPair(c[i] - ratio * s[i], s[i]);
        return q;
    }

    Eigen::Vector3d clamp(const Eigen::Vector3d& s) const {
        Eigen::Vector3d out;
        for (int i = 0; i < 3; ++i) out[i] = std::clamp(s[i], lo[i], hi[i]);
        return out;
    }
};

struct Objective {
    const HandParams& hp;
    const Parametrization& par;
    const ContactTriangle* tri;
    std::array<Pose, 3> bases;

    Objective(const HandParams& h, const Parametrization& p, const ContactTriangle* t)
        : hp(h), par(p), tri(t) {
        for (int i = 0; i < 3; ++i) bases[i] = h.base_pose(i);
    }

    double energy(const Eigen::Vector3d& s, Eigen::Vector3d* grad) const {
        const auto& f = hp.finger;
        auto q = par.joints(s);
        double e = 0;
        for (int i = 0; i < 3; ++i) {
            e += finger_energy(q[i], f);
            if (grad) {
                Eigen::Vector2d ge = finger_energy_gradient(q[i], f);
                (*grad)[i] = -par.ratio * ge[0] + ge[1];
            }
        }
        return e;
    }

    /// Triangle constraint residuals and their Jacobian wrt s.
    Eigen::Vector3d constraints(const Eigen::Vector3d& s, Eigen::Matrix3d* jac) const {
        const auto& f = hp.finger;
        auto q = par.joints(s);
        std::array<Eigen::Vector3d, 3> tips;
        std::array<Eigen::Vector3d, 3> dtip_ds;
        for (int i = 0; i < 3; ++i) {
            tips[i] = finger_fk(q[i], f, bases[i]);
            const double c1 = std::cos(q[i][0]), s1 = std::sin(q[i][0]);
            const double c12 = std::cos(q[i][0] + q[i][1]), s12 = std::sin(q[i][0] + q[i][1]);
            // plane Jacobian columns for (q_p, q_d)
            Eigen::Vector2d jp(-f.l_p * s1 - f.l_d * s12, f.l_p * c1 + f.l_d * c12);
            Eigen::Vector2d jd(-f.l_d * s12, f.l_d * c12);
            Eigen::Vector2d j2 = -par.ratio * jp + jd;  // chain rule through q_p(s)
            dtip_ds[i] = bases[i].rotation() * Eigen::Vector3d(j2.x(), j2.y(), 0.0);
        }
        const int pair_a[3] = {0, 1, 2};
        const int pair_b[3] = {1, 2, 0};
        const double target[3] = {tri->t12, tri->t23, tri->t31};
        Eigen::Vector3d cvec;
        if (jac) jac->setZero();
        for (int k = 0; k < 3; ++k) {
            Eigen::Vector3d d = tips[pair_a[k]] - tips[pair_b[k]];
            const double len = std::max(d.norm(), 1e-12);
            cvec[k] = len - target[k];
            if (jac) {
                Eigen::Vector3d u = d / len;
                (*jac)(k, pair_a[k]) += u.dot(dtip_ds[pair_a[k]]);
                (*jac)(k, pair_b[k]) -= u.dot(dtip_ds[pair_b[k]]);
            }
        }
        return cvec;
    }

    double augmented(const Eigen::Vector3d& s, const Eigen::Vector3d& lambda, double rho,
                     Eigen::Vector3d* grad) const {
        Eigen::Vector3d ge;
        double val = energy(s, grad ? &ge : nullptr);
        if (grad) *grad = ge;
        if (tri) {
            Eigen::Matrix3d jac;
            Eigen::Vector3d c = constraints(s, grad ? &jac : nullptr);
            val += lambda.dot(c) + 0.5 * rho * c.squaredNorm();
            if (grad) *grad += jac.transpose() * (lambda + rho * c);
        }
        return val;
    }
};

/// Inner minimizer for the augmented objective: projected gradient steps
/// scaled by the Gauss-Newton curvature (spring diagonal + rho J^T J), with
/// Armijo backtracking onto the box. Returns the projected-gradient norm.
double project_gd(const Objective& obj, const Parametrization& par, Eigen::Vector3d& s,
                  const Eigen::Vector3d& lambda, double rho, double tol, int max_iter) {
    const auto& f = obj.hp.finger;
    const double h_energy = f.k_p * par.ratio * par.ratio + f.k_d;
    Eigen::Vector3d g;
    double val = obj.augmented(s, lambda, rho, &g);
    double pg = 1e300;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::Matrix3d hess = h_energy * Eigen::Matrix3d::Identity();
        if (obj.tri) {
            Eigen::Matrix3d jac;
            obj.constraints(s, &jac);
            hess += rho * jac.transpose() * jac;
        }
        Eigen::Vector3d dir = hess.ldlt().solve(-g);
        if (!dir.allFinite() || dir.dot(g) > 0) dir = -g / h_energy;
        // convergence on the curvature-scaled projected step
        pg = (par.clamp(s + dir) - s).norm();
        if (pg <= tol) break;
        double alpha = 1.0;
        Eigen::Vector3d cand;
        double cand_val = 0;
        for (int bt = 0; bt < 30; ++bt) {
            cand = par.clamp(s + alpha * dir);
            cand_val = obj.augmented(cand, lambda, rho, nullptr);
            if (cand_val <= val + 1e-4 * g.dot(cand - s) || (cand - s).norm() < 1e-16) break;
            alpha *= 0.5;
        }
        if ((cand - s).norm() < 1e-16) break;
        s = cand;
        val = cand_val;
        obj.augmented(s, lambda, rho, &g);
    }
    return pg;
}

}  // namespace

HandConfig equilibrium(const HandParams& hp, const TendonRef& ref,
                       const std::array<JointPair, 3>& q_warm, const Eigen::Vector3d& a_target,
                       const ContactTriangle* triangle, const EquilibriumOptions& opt,
                       Eigen::Vector3d* lambda_io) {
    hp.finger.validate();
    Parametrization par(hp, ref, a_target);
    Objective obj(hp, par, triangle);

    Eigen::Vector3d s(q_warm[0][1], q_warm[1][1], q_warm[2][1]);
    s = par.clamp(s);

    Eigen::Vector3d lambda = Eigen::Vector3d::Zero();
    if (!triangle) {
        const double pg = project_gd(obj, par, s, lambda, 0.0, opt.gradient_tol, 4 * opt.max_inner);
        if (pg > opt.gradient_tol * 100) {
            throw NonConvergence("unconstrained equilibrium did not reach gradient tolerance");
        }
        HandConfig out;
        out.q = par.joints(s);
        out.a = a_target;
        return out;
    }

    if (lambda_io) lambda = *lambda_io;
    double rho = 1000.0;
    double prev_cnorm = 1e300;
    for (int outer = 0; outer < opt.max_outer; ++outer) {
        const double pg = project_gd(obj, par, s, lambda, rho, opt.gradient_tol, opt.max_inner);
        Eigen::Vector3d c = obj.constraints(s, nullptr);
        const double cnorm = c.lpNorm<Eigen::Infinity>();
        if (cnorm <= opt.constraint_tol && pg <= opt.gradient_tol) {
            if (lambda_io) *lambda_io = lambda + rho * c;
            HandConfig out;
            out.q = par.joints(s);
            out.a = a_target;
            return out;
        }
        lambda += rho * c;
        if (cnorm > 0.5 * prev_cnorm) rho = std::min(rho * 10.0, 1e9);
        prev_cnorm = cnorm;
    }
    Eigen::Vector3d c = obj.constraints(s, nullptr);
    if (c.lpNorm<Eigen::Infinity>() > opt.constraint_tol) {
        throw InfeasibleTriangle("triangle constraints unsatisfiable within iteration budget");
    }
    throw NonConvergence("equilibrium did not converge in the outer-iteration budget");
}

JointPair finger_equilibrium(const FingerParams& params, const JointPair& q_ref, double a_ref,
                             double a_target, const EquilibriumOptions& opt) {
    HandParams hp;
    hp.finger = params;
    TendonRef ref;
    ref.q = {q_ref, q_ref, q_ref};
    ref.a = Eigen::Vector3d::Constant(a_ref);
    HandConfig out = equilibrium(hp, ref, ref.q, Eigen::Vector3d::Constant(a_target), nullptr, opt);
    return out.q[0];
}

Hand::Hand(const HandParams& params, const std::array<JointPair, 3>& q0,
           const Eigen::Vector3d& a0)
    : params_(params) {
    cfg_.q = q0;
    cfg_.a = a0;
    ref_.q = q0;
    ref_.a = a0;
    triangle_ = contact_triangle(contacts());
    triangle_.validate();
}

ContactSet Hand::contacts() const {
    ContactSet cs;
    for (int i = 0; i < 3; ++i) {
        cs.p[i] = finger_fk(cfg_.q[i], params_.finger, params_.base_pose(i));
    }
    return cs;
}

StepResult Hand::step(const Eigen::Vector3d& a_dot, double dt, const EquilibriumOptions& opt) {
    if (dt <= 0) throw InvalidDimension("step requires dt > 0");
    if (a_dot.isZero()) {  // no actuation, no motion: exact fixed point
        StepResult res;
        res.object_pose = object_pose();
        res.x_dot.setZero();
        return res;
    }
    const Pose x0 = object_pose();
    const Eigen::Vector3d a_new = cfg_.a + a_dot * dt;
    HandConfig next = equilibrium(params_, ref_, cfg_.q, a_new, &triangle_, opt, &lambda_);
    cfg_ = next;
    const Pose x1 = object_pose();

    StepResult res;
    res.object_pose = x1;
    // element-wise frame difference: translation directly, rotation through
    // the matrix difference (R1 - R0) R0^T, whose skew part is the spatial
    // angular velocity to first order and is grasp-yaw independent
    Eigen::Matrix3d w =
        (x1.rotation() - x0.rotation()) * x0.rotation().transpose() / dt;
    for (int i = 0; i < 3; ++i) {
        res.x_dot[i] = (x1.translation()[i] - x0.translation()[i]) / dt;
    }
    res.x_dot[3] = 0.5 * (w(2, 1) - w(1, 2));
    res.x_dot[4] = 0.5 * (w(0, 2) - w(2, 0));
    res.x_dot[5] = 0.5 * (w(1, 0) - w(0, 1));
    return res;
}

std::vector<TransitionRecord> generate_dataset(int n_triangles, int n_transitions,
                                               std::uint64_t seed, const HandParams& hp,
                                               DatasetStats* stats) {
    if (n_triangles < 1) throw InvalidDimension("need at least one contact triangle");
    std::vector<TransitionRecord> records;
    records.reserve(n_transitions);
    int attempts = 0, skipped = 0;
    const int per_triangle = (n_transitions + n_triangles - 1) / std::max(1, n_triangles);

    // Grasp envelope: the proximal/distal ranges the fingertip-grasp IK
    // actually produces. The hand's velocity gain keeps one sign here; wider
    // sampling mixes regimes a 2-input inverse cannot represent.
    constexpr double kQpLo = 0.0, kQpHi = 0.65;
    constexpr double kQdLo = 0.45, kQdHi = 1.5;
    constexpr double kXdotCap = 0.8;  // rad/s; beyond this the sample is near-singular

    for (int t = 0; t < n_triangles && static_cast<int>(records.size()) < n_transitions; ++t) {
        Rng rng(mix_seed(seed, 0xda7a, t));
        std::array<JointPair, 3> q0;
        for (auto& q : q0) q = JointPair(rng.uniform(kQpLo, kQpHi), rng.uniform(kQdLo, kQdHi));
        Hand hand(hp, q0, Eigen::Vector3d::Zero());
        int generated = 0, chain = 0;
        while (generated < per_triangle && static_cast<int>(records.size()) < n_transitions) {
            Eigen::Vector3d a_dot(rng.uniform(-kActuatorVelocityLimit, kActuatorVelocityLimit),
                                  rng.uniform(-kActuatorVelocityLimit, kActuatorVelocityLimit),
                                  rng.uniform(-kActuatorVelocityLimit, kActuatorVelocityLimit));
            ++attempts;
            TransitionRecord rec;
            rec.x_t = hand.object_pose();
            rec.triangle = hand.triangle();
            rec.a_dot = a_dot;
            try {
                StepResult sr = hand.step(a_dot, 1.0 / 30.0);
                rec.xdot_xy = Eigen::Vector2d(sr.x_dot[3], sr.x_dot[4]);
                if (rec.xdot_xy.norm() <= kXdotCap) {
                    records.push_back(rec);
                    ++generated;
                }
            } catch (const Error&) {
                ++skipped;
                hand = Hand(hp, q0, Eigen::Vector3d::Zero());
                chain = 0;
            }
            if (++chain >= 300) {  // keep rollouts near the sampled grasp
                hand = Hand(hp, q0, Eigen::Vector3d::Zero());
                chain = 0;
            }
            if (skipped > attempts / 2 && attempts > 100) {
                throw SolverFailure("more than half of dataset transitions were infeasible");
            }
        }
    }
    if (stats) {
        stats->requested = n_transitions;
        stats->generated = static_cast<int>(records.size());
        stats->skipped = skipped;
    }
    return records;
}

void save_dataset(const std::vector<TransitionRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset file: " + path);
    out.precision(17);
    out << "Xdot_x Xdot_y adot_0 adot_1 adot_2 t12 t23 t31\n";
    for (const auto& r : records) {
        out << r.xdot_xy.x() << " " << r.xdot_xy.y() << " " << r.a_dot.x() << " " << r.a_dot.y()
            << " " << r.a_dot.z() << " " << r.triangle.t12 << " " << r.triangle.t23 << " "
            << r.triangle.t31 << "\n";
    }
}

std::vector<TransitionRecord> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);
    std::string header;
    std::getline(in, header);
    if (header.find("Xdot_x") == std::string::npos) {
        throw IoError("bad dataset header in " + path);
    }
    std::vector<TransitionRecord> records;
    TransitionRecord r;
    while (in >> r.xdot_xy.x() >> r.xdot_xy.y() >> r.a_dot.x() >> r.a_dot.y() >> r.a_dot.z() >>
           r.triangle.t12 >> r.triangle.t23 >> r.triangle.t31) {
        records.push_back(r);
    }
    return records;
}

std::uint64_t hash_dataset(const std::vector<TransitionRecord>& records) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](double v) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h = (h ^ ((bits >> (8 * i)) & 0xff)) * 1099511628211ULL;
        }
    };
    for (const auto& r : records) {
        mix(r.xdot_xy.x());
        mix(r.xdot_xy.y());
        mix(r.a_dot.x());
        mix(r.a_dot.y());
        mix(r.a_dot.z());
        mix(r.triangle.t12);
        mix(r.triangle.t23);
        mix(r.triangle.t31);
    }
    return h;
}

InverseHandModel InverseHandModel::fit(const std::vector<TransitionRecord>& buffer,
                                       const FitOptions& opt) {
    if (buffer.size() < 1000) {
        throw InvalidDimension("inverse-model fit needs a buffer of at least 1000 records");
    }
    const int n = static_cast<int>(buffer.size());
    Eigen::MatrixXd x(n, 2), y(n, 3);
    for (int i = 0; i < n; ++i) {
        x.row(i) = buffer[i].xdot_xy.transpose();
        y.row(i) = buffer[i].a_dot.transpose();
    }

    InverseHandModel model;
    model.in_mean_ = x.colwise().mean();
    model.out_mean_ = y.colwise().mean();
    for (int j = 0; j < 2; ++j) {
        model.in_std_[j] = std::max(std::sqrt((x.col(j).array() - model.in_mean_[j]).square().mean()), 1e-12);
    }
    for (int j = 0; j < 3; ++j) {
        model.out_std_[j] = std::max(std::sqrt((y.col(j).array() - model.out_mean_[j]).square().mean()), 1e-12);
    }
    Eigen::MatrixXd xn = (x.rowwise() - model.in_mean_.transpose()).array().rowwise() /
                         model.in_std_.transpose().array();
    Eigen::MatrixXd yn = (y.rowwise() - model.out_mean_.transpose()).array().rowwise() /
                         model.out_std_.transpose().array();

    model.net_ = Mlp(2, 64, 3, opt.seed);
    Mlp::TrainConfig tc;
    tc.epochs = opt.epochs;
    tc.batch = opt.batch;
    tc.lr = opt.lr;
    tc.seed = opt.seed;
    tc.loss_history = &model.loss_curve_;
    model.final_loss_ = model.net_.train(xn, yn, tc);
    model.dataset_hash_ = hash_dataset(buffer);
    return model;
}

Eigen::Vector3d InverseHandModel::predict(const Eigen::Vector2d& xdot_xy) const {
    if (!xdot_xy.allFinite()) throw InvalidDimension("predict requires finite inputs");
    Eigen::Vector2d xn = (xdot_xy - in_mean_).cwiseQuotient(in_std_);
    Eigen::VectorXd yn = net_.forward(xn);
    Eigen::Vector3d out = out_mean_ + out_std_.cwiseProduct(yn);
    return out.cwiseMax(-kActuatorVelocityLimit).cwiseMin(kActuatorVelocityLimit);
}

void InverseHandModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path);
    out.precision(17);
    out << "pih-ihm 1\n";
    out << in_mean_.transpose() << "\n" << in_std_.transpose() << "\n";
    out << out_mean_.transpose() << "\n" << out_std_.transpose() << "\n";
    out << final_loss_ << " " << dataset_hash_ << "\n";
    out << loss_curve_.size();
    for (double v : loss_curve_) out << " " << v;
    out << "\n";
    net_.save(out);
}

InverseHandModel InverseHandModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "pih-ihm" || version != 1) throw IoError("bad model file header: " + path);
    InverseHandModel m;
    in >> m.in_mean_.x() >> m.in_mean_.y() >> m.in_std_.x() >> m.in_std_.y();
    in >> m.out_mean_.x() >> m.out_mean_.y() >> m.out_mean_.z();
    in >> m.out_std_.x() >> m.out_std_.y() >> m.out_std_.z();
    in >> m.final_loss_ >> m.dataset_hash_;
    std::size_t k = 0;
    in >> k;
    m.loss_curve_.resize(k);
    for (auto& v : m.loss_curve_) in >> v;
    m.net_ = Mlp::load(in);
    return m;
}

}  // namespace pih::hand
