#include "pih/world.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "pih/rng.hpp"

namespace pih::world {

namespace {

using geom::Vec2;

constexpr double kPenTol = 5e-7;      // mm, max residual penetration
constexpr int kMaxSweeps = 200;
constexpr double kBlockTol = 0.3;     // mm of withheld descent marking "blocked"
constexpr double kForceFloor = 0.02;  // N, contacts below this don't count as walls

/// Signed distance of p to the interior of a convex CCW polygon: positive
/// inside. Also reports the inward normal of the closest (or most violated)
/// edge.
double dist_inside(const std::vector<Vec2>& poly, const Vec2& p, Vec2* inward) {
    double best = 1e300;
    Vec2 best_n(0, 0);
    const int n = static_cast<int>(poly.size());
    for (int i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        Vec2 e = b - a;
        const double len = e.norm();
        if (len < 1e-12) continue;
        Vec2 n_in(-e.y() / len, e.x() / len);
        const double d = n_in.dot(p - a);
        if (d < best) {
            best = d;
            best_n = n_in;
        }
    }
    if (inward) *inward = best_n;
    return best;
}

/// Boundary resampling at roughly uniform arc length, keeping every vertex.
std::vector<Vec2> resample_boundary(const std::vector<Vec2>& poly, int target) {
    double perim = 0;
    const int n = static_cast<int>(poly.size());
    for (int i = 0; i < n; ++i) perim += (poly[(i + 1) % n] - poly[i]).norm();
    const double step = perim / std::max(target, 8);
    std::vector<Vec2> out;
    for (int i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        const double len = (b - a).norm();
        out.push_back(a);
        const int extra = static_cast<int>(len / step);
        for (int k = 1; k <= extra; ++k) out.push_back(a + (b - a) * (k / (extra + 1.0)));
    }
    if (static_cast<int>(out.size()) > 3 * target) {
        std::vector<Vec2> dec;
        const int stride = static_cast<int>(out.size()) / target;
        for (std::size_t i = 0; i < out.size(); i += stride) dec.push_back(out[i]);
        return dec;
    }
    return out;
}

enum FeatureType { kSupport = 0, kWall = 1, kFloor = 2, kRimLat = 3, kRimVert = 4 };

struct Feature {
    int id;
    FeatureType type;
    Eigen::Vector3d point;  // world
    Eigen::Vector3d dir;    // world: peg motion along dir reduces penetration
    double pen;
};

Pose apply_deflection(const Pose& cmd, const Eigen::Matrix<double, 5, 1>& x,
                      const Eigen::Vector3d& pivot) {
    Pose rot = Pose::from_rpy(Eigen::Vector3d(x[3], x[4], 0.0));
    Eigen::Vector3d t = pivot + rot.quat() * (cmd.translation() - pivot) + x.head<3>();
    return Pose(rot.quat() * cmd.quat(), t);
}

}  // namespace

void ComplianceConfig::validate() const {
    if ((arm_compliant || hand_compliant) && k_c <= 0) {
        throw InvalidDimension("k_c must be positive when a compliant element uses it");
    }
    if (hole_compliant && hole_spring <= 0) {
        throw InvalidDimension("hole_spring must be positive when the hole is compliant");
    }
    if (mu < 0) throw InvalidDimension("friction coefficient must be non-negative");
}

Eigen::Vector3d ArmModel::sample_bias(std::uint64_t seed, double radius_mm) {
    Rng rng(mix_seed(seed, 0xb1a5));
    for (int i = 0; i < 1000; ++i) {
        Eigen::Vector3d v(rng.uniform(-radius_mm, radius_mm), rng.uniform(-radius_mm, radius_mm),
                          rng.uniform(-radius_mm, radius_mm));
        if (v.norm() <= radius_mm) return v;
    }
    return Eigen::Vector3d::Zero();
}

void ArmModel::refresh_actual() {
    for (int i = 0; i < 3; ++i) {
        if (believed.translation()[i] < workspace_min[i] ||
            believed.translation()[i] > workspace_max[i]) {
            throw WorkspaceExceeded("commanded end effector outside workspace bounds");
        }
    }
    Rng rng(mix_seed(seed, 0xa53, static_cast<std::uint64_t>(++steps)));
    Eigen::Vector3d noise(rng.uniform(-step_noise_mm, step_noise_mm),
                          rng.uniform(-step_noise_mm, step_noise_mm),
                          rng.uniform(-step_noise_mm, step_noise_mm));
    const double rb = rot_step_noise_deg * M_PI / 180.0;
    Eigen::Vector3d drpy(rng.uniform(-rb, rb), rng.uniform(-rb, rb), rng.uniform(-rb, rb));
    Pose jitter = Pose::from_rpy(drpy);
    actual = Pose(jitter.quat() * believed.quat(), believed.translation() + bias + noise);
}

void ArmModel::execute_delta(const Pose& world_delta) {
    believed = Pose(world_delta.quat() * believed.quat(),
                    believed.translation() + world_delta.translation());
    refresh_actual();
}

void ArmModel::execute_pose(const Pose& target) {
    believed = target;
    refresh_actual();
}

ContactSolver::ContactSolver(const geom::PegGeometry& peg, const geom::HoleGeometry& hole) {
    peg.validate();
    auto hull = geom::convex_hull(peg.face.points);
    Vec2 c = Vec2::Zero();
    for (const auto& p : peg.face.points) c += p;
    c /= static_cast<double>(peg.face.points.size());
    peg_centroid_ = c;
    for (auto& v : hull) v -= c;
    peg_poly_ = hull;
    for (const auto& v : resample_boundary(hull, 48)) {
        peg_bottom_.emplace_back(v.x(), v.y(), 0.0);
    }
    peg_height_ = peg.height;

    auto hhull = geom::convex_hull(hole.face.points);
    for (auto& v : hhull) v -= c;  // hole polygon shares the face-cloud origin
    hole_poly_ = hhull;
    for (const auto& v : resample_boundary(hhull, 48)) {
        rim_points_.emplace_back(v.x(), v.y(), 0.0);
    }
    hole_depth_ = hole.depth;
}

double ContactSolver::inserted_depth(const Pose& peg_pose, const Pose& hole_pose) const {
    Eigen::Vector3d ph = hole_pose.inverse() * (peg_pose * Eigen::Vector3d::Zero());
    if (dist_inside(hole_poly_, Vec2(ph.x(), ph.y()), nullptr) <= 0) return 0.0;
    return std::clamp(-ph.z(), 0.0, hole_depth_);
}

ContactSolver::Result ContactSolver::resolve(const Pose& cmd, const Eigen::Vector3d& pivot,
                                             const Pose& hole_pose, const ComplianceConfig& cfg,
                                             const Eigen::Matrix<double, 5, 1>* warm_start) const {
    cfg.validate();
    Eigen::Matrix<double, 5, 1> k_diag;
    const double k_lin = cfg.linear_stiffness();
    const double k_tilt = cfg.tilt_stiffness();
    k_diag << k_lin, k_lin, k_lin, k_tilt, k_tilt;

    const Pose hole_inv = hole_pose.inverse();
    const Eigen::Vector3d hole_up = hole_pose.rotation().col(2);

    Eigen::Matrix<double, 5, 1> x = Eigen::Matrix<double, 5, 1>::Zero();
    std::map<int, double> lambda;

    auto collect = [&](const Pose& pose, std::vector<Feature>& feats) {
        feats.clear();
        // quick reject: bottom face well above the hole mouth plane
        double zmin = 1e300;
        std::vector<Eigen::Vector3d> world_pts(peg_bottom_.size());
        for (std::size_t j = 0; j < peg_bottom_.size(); ++j) {
            world_pts[j] = pose * peg_bottom_[j];
            zmin = std::min(zmin, (hole_inv * world_pts[j]).z());
        }
        if (zmin > 0.5) return;

        for (std::size_t j = 0; j < peg_bottom_.size(); ++j) {
            Eigen::Vector3d ph = hole_inv * world_pts[j];
            if (ph.z() >= -kPenTol) continue;
            Vec2 inward;
            const double din = dist_inside(hole_poly_, Vec2(ph.x(), ph.y()), &inward);
            Feature f;
            f.id = static_cast<int>(j);
            f.point = world_pts[j];
            if (din < 0) {
                const double lift = -ph.z();
                const double lateral = -din;
                if (lateral < 0.8 * lift) {
                    f.type = kWall;
                    f.dir = hole_pose.rotation() * Eigen::Vector3d(inward.x(), inward.y(), 0);
                    f.pen = lateral;
                } else {
                    f.type = kSupport;
                    f.dir = hole_up;
                    f.pen = lift;
                }
                feats.push_back(f);
            } else if (ph.z() < -hole_depth_) {
                f.type = kFloor;
                f.dir = hole_up;
                f.pen = -hole_depth_ - ph.z();
                feats.push_back(f);
            }
        }

        const Pose peg_inv = pose.inverse();
        for (std::size_t j = 0; j < rim_points_.size(); ++j) {
            Eigen::Vector3d rw = hole_pose * rim_points_[j];
            Eigen::Vector3d pe = peg_inv * rw;
            if (pe.z() <= kPenTol || pe.z() >= peg_height_) continue;
            Vec2 inward;
            const double dpeg = dist_inside(peg_poly_, Vec2(pe.x(), pe.y()), &inward);
            if (dpeg <= kPenTol) continue;
            Feature f;
            f.id = 1000 + static_cast<int>(j);
            f.point = rw;
            if (pe.z() < 0.8 * dpeg) {
                f.type = kRimVert;
                f.dir = hole_up;  // raising the peg lets the rim exit the bottom face
                f.pen = pe.z();
            } else {
                // the peg must move opposite the rim point's lateral exit
                Eigen::Vector3d exit_dir =
                    pose.rotation() * Eigen::Vector3d(-inward.x(), -inward.y(), 0);
                f.type = kRimLat;
                f.dir = -exit_dir;
                f.pen = dpeg;
            }
            feats.push_back(f);
        }
    };

    std::vector<Feature> feats;
    std::map<int, Feature> touched;  // last geometry of every loaded feature
    Pose pose = cmd;

    auto project = [&](Eigen::Matrix<double, 5, 1>& xv, std::map<int, double>& lam,
                       int budget, double tol, bool with_tilt) {
        for (int sweep = 0; sweep < budget; ++sweep) {
            Pose at = apply_deflection(cmd, xv, pivot);
            collect(at, feats);
            double worst = 0;
            for (const auto& f : feats) worst = std::max(worst, f.pen);
            if (worst <= tol) return true;
            // simultaneous solve over the deepest violations; sequential
            // corrections chatter because tilt couples every contact
            std::sort(feats.begin(), feats.end(),
                      [](const Feature& a, const Feature& b) { return a.pen > b.pen; });
            const int m = std::min<int>(32, static_cast<int>(feats.size()));
            Eigen::MatrixXd jac(m, 5);
            Eigen::VectorXd pen(m);
            for (int i = 0; i < m; ++i) {
                const Feature& f = feats[i];
                Eigen::Matrix<double, 5, 1> row;
                row.head<3>() = f.dir;
                Eigen::Vector3d r = f.point - pivot;
                row[3] = with_tilt ? f.dir.dot(Eigen::Vector3d::UnitX().cross(r)) : 0.0;
                row[4] = with_tilt ? f.dir.dot(Eigen::Vector3d::UnitY().cross(r)) : 0.0;
                jac.row(i) = row.transpose();
                double p = f.pen;
                if (cfg.hole_compliant && (f.type == kWall || f.type == kRimLat)) {
                    p -= lam[f.id] / cfg.hole_spring;  // wall gives way under load
                }
                pen[i] = p;
                touched[f.id] = f;
            }
            // direct active-set solve of the coupled linearized system; a
            // small constraint-force mixing term conditions antagonistic pairs
            Eigen::MatrixXd a = jac * k_diag.cwiseInverse().asDiagonal() * jac.transpose();
            const double cfm = (with_tilt ? 1e-3 : 1e-6) * a.diagonal().maxCoeff() + 1e-12;
            a.diagonal().array() += cfm;
            Eigen::VectorXd dl = Eigen::VectorXd::Zero(m);
            {
                std::vector<int> free(m);
                for (int i = 0; i < m; ++i) free[i] = i;
                Eigen::VectorXd rhs = pen;
                for (int round = 0; round <= m; ++round) {
                    const int n_free = static_cast<int>(free.size());
                    if (n_free == 0) break;
                    Eigen::MatrixXd af(n_free, n_free);
                    Eigen::VectorXd pf(n_free);
                    for (int i = 0; i < n_free; ++i) {
                        pf[i] = rhs[free[i]];
                        for (int j = 0; j < n_free; ++j) af(i, j) = a(free[i], free[j]);
                    }
                    Eigen::VectorXd sol = af.ldlt().solve(pf);
                    // impulses may not pull below the accumulated normal force
                    int worst_idx = -1;
                    double worst_gap = -1e-12;
                    for (int i = 0; i < n_free; ++i) {
                        const double gap = sol[i] + lam[feats[free[i]].id];
                        if (gap < worst_gap) {
                            worst_gap = gap;
                            worst_idx = i;
                        }
                    }
                    if (worst_idx < 0) {
                        for (int i = 0; i < n_free; ++i) dl[free[i]] = sol[i];
                        break;
                    }
                    const int fixed = free[worst_idx];
                    dl[fixed] = -lam[feats[fixed].id];
                    rhs -= a.col(fixed) * dl[fixed];
                    free.erase(free.begin() + worst_idx);
                }
            }
            for (int i = 0; i < m; ++i) {
                lam[feats[i].id] += dl[i];
                xv += (jac.row(i).transpose().array() / k_diag.array()).matrix() * dl[i];
            }
        }
        Pose at = apply_deflection(cmd, xv, pivot);
        collect(at, feats);
        double worst = 0;
        for (const auto& f : feats) worst = std::max(worst, f.pen);
        return worst <= tol;
    };

    auto cost = [&k_diag](const Eigen::Matrix<double, 5, 1>& xv) {
        return 0.5 * (xv.array().square() * k_diag.array()).sum();
    };

    // fast path: the commanded pose is already feasible, springs unload
    {
        collect(cmd, feats);
        double worst = 0;
        for (const auto& f : feats) worst = std::max(worst, f.pen);
        if (worst <= kPenTol) {
            Result res0;
            res0.pose = cmd;
            return res0;
        }
    }

    // coarse solve with the tilt spring engaged (warm-started on the previous
    // deflection for branch continuity), then a shrink-and-reproject
    // refinement (the sweep path can settle on an expensive branch, e.g.
    // tilting further instead of righting, and warm starts can only ratchet
    // outward), and a translation-only polish that removes the last
    // micrometres without rotational curvature
    if (warm_start) x = *warm_start;
    project(x, lambda, 120, 1e-3, true);
    for (int refine = 0; refine < 12; ++refine) {
        if (x.norm() < 1e-9) break;
        Eigen::Matrix<double, 5, 1> x_try = 0.55 * x;
        std::map<int, double> lam_try;
        for (auto& [id, l] : lambda) lam_try[id] = 0.55 * l;
        if (!project(x_try, lam_try, 30, 1e-3, true)) break;
        if (cost(x_try) < cost(x) - 1e-12) {
            x = x_try;
            lambda = std::move(lam_try);
        } else {
            break;
        }
    }
    if (!project(x, lambda, kMaxSweeps, kPenTol, false)) {
        throw SolverFailure("contact projection did not converge in 200 sweeps");
    }
    pose = apply_deflection(cmd, x, pivot);

    Result res;
    res.pose = pose;
    res.deflection = x;

    // spring force on the peg, pulling it back toward the commanded pose
    Eigen::Vector3d spring = -k_lin * x.head<3>();
    double lambda_sum = 0;
    for (const auto& [id, l] : lambda) {
        if (l > 0) lambda_sum += l;
    }

    for (const auto& [id, l] : lambda) {
        if (l <= kForceFloor / 10) continue;
        auto it = touched.find(id);
        if (it == touched.end()) continue;
        Contact c;
        c.point = it->second.point;
        c.normal = it->second.dir;
        c.force = l;
        Eigen::Vector3d tangential = spring - spring.dot(c.normal) * c.normal;
        c.sticking = cfg.mu * lambda_sum + 1e-12 >= tangential.norm();
        res.contacts.push_back(c);
    }

    const double withheld = (pose.translation() - cmd.translation()).dot(hole_up);
    res.blocked_down = withheld > kBlockTol;

    // opposing sticking wall contacts
    for (std::size_t i = 0; i < res.contacts.size() && !res.opposing_walls; ++i) {
        for (std::size_t j = i + 1; j < res.contacts.size(); ++j) {
            const auto& a = res.contacts[i];
            const auto& b = res.contacts[j];
            if (a.force < kForceFloor || b.force < kForceFloor) continue;
            Eigen::Vector3d ha = a.normal - a.normal.dot(hole_up) * hole_up;
            Eigen::Vector3d hb = b.normal - b.normal.dot(hole_up) * hole_up;
            if (ha.norm() < 0.6 || hb.norm() < 0.6) continue;
            if (ha.normalized().dot(hb.normalized()) < -0.3 && a.sticking && b.sticking) {
                res.opposing_walls = true;
                break;
            }
        }
    }
    return res;
}

World::World(const geom::PegGeometry& peg, const geom::HoleGeometry& hole,
             const ComplianceConfig& cfg, const ArmModel& arm, const Pose& peg_start,
             double tick_dt)
    : peg_(peg), hole_(hole), cfg_(cfg), arm_(arm), solver_(peg, hole), dt_(tick_dt) {
    cfg_.validate();
    state_.peg_pose = peg_start;
    state_.peg_cmd = peg_start;
    state_.hole_pose = hole.pose;
    resolve();
}

Pose World::commanded_peg_pose() const {
    if (!grasped_) return state_.peg_cmd;
    return arm_.actual * hand_->object_pose() * grasp_offset_ * object_disturbance_;
}

void World::resolve() {
    state_.peg_cmd = commanded_peg_pose();
    const Eigen::Vector3d pivot = state_.peg_cmd * pivot_local_;
    ContactSolver::Result res;
    try {
        res = solver_.resolve(state_.peg_cmd, pivot, state_.hole_pose, cfg_, &deflection_);
    } catch (const SolverFailure&) {
        if (getenv("PIH_DUMP")) {
            fprintf(stderr, "CMD %s\nPIVOT %.17g %.17g %.17g\nWARM %.17g %.17g %.17g %.17g %.17g\nHOLE %s\n",
                    serialize_pose(state_.peg_cmd).c_str(), pivot.x(), pivot.y(), pivot.z(),
                    deflection_[0], deflection_[1], deflection_[2], deflection_[3], deflection_[4],
                    serialize_pose(state_.hole_pose).c_str());
        }
        throw;
    }
    deflection_ = res.deflection;
    state_.peg_pose = res.pose;
    state_.contacts = res.contacts;
    const double depth_before = state_.inserted_depth;
    state_.inserted_depth = solver_.inserted_depth(state_.peg_pose, state_.hole_pose);

    if (grasped_ && res.deflection.head<3>().norm() > 25.0) {
        throw GraspInfeasible("grasp slipped under contact load");
    }

    const bool progress = state_.inserted_depth > depth_before + 0.02;
    if (res.opposing_walls && res.blocked_down && !progress) {
        ++state_.wedge_ticks;
    } else {
        state_.wedge_ticks = 0;
    }
    const int jam_after = cfg_.any_compliant() ? 90 : 4;
    if (state_.wedge_ticks >= jam_after) state_.jammed = true;
}

void World::arm_command_delta(const Pose& delta) {
    arm_.execute_delta(delta);
    resolve();
}

void World::arm_command_pose(const Pose& target) {
    arm_.execute_pose(target);
    resolve();
}

void World::hand_actuate(const Eigen::Vector3d& a_dot) {
    if (!grasped_) throw GraspInfeasible("no grasp established");
    try {
        hand_->step(a_dot, dt_);
    } catch (const InfeasibleTriangle& e) {
        throw WihmWorkspaceExceeded(std::string("hand workspace boundary: ") + e.what());
    } catch (const JointLimit& e) {
        throw WihmWorkspaceExceeded(std::string("hand workspace boundary: ") + e.what());
    } catch (const NonConvergence& e) {
        throw WihmWorkspaceExceeded(std::string("hand workspace boundary: ") + e.what());
    }
    resolve();
}

void World::settle() { resolve(); }

void World::attach_hand(const hand::HandParams& hp, double hover_offset_mm) {
    const Pose palm = arm_.actual;

    // Caging pull-in: closing fingers drag a badly approached peg toward the
    // palm axis before the tips settle. Beyond the cage radius the grasp fails.
    {
        Eigen::Vector2d offset = palm.translation().head<2>() -
                                 state_.peg_pose.translation().head<2>();
        const double miss = offset.norm();
        if (miss > 30.0) throw GraspInfeasible("peg outside the closing cage");
        Eigen::Vector3d slide(0.9 * offset.x(), 0.9 * offset.y(), 0.0);
        state_.peg_cmd = Pose(state_.peg_cmd.quat(), state_.peg_cmd.translation() + slide);
        resolve();
    }

    // fingertip height set by where the hand actually closed
    const Pose peg_inv = state_.peg_pose.inverse();
    const double raw_height = (peg_inv * palm.translation()).z() - hover_offset_mm;
    if (raw_height < -10.0 || raw_height > peg_.height + 15.0) {
        throw GraspInfeasible("hand closed past the peg top or bottom");
    }
    const double contact_height_mm = std::clamp(raw_height, 3.0, peg_.height - 3.0);

    std::array<hand::JointPair, 3> q0;
    std::array<Eigen::Vector3d, 3> contacts_peg;

    // peg face polygon in peg frame (centered)
    auto peg_hull = geom::convex_hull(peg_.face.points);
    Vec2 c = Vec2::Zero();
    for (const auto& p : peg_.face.points) c += p;
    c /= static_cast<double>(peg_.face.points.size());
    for (auto& v : peg_hull) v -= c;

    for (int i = 0; i < 3; ++i) {
        const Pose base = palm * hp.base_pose(i);
        // ray from the finger base inward, in the peg frame, at contact height
        Eigen::Vector3d origin_p = peg_inv * base.translation();
        Eigen::Vector3d inward_w = base.rotation().col(1);  // finger-plane y
        Eigen::Vector3d inward_p = peg_inv.rotation() * inward_w;
        Vec2 o(origin_p.x(), origin_p.y());
        Vec2 d(inward_p.x(), inward_p.y());
        if (d.norm() < 1e-9) throw GraspInfeasible("finger plane parallel to peg axis");
        d.normalize();

        // entry of the ray into the convex face polygon
        double t_entry = -1e300, t_exit = 1e300;
        const int n = static_cast<int>(peg_hull.size());
        for (int e = 0; e < n; ++e) {
            Vec2 a = peg_hull[e], b = peg_hull[(e + 1) % n];
            Vec2 edge = b - a;
            Vec2 n_in(-edge.y(), edge.x());
            n_in.normalize();
            const double denom = n_in.dot(d);
            const double num = n_in.dot(a - o);
            if (std::abs(denom) < 1e-12) {
                if (num < 0) t_entry = 1e301;  // parallel and outside
                continue;
            }
            const double t = num / denom;
            if (denom > 0) {
                t_entry = std::max(t_entry, t);
            } else {
                t_exit = std::min(t_exit, t);
            }
        }
        if (t_entry > t_exit || t_entry < 0 || t_entry > 1e300) {
            throw GraspInfeasible("finger plane does not reach the peg sidewall");
        }
        Vec2 hit = o + t_entry * d;
        contacts_peg[i] = Eigen::Vector3d(hit.x(), hit.y(), contact_height_mm);

        // analytic 2-link IK in the finger plane
        Eigen::Vector3d tip_w = state_.peg_pose * contacts_peg[i];
        Eigen::Vector3d tip_f = base.inverse() * tip_w;
        const double X = tip_f.x(), Y = tip_f.y();
        const auto& f = hp.finger;
        const double r2 = X * X + Y * Y;
        const double cqd = (r2 - f.l_p * f.l_p - f.l_d * f.l_d) / (2 * f.l_p * f.l_d);
        if (cqd < -1.0 || cqd > 1.0) {
            throw GraspInfeasible("grasp contact outside finger reach");
        }
        const double qd = std::acos(std::clamp(cqd, -1.0, 1.0));
        const double qp =
            std::atan2(Y, X) - std::atan2(f.l_d * std::sin(qd), f.l_p + f.l_d * std::cos(qd));
        if (qp < hand::kJointMin - 1e-9 || qp > hand::kJointMax + 1e-9 ||
            qd < hand::kJointMin - 1e-9 || qd > hand::kJointMax + 1e-9) {
            throw GraspInfeasible("grasp requires joints outside limits");
        }
        q0[i] = hand::JointPair(std::clamp(qp, hand::kJointMin, hand::kJointMax),
                                std::clamp(qd, hand::kJointMin, hand::kJointMax));
    }

    hand_ = std::make_unique<hand::Hand>(hp, q0, Eigen::Vector3d::Zero());
    grasped_ = true;
    object_disturbance_ = Pose::identity();
    const Pose x0 = hand_->object_pose();
    grasp_offset_ = x0.inverse() * (palm.inverse() * state_.peg_pose);

    Eigen::Vector3d centroid = (contacts_peg[0] + contacts_peg[1] + contacts_peg[2]) / 3.0;
    pivot_local_ = centroid;
    resolve();
}

void World::disturb(const std::string& kind, const Eigen::Vector3d& v) {
    if (kind == "move_hole") {
        state_.hole_pose = Pose(state_.hole_pose.quat(), state_.hole_pose.translation() + v);
        hole_.pose = state_.hole_pose;
    } else if (kind == "push_object") {
        if (grasped_) {
            object_disturbance_ =
                Pose(object_disturbance_.quat(), object_disturbance_.translation() + v);
        } else {
            state_.peg_cmd = Pose(state_.peg_cmd.quat(), state_.peg_cmd.translation() + v);
        }
    } else if (kind == "push_arm") {
        arm_.actual = Pose(arm_.actual.quat(), arm_.actual.translation() + v);
    } else {
        throw ConfigError("unknown disturbance kind: " + kind);
    }
    resolve();
}

void World::tilt_object(double angle_rad, double azimuth_rad) {
    if (!grasped_) return;
    Eigen::Vector3d axis(std::cos(azimuth_rad), std::sin(azimuth_rad), 0.0);
    Pose rot = Pose::from_axis_angle(axis, angle_rad);
    Pose about_pivot = Pose::from_translation(pivot_local_) * rot *
                       Pose::from_translation(-pivot_local_);
    object_disturbance_ = object_disturbance_ * about_pivot;
    resolve();
}

bool World::inserted() const { return check_inserted(state_, hole_); }

std::string World::state_line() const {
    std::ostringstream os;
    os.precision(17);
    const char* tag = state_.jammed ? "jammed" : (state_.contacts.empty() ? "free" : "contact");
    os << state_.clock << " " << tag << " " << serialize_pose(state_.peg_pose) << " "
       << serialize_pose(state_.hole_pose) << " " << state_.inserted_depth << " "
       << (state_.jammed ? 1 : 0);
    return os.str();
}

bool check_inserted(const WorldState& state, const geom::HoleGeometry& hole) {
    if (state.inserted_depth < 0.95 * hole.depth) return false;
    const Eigen::Vector3d peg_axis = state.peg_pose.rotation().col(2);
    const Eigen::Vector3d hole_axis = state.hole_pose.rotation().col(2);
    const double tilt = std::acos(std::clamp(peg_axis.dot(hole_axis), -1.0, 1.0));
    return tilt <= 2.0 * M_PI / 180.0;
}

}  // namespace pih::world
