#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pih/errors.hpp"
#include "pih/posemath.hpp"

namespace pih::geom {

using Vec2 = Eigen::Vector2d;

/// 2-D peg-face point cloud, millimetres. Valid clouds have at least three
/// non-collinear finite points (convex hull area > 0).
struct FaceCloud {
    std::vector<Vec2> points;

    void validate() const;  ///< throws DegenerateCloud / InvalidDimension
};

/// Loads "x y" pairs, one per line, '#' starts a comment.
FaceCloud load_face_cloud(const std::string& path);
void save_face_cloud(const FaceCloud& face, const std::string& path);

/// Convex hull (counter-clockwise, no repeated first point).
std::vector<Vec2> convex_hull(const std::vector<Vec2>& pts);
double polygon_area(const std::vector<Vec2>& poly);

/// Support extent: max over points of dot(p - center, dir).
double support(const std::vector<Vec2>& pts, const Vec2& center, const Vec2& dir);

/// Outward Minkowski dilation of the face boundary by `clearance`, sampled so
/// the support function widens by exactly the clearance in every direction
/// (sharp corners get arc fans).
FaceCloud dilate_face(const FaceCloud& face, double clearance);

struct PegGeometry {
    FaceCloud face;
    double height = 80.0;       ///< extrusion along the peg axis, mm
    double grasp_height = 40.0; ///< contact height h above the bottom face, 0 < h <= height

    void validate() const;
};

struct HoleGeometry {
    FaceCloud face;          ///< peg face dilated outward by clearance
    double clearance = 0.25; ///< mm, per side
    Pose pose;               ///< hole frame H: origin at the mouth center, z up
    double depth = 25.0;     ///< mm

    static HoleGeometry for_peg(const PegGeometry& peg, double clearance, const Pose& pose,
                                double depth);
};

/// PCA-derived edge frame of a face cloud.
struct ManipulationFrame {
    Pose T;          ///< object-centroid frame -> frame at m with x-axis pi1 (in-plane)
    Vec2 pi1;        ///< first principal axis, unit
    Vec2 pi2;        ///< second principal axis, unit, pi1 ⟂ pi2
    Vec2 m;          ///< outermost edge point
    double d_o = 0;  ///< projection extent along pi1, mm
    Vec2 centroid;   ///< F_c
};

struct InsertionParams {
    double beta0 = 0;    ///< initial object angle, rad
    double beta_f = 0;   ///< final alignment angle, rad
    double delta = 0;    ///< insertion height, mm
    double delta_c = 0;  ///< compliance-enabled insertion distance, mm
    double gamma = 0.5;  ///< alignment tolerance, mm
    double sigma = 1.0;  ///< servo step length, mm
};

/// Principal axes of the point covariance. pi1 carries the largest eigenvalue
/// and is oriented so max_f pi1·(f - F_c) >= |min_f pi1·(f - F_c)|; remaining
/// ties break toward positive x then positive y. Equal eigenvalues resolve to
/// pi1 = (1, 0).
struct PrincipalAxes {
    Vec2 pi1, pi2, centroid;
};
PrincipalAxes principal_axes(const FaceCloud& face);

ManipulationFrame manipulation_frame(const FaceCloud& face);

/// beta0 = atan(d_o / 2h), in (0, pi/2).
double beta0(double d_o, double h);

/// Largest final alignment angle: acos(d_o / d_h). Throws PegExceedsHole.
double beta_f_max(double d_o, double d_h);

/// delta = h (cos b0 + cos bf) + (d_o / 2)(sin b0 + sin bf).
double insertion_height(double h, double d_o, double beta0, double beta_f);

/// delta_c = delta - overshoot; the overshoot encodes deliberate premature
/// contact. Throws InvalidDimension when the result is not positive.
double compliant_depth(double delta, double overshoot);

}  // namespace pih::geom
