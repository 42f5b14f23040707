#ifndef CMDIS_TRANSFORM_HPP
#define CMDIS_TRANSFORM_HPP

#include <cmath>

#include "cmdis/image.hpp"

namespace cmdis {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Row-major 3x3 homogeneous matrix acting on (x, y, 1) column vectors.
struct Mat3 {
  double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  static Mat3 identity() { return Mat3{}; }
  double at(int r, int c) const { return m[r][c]; }

  Vec2 apply(Vec2 p) const {
    return Vec2{m[0][0] * p.x + m[0][1] * p.y + m[0][2],
                m[1][0] * p.x + m[1][1] * p.y + m[1][2]};
  }

  friend Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 out;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        out.m[r][c] = a.m[r][0] * b.m[0][c] + a.m[r][1] * b.m[1][c] + a.m[r][2] * b.m[2][c];
    return out;
  }
};

// sin/cos in degrees, exact at multiples of 90 so right-angle transforms
// compose and invert without trigonometric dust.
double sin_deg(double deg);
double cos_deg(double deg);

// Normalizes an angle in degrees into (-180, 180].
double normalize_deg(double deg);

// Similarity transform theta = (alpha, fx, fy, tx, ty) mapping points as
// p' = T(t) * S(fx, fy) * R(alpha) * p (rotation first, about the origin).
//
// The anisotropic scale+rotation family is not closed under inversion
// (R(-a) * S(1/fx, 1/fy) has no S' * R' factorization unless fx == fy or
// alpha is a right angle), so `inverted` marks a transform whose action is
// the matrix inverse of its parameter form. invert() sets or clears the
// flag; double inversion restores the original parameters exactly.
struct SimilarityTransform {
  double alpha_deg = 0.0;
  double fx = 1.0;
  double fy = 1.0;
  double tx = 0.0;
  double ty = 0.0;
  bool inverted = false;
  // Set by estimate_from_masks when both regions lack a usable principal axis.
  bool degenerate_axis = false;

  Mat3 matrix() const;
  Vec2 apply(Vec2 p) const { return matrix().apply(p); }

  static SimilarityTransform make_identity() { return SimilarityTransform{}; }
  static SimilarityTransform make_translation(double tx, double ty) {
    SimilarityTransform t;
    t.tx = tx;
    t.ty = ty;
    return t;
  }
  static SimilarityTransform make(double alpha_deg, double fx, double fy, double tx,
                                  double ty) {
    return SimilarityTransform{alpha_deg, fx, fy, tx, ty, false, false};
  }
};

// Exact product T(t) * S(f) * R(alpha) of the parameter form (ignores the
// inverted flag); matrix() applies the flag on top of this.
Mat3 compose_matrix(const SimilarityTransform& t);

// Inverse transform: matrix(invert(t)) * matrix(t) == identity. Where the
// inverse stays in the parameter family (isotropic scale or right-angle
// rotation) canonical parameters are returned; otherwise the parameters are
// kept and the inverted flag is toggled.
SimilarityTransform invert(const SimilarityTransform& t);

struct PrincipalAxis {
  double ux = 1.0;  // unit direction, normalized so the angle lies in [0, 180)
  double uy = 0.0;
  bool degenerate = false;  // eigenvalues closer than 1e-6 relative
  double angle_deg() const { return std::atan2(uy, ux) * 180.0 / 3.14159265358979323846; }
};

// Dominant eigenvector of the pixel-set inertia matrix
// S = (1/N) * sum (p - mean)(p - mean)^T.
PrincipalAxis principal_axis(const PixelSet& pixels);

// Estimates the transform mapping region p1 onto region p2:
//   alpha   = difference of the principal-axis angles, with the 180-degree
//             ambiguity resolved by the higher mask overlap (IoU);
//   fx, fy  = bounding-box ratios after rotating p1 by alpha;
//   t       = centroid(p2) - S*R*centroid(p1), so centroids correspond.
// Pure integer translations are recovered exactly. When both regions have
// degenerate axes, alpha = 0 and the degenerate_axis flag is set.
SimilarityTransform estimate_from_masks(const PixelSet& p1, const PixelSet& p2);

// Training-time perturbation mimicking estimation error: alpha shifts by a
// uniform draw from {-5..5} degrees (step 1), fx and fy each by a uniform
// draw from {-0.10..0.10} (step 0.01); translation is untouched.
template <class Rng>
SimilarityTransform perturb(const SimilarityTransform& t, Rng& rng) {
  SimilarityTransform out = t;
  out.alpha_deg = normalize_deg(out.alpha_deg + static_cast<double>(rng.next_int(-5, 5)));
  out.fx += static_cast<double>(rng.next_int(-10, 10)) / 100.0;
  out.fy += static_cast<double>(rng.next_int(-10, 10)) / 100.0;
  require(out.fx > 0.0 && out.fy > 0.0, "perturb: scale left the positive range");
  return out;
}

// Near-rigid gate: |alpha| <= 15 degrees and |fx - 1|, |fy - 1| <= 0.1.
// Comparisons carry a 1e-12 guard so decimal grid values sitting exactly on
// a threshold (e.g. fx = 1.1) classify as near-rigid despite binary
// floating-point representation error.
bool is_near_rigid(const SimilarityTransform& t, double max_angle_deg = 15.0,
                   double max_scale_dev = 0.1);

}  // namespace cmdis

#endif
