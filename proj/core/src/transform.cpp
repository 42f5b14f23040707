#include "cmdis/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace cmdis {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

double normalize_deg(double deg) {
  double a = std::fmod(deg, 360.0);
  if (a <= -180.0) a += 360.0;
  if (a > 180.0) a -= 360.0;
  return a;
}

double sin_deg(double deg) {
  double a = normalize_deg(deg);
  if (a == 0.0 || a == 180.0) return 0.0;
  if (a == 90.0) return 1.0;
  if (a == -90.0) return -1.0;
  return std::sin(a * kPi / 180.0);
}

double cos_deg(double deg) {
  double a = normalize_deg(deg);
  if (a == 0.0) return 1.0;
  if (a == 180.0) return -1.0;
  if (a == 90.0 || a == -90.0) return 0.0;
  return std::cos(a * kPi / 180.0);
}

Mat3 compose_matrix(const SimilarityTransform& t) {
  require(t.fx > 0.0 && t.fy > 0.0, "transform: scale factors must be positive");
  const double c = cos_deg(t.alpha_deg), s = sin_deg(t.alpha_deg);
  Mat3 h;
  h.m[0][0] = t.fx * c;
  h.m[0][1] = -t.fx * s;
  h.m[0][2] = t.tx;
  h.m[1][0] = t.fy * s;
  h.m[1][1] = t.fy * c;
  h.m[1][2] = t.ty;
  h.m[2][0] = 0.0;
  h.m[2][1] = 0.0;
  h.m[2][2] = 1.0;
  return h;
}

namespace {

// Closed-form inverse of the parameter form: R(-a) * S(1/fx, 1/fy) * T(-t).
Mat3 inverse_matrix(const SimilarityTransform& t) {
  require(t.fx > 0.0 && t.fy > 0.0, "transform: scale factors must be positive");
  const double c = cos_deg(t.alpha_deg), s = sin_deg(t.alpha_deg);
  Mat3 h;
  h.m[0][0] = c / t.fx;
  h.m[0][1] = s / t.fy;
  h.m[0][2] = -(c * t.tx / t.fx + s * t.ty / t.fy);
  h.m[1][0] = -s / t.fx;
  h.m[1][1] = c / t.fy;
  h.m[1][2] = s * t.tx / t.fx - c * t.ty / t.fy;
  h.m[2][0] = 0.0;
  h.m[2][1] = 0.0;
  h.m[2][2] = 1.0;
  return h;
}

}  // namespace

Mat3 SimilarityTransform::matrix() const {
  return inverted ? inverse_matrix(*this) : compose_matrix(*this);
}

SimilarityTransform invert(const SimilarityTransform& t) {
  require(t.fx > 0.0 && t.fy > 0.0, "invert: scale factors must be positive");
  SimilarityTransform out = t;
  if (t.inverted) {
    out.inverted = false;
    return out;
  }
  const double a = normalize_deg(t.alpha_deg);
  const double c = cos_deg(a), s = sin_deg(a);
  if (t.fx == t.fy || s == 0.0 || c == 0.0) {
    // The inverse stays in the parameter family; pick canonical parameters.
    Mat3 inv = inverse_matrix(t);
    if (s == 0.0) {
      // alpha in {0, 180}: scales invert in place, angle unchanged.
      out.alpha_deg = a;
      out.fx = 1.0 / t.fx;
      out.fy = 1.0 / t.fy;
    } else if (c == 0.0) {
      // alpha in {90, -90}: scales invert and swap axes.
      out.alpha_deg = -a;
      out.fx = 1.0 / t.fy;
      out.fy = 1.0 / t.fx;
    } else {
      out.alpha_deg = normalize_deg(-a);
      out.fx = 1.0 / t.fx;
      out.fy = 1.0 / t.fy;
    }
    out.tx = inv.m[0][2];
    out.ty = inv.m[1][2];
    return out;
  }
  out.inverted = true;
  return out;
}

PrincipalAxis principal_axis(const PixelSet& pixels) {
  require(!pixels.empty(), "principal_axis: empty pixel set");
  // Moments are accumulated as exact integers relative to the bounding-box
  // corner, so translated copies of a shape produce bit-identical inertia
  // matrices (and therefore an estimated rotation of exactly zero).
  const Box b = bounding_box(pixels);
  long long n = static_cast<long long>(pixels.size());
  long long isx = 0, isy = 0, isxx = 0, isxy = 0, isyy = 0;
  for (const auto& p : pixels) {
    const long long qx = p.x - b.x0, qy = p.y - b.y0;
    isx += qx;
    isy += qy;
    isxx += qx * qx;
    isxy += qx * qy;
    isyy += qy * qy;
  }
  const double nn = static_cast<double>(n);
  const double cx = static_cast<double>(isx) / nn, cy = static_cast<double>(isy) / nn;
  const double sxx = static_cast<double>(isxx) / nn - cx * cx;
  const double sxy = static_cast<double>(isxy) / nn - cx * cy;
  const double syy = static_cast<double>(isyy) / nn - cy * cy;

  Eigen::Matrix2d inertia;
  inertia << sxx, sxy, sxy, syy;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(inertia);
  // Eigenvalues come back in increasing order.
  const double lo = solver.eigenvalues()(0), hi = solver.eigenvalues()(1);

  PrincipalAxis axis;
  axis.degenerate = hi <= 0.0 || (hi - lo) < 1e-6 * hi;
  Eigen::Vector2d u = solver.eigenvectors().col(1);
  double ux = u(0), uy = u(1);
  if (axis.degenerate && hi <= 0.0) {
    ux = 1.0;
    uy = 0.0;
  }
  // Canonical orientation: angle in [0, 180).
  if (uy < 0.0 || (uy == 0.0 && ux < 0.0)) {
    ux = -ux;
    uy = -uy;
  }
  axis.ux = ux;
  axis.uy = uy;
  return axis;
}

namespace {

struct CentroidSums {
  double sx = 0.0, sy = 0.0;
  double n = 0.0;
};

CentroidSums sums_of(const PixelSet& pixels) {
  CentroidSums s;
  for (const auto& p : pixels) {
    s.sx += p.x;
    s.sy += p.y;
  }
  s.n = static_cast<double>(pixels.size());
  return s;
}

// Real-valued bounding-box dimensions (max - min + 1) of p rotated by alpha.
// The rotation center is irrelevant for the dimensions; rotate about (0,0).
void rotated_bbox_dims(const PixelSet& pixels, double alpha_deg, double& w, double& h) {
  const double c = cos_deg(alpha_deg), s = sin_deg(alpha_deg);
  double minx = std::numeric_limits<double>::infinity(), maxx = -minx;
  double miny = minx, maxy = -minx;
  for (const auto& p : pixels) {
    const double x = c * p.x - s * p.y;
    const double y = s * p.x + c * p.y;
    minx = std::min(minx, x);
    maxx = std::max(maxx, x);
    miny = std::min(miny, y);
    maxy = std::max(maxy, y);
  }
  w = maxx - minx + 1.0;
  h = maxy - miny + 1.0;
}

// Translation chosen so centroids correspond: t = c2 - A*c1, computed as a
// single fraction so integer translations come out exact.
void centroid_translation(const CentroidSums& s1, const CentroidSums& s2, const Mat3& a,
                          double& tx, double& ty) {
  const double ax = a.m[0][0] * s1.sx + a.m[0][1] * s1.sy;
  const double ay = a.m[1][0] * s1.sx + a.m[1][1] * s1.sy;
  tx = (s1.n * s2.sx - s2.n * ax) / (s1.n * s2.n);
  ty = (s1.n * s2.sy - s2.n * ay) / (s1.n * s2.n);
}

SimilarityTransform candidate_transform(double alpha_deg, double fx, double fy,
                                        const CentroidSums& s1, const CentroidSums& s2) {
  SimilarityTransform t;
  t.alpha_deg = normalize_deg(alpha_deg);
  t.fx = fx;
  t.fy = fy;
  Mat3 a = compose_matrix(SimilarityTransform::make(t.alpha_deg, fx, fy, 0.0, 0.0));
  centroid_translation(s1, s2, a, t.tx, t.ty);
  return t;
}

// Overlap score between p1 mapped through `t` (forward nearest-grid mapping)
// and p2: |mapped AND p2| / |mapped OR p2|. Forward mapping leaves holes at
// upscales; both orientation candidates are penalized equally, so the
// comparison between them remains sound.
double forward_overlap(const PixelSet& p1, const PixelSet& p2, const SimilarityTransform& t) {
  const Mat3 h = t.matrix();
  long long minx = std::numeric_limits<long long>::max(), maxx = std::numeric_limits<long long>::min();
  long long miny = minx, maxy = maxx;
  std::vector<std::pair<long long, long long>> mapped;
  mapped.reserve(p1.size());
  for (const auto& p : p1) {
    Vec2 q = h.apply(Vec2{static_cast<double>(p.x), static_cast<double>(p.y)});
    long long x = std::llround(q.x), y = std::llround(q.y);
    mapped.emplace_back(x, y);
    minx = std::min(minx, x);
    maxx = std::max(maxx, x);
    miny = std::min(miny, y);
    maxy = std::max(maxy, y);
  }
  for (const auto& p : p2) {
    minx = std::min<long long>(minx, p.x);
    maxx = std::max<long long>(maxx, p.x);
    miny = std::min<long long>(miny, p.y);
    maxy = std::max<long long>(maxy, p.y);
  }
  const long long w = maxx - minx + 1, hgt = maxy - miny + 1;
  require(w > 0 && hgt > 0 && w * hgt < (1LL << 28), "forward_overlap: region too large");
  std::vector<std::uint8_t> grid(static_cast<std::size_t>(w * hgt), 0);
  auto idx = [&](long long x, long long y) {
    return static_cast<std::size_t>((y - miny) * w + (x - minx));
  };
  for (const auto& [x, y] : mapped) grid[idx(x, y)] |= 1;
  for (const auto& p : p2) grid[idx(p.x, p.y)] |= 2;
  std::size_t inter = 0, uni = 0;
  for (std::uint8_t v : grid) {
    if (v == 3) ++inter;
    if (v != 0) ++uni;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

SimilarityTransform estimate_from_masks(const PixelSet& p1, const PixelSet& p2) {
  require(!p1.empty() && !p2.empty(), "estimate_from_masks: empty region");

  const CentroidSums s1 = sums_of(p1), s2 = sums_of(p2);
  const PrincipalAxis a1 = principal_axis(p1), a2 = principal_axis(p2);

  const bool degenerate = a1.degenerate && a2.degenerate;
  const double alpha_raw = degenerate ? 0.0 : a2.angle_deg() - a1.angle_deg();

  // Bounding-box scale after undoing the rotation on p1. Both orientation
  // candidates (alpha, alpha + 180) give identical dimensions.
  double w1 = 0.0, h1 = 0.0;
  rotated_bbox_dims(p1, alpha_raw, w1, h1);
  const Box b2 = bounding_box(p2);
  const double fx = b2.width / w1;
  const double fy = b2.height / h1;

  SimilarityTransform first = candidate_transform(alpha_raw, fx, fy, s1, s2);
  if (degenerate) {
    first.degenerate_axis = true;
    return first;
  }
  SimilarityTransform flipped = candidate_transform(alpha_raw + 180.0, fx, fy, s1, s2);
  const double score_first = forward_overlap(p1, p2, first);
  const double score_flipped = forward_overlap(p1, p2, flipped);
  return score_flipped > score_first ? flipped : first;
}

bool is_near_rigid(const SimilarityTransform& t, double max_angle_deg, double max_scale_dev) {
  constexpr double kGuard = 1e-12;
  const bool non_rigid = std::abs(normalize_deg(t.alpha_deg)) > max_angle_deg + kGuard ||
                         std::abs(t.fx - 1.0) > max_scale_dev + kGuard ||
                         std::abs(t.fy - 1.0) > max_scale_dev + kGuard;
  return !non_rigid;
}

}  // namespace cmdis
