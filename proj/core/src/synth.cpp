#include "cmdis/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstdio>
#include <fstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "cmdis/error.hpp"
#include "cmdis/image_io.hpp"
#include "cmdis/morphology.hpp"
#include "cmdis/parallel.hpp"
#include "cmdis/warp.hpp"

namespace cmdis {

using nlohmann::json;

const char* kind_name(TransformKind kind) {
  switch (kind) {
    case TransformKind::rigid: return "rigid";
    case TransformKind::rotation: return "rotation";
    case TransformKind::resize: return "resize";
    case TransformKind::rotation_resize: return "rotation_resize";
    case TransformKind::resize_rotation: return "resize_rotation";
  }
  throw Error("kind_name: unknown transform kind");
}

TransformKind kind_from_name(const std::string& name) {
  for (TransformKind k : {TransformKind::rigid, TransformKind::rotation, TransformKind::resize,
                          TransformKind::rotation_resize, TransformKind::resize_rotation}) {
    if (name == kind_name(k)) return k;
  }
  throw Error("unknown transform kind \"" + name + "\"");
}

void GenConfig::validate() const {
  require(image_size >= 16 && image_size % 2 == 0, "gen config: image_size must be even and >= 16");
  const int half = image_size / 2;
  require(source_box >= 64, "gen config: source_box must be at least the 64-pixel patch size");
  require(rigid_source_box >= 64,
          "gen config: rigid_source_box must be at least the 64-pixel patch size");
  require(source_box + 2 <= half, "gen config: source_box must fit inside a quadrant with a margin");
  require(rigid_source_box + 2 <= half,
          "gen config: rigid_source_box must fit inside a quadrant with a margin");
  require(vertex_count >= 3, "gen config: vertex_count must be at least 3");
  require(pp_probability >= 0.0 && pp_probability <= 1.0,
          "gen config: pp_probability must lie in [0, 1]");
  require(!kinds.empty(), "gen config: kinds must not be empty");
  // A target is centered on a quadrant center, so its worst-case half
  // extent (polygon box, scaled by the 2.0 grid maximum, rotated to the
  // diagonal) must fit inside a quadrant with room for the margins;
  // otherwise some draws could never be placed.
  for (TransformKind k : kinds) {
    const double b = k == TransformKind::rigid ? rigid_source_box : source_box;
    double extent = 0.0;
    switch (k) {
      case TransformKind::rigid: extent = b / 2.0; break;
      case TransformKind::rotation: extent = b * std::numbers::sqrt2 / 2.0; break;
      case TransformKind::resize: extent = b; break;
      case TransformKind::rotation_resize:
      case TransformKind::resize_rotation: extent = b * std::numbers::sqrt2; break;
    }
    require(extent + 2.0 <= image_size / 4.0,
            std::string("gen config: image_size too small to place ") + kind_name(k) +
                " targets (max half-extent " + std::to_string(extent) + ")");
  }
  require(blend.highpass_window >= 3 && blend.highpass_window % 2 == 1,
          "gen config: highpass_window must be odd and >= 3");
  require(blend.dilate_iterations >= 0, "gen config: dilate_iterations must be >= 0");
  require(!blend.average_windows.empty(), "gen config: average_windows must not be empty");
  for (int w : blend.average_windows)
    require(w >= 3 && w % 2 == 1, "gen config: average windows must be odd and >= 3");
}

const std::vector<int>& rotation_grid_deg() {
  static const std::vector<int> grid = [] {
    std::vector<int> g;
    for (int a = 2; a <= 180; a += 2) g.push_back(a);
    return g;
  }();
  return grid;
}

const std::vector<double>& resize_grid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g;
    for (int k = 50; k <= 200; ++k) g.push_back(k / 100.0);
    return g;
  }();
  return grid;
}

bool on_rotation_grid(double alpha_deg) {
  for (int a : rotation_grid_deg())
    if (std::abs(alpha_deg - a) < 1e-9) return true;
  return false;
}

bool on_resize_grid(double f) {
  for (double g : resize_grid())
    if (std::abs(f - g) < 1e-12) return true;
  return false;
}

std::vector<PostProcRow> postproc_table(double pp_probability) {
  require(pp_probability >= 0.0 && pp_probability <= 1.0,
          "postproc_table: probability must lie in [0, 1]");
  const double scale = pp_probability / 0.5;
  std::vector<PostProcRow> rows;
  rows.push_back({FilterSpec::make_identity(), 1.0 - pp_probability, false});
  auto add = [&](FilterSpec spec, double base, bool jpeg = false) {
    rows.push_back({spec, base * scale, jpeg});
  };
  for (double sigma : {0.5, 1.0, 1.5, 2.0}) add(FilterSpec::make_gaussian(sigma), 1.0 / 60.0);
  add(FilterSpec::make_average(3), 1.0 / 60.0);
  add(FilterSpec::make_unsharp(), 1.0 / 60.0);
  add(FilterSpec::make_adaptive_denoise(3), 1.0 / 20.0);
  add(FilterSpec::make_adaptive_denoise(5), 1.0 / 20.0);
  add(FilterSpec::make_noise(0.001), 1.0 / 10.0);
  add(FilterSpec::make_stretch(0.02, 1.0), 1.0 / 30.0);
  add(FilterSpec::make_stretch(0.05, 0.8), 1.0 / 30.0);
  add(FilterSpec::make_equalize(), 1.0 / 30.0);
  add(FilterSpec::make_jpeg(90), 1.0 / 10.0, true);  // quality redrawn on selection
  return rows;
}

RasterImage procedural_background(int size, RngStream& rng) {
  require(size > 0, "procedural_background: size must be positive");
  RasterImage img(size, size);

  // directional gradient base
  double gx = rng.next_unit() * 2.0 - 1.0;
  double gy = rng.next_unit() * 2.0 - 1.0;
  double base[3], span[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 0.35 + 0.3 * rng.next_unit();
    span[c] = 0.1 * (rng.next_unit() - 0.5);
  }
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double g = (gx * x + gy * y) / size;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = base[c] + span[c] * g;
    }
  }

  // value-noise octaves: one scalar field per octave, mixed into the
  // channels with per-octave weights so the channels stay correlated.
  // a near-flat octave spectrum with real energy at 2 px and per-pixel
  // grain: copy-move scoring relies on resampling losses that only show up
  // on high-frequency content, and region crops compare content from two
  // image sites, so large low-frequency offsets between distant sites must
  // not drown the fine-texture signal
  const int cells[5] = {128, 32, 8, 2, 1};
  const double amps[5] = {0.12, 0.10, 0.08, 0.07, 0.06};
  for (int o = 0; o < 5; ++o) {
    const int cell = cells[o];
    const int n = size / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(n) * n);
    for (double& v : grid) v = rng.next_unit() * 2.0 - 1.0;
    double w[3];
    for (int c = 0; c < 3; ++c) w[c] = amps[o] * (0.6 + 0.8 * rng.next_unit());
    const double inv = 1.0 / cell;
    for (int y = 0; y < size; ++y) {
      const int cy = y / cell;
      const double fy = (y - cy * cell) * inv;
      const double* row0 = grid.data() + static_cast<std::size_t>(cy) * n;
      const double* row1 = row0 + n;
      for (int x = 0; x < size; ++x) {
        const int cx = x / cell;
        const double fx = (x - cx * cell) * inv;
        const double top = row0[cx] + (row0[cx + 1] - row0[cx]) * fx;
        const double bot = row1[cx] + (row1[cx + 1] - row1[cx]) * fx;
        const double v = top + (bot - top) * fy;
        double* px = &img.at(x, y, 0);
        px[0] += w[0] * v;
        px[1] += w[1] * v;
        px[2] += w[2] * v;
      }
    }
  }
  img.clamp01();
  return img;
}

namespace {

Box quadrant_box(int size, int q) {
  const int half = size / 2;
  return Box{(q % 2) * half, (q / 2) * half, half, half};
}

Vec2 quadrant_center(int size, int q) {
  Box b = quadrant_box(size, q);
  return Vec2{b.x0 + (b.width - 1) / 2.0, b.y0 + (b.height - 1) / 2.0};
}

double cross3(Vec2 o, Vec2 a, Vec2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double polygon_area(const std::vector<Vec2>& poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return std::abs(s) / 2.0;
}

}  // namespace

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(),
            [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Vec2> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross3(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross3(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

PixelSet rasterize_convex_polygon(const std::vector<Vec2>& hull) {
  require(hull.size() >= 3, "rasterize_convex_polygon: need at least three vertices");
  double minx = hull[0].x, maxx = hull[0].x, miny = hull[0].y, maxy = hull[0].y;
  for (const Vec2& v : hull) {
    minx = std::min(minx, v.x);
    maxx = std::max(maxx, v.x);
    miny = std::min(miny, v.y);
    maxy = std::max(maxy, v.y);
  }
  // the point test uses the hull's own orientation, so either winding works
  double orient = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    orient += a.x * b.y - b.x * a.y;
  }
  const double sign = orient >= 0.0 ? 1.0 : -1.0;
  PixelSet out;
  for (int y = static_cast<int>(std::ceil(miny - 1e-9));
       y <= static_cast<int>(std::floor(maxy + 1e-9)); ++y) {
    for (int x = static_cast<int>(std::ceil(minx - 1e-9));
         x <= static_cast<int>(std::floor(maxx + 1e-9)); ++x) {
      bool inside = true;
      for (std::size_t i = 0; i < hull.size() && inside; ++i) {
        const Vec2& a = hull[i];
        const Vec2& b = hull[(i + 1) % hull.size()];
        if (sign * cross3(a, b, Vec2{static_cast<double>(x), static_cast<double>(y)}) < -1e-9)
          inside = false;
      }
      if (inside) out.push_back({x, y});
    }
  }
  return out;
}

PixelSet sample_convex_polygon(int box, int vertex_count, RngStream& rng) {
  require(box >= 64, "sample_convex_polygon: box must be at least the 64-pixel patch size");
  require(vertex_count >= 3, "sample_convex_polygon: need at least three vertices");
  for (int attempt = 0;; ++attempt) {
    require(attempt < 64, "sample_convex_polygon: could not sample a usable polygon");
    std::vector<Vec2> pts(static_cast<std::size_t>(vertex_count));
    for (Vec2& v : pts) v = Vec2{rng.next_unit() * box, rng.next_unit() * box};
    std::vector<Vec2> hull = convex_hull(std::move(pts));
    if (hull.size() < 3 || polygon_area(hull) < 25.0) continue;
    PixelSet raster = rasterize_convex_polygon(hull);
    if (!raster.empty()) return raster;
  }
}

namespace {

Vec2 centroid(const PixelSet& pixels) {
  double sx = 0.0, sy = 0.0;
  for (const PixelCoord& p : pixels) {
    sx += p.x;
    sy += p.y;
  }
  return Vec2{sx / pixels.size(), sy / pixels.size()};
}

// Pixels whose 5x5 (highpass_window) neighbourhood over the target mask is
// not constant, dilated dilate_iterations times: the blending band around
// the pasted boundary. The mask is treated as zero beyond the frame.
BinaryMask boundary_band(const BinaryMask& target, int window, int iterations) {
  const int r = window / 2;
  const int pad = r + iterations + 1;
  Box bb = bounding_box(target);
  const int x0 = std::max(0, bb.x0 - pad);
  const int y0 = std::max(0, bb.y0 - pad);
  const int x1 = std::min(target.width(), bb.x1() + pad);
  const int y1 = std::min(target.height(), bb.y1() + pad);
  const int w = x1 - x0, h = y1 - y0;

  // integral image of the cropped mask
  std::vector<int> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  auto I = [&](int x, int y) -> int& { return integral[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      I(x + 1, y + 1) = (target.at(x0 + x, y0 + y) ? 1 : 0) + I(x, y + 1) + I(x + 1, y) - I(x, y);

  const int full = window * window;
  BinaryMask band(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int ax = std::max(0, x - r), ay = std::max(0, y - r);
      const int bx = std::min(w, x + r + 1), by = std::min(h, y + r + 1);
      const int sum = I(bx, by) - I(ax, by) - I(bx, ay) + I(ax, ay);
      band.set(x, y, sum > 0 && sum < full);
    }
  }
  band = dilate3x3(band, iterations);

  BinaryMask out(target.width(), target.height());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (band.at(x, y)) out.set(x0 + x, y0 + y, true);
  return out;
}

struct DrawnTransform {
  SimilarityTransform total;
  SimilarityTransform step1, step2;  // meaningful only when two_pass
  bool two_pass = false;
  bool resize_first = false;
};

// translation putting the centroid image A*c at the quadrant center
SimilarityTransform with_centroid_at(double alpha, double fx, double fy, Vec2 c, Vec2 qc) {
  Vec2 ac = compose_matrix(SimilarityTransform::make(alpha, fx, fy, 0.0, 0.0)).apply(c);
  return SimilarityTransform::make(alpha, fx, fy, qc.x - ac.x, qc.y - ac.y);
}

DrawnTransform draw_transform(TransformKind kind, RngStream& rng, Vec2 c1, Vec2 qc) {
  const auto& rot = rotation_grid_deg();
  const auto& res = resize_grid();
  DrawnTransform d;
  switch (kind) {
    case TransformKind::rigid:
      d.total = SimilarityTransform::make_translation(std::round(qc.x - c1.x),
                                                      std::round(qc.y - c1.y));
      break;
    case TransformKind::rotation: {
      double a = rot[rng.next_below(rot.size())];
      d.total = with_centroid_at(a, 1.0, 1.0, c1, qc);
      break;
    }
    case TransformKind::resize: {
      // a single factor applied to both axes; anisotropic factors only arise
      // from estimation and from training-time parameter jitter
      double f = res[rng.next_below(res.size())];
      d.total = with_centroid_at(0.0, f, f, c1, qc);
      break;
    }
    case TransformKind::rotation_resize: {
      // rotate about the source centroid, then scale and translate
      double a = rot[rng.next_below(rot.size())];
      double f = res[rng.next_below(res.size())];
      d.step1 = with_centroid_at(a, 1.0, 1.0, c1, c1);
      d.step2 = with_centroid_at(0.0, f, f, c1, qc);
      d.total = with_centroid_at(a, f, f, c1, qc);
      d.two_pass = true;
      break;
    }
    case TransformKind::resize_rotation: {
      // scale about the source centroid, then rotate and translate. The
      // scale is isotropic: scale-then-rotate with distinct axis factors has
      // no T*S*R parameter form, so it could not be recorded as a single
      // ground-truth transform.
      double f = res[rng.next_below(res.size())];
      double a = rot[rng.next_below(rot.size())];
      d.step1 = with_centroid_at(0.0, f, f, c1, c1);
      d.step2 = with_centroid_at(a, 1.0, 1.0, c1, qc);
      d.total = with_centroid_at(a, f, f, c1, qc);
      d.two_pass = true;
      d.resize_first = true;
      break;
    }
  }
  return d;
}

bool box_inside(const Box& b, int size, int margin) {
  return b.x0 >= margin && b.y0 >= margin && b.x1() <= size - margin && b.y1() <= size - margin;
}

bool all_valid(const BinaryMask& validity) {
  return validity.count() == static_cast<std::size_t>(validity.width()) * validity.height();
}

// target pixels must keep an empty 8-neighbourhood gap from the source so
// the two regions never merge into one connected component
bool clear_of_source(const PixelSet& target, const BinaryMask& source_mask) {
  const int w = source_mask.width(), h = source_mask.height();
  for (const PixelCoord& p : target) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = p.x + dx, y = p.y + dy;
        if (x >= 0 && y >= 0 && x < w && y < h && source_mask.at(x, y)) return false;
      }
    }
  }
  return true;
}

bool covers(const BinaryMask& validity, const Box& box, const PixelSet& pixels) {
  for (const PixelCoord& p : pixels)
    if (!validity.at(p.x - box.x0, p.y - box.y0)) return false;
  return true;
}

}  // namespace

ForgeryRecord generate_forgery(const RasterImage& background, const GenConfig& cfg,
                               RngStream& rng, std::string id) {
  cfg.validate();
  const int size = cfg.image_size;
  require(background.width() >= size && background.height() >= size,
          "generate_forgery: background smaller than the output frame");

  // crop window (drawn even when the background fits exactly, to keep the
  // draw sequence independent of the background dimensions)
  const int ox = static_cast<int>(rng.next_below(background.width() - size + 1));
  const int oy = static_cast<int>(rng.next_below(background.height() - size + 1));
  RasterImage img = background.crop(Box{ox, oy, size, size});

  const TransformKind kind = cfg.kinds[rng.next_below(cfg.kinds.size())];
  const int box = kind == TransformKind::rigid ? cfg.rigid_source_box : cfg.source_box;
  const int half = size / 2;
  const Box frame{0, 0, size, size};

  // source + transform + target placement; the whole geometry is redrawn
  // until the target lands fully inside the frame, clear of the source, and
  // fully interpolated (a source too close to the frame edge can make the
  // two-pass intermediate unplaceable for every angle, so the source
  // placement takes part in the retries)
  DrawnTransform drawn;
  PixelSet p1, p2;
  BinaryMask source_mask;
  WarpedPatch content;
  int committed_sq = -1;
  int committed_tq = -1;
  for (int attempt = 0;; ++attempt) {
    require(attempt < 64, "generate_forgery: could not place the forgery");
    const int sq = static_cast<int>(rng.next_below(4));
    const Box qb = quadrant_box(size, sq);

    // source polygon, placed uniformly inside the source quadrant
    p1 = sample_convex_polygon(box, cfg.vertex_count, rng);
    const int px = qb.x0 + 1 + static_cast<int>(rng.next_below(half - box - 1));
    const int py = qb.y0 + 1 + static_cast<int>(rng.next_below(half - box - 1));
    for (PixelCoord& p : p1) p = PixelCoord{p.x + px, p.y + py};
    source_mask = mask_from_pixels(size, size, p1);
    const Vec2 c1 = centroid(p1);

    int tq = static_cast<int>(rng.next_below(3));
    if (tq >= sq) ++tq;  // uniform over the three other quadrants
    const Vec2 qc = quadrant_center(size, tq);
    drawn = draw_transform(kind, rng, c1, qc);

    BinaryMask target_mask(size, size);
    if (!drawn.two_pass) {
      target_mask = warp_mask(source_mask, drawn.total, frame);
      if (target_mask.count() == 0) continue;
      Box tb = bounding_box(target_mask);
      if (!box_inside(tb, size, 1)) continue;
      content = warp_image(img, drawn.total, tb);
    } else {
      // first pass about the source centroid, second pass onto the target
      BinaryMask mid = warp_mask(source_mask, drawn.step1, frame);
      if (mid.count() == 0) continue;
      Box mb = bounding_box(mid);
      Box support{mb.x0 - 2, mb.y0 - 2, mb.width + 4, mb.height + 4};
      if (!box_inside(support, size, 0)) continue;
      WarpedPatch w1 = warp_image(img, drawn.step1, support);
      if (!all_valid(w1.validity)) continue;
      target_mask = warp_mask(mid, drawn.step2, frame);
      if (target_mask.count() == 0) continue;
      Box tb = bounding_box(target_mask);
      if (!box_inside(tb, size, 1)) continue;
      content = warp_image(w1.pixels, drawn.step2, tb,
                           Vec2{static_cast<double>(support.x0), static_cast<double>(support.y0)});
    }
    PixelSet target_pixels = pixels_from_mask(target_mask);
    if (!clear_of_source(target_pixels, source_mask)) continue;
    if (!covers(content.validity, content.box, target_pixels)) continue;
    p2 = std::move(target_pixels);
    committed_sq = sq;
    committed_tq = tq;
    break;
  }

  // paste the target content
  for (const PixelCoord& p : p2)
    for (int c = 0; c < 3; ++c)
      img.at(p.x, p.y, c) = content.pixels.at(p.x - content.box.x0, p.y - content.box.y0, c);

  BinaryMask target_mask = mask_from_pixels(size, size, p2);

  // boundary blending around the pasted region
  if (cfg.blend.enabled) {
    const int w = cfg.blend.average_windows[rng.next_below(cfg.blend.average_windows.size())];
    BinaryMask band =
        boundary_band(target_mask, cfg.blend.highpass_window, cfg.blend.dilate_iterations);
    img = average_filter_at(img, w, band);
  }

  // global post-processing
  std::vector<FilterSpec> applied;
  {
    const std::vector<PostProcRow> rows = postproc_table(cfg.pp_probability);
    const double r = rng.next_unit();
    double acc = 0.0;
    const PostProcRow* pick = &rows.front();
    for (const PostProcRow& row : rows) {
      acc += row.probability;
      if (r < acc) {
        pick = &row;
        break;
      }
    }
    if (pick->spec.kind != FilterKind::identity) {
      FilterSpec spec = pick->spec;
      if (pick->draw_jpeg_quality)
        spec.jpeg_quality = 55 + 5 * static_cast<int>(rng.next_below(10));
      spec.validate();
      img = apply_filter(img, spec, &rng);
      applied.push_back(spec);
    }
  }

  ForgeryRecord rec;
  rec.id = std::move(id);
  rec.kind = kind;
  rec.resize_applied_first = drawn.resize_first;
  rec.transform = drawn.total;
  rec.image = std::move(img);
  rec.map = LabelMap(size, size);
  for (const PixelCoord& p : p1) rec.map.set(p.x, p.y, RegionLabel::source);
  for (const PixelCoord& p : p2) rec.map.set(p.x, p.y, RegionLabel::target);
  rec.mask = rec.map.foreground();
  rec.postprocessing = std::move(applied);
  rec.background_ref = "external";
  rec.source_quadrant = committed_sq;
  rec.target_quadrant = committed_tq;
  return rec;
}

ForgeryRecord generate_record(const GenConfig& cfg, std::uint64_t index) {
  cfg.validate();
  RngStream rng = RngStream::derive(cfg.seed, {index});
  RasterImage bg = procedural_background(cfg.image_size, rng);
  ForgeryRecord rec = generate_forgery(bg, cfg, rng, record_id_for_index(index));
  rec.background_ref = "procedural";
  rec.seed = cfg.seed;
  rec.record_index = index;
  return rec;
}

std::string record_id_for_index(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "r%06llu", static_cast<unsigned long long>(index));
  return buf;
}

// ---- dataset io ----

Box ForgeryRecord::source_bbox() const { return bounding_box(map.mask_of(RegionLabel::source)); }
Box ForgeryRecord::target_bbox() const { return bounding_box(map.mask_of(RegionLabel::target)); }

std::vector<std::string> ForgeryRecord::postprocessing_names() const {
  std::vector<std::string> names;
  names.reserve(postprocessing.size());
  for (const FilterSpec& spec : postprocessing) names.push_back(spec.name());
  return names;
}

namespace {

const char* filter_kind_name(FilterKind kind) {
  switch (kind) {
    case FilterKind::identity: return "identity";
    case FilterKind::gaussian_lowpass: return "gaussian_lowpass";
    case FilterKind::average: return "average";
    case FilterKind::unsharp: return "unsharp";
    case FilterKind::adaptive_denoise: return "adaptive_denoise";
    case FilterKind::gaussian_noise: return "gaussian_noise";
    case FilterKind::hist_stretch: return "hist_stretch";
    case FilterKind::hist_equalize: return "hist_equalize";
    case FilterKind::jpeg: return "jpeg";
  }
  throw Error("filter_kind_name: unknown filter kind");
}

FilterKind filter_kind_from_name(const std::string& name) {
  for (FilterKind k : {FilterKind::identity, FilterKind::gaussian_lowpass, FilterKind::average,
                       FilterKind::unsharp, FilterKind::adaptive_denoise,
                       FilterKind::gaussian_noise, FilterKind::hist_stretch,
                       FilterKind::hist_equalize, FilterKind::jpeg}) {
    if (name == filter_kind_name(k)) return k;
  }
  throw Error("unknown filter kind \"" + name + "\"");
}

const json& field(const json& j, const char* name, const char* ctx) {
  auto it = j.find(name);
  require(it != j.end(), std::string(ctx) + ": missing field \"" + name + "\"");
  return *it;
}

template <class T>
T field_as(const json& j, const char* name, const char* ctx) {
  try {
    return field(j, name, ctx).get<T>();
  } catch (const json::exception&) {
    throw Error(std::string(ctx) + ": field \"" + name + "\" has the wrong type");
  }
}

json transform_to_json(const SimilarityTransform& t) {
  return json{{"alpha_deg", t.alpha_deg}, {"fx", t.fx}, {"fy", t.fy}, {"tx", t.tx}, {"ty", t.ty}};
}

SimilarityTransform transform_from_json(const json& j, const char* ctx) {
  return SimilarityTransform::make(
      field_as<double>(j, "alpha_deg", ctx), field_as<double>(j, "fx", ctx),
      field_as<double>(j, "fy", ctx), field_as<double>(j, "tx", ctx),
      field_as<double>(j, "ty", ctx));
}

json box_to_json(const Box& b) { return json::array({b.x0, b.y0, b.width, b.height}); }

json filter_to_json(const FilterSpec& spec) {
  json params = json::object();
  params["kind"] = filter_kind_name(spec.kind);
  switch (spec.kind) {
    case FilterKind::identity:
    case FilterKind::unsharp:
    case FilterKind::hist_equalize:
      break;
    case FilterKind::gaussian_lowpass:
      params["sigma"] = spec.sigma;
      break;
    case FilterKind::average:
    case FilterKind::adaptive_denoise:
      params["window"] = spec.window;
      break;
    case FilterKind::gaussian_noise:
      params["variance"] = spec.noise_variance;
      break;
    case FilterKind::hist_stretch:
      params["saturation"] = spec.saturation;
      params["gamma"] = spec.gamma;
      break;
    case FilterKind::jpeg:
      params["quality"] = spec.jpeg_quality;
      break;
  }
  return json{{"name", spec.name()}, {"params", params}};
}

FilterSpec filter_from_json(const json& j, const char* ctx) {
  const json& params = field(j, "params", ctx);
  const FilterKind kind = filter_kind_from_name(field_as<std::string>(params, "kind", ctx));
  FilterSpec spec;
  spec.kind = kind;
  switch (kind) {
    case FilterKind::identity:
    case FilterKind::unsharp:
    case FilterKind::hist_equalize:
      break;
    case FilterKind::gaussian_lowpass:
      spec.sigma = field_as<double>(params, "sigma", ctx);
      break;
    case FilterKind::average:
    case FilterKind::adaptive_denoise:
      spec.window = field_as<int>(params, "window", ctx);
      break;
    case FilterKind::gaussian_noise:
      spec.noise_variance = field_as<double>(params, "variance", ctx);
      break;
    case FilterKind::hist_stretch:
      spec.saturation = field_as<double>(params, "saturation", ctx);
      spec.gamma = field_as<double>(params, "gamma", ctx);
      break;
    case FilterKind::jpeg:
      spec.jpeg_quality = field_as<int>(params, "quality", ctx);
      break;
  }
  spec.validate();
  require(spec.name() == field_as<std::string>(j, "name", ctx),
          std::string(ctx) + ": field \"name\" does not match the operator parameters");
  return spec;
}

json config_to_json(const GenConfig& cfg) {
  json kinds = json::array();
  for (TransformKind k : cfg.kinds) kinds.push_back(kind_name(k));
  return json{{"image_size", cfg.image_size},
              {"source_box", cfg.source_box},
              {"rigid_source_box", cfg.rigid_source_box},
              {"vertex_count", cfg.vertex_count},
              {"kinds", kinds},
              {"pp_probability", cfg.pp_probability},
              {"blend",
               {{"enabled", cfg.blend.enabled},
                {"highpass_window", cfg.blend.highpass_window},
                {"dilate_iterations", cfg.blend.dilate_iterations},
                {"average_windows", cfg.blend.average_windows}}},
              {"seed", cfg.seed}};
}

GenConfig config_from_json(const json& j, const char* ctx) {
  GenConfig cfg;
  cfg.image_size = field_as<int>(j, "image_size", ctx);
  cfg.source_box = field_as<int>(j, "source_box", ctx);
  cfg.rigid_source_box = field_as<int>(j, "rigid_source_box", ctx);
  cfg.vertex_count = field_as<int>(j, "vertex_count", ctx);
  cfg.kinds.clear();
  for (const auto& name : field_as<std::vector<std::string>>(j, "kinds", ctx))
    cfg.kinds.push_back(kind_from_name(name));
  cfg.pp_probability = field_as<double>(j, "pp_probability", ctx);
  const json& blend = field(j, "blend", ctx);
  cfg.blend.enabled = field_as<bool>(blend, "enabled", ctx);
  cfg.blend.highpass_window = field_as<int>(blend, "highpass_window", ctx);
  cfg.blend.dilate_iterations = field_as<int>(blend, "dilate_iterations", ctx);
  cfg.blend.average_windows = field_as<std::vector<int>>(blend, "average_windows", ctx);
  cfg.seed = field_as<std::uint64_t>(j, "seed", ctx);
  cfg.validate();
  return cfg;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "could not open " + path.string() + " for writing");
  out << text;
  require(out.good(), "failed writing " + path.string());
}

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "could not open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_record(const std::filesystem::path& root, const ForgeryRecord& record) {
  const std::filesystem::path dir = root / record.id;
  std::filesystem::create_directories(dir);
  save_png(dir / "image.png", record.image);
  save_mask_png(dir / "mask.png", record.mask);
  save_label_map_png(dir / "map.png", record.map);

  json pp = json::array();
  for (const FilterSpec& spec : record.postprocessing) pp.push_back(filter_to_json(spec));
  json meta{{"format_version", 1},
            {"id", record.id},
            {"kind", kind_name(record.kind)},
            {"order_flag", record.resize_applied_first ? "resize_first" : "rotation_first"},
            {"transform", transform_to_json(record.transform)},
            {"source_bbox", box_to_json(record.source_bbox())},
            {"target_bbox", box_to_json(record.target_bbox())},
            {"postprocessing", pp},
            {"background_ref", record.background_ref},
            {"source_quadrant", record.source_quadrant},
            {"target_quadrant", record.target_quadrant},
            {"seed", record.seed},
            {"record_index", record.record_index}};
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

ForgeryRecord load_record(const std::filesystem::path& root, const std::string& id) {
  const std::filesystem::path dir = root / id;
  const json meta = parse_file(dir / "meta.json");
  const char* ctx = "meta.json";
  require(field_as<int>(meta, "format_version", ctx) == 1,
          "meta.json: unsupported format_version");

  ForgeryRecord rec;
  rec.id = field_as<std::string>(meta, "id", ctx);
  rec.kind = kind_from_name(field_as<std::string>(meta, "kind", ctx));
  const std::string order = field_as<std::string>(meta, "order_flag", ctx);
  require(order == "resize_first" || order == "rotation_first",
          "meta.json: field \"order_flag\" must be resize_first or rotation_first");
  rec.resize_applied_first = order == "resize_first";
  rec.transform = transform_from_json(field(meta, "transform", ctx), ctx);
  for (const json& op : field(meta, "postprocessing", ctx))
    rec.postprocessing.push_back(filter_from_json(op, ctx));
  rec.background_ref = field_as<std::string>(meta, "background_ref", ctx);
  rec.source_quadrant = field_as<int>(meta, "source_quadrant", ctx);
  rec.target_quadrant = field_as<int>(meta, "target_quadrant", ctx);
  rec.seed = field_as<std::uint64_t>(meta, "seed", ctx);
  rec.record_index = field_as<std::uint64_t>(meta, "record_index", ctx);

  rec.image = load_image(dir / "image.png");
  rec.mask = load_mask_png(dir / "mask.png");
  rec.map = load_label_map_png(dir / "map.png");
  require(rec.image.width() == rec.mask.width() && rec.image.height() == rec.mask.height(),
          "record " + id + ": image and mask dimensions differ");
  require(rec.map.width() == rec.mask.width() && rec.map.height() == rec.mask.height(),
          "record " + id + ": map and mask dimensions differ");
  rec.map.validate_against(rec.mask);

  const auto sb = field_as<std::vector<int>>(meta, "source_bbox", ctx);
  const auto tb = field_as<std::vector<int>>(meta, "target_bbox", ctx);
  require(sb.size() == 4 && tb.size() == 4,
          "meta.json: bbox fields must be [x0, y0, width, height]");
  require(Box{sb[0], sb[1], sb[2], sb[3]} == rec.source_bbox(),
          "meta.json: field \"source_bbox\" does not match the label map");
  require(Box{tb[0], tb[1], tb[2], tb[3]} == rec.target_bbox(),
          "meta.json: field \"target_bbox\" does not match the label map");
  return rec;
}

void write_manifest(const std::filesystem::path& root, const DatasetManifest& manifest) {
  json ids = json::array();
  for (const std::string& id : manifest.ids) ids.push_back(id);
  json j{{"format_version", 1},
         {"config", config_to_json(manifest.config)},
         {"count", manifest.ids.size()},
         {"ids", ids}};
  write_text(root / "manifest.json", j.dump(2) + "\n");
}

DatasetManifest read_manifest(const std::filesystem::path& root) {
  const json j = parse_file(root / "manifest.json");
  const char* ctx = "manifest.json";
  require(field_as<int>(j, "format_version", ctx) == 1,
          "manifest.json: unsupported format_version");
  DatasetManifest m;
  m.config = config_from_json(field(j, "config", ctx), ctx);
  m.ids = field_as<std::vector<std::string>>(j, "ids", ctx);
  require(m.ids.size() == field_as<std::uint64_t>(j, "count", ctx),
          "manifest.json: count does not match the id list");
  return m;
}

void generate_dataset(const GenConfig& cfg, std::uint64_t count,
                      const std::filesystem::path& root, unsigned workers) {
  cfg.validate();
  std::filesystem::create_directories(root);
  parallel_for(count, workers, [&](std::uint64_t i) {
    write_record(root, generate_record(cfg, i));
  });
  DatasetManifest manifest;
  manifest.config = cfg;
  manifest.ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) manifest.ids.push_back(record_id_for_index(i));
  write_manifest(root, manifest);
}

}  // namespace cmdis
