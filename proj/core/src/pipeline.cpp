#include "cmdis/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "cmdis/error.hpp"
#include "cmdis/filters.hpp"
#include "cmdis/foa.hpp"
#include "cmdis/image_io.hpp"
#include "cmdis/morphology.hpp"
#include "cmdis/parallel.hpp"
#include "cmdis/rng.hpp"
#include "cmdis/warp.hpp"

namespace cmdis {
namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Vec2 centroid_of(const PixelSet& pixels) {
  double sx = 0.0, sy = 0.0;
  for (const PixelCoord& p : pixels) {
    sx += p.x;
    sy += p.y;
  }
  const double n = static_cast<double>(pixels.size());
  return {sx / n, sy / n};
}

}  // namespace

PreprocessResult preprocess_mask(const BinaryMask& mask, double ratio_threshold) {
  require(ratio_threshold > 0.0, "preprocess_mask: ratio threshold must be positive");
  const BinaryMask opened = open_square(mask, 2);
  const std::vector<PixelSet> components = connected_components(opened);

  PreprocessResult out;
  if (components.size() < 2) {
    out.reason = kOptOutFewerRegions;
    return out;
  }
  if (components.size() > 2) {
    const double a2 = static_cast<double>(components[1].size());
    const double a3 = static_cast<double>(components[2].size());
    // decimal thresholds (0.2) are not exact in binary; the guard keeps
    // integer areas sitting exactly on the threshold on the opt-in side
    if (a3 > ratio_threshold * a2 + 1e-9) {
      out.reason = kOptOutNotSeparable;
      return out;
    }
  }
  out.opted_in = true;
  out.regions.p1 = components[0];  // components come sorted by area, largest first
  out.regions.p2 = components[1];
  return out;
}

LabeledRegions regions_from_map(const LabelMap& map) {
  PixelSet src = pixels_from_mask(map.mask_of(RegionLabel::source));
  PixelSet tgt = pixels_from_mask(map.mask_of(RegionLabel::target));
  require(!src.empty() && !tgt.empty(), "regions_from_map: map must label both regions");

  const bool src_first = src.size() != tgt.size() ? src.size() > tgt.size()
                                                  : scan_less(src.front(), tgt.front());
  LabeledRegions out;
  out.p1_is_source = src_first;
  if (src_first) {
    out.regions.p1 = std::move(src);
    out.regions.p2 = std::move(tgt);
  } else {
    out.regions.p1 = std::move(tgt);
    out.regions.p2 = std::move(src);
  }
  return out;
}

DisambigResult disambiguate(const RasterImage& image, const RegionPair& regions,
                            const DisambigOptions& options) {
  require(!regions.p1.empty() && !regions.p2.empty(),
          "disambiguate: both regions must be non-empty");
  const ScorerSelection& sel = options.scorers;
  require(sel.mse || sel.twin || sel.siamese, "disambiguate: no scorer enabled");
  require(!sel.twin || options.twin_model != nullptr,
          "disambiguate: twin scorer enabled without a model");
  require(!sel.siamese || options.siamese_model != nullptr,
          "disambiguate: siamese scorer enabled without a model");
  options.fusion.validate();

  DisambigResult out;
  const Box b1 = bounding_box(regions.p1);
  const Box b2 = bounding_box(regions.p2);
  if (!regions_large_enough(b1, b2)) {
    out.opt_out_reason = kOptOutRegionTooSmall;
    return out;
  }

  const SimilarityTransform t =
      options.transform ? *options.transform : estimate_from_masks(regions.p1, regions.p2);
  out.transform = t;

  if (sel.mse || sel.twin) {
    const PatchQuad quad = build_quad(image, regions.p1, regions.p2, t);
    if (sel.mse) out.mse = mse_score(quad);
    if (sel.twin) out.twin = twin_forward(*options.twin_model, quad);
  }
  if (sel.siamese) {
    const std::array<BoundaryPair, 8> all = build_boundary_pairs(image, regions.p1, regions.p2, t);
    const std::vector<BoundaryPair> pairs(all.begin(), all.begin() + 4);
    out.siamese = siamese_forward(*options.siamese_model, pairs);
  }

  // Decision precedence: both learned scorers -> transform-gated fusion; a
  // single learned scorer -> that scorer; otherwise the analytic scorer.
  if (out.twin && out.siamese) {
    const FusionResult fr = fuse(*out.twin, *out.siamese, t, options.fusion);
    out.fused = fr.score;
    out.decide_h0 = fr.decide_h0;
    out.w_tr = fr.w_tr;
    out.w_si = fr.w_si;
  } else {
    const HypothesisScore& single = out.twin ? *out.twin : (out.siamese ? *out.siamese : *out.mse);
    out.fused = single;
    out.decide_h0 = single.f_h0 >= 0.5;
  }
  out.opted_in = true;
  return out;
}

DisambigResult disambiguate(const RasterImage& image, const BinaryMask& mask,
                            const DisambigOptions& options) {
  require(mask.width() == image.width() && mask.height() == image.height(),
          "disambiguate: mask dimensions must match the image");
  PreprocessResult pre = preprocess_mask(mask);
  if (!pre.opted_in) {
    DisambigResult out;
    out.opt_out_reason = pre.reason;
    return out;
  }
  return disambiguate(image, pre.regions, options);
}

std::pair<LabelMap, BinaryMask> render_outputs(const DisambigResult& result,
                                               const RegionPair& regions, int width, int height) {
  require(result.opted_in, "render_outputs: result opted out");
  const PixelSet& src = result.decide_h0 ? regions.p1 : regions.p2;
  const PixelSet& tgt = result.decide_h0 ? regions.p2 : regions.p1;

  const BinaryMask src_mask = mask_from_pixels(width, height, src);
  const BinaryMask tamper = mask_from_pixels(width, height, tgt);

  LabelMap map(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (src_mask.at(x, y)) {
        require(!tamper.at(x, y), "render_outputs: regions overlap");
        map.set(x, y, RegionLabel::source);
      } else if (tamper.at(x, y)) {
        map.set(x, y, RegionLabel::target);
      }
    }
  }
  return {std::move(map), tamper};
}

RecordOutcome evaluate_record(const ForgeryRecord& record, const EvalOptions& options) {
  RecordOutcome out;
  out.id = record.id;
  out.kind = record.kind;

  RegionPair regions;
  if (options.mask_source == MaskSource::label_map) {
    LabeledRegions lr = regions_from_map(record.map);
    regions = std::move(lr.regions);
    out.true_h0 = lr.p1_is_source;
  } else {
    PreprocessResult pre = preprocess_mask(record.mask);
    if (!pre.opted_in) {
      out.result.opt_out_reason = pre.reason;
      return out;
    }
    regions = std::move(pre.regions);
    // ground truth for a detector region: majority label of its pixels
    const BinaryMask src_mask = record.map.mask_of(RegionLabel::source);
    const BinaryMask tgt_mask = record.map.mask_of(RegionLabel::target);
    std::size_t in_src = 0, in_tgt = 0;
    for (const PixelCoord& p : regions.p1) {
      if (src_mask.in_bounds(p.x, p.y)) {
        in_src += src_mask.at(p.x, p.y) ? 1 : 0;
        in_tgt += tgt_mask.at(p.x, p.y) ? 1 : 0;
      }
    }
    out.true_h0 = in_src >= in_tgt;
  }

  DisambigOptions dopts;
  dopts.scorers = options.scorers;
  dopts.fusion = options.fusion;
  dopts.twin_model = options.twin_model;
  dopts.siamese_model = options.siamese_model;
  if (options.transform_source == TransformSource::ground_truth) {
    // stored transform maps source onto target; orient it p1 -> p2
    dopts.transform = out.true_h0 ? record.transform : invert(record.transform);
  }

  out.result = disambiguate(record.image, regions, dopts);
  if (!out.result.opted_in) return out;

  out.correct = out.result.decide_h0 == out.true_h0;

  const PixelSet& predicted_target = out.result.decide_h0 ? regions.p2 : regions.p1;
  const BinaryMask gt_target = record.map.mask_of(RegionLabel::target);
  std::size_t gt_count = 0;
  for (int y = 0; y < gt_target.height(); ++y)
    for (int x = 0; x < gt_target.width(); ++x)
      if (gt_target.at(x, y)) ++gt_count;
  std::size_t inter = 0;
  for (const PixelCoord& p : predicted_target)
    if (gt_target.in_bounds(p.x, p.y) && gt_target.at(p.x, p.y)) ++inter;

  out.precision = predicted_target.empty()
                      ? 0.0
                      : static_cast<double>(inter) / static_cast<double>(predicted_target.size());
  out.recall = gt_count == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(gt_count);
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

MetricsReport evaluate(std::size_t count, const RecordSource& source, const EvalOptions& options) {
  require(count > 0, "evaluate: dataset is empty");
  require(static_cast<bool>(source), "evaluate: record source is empty");

  MetricsReport report;
  report.outcomes.resize(count);
  parallel_for(count, options.workers,
               [&](std::size_t i) { report.outcomes[i] = evaluate_record(source(i), options); });

  report.total = count;
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (const RecordOutcome& oc : report.outcomes) {
    KindStats& ks = report.per_kind[kind_name(oc.kind)];
    ++ks.total;
    if (!oc.result.opted_in) continue;
    ++report.opt_in;
    ++ks.opt_in;
    if (oc.correct) {
      ++report.correct;
      ++ks.correct;
    }
    p_sum += oc.precision;
    r_sum += oc.recall;
    f_sum += oc.f1;
  }
  if (report.opt_in > 0) {
    const double n = static_cast<double>(report.opt_in);
    report.accuracy = static_cast<double>(report.correct) / n;
    report.precision = p_sum / n;
    report.recall = r_sum / n;
    report.f1 = f_sum / n;
  }
  return report;
}

MetricsReport evaluate(const std::vector<ForgeryRecord>& records, const EvalOptions& options) {
  return evaluate(records.size(), [&records](std::size_t i) { return records[i]; }, options);
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report) {
  std::ofstream out(path);
  require(out.good(), "write_metrics_csv: cannot open " + path.string());
  out << "record_id,opt_status,decision,correct,f_h0_fused,f_h0_mse,f_h0_twin,"
         "f_h0_siamese,alpha,fx,fy\n";
  for (const RecordOutcome& oc : report.outcomes) {
    out << oc.id << ',';
    if (oc.result.opted_in) {
      out << "OptIn," << (oc.result.decide_h0 ? "H0" : "H1") << ',' << (oc.correct ? 1 : 0) << ','
          << fmt_double(oc.result.fused.f_h0) << ','
          << (oc.result.mse ? fmt_double(oc.result.mse->f_h0) : "") << ','
          << (oc.result.twin ? fmt_double(oc.result.twin->f_h0) : "") << ','
          << (oc.result.siamese ? fmt_double(oc.result.siamese->f_h0) : "") << ','
          << fmt_double(oc.result.transform.alpha_deg) << ','
          << fmt_double(oc.result.transform.fx) << ',' << fmt_double(oc.result.transform.fy);
    } else {
      out << "OptOut(" << oc.result.opt_out_reason << "),,,,,,,,,";
    }
    out << '\n';
  }
  require(out.good(), "write_metrics_csv: write failed for " + path.string());
}

SweepAxis SweepAxis::jpeg_default() {
  SweepAxis a;
  a.kind = Kind::jpeg;
  for (int q = 55; q <= 100; q += 5) a.values.push_back(q);
  return a;
}

SweepAxis SweepAxis::noise_default() {
  return {Kind::noise, {1e-4, 5e-4, 1e-3, 2e-3}};
}

SweepAxis SweepAxis::resize_default() {
  return {Kind::resize, {0.8, 1.2}};
}

SweepAxis SweepAxis::mask_dilate_default() {
  return {Kind::mask_dilate, {1, 2, 3, 4, 5}};
}

SweepAxis SweepAxis::mask_erode_default() {
  return {Kind::mask_erode, {1, 2, 3, 4, 5}};
}

std::string SweepAxis::name() const {
  switch (kind) {
    case Kind::jpeg: return "jpeg";
    case Kind::noise: return "noise";
    case Kind::resize: return "resize";
    case Kind::mask_dilate: return "mask_dilate";
    case Kind::mask_erode: return "mask_erode";
  }
  throw Error("SweepAxis: unknown kind");
}

ForgeryRecord degrade_record(const ForgeryRecord& record, const SweepAxis& axis, double value) {
  ForgeryRecord out = record;
  switch (axis.kind) {
    case SweepAxis::Kind::jpeg: {
      out.image = jpeg_cycle(record.image, static_cast<int>(std::lround(value)));
      break;
    }
    case SweepAxis::Kind::noise: {
      RngStream rng = RngStream::derive(
          record.seed, {0xd15eULL, static_cast<std::uint64_t>(record.record_index)});
      out.image = add_gaussian_noise(record.image, value, rng);
      break;
    }
    case SweepAxis::Kind::resize: {
      require(value > 0.0, "degrade_record: resize factor must be positive");
      const int w = std::max<int>(1, static_cast<int>(std::lround(record.image.width() * value)));
      const int h = std::max<int>(1, static_cast<int>(std::lround(record.image.height() * value)));
      const SimilarityTransform s = SimilarityTransform::make(0.0, value, value, 0.0, 0.0);
      const Box frame{0, 0, w, h};
      out.image = warp_image(record.image, s, frame).pixels;
      const BinaryMask src = warp_mask(record.map.mask_of(RegionLabel::source), s, frame);
      const BinaryMask tgt = warp_mask(record.map.mask_of(RegionLabel::target), s, frame);
      LabelMap map(w, h);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (tgt.at(x, y)) {
            map.set(x, y, RegionLabel::target);
          } else if (src.at(x, y)) {
            map.set(x, y, RegionLabel::source);
          }
        }
      }
      out.map = std::move(map);
      out.mask = out.map.foreground();
      // conjugation by an isotropic global scaling keeps the linear part
      // and scales the translation
      out.transform.tx *= value;
      out.transform.ty *= value;
      break;
    }
    case SweepAxis::Kind::mask_dilate: {
      out.mask = dilate3x3(record.mask, static_cast<int>(std::lround(value)));
      break;
    }
    case SweepAxis::Kind::mask_erode: {
      out.mask = erode3x3(record.mask, static_cast<int>(std::lround(value)));
      break;
    }
  }
  return out;
}

std::vector<SweepRow> robustness_sweep(std::size_t count, const RecordSource& source,
                                       const SweepAxis& axis, const EvalOptions& options) {
  require(!axis.values.empty(), "robustness_sweep: axis grid is empty");
  std::vector<SweepRow> rows;
  rows.reserve(axis.values.size());
  for (const double value : axis.values) {
    const RecordSource degraded = [&source, &axis, value](std::size_t i) {
      return degrade_record(source(i), axis, value);
    };
    rows.push_back({axis.name(), value, evaluate(count, degraded, options)});
  }
  return rows;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  require(out.good(), "write_sweep_csv: cannot open " + path.string());
  out << "axis,value,total,opt_in,accuracy,precision,recall,f1\n";
  for (const SweepRow& row : rows) {
    const MetricsReport& r = row.report;
    out << row.axis << ',' << fmt_double(row.value) << ',' << r.total << ',' << r.opt_in << ','
        << fmt_double(r.accuracy) << ',' << fmt_double(r.precision) << ',' << fmt_double(r.recall)
        << ',' << fmt_double(r.f1) << '\n';
  }
  require(out.good(), "write_sweep_csv: write failed for " + path.string());
}

namespace {

// Jitters angle/scale in the frame where region centroids sit at the origin
// (the true translation is zero there, so the perturbation leaves it
// untouched), then recomposes the frame translation so centroids keep
// corresponding — mirroring how mask-based estimates err in angle and scale
// but not in centroid alignment.
SimilarityTransform perturb_about_centroids(const SimilarityTransform& t, Vec2 c1, Vec2 c2,
                                            RngStream& rng) {
  require(!t.inverted, "perturb_about_centroids: canonical transform expected");
  SimilarityTransform local = t;
  local.tx = 0.0;
  local.ty = 0.0;
  local = perturb(local, rng);
  const Vec2 a = local.apply(c1);
  local.tx = c2.x - a.x;
  local.ty = c2.y - a.y;
  return local;
}

}  // namespace

std::vector<QuadSample> build_twin_samples(std::size_t record_count, const RecordSource& source,
                                           const TwinBuildOptions& options) {
  require(record_count > 0, "build_twin_samples: no records");
  std::vector<std::optional<QuadSample>> slots(record_count);
  parallel_for(record_count, options.workers, [&](std::size_t i) {
    const ForgeryRecord rec = source(i);
    const LabeledRegions lr = regions_from_map(rec.map);
    const PixelSet& src = lr.p1_is_source ? lr.regions.p1 : lr.regions.p2;
    const PixelSet& tgt = lr.p1_is_source ? lr.regions.p2 : lr.regions.p1;
    if (!regions_large_enough(bounding_box(src), bounding_box(tgt))) return;

    RngStream rng =
        RngStream::derive(options.seed, {0x7b1dULL, static_cast<std::uint64_t>(rec.record_index)});
    SimilarityTransform t = rec.transform;
    if (options.perturb_transform)
      t = perturb_about_centroids(t, centroid_of(src), centroid_of(tgt), rng);

    const PatchQuad quad = build_quad(rec.image, src, tgt, t);
    QuadSample sample;
    sample.patches = {quantize_patch(quad.x1), quantize_patch(quad.x2), quantize_patch(quad.x3),
                      quantize_patch(quad.x4)};
    sample.label = 0;  // built source-first
    if (rng.next_below(2) == 1) {
      std::swap(sample.patches[0], sample.patches[2]);
      std::swap(sample.patches[1], sample.patches[3]);
      sample.label = 1;
    }
    slots[i] = std::move(sample);
  });

  std::vector<QuadSample> out;
  out.reserve(record_count);
  for (std::optional<QuadSample>& s : slots)
    if (s) out.push_back(std::move(*s));
  return out;
}

std::vector<PairSample> build_siamese_samples(std::size_t record_count, const RecordSource& source,
                                              const SiameseBuildOptions& options) {
  require(record_count > 0, "build_siamese_samples: no records");
  require(options.pairs_per_record >= 1 && options.pairs_per_record <= 8,
          "build_siamese_samples: pairs_per_record must be in 1..8");
  std::vector<std::vector<PairSample>> slots(record_count);
  parallel_for(record_count, options.workers, [&](std::size_t i) {
    const ForgeryRecord rec = source(i);
    const LabeledRegions lr = regions_from_map(rec.map);
    const PixelSet& src = lr.p1_is_source ? lr.regions.p1 : lr.regions.p2;
    const PixelSet& tgt = lr.p1_is_source ? lr.regions.p2 : lr.regions.p1;
    if (!regions_large_enough(bounding_box(src), bounding_box(tgt))) return;

    const std::array<BoundaryPair, 8> pairs = build_boundary_pairs(rec.image, src, tgt,
                                                                   rec.transform);
    RngStream rng = RngStream::derive(options.seed,
                                      {0x51a8eULL, static_cast<std::uint64_t>(rec.record_index)});
    std::array<int, 8> order{0, 1, 2, 3, 4, 5, 6, 7};
    for (int k = 0; k < options.pairs_per_record; ++k) {
      const int j = k + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(8 - k)));
      std::swap(order[k], order[j]);
      const BoundaryPair& bp = pairs[static_cast<std::size_t>(order[k])];
      PairSample sample;
      sample.patches = {quantize_patch(bp.a), quantize_patch(bp.b)};
      sample.label = order[k] < 4 ? 0 : 1;  // [0..3] present the source side first
      slots[i].push_back(std::move(sample));
    }
  });

  std::vector<PairSample> out;
  for (std::vector<PairSample>& group : slots)
    for (PairSample& s : group) out.push_back(std::move(s));
  return out;
}

namespace {

json score_to_json(const HypothesisScore& s) {
  return json{{"f_h0", s.f_h0}, {"f_h1", s.f_h1}, {"tie", s.tie},
              {"low_validity", s.low_validity}};
}

}  // namespace

std::string result_to_json(const DisambigResult& result) {
  json j;
  if (!result.opted_in) {
    j["opt_status"] = "OptOut";
    j["opt_out_reason"] = result.opt_out_reason;
    return j.dump(2) + "\n";
  }
  j["opt_status"] = "OptIn";
  j["decision"] = result.decide_h0 ? "H0" : "H1";
  json scores;
  scores["fused"] = score_to_json(result.fused);
  if (result.mse) scores["mse"] = score_to_json(*result.mse);
  if (result.twin) scores["twin"] = score_to_json(*result.twin);
  if (result.siamese) scores["siamese"] = score_to_json(*result.siamese);
  j["scores"] = scores;
  j["transform"] = json{{"alpha_deg", result.transform.alpha_deg},
                        {"fx", result.transform.fx},
                        {"fy", result.transform.fy},
                        {"tx", result.transform.tx},
                        {"ty", result.transform.ty},
                        {"inverted", result.transform.inverted},
                        {"degenerate_axis", result.transform.degenerate_axis}};
  if (result.twin && result.siamese) j["weights"] = json{{"w_tr", result.w_tr}, {"w_si", result.w_si}};
  return j.dump(2) + "\n";
}

}  // namespace cmdis
