#ifndef CMDIS_PIPELINE_HPP
#define CMDIS_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cmdis/image.hpp"
#include "cmdis/scoring.hpp"
#include "cmdis/synth.hpp"
#include "cmdis/transform.hpp"

namespace cmdis {

// Opt-out reasons (stable strings used in results and sidecars).
inline constexpr const char* kOptOutFewerRegions = "fewer-than-two-regions";
inline constexpr const char* kOptOutNotSeparable = "regions-not-separable";
inline constexpr const char* kOptOutRegionTooSmall = "region-too-small";

struct RegionPair {
  PixelSet p1, p2;  // disjoint, non-empty; p1 is the larger region
};

struct PreprocessResult {
  bool opted_in = false;
  RegionPair regions;  // filled iff opted_in
  std::string reason;  // opt-out reason otherwise
};

// Detector-mask pre-processing: 2x2 opening, connected components, sort by
// area. Exactly two components opt in; three or more opt in with the two
// largest iff area3/area2 <= ratio_threshold; anything else opts out.
PreprocessResult preprocess_mask(const BinaryMask& mask, double ratio_threshold = 0.2);

// Regions from a ground-truth label map (bypasses preprocessing). p1 is the
// larger region (first-scan-pixel tiebreak); p1_is_source records the truth.
struct LabeledRegions {
  RegionPair regions;
  bool p1_is_source = false;
};
LabeledRegions regions_from_map(const LabelMap& map);

struct ScorerSelection {
  bool mse = true;
  bool twin = false;
  bool siamese = false;
};

struct DisambigOptions {
  // transform mapping p1 onto p2; estimated from the masks when absent
  std::optional<SimilarityTransform> transform;
  ScorerSelection scorers;
  FusionConfig fusion;
  const TinyTwinModel* twin_model = nullptr;
  const TinySiameseModel* siamese_model = nullptr;
};

struct DisambigResult {
  bool opted_in = false;
  std::string opt_out_reason;
  bool decide_h0 = true;  // meaningful iff opted_in
  HypothesisScore fused;
  std::optional<HypothesisScore> mse, twin, siamese;
  SimilarityTransform transform;  // the transform the scorers used
  double w_tr = 0.0, w_si = 0.0;  // set when twin/siamese fusion ran
};

// Scores the hypothesis "p1 is the source". The decision comes from the
// twin+siamese fusion when both ran, from a single learned scorer when only
// one ran, and from the analytic scorer otherwise. Regions whose bounding
// box cannot host a 64x64 crop opt out.
DisambigResult disambiguate(const RasterImage& image, const RegionPair& regions,
                            const DisambigOptions& options);

// Detector-mask entry point: preprocess, then disambiguate.
DisambigResult disambiguate(const RasterImage& image, const BinaryMask& mask,
                            const DisambigOptions& options);

// Colors the decision (source green / target red) and emits the tampering
// mask (target region only). Requires an opted-in result.
std::pair<LabelMap, BinaryMask> render_outputs(const DisambigResult& result,
                                               const RegionPair& regions, int width, int height);

// ---- evaluation ----

enum class TransformSource { ground_truth, estimated };
enum class MaskSource { label_map, binary_mask };

struct EvalOptions {
  TransformSource transform_source = TransformSource::estimated;
  MaskSource mask_source = MaskSource::label_map;
  ScorerSelection scorers;
  FusionConfig fusion;
  const TinyTwinModel* twin_model = nullptr;
  const TinySiameseModel* siamese_model = nullptr;
  unsigned workers = 0;  // 0 = default parallelism
};

struct RecordOutcome {
  std::string id;
  TransformKind kind = TransformKind::rigid;
  DisambigResult result;
  bool true_h0 = false;  // ground truth: p1 is the source
  bool correct = false;  // meaningful iff opted in
  double precision = 0.0, recall = 0.0, f1 = 0.0;  // tampering mask vs truth
};

struct KindStats {
  std::size_t total = 0, opt_in = 0, correct = 0;
  double accuracy() const { return opt_in ? static_cast<double>(correct) / opt_in : 0.0; }
};

struct MetricsReport {
  std::size_t total = 0, opt_in = 0, correct = 0;
  double accuracy = 0.0;                    // correct / opt_in
  double precision = 0.0, recall = 0.0, f1 = 0.0;  // macro over opted-in records
  std::map<std::string, KindStats> per_kind;
  std::vector<RecordOutcome> outcomes;      // record order
};

// Pull-based record access so callers can stream from disk or generate in
// memory; must be safe to call concurrently for distinct indices.
using RecordSource = std::function<ForgeryRecord(std::size_t)>;

RecordOutcome evaluate_record(const ForgeryRecord& record, const EvalOptions& options);
MetricsReport evaluate(std::size_t count, const RecordSource& source, const EvalOptions& options);
MetricsReport evaluate(const std::vector<ForgeryRecord>& records, const EvalOptions& options);

// record_id, opt_status, decision, correct, f_h0_fused, f_h0_mse, f_h0_twin,
// f_h0_siamese, alpha, fx, fy
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);

// ---- robustness sweep ----

struct SweepAxis {
  enum class Kind { jpeg, noise, resize, mask_dilate, mask_erode } kind = Kind::jpeg;
  std::vector<double> values;  // grid (qf / variance / factor / radius)

  static SweepAxis jpeg_default();          // qf 55..100 step 5
  static SweepAxis noise_default();         // variance {1e-4, 5e-4, 1e-3, 2e-3}
  static SweepAxis resize_default();        // factors {0.8, 1.2}
  static SweepAxis mask_dilate_default();   // radius 1..5
  static SweepAxis mask_erode_default();    // radius 1..5
  std::string name() const;
};

// Applies one grid point's degradation to a record copy (image re-encoded /
// noised / globally resized, or mask dilated/eroded).
ForgeryRecord degrade_record(const ForgeryRecord& record, const SweepAxis& axis, double value);

struct SweepRow {
  std::string axis;
  double value = 0.0;
  MetricsReport report;
};

// Re-evaluates per grid point on degraded copies. Grid must be non-empty.
std::vector<SweepRow> robustness_sweep(std::size_t count, const RecordSource& source,
                                       const SweepAxis& axis, const EvalOptions& options);

// axis, value, total, opt_in, accuracy, precision, recall, f1
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

// ---- training-sample building ----

// Four-patch samples for the hypothesis scorer. Records whose regions cannot
// host a 64x64 crop are skipped, so the result may be shorter than
// record_count. The true transform is jittered about the region centroids
// (estimation-noise model) and the pair presentation order is drawn per
// record so labels come out balanced.
struct TwinBuildOptions {
  bool perturb_transform = true;
  std::uint64_t seed = 0;
  unsigned workers = 0;
};
std::vector<QuadSample> build_twin_samples(std::size_t record_count, const RecordSource& source,
                                           const TwinBuildOptions& options);

// Boundary-pair samples for the order scorer (rigid-translation records).
// Each eligible record contributes pairs_per_record distinct corner pairs,
// labeled by presentation order (0 = source-side patch first).
struct SiameseBuildOptions {
  int pairs_per_record = 2;  // 1..8
  std::uint64_t seed = 0;
  unsigned workers = 0;
};
std::vector<PairSample> build_siamese_samples(std::size_t record_count, const RecordSource& source,
                                              const SiameseBuildOptions& options);

// JSON sidecar for a single disambiguation (opt status, decision, scores,
// transform, fusion weights).
std::string result_to_json(const DisambigResult& result);

}  // namespace cmdis

#endif
