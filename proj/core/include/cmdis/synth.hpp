#ifndef CMDIS_SYNTH_HPP
#define CMDIS_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cmdis/filters.hpp"
#include "cmdis/image.hpp"
#include "cmdis/rng.hpp"
#include "cmdis/transform.hpp"

namespace cmdis {

enum class TransformKind {
  rigid,            // pure integer translation
  rotation,         // rotation + translation
  resize,           // axis scaling + translation
  rotation_resize,  // rotation applied first, then scaling (two resamplings)
  resize_rotation,  // scaling applied first, then rotation (two resamplings)
};

const char* kind_name(TransformKind kind);
TransformKind kind_from_name(const std::string& name);

// Copy-paste boundary blending: pixels where the 5x5 window over the target
// mask is not constant, dilated `dilate_iterations` times, get an average
// filter whose window is drawn uniformly from `average_windows`.
struct BlendConfig {
  bool enabled = true;
  int highpass_window = 5;
  int dilate_iterations = 5;
  std::vector<int> average_windows = {3, 5, 7, 9, 11};
};

struct GenConfig {
  int image_size = 1024;      // square frame; backgrounds below this are rejected
  int source_box = 170;       // polygon sampling box for non-rigid kinds
  int rigid_source_box = 74;  // polygon sampling box for the rigid kind
  int vertex_count = 20;
  std::vector<TransformKind> kinds = {
      TransformKind::rigid, TransformKind::rotation, TransformKind::resize,
      TransformKind::rotation_resize, TransformKind::resize_rotation};
  double pp_probability = 0.5;  // chance that a global post-processing op runs
  BlendConfig blend;
  std::uint64_t seed = 0;

  void validate() const;
};

// Parameter grids: rotation angles {2, 4, ..., 180} degrees; scale factors
// {0.50, 0.51, ..., 2.00}.
const std::vector<int>& rotation_grid_deg();
const std::vector<double>& resize_grid();
bool on_rotation_grid(double alpha_deg);
bool on_resize_grid(double f);

// One row of the global post-processing table. `probability` already
// reflects the configured pp probability: the identity row carries 1 - p and
// the operator rows split p in the fixed ratios (lowpass/highpass rows 1/60
// each, adaptive denoise rows 1/20 each, noise 1/10, tonal rows 1/30 each,
// jpeg 1/10, all times p / 0.5). Probabilities sum to 1 exactly in real
// arithmetic. The jpeg row draws its quality uniformly from the quality grid
// when selected.
struct PostProcRow {
  FilterSpec spec;
  double probability = 0.0;
  bool draw_jpeg_quality = false;
};
std::vector<PostProcRow> postproc_table(double pp_probability);

struct ForgeryRecord {
  std::string id;
  TransformKind kind = TransformKind::rigid;
  bool resize_applied_first = false;  // order flag for the composed kinds
  SimilarityTransform transform;      // maps the source region onto the target
  RasterImage image;
  BinaryMask mask;  // union of both regions
  LabelMap map;     // per-pixel source/target labels
  std::vector<FilterSpec> postprocessing;  // applied global operators (empty = none)
  std::string background_ref;
  int source_quadrant = 0;
  int target_quadrant = 0;
  std::uint64_t seed = 0;          // root seed the record stream derives from
  std::uint64_t record_index = 0;  // stream path component

  Box source_bbox() const;
  Box target_bbox() const;
  std::vector<std::string> postprocessing_names() const;
};

// Deterministic synthetic background: layered value noise plus a directional
// gradient, entirely driven by `rng`.
RasterImage procedural_background(int size, RngStream& rng);

// Convex hull (monotone chain, collinear points dropped). Fewer than three
// non-collinear input points yield a hull with fewer than three vertices.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

// Grid points inside the hull, boundary inclusive, in scan order.
PixelSet rasterize_convex_polygon(const std::vector<Vec2>& hull);

// Source-region sampler: rasterized convex hull of `vertex_count` uniform
// points in [0, box]^2. Degenerate hulls are resampled. box must be at least
// the 64-pixel patch size so the region can host a central crop.
PixelSet sample_convex_polygon(int box, int vertex_count, RngStream& rng);

// Builds one forgery on top of `background` (must be at least
// cfg.image_size in both dimensions; larger backgrounds are randomly
// cropped). All randomness comes from `rng`, so a record is a pure function
// of (background, cfg, stream state).
ForgeryRecord generate_forgery(const RasterImage& background, const GenConfig& cfg,
                               RngStream& rng, std::string id);

// Record `index` of the dataset defined by cfg: derives the record stream
// from (cfg.seed, index) and a procedural background, so any record can be
// regenerated independently and in parallel, byte-identically.
ForgeryRecord generate_record(const GenConfig& cfg, std::uint64_t index);

// ---- dataset on disk ----
//
// Layout: <root>/manifest.json plus one directory per record:
//   <root>/<id>/image.png   forged image
//   <root>/<id>/mask.png    binary mask (both regions)
//   <root>/<id>/map.png     label map (green source / red target / blue bg)
//   <root>/<id>/meta.json   sidecar

struct DatasetManifest {
  GenConfig config;
  std::vector<std::string> ids;
};

void write_record(const std::filesystem::path& root, const ForgeryRecord& record);
ForgeryRecord load_record(const std::filesystem::path& root, const std::string& id);
void write_manifest(const std::filesystem::path& root, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& root);

// Generates `count` records under `root` using `workers` threads. Output
// bytes depend only on (cfg, count), not on the worker count.
void generate_dataset(const GenConfig& cfg, std::uint64_t count,
                      const std::filesystem::path& root, unsigned workers);

std::string record_id_for_index(std::uint64_t index);

}  // namespace cmdis

#endif
