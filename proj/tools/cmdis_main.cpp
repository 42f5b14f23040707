// cmdis: batch front end for the copy-move source/target disambiguation
// toolkit. Subcommands: gen, disambiguate, train, eval, sweep. Exit codes:
// 0 success, 1 validation error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cmdis/error.hpp"
#include "cmdis/image_io.hpp"
#include "cmdis/net.hpp"
#include "cmdis/pipeline.hpp"
#include "cmdis/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cmdis;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct GlobalOpts {
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0 = available parallelism
  std::string out;
  bool dry_run = false;
};

fs::path out_dir(const GlobalOpts& g) {
  if (!g.out.empty()) return fs::path(g.out);
  if (const char* env = std::getenv("CMDIS_OUT"); env != nullptr && *env != '\0')
    return fs::path(env);
  return fs::path("out");
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  require(f.good(), "cannot open " + path.string() + " for writing");
  f << text;
  require(f.good(), "write failed for " + path.string());
}

// Every run records enough to replay it: full config, seed, version.
void write_run_manifest(const GlobalOpts& g, const std::string& command, const json& config) {
  json j;
  j["tool"] = "cmdis";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["seed"] = g.seed;
  j["workers"] = g.workers;
  j["config"] = config;
  write_text_file(out_dir(g) / "run.json", j.dump(2) + "\n");
}

TransformKind kind_from_cli(const std::string& name) {
  if (name == "rot") return TransformKind::rotation;
  if (name == "res") return TransformKind::resize;
  if (name == "rot_res") return TransformKind::rotation_resize;
  if (name == "res_rot") return TransformKind::resize_rotation;
  return kind_from_name(name);
}

ScorerSelection parse_scorers(const std::vector<std::string>& names) {
  ScorerSelection sel;
  sel.mse = false;
  for (const std::string& n : names) {
    if (n == "mse")
      sel.mse = true;
    else if (n == "twin")
      sel.twin = true;
    else if (n == "siamese")
      sel.siamese = true;
    else
      throw Error("unknown scorer \"" + n + "\" (expected mse, twin, or siamese)");
  }
  require(sel.mse || sel.twin || sel.siamese, "at least one scorer must be selected");
  return sel;
}

struct LoadedModels {
  std::optional<TinyTwinModel> twin;
  std::optional<TinySiameseModel> siamese;
};

LoadedModels load_models(const ScorerSelection& sel, const std::string& model_dir) {
  LoadedModels m;
  if (!sel.twin && !sel.siamese) return m;
  require(!model_dir.empty(), "learned scorers need --model-dir");
  if (sel.twin) {
    std::string kind;
    PairScorer net = load_model(fs::path(model_dir) / "twin.json", &kind);
    require(kind == "twin", fs::path(model_dir).string() + "/twin.json holds a " + kind + " model");
    m.twin = TinyTwinModel{std::move(net)};
  }
  if (sel.siamese) {
    std::string kind;
    PairScorer net = load_model(fs::path(model_dir) / "siamese.json", &kind);
    require(kind == "siamese",
            fs::path(model_dir).string() + "/siamese.json holds a " + kind + " model");
    m.siamese = TinySiameseModel{std::move(net)};
  }
  return m;
}

SimilarityTransform transform_from_file(const fs::path& path) {
  std::ifstream f(path);
  require(f.good(), "cannot open transform file " + path.string());
  json j = json::parse(f, nullptr, true);
  SimilarityTransform t;
  t.alpha_deg = j.at("alpha_deg").get<double>();
  t.fx = j.at("fx").get<double>();
  t.fy = j.at("fy").get<double>();
  t.tx = j.at("tx").get<double>();
  t.ty = j.at("ty").get<double>();
  if (j.contains("inverted")) t.inverted = j.at("inverted").get<bool>();
  require(t.fx > 0.0 && t.fy > 0.0, "transform file: scales must be positive");
  return t;
}

json gen_config_json(const GenConfig& cfg, std::uint64_t count) {
  json kinds = json::array();
  for (TransformKind k : cfg.kinds) kinds.push_back(kind_name(k));
  return json{{"count", count},
              {"image_size", cfg.image_size},
              {"source_box", cfg.source_box},
              {"rigid_source_box", cfg.rigid_source_box},
              {"vertex_count", cfg.vertex_count},
              {"kinds", kinds},
              {"pp_probability", cfg.pp_probability},
              {"blend", cfg.blend.enabled},
              {"seed", cfg.seed}};
}

// ---- subcommand payloads ----

struct GenArgs {
  std::uint64_t count = 0;
  int image_size = 1024;
  int source_box = 170;
  int rigid_box = 74;
  int vertices = 20;
  std::vector<std::string> kinds;
  double pp_probability = 0.5;
  bool no_blend = false;
};

int run_gen(const GlobalOpts& g, const GenArgs& a) {
  GenConfig cfg;
  try {
    cfg.image_size = a.image_size;
    cfg.source_box = a.source_box;
    cfg.rigid_source_box = a.rigid_box;
    cfg.vertex_count = a.vertices;
    cfg.pp_probability = a.pp_probability;
    cfg.blend.enabled = !a.no_blend;
    cfg.seed = g.seed;
    if (!a.kinds.empty()) {
      cfg.kinds.clear();
      for (const std::string& k : a.kinds) cfg.kinds.push_back(kind_from_cli(k));
    }
    cfg.validate();
    require(a.count > 0, "--count must be positive");
  } catch (const std::exception& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  }

  const fs::path root = out_dir(g) / "dataset";
  if (g.dry_run) {
    std::cout << "dry run: would generate " << a.count << " records under " << root.string()
              << '\n';
    return 0;
  }
  try {
    fs::create_directories(root);
    generate_dataset(cfg, a.count, root, g.workers);
    write_run_manifest(g, "gen", gen_config_json(cfg, a.count));
    std::cout << "generated " << a.count << " records under " << root.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

struct DisArgs {
  std::string image, mask, transform, model_dir;
  std::vector<std::string> scorers = {"mse"};
};

int run_disambiguate(const GlobalOpts& g, const DisArgs& a) {
  ScorerSelection sel;
  try {
    sel = parse_scorers(a.scorers);
    require((!sel.twin && !sel.siamese) || !a.model_dir.empty(),
            "learned scorers need --model-dir");
  } catch (const std::exception& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  }
  if (g.dry_run) {
    std::cout << "dry run: would disambiguate " << a.image << " with mask " << a.mask << '\n';
    return 0;
  }
  try {
    const RasterImage image = load_image(a.image);
    const BinaryMask mask = load_mask_png(a.mask);
    require(mask.width() == image.width() && mask.height() == image.height(),
            "mask dimensions must match the image");

    const LoadedModels models = load_models(sel, a.model_dir);
    DisambigOptions opts;
    opts.scorers = sel;
    if (models.twin) opts.twin_model = &*models.twin;
    if (models.siamese) opts.siamese_model = &*models.siamese;
    if (!a.transform.empty()) opts.transform = transform_from_file(a.transform);

    const PreprocessResult pre = preprocess_mask(mask);
    DisambigResult result;
    if (!pre.opted_in) {
      result.opt_out_reason = pre.reason;
    } else {
      result = disambiguate(image, pre.regions, opts);
    }

    const fs::path out = out_dir(g);
    fs::create_directories(out);
    write_text_file(out / "result.json", result_to_json(result));
    if (result.opted_in) {
      auto [map, tamper] = render_outputs(result, pre.regions, image.width(), image.height());
      save_label_map_png(out / "map.png", map);
      save_mask_png(out / "tamper.png", tamper);
      std::cout << "decision " << (result.decide_h0 ? "H0" : "H1")
                << " (f_h0=" << result.fused.f_h0 << (result.fused.tie ? ", tie" : "") << ")\n";
    } else {
      std::cout << "opted out: " << result.opt_out_reason << '\n';
    }
    write_run_manifest(g, "disambiguate",
                       json{{"image", a.image},
                            {"mask", a.mask},
                            {"transform", a.transform},
                            {"scorers", a.scorers},
                            {"model_dir", a.model_dir}});
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

struct TrainArgs {
  std::string dataset, arch;
  int epochs = 12;
  int batch = 16;
  double lr = 1e-3;
  double val_fraction = 0.15;
  int pairs_per_record = 2;
  bool no_perturb = false;
};

int run_train(const GlobalOpts& g, const TrainArgs& a) {
  TrainConfig cfg;
  try {
    require(a.arch == "twin" || a.arch == "siamese", "--arch must be twin or siamese");
    cfg.epochs = a.epochs;
    cfg.batch = a.batch;
    cfg.lr = a.lr;
    cfg.val_fraction = a.val_fraction;
    cfg.seed = g.seed;
    cfg.workers = g.workers;
    cfg.validate();
    require(a.pairs_per_record >= 1 && a.pairs_per_record <= 8,
            "--pairs-per-record must be in 1..8");
  } catch (const std::exception& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  }
  if (g.dry_run) {
    std::cout << "dry run: would train a " << a.arch << " model on " << a.dataset << '\n';
    return 0;
  }
  try {
    const DatasetManifest manifest = read_manifest(a.dataset);
    require(!manifest.ids.empty(), "dataset is empty");
    const fs::path droot(a.dataset);
    const RecordSource source = [&](std::size_t i) { return load_record(droot, manifest.ids[i]); };

    const fs::path out = out_dir(g);
    fs::create_directories(out);
    TrainLog log;
    if (a.arch == "twin") {
      TwinBuildOptions b;
      b.perturb_transform = !a.no_perturb;
      b.seed = g.seed;
      b.workers = g.workers;
      const std::vector<QuadSample> samples =
          build_twin_samples(manifest.ids.size(), source, b);
      require(!samples.empty(), "no eligible records for twin training");
      std::cout << "training twin on " << samples.size() << " samples\n";
      const TinyTwinModel model = train_twin(samples, NetArch{}, cfg, &log);
      save_model(out / "twin.json", model.net, "twin");
    } else {
      SiameseBuildOptions b;
      b.pairs_per_record = a.pairs_per_record;
      b.seed = g.seed;
      b.workers = g.workers;
      const std::vector<PairSample> samples =
          build_siamese_samples(manifest.ids.size(), source, b);
      require(!samples.empty(), "no eligible records for siamese training");
      std::cout << "training siamese on " << samples.size() << " samples\n";
      const TinySiameseModel model = train_siamese(samples, NetArch{}, cfg, &log);
      save_model(out / "siamese.json", model.net, "siamese");
    }
    save_training_log_csv(out / "training_log.csv", log);
    if (!log.epochs.empty()) {
      const EpochStats& last = log.epochs.back();
      std::cout << "final epoch " << last.epoch << ": loss " << last.loss << ", val accuracy "
                << last.val_accuracy << '\n';
    }
    write_run_manifest(g, "train",
                       json{{"dataset", a.dataset},
                            {"arch", a.arch},
                            {"epochs", a.epochs},
                            {"batch", a.batch},
                            {"lr", a.lr},
                            {"val_fraction", a.val_fraction},
                            {"pairs_per_record", a.pairs_per_record},
                            {"perturb", !a.no_perturb}});
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

struct EvalArgs {
  std::string dataset, model_dir;
  std::vector<std::string> scorers = {"mse"};
  std::string transform_source = "estimated";
  std::string mask_source = "label_map";
  std::uint64_t limit = 0;  // 0 = all records
};

EvalOptions make_eval_options(const EvalArgs& a, const GlobalOpts& g, const ScorerSelection& sel,
                              const LoadedModels& models) {
  EvalOptions opts;
  opts.scorers = sel;
  opts.workers = g.workers;
  opts.transform_source = a.transform_source == "ground_truth" ? TransformSource::ground_truth
                                                               : TransformSource::estimated;
  opts.mask_source =
      a.mask_source == "binary_mask" ? MaskSource::binary_mask : MaskSource::label_map;
  if (models.twin) opts.twin_model = &*models.twin;
  if (models.siamese) opts.siamese_model = &*models.siamese;
  return opts;
}

json report_json(const MetricsReport& r) {
  json per_kind;
  for (const auto& [kind, ks] : r.per_kind) {
    per_kind[kind] = json{{"total", ks.total},
                          {"opt_in", ks.opt_in},
                          {"correct", ks.correct},
                          {"accuracy", ks.accuracy()}};
  }
  return json{{"total", r.total},     {"opt_in", r.opt_in},   {"correct", r.correct},
              {"accuracy", r.accuracy}, {"precision", r.precision}, {"recall", r.recall},
              {"f1", r.f1},           {"per_kind", per_kind}};
}

void print_report(const MetricsReport& r) {
  std::cout << "records " << r.total << ", opt-in " << r.opt_in << ", accuracy " << r.accuracy
            << ", precision " << r.precision << ", recall " << r.recall << ", f1 " << r.f1 << '\n';
  for (const auto& [kind, ks] : r.per_kind) {
    std::cout << "  " << kind << ": total " << ks.total << ", opt-in " << ks.opt_in
              << ", accuracy " << ks.accuracy() << '\n';
  }
}

int validate_eval_args(const EvalArgs& a, ScorerSelection& sel) {
  try {
    sel = parse_scorers(a.scorers);
    require((!sel.twin && !sel.siamese) || !a.model_dir.empty(),
            "learned scorers need --model-dir");
    require(a.transform_source == "estimated" || a.transform_source == "ground_truth",
            "--transform-source must be estimated or ground_truth");
    require(a.mask_source == "label_map" || a.mask_source == "binary_mask",
            "--mask-source must be label_map or binary_mask");
  } catch (const std::exception& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run_eval(const GlobalOpts& g, const EvalArgs& a) {
  ScorerSelection sel;
  if (int rc = validate_eval_args(a, sel); rc != 0) return rc;
  if (g.dry_run) {
    std::cout << "dry run: would evaluate " << a.dataset << '\n';
    return 0;
  }
  try {
    const DatasetManifest manifest = read_manifest(a.dataset);
    require(!manifest.ids.empty(), "dataset is empty");
    std::uint64_t count = manifest.ids.size();
    if (a.limit > 0 && a.limit < count) count = a.limit;
    const fs::path droot(a.dataset);
    const RecordSource source = [&](std::size_t i) { return load_record(droot, manifest.ids[i]); };

    const LoadedModels models = load_models(sel, a.model_dir);
    const EvalOptions opts = make_eval_options(a, g, sel, models);
    const MetricsReport report = evaluate(count, source, opts);

    const fs::path out = out_dir(g);
    fs::create_directories(out);
    write_metrics_csv(out / "metrics.csv", report);
    write_text_file(out / "report.json", report_json(report).dump(2) + "\n");
    print_report(report);
    write_run_manifest(g, "eval",
                       json{{"dataset", a.dataset},
                            {"scorers", a.scorers},
                            {"model_dir", a.model_dir},
                            {"transform_source", a.transform_source},
                            {"mask_source", a.mask_source},
                            {"limit", a.limit}});
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

struct SweepArgs {
  EvalArgs eval;
  std::string axis = "jpeg";
  std::vector<double> values;
};

int run_sweep(const GlobalOpts& g, const SweepArgs& a) {
  ScorerSelection sel;
  SweepAxis axis;
  try {
    if (int rc = validate_eval_args(a.eval, sel); rc != 0) return rc;
    if (a.axis == "jpeg")
      axis = SweepAxis::jpeg_default();
    else if (a.axis == "noise")
      axis = SweepAxis::noise_default();
    else if (a.axis == "resize")
      axis = SweepAxis::resize_default();
    else if (a.axis == "mask_dilate")
      axis = SweepAxis::mask_dilate_default();
    else if (a.axis == "mask_erode")
      axis = SweepAxis::mask_erode_default();
    else
      throw Error("unknown sweep axis \"" + a.axis + "\"");
    if (!a.values.empty()) axis.values = a.values;
    require(!axis.values.empty(), "sweep grid is empty");
  } catch (const std::exception& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  }
  if (g.dry_run) {
    std::cout << "dry run: would sweep " << a.axis << " over " << axis.values.size()
              << " grid points on " << a.eval.dataset << '\n';
    return 0;
  }
  try {
    const DatasetManifest manifest = read_manifest(a.eval.dataset);
    require(!manifest.ids.empty(), "dataset is empty");
    std::uint64_t count = manifest.ids.size();
    if (a.eval.limit > 0 && a.eval.limit < count) count = a.eval.limit;
    const fs::path droot(a.eval.dataset);
    const RecordSource source = [&](std::size_t i) { return load_record(droot, manifest.ids[i]); };

    const LoadedModels models = load_models(sel, a.eval.model_dir);
    const EvalOptions opts = make_eval_options(a.eval, g, sel, models);
    const std::vector<SweepRow> rows = robustness_sweep(count, source, axis, opts);

    const fs::path out = out_dir(g);
    fs::create_directories(out);
    write_sweep_csv(out / "sweep.csv", rows);
    for (const SweepRow& row : rows) {
      std::cout << row.axis << '=' << row.value << ": accuracy " << row.report.accuracy
                << " over " << row.report.opt_in << " opt-in\n";
    }
    write_run_manifest(g, "sweep",
                       json{{"dataset", a.eval.dataset},
                            {"axis", a.axis},
                            {"values", axis.values},
                            {"scorers", a.eval.scorers},
                            {"model_dir", a.eval.model_dir},
                            {"transform_source", a.eval.transform_source},
                            {"mask_source", a.eval.mask_source},
                            {"limit", a.eval.limit}});
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

void add_eval_flags(CLI::App* cmd, EvalArgs& a) {
  cmd->add_option("--dataset", a.dataset, "dataset directory (gen layout)")->required();
  cmd->add_option("--scorers", a.scorers, "scorers: mse, twin, siamese")->delimiter(',');
  cmd->add_option("--model-dir", a.model_dir, "directory holding twin.json / siamese.json");
  cmd->add_option("--transform-source", a.transform_source, "estimated | ground_truth");
  cmd->add_option("--mask-source", a.mask_source, "label_map | binary_mask");
  cmd->add_option("--limit", a.limit, "evaluate only the first N records");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"copy-move source/target disambiguation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--seed", g.seed, "base RNG seed (default 0)");
  app.add_option("--workers", g.workers, "worker threads (0 = available parallelism)");
  app.add_option("--out", g.out, "output directory (default $CMDIS_OUT or ./out)");
  app.add_flag("--dry-run", g.dry_run, "validate configuration, write nothing");

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic forgery dataset");
  gen->add_option("--count", gen_args.count, "number of records")->required();
  gen->add_option("--image-size", gen_args.image_size, "frame side in pixels");
  gen->add_option("--source-box", gen_args.source_box, "polygon sampling box (non-rigid)");
  gen->add_option("--rigid-box", gen_args.rigid_box, "polygon sampling box (rigid)");
  gen->add_option("--vertices", gen_args.vertices, "polygon vertex draws");
  gen->add_option("--kind", gen_args.kinds,
                  "transform kind (repeatable): rigid, rot, res, rot_res, res_rot");
  gen->add_option("--pp-probability", gen_args.pp_probability, "global post-processing rate");
  gen->add_flag("--no-blend", gen_args.no_blend, "disable boundary blending");

  DisArgs dis_args;
  CLI::App* dis = app.add_subcommand("disambiguate", "decide source vs target for one image");
  dis->add_option("--image", dis_args.image, "image file (png or jpeg)")->required();
  dis->add_option("--mask", dis_args.mask, "detector mask png (0/255)")->required();
  dis->add_option("--transform", dis_args.transform, "JSON file with a known transform");
  dis->add_option("--scorers", dis_args.scorers, "scorers: mse, twin, siamese")->delimiter(',');
  dis->add_option("--model-dir", dis_args.model_dir, "directory holding model files");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a scorer on a generated dataset");
  train->add_option("--dataset", train_args.dataset, "dataset directory")->required();
  train->add_option("--arch", train_args.arch, "twin | siamese")->required();
  train->add_option("--epochs", train_args.epochs, "training epochs");
  train->add_option("--batch", train_args.batch, "mini-batch size");
  train->add_option("--lr", train_args.lr, "learning rate");
  train->add_option("--val-fraction", train_args.val_fraction, "held-out fraction");
  train->add_option("--pairs-per-record", train_args.pairs_per_record,
                    "boundary pairs per record (siamese)");
  train->add_flag("--no-perturb", train_args.no_perturb, "train on exact transforms");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "evaluate scorers over a dataset");
  add_eval_flags(eval, eval_args);

  SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand("sweep", "robustness sweep over a degradation grid");
  add_eval_flags(sweep, sweep_args.eval);
  sweep->add_option("--axis", sweep_args.axis,
                    "jpeg | noise | resize | mask_dilate | mask_erode");
  sweep->add_option("--values", sweep_args.values, "grid override")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  }

  if (gen->parsed()) return run_gen(g, gen_args);
  if (dis->parsed()) return run_disambiguate(g, dis_args);
  if (train->parsed()) return run_train(g, train_args);
  if (eval->parsed()) return run_eval(g, eval_args);
  if (sweep->parsed()) return run_sweep(g, sweep_args);
  std::cerr << "validation error: no subcommand\n";
  return 1;
}
