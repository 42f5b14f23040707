#ifndef CMDIS_NET_HPP
#define CMDIS_NET_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmdis/image.hpp"
#include "cmdis/rng.hpp"

namespace cmdis {

// Architecture of the shared patch feature extractor F: `channels.size()`
// conv(3x3, stride 2, pad 1) + ReLU blocks starting from 3 input channels,
// then a linear map from the flattened final activation to feature_dim. The
// pair head is concat -> linear(2D -> D/2) -> ReLU -> linear(D/2 -> 1).
struct NetArch {
  int patch = 64;
  std::vector<int> channels = {8, 16, 32, 64};
  int feature_dim = 128;

  void validate() const;
  int flat_dim() const;  // channels.back() * (patch >> blocks)^2
  bool operator==(const NetArch&) const = default;
};

// Weights shared by every branch. Twin and siamese models are structurally
// identical; they differ in input wiring, output coupling, and training.
struct PairScorer {
  NetArch arch;
  std::vector<Eigen::MatrixXd> conv_w;  // [i]: channels[i] x (in_ch * 9)
  std::vector<Eigen::VectorXd> conv_b;
  Eigen::MatrixXd embed_w;  // feature_dim x flat_dim
  Eigen::VectorXd embed_b;
  Eigen::MatrixXd head1_w;  // D/2 x 2D
  Eigen::VectorXd head1_b;
  Eigen::MatrixXd head2_w;  // 1 x D/2
  Eigen::VectorXd head2_b;

  static PairScorer init(const NetArch& arch, RngStream& rng);  // He/Xavier init
  static PairScorer zeros_like(const PairScorer& like);         // same shapes, all 0

  // flat views over every parameter tensor, in a fixed order; grads and
  // optimizer state reuse the same layout
  struct TensorRef {
    std::string name;
    double* data;
    std::ptrdiff_t size;
  };
  std::vector<TensorRef> tensors();
  std::size_t parameter_count() const;
  void axpy(double a, const PairScorer& g);  // this += a * g
};

struct TinyTwinModel {
  PairScorer net;
};
struct TinySiameseModel {
  PairScorer net;
};

// Net input: CHW doubles, pixel values shifted by -0.5. The byte form
// quantizes values exactly like the on-disk 8-bit images, so training
// samples match what inference sees after a save/load round trip.
std::vector<double> net_input(const RasterImage& patch);
std::vector<std::uint8_t> quantize_patch(const RasterImage& patch);
std::vector<double> net_input(const std::vector<std::uint8_t>& bytes);

// Logit of one ordered patch pair: z = head(F(a) || F(b)). `a` and `b` are
// CHW inputs of length 3 * patch^2.
double pair_logit(const PairScorer& net, const double* a, const double* b);

// ---- training samples ----

// Four patches ordered [(first pair), (second pair)]; label 0 means the
// first pair is the source pair (hypothesis H0), 1 the reverse.
struct QuadSample {
  std::array<std::vector<std::uint8_t>, 4> patches;
  int label = 0;
};

// Ordered boundary patch pair; label 0 means the first patch comes from the
// source region.
struct PairSample {
  std::array<std::vector<std::uint8_t>, 2> patches;
  int label = 0;
};

// Cross-entropy losses. When `grads` is non-null the parameter gradients are
// accumulated into it (shapes must match the model).
double twin_loss(const PairScorer& net, const QuadSample& sample, PairScorer* grads);
double siamese_loss(const PairScorer& net, const PairSample& sample, PairScorer* grads);

struct TrainConfig {
  int epochs = 12;
  int batch = 16;
  double lr = 1e-3;
  double val_fraction = 0.15;
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0 = default parallelism

  void validate() const;
};

struct EpochStats {
  int epoch = 0;           // 1-based
  double loss = 0.0;       // mean training loss
  double val_accuracy = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
};

// Adam over mean batch gradients; per-epoch reshuffling, intra-pair order
// shuffling (twin) / order-flip augmentation (siamese) drawn from the config
// seed. The trailing val_fraction of a seeded shuffle is held out. Results
// are bit-identical for a fixed (data, arch, cfg) regardless of workers.
// Throws on empty data or non-finite loss.
TinyTwinModel train_twin(const std::vector<QuadSample>& data, const NetArch& arch,
                         const TrainConfig& cfg, TrainLog* log = nullptr);
TinySiameseModel train_siamese(const std::vector<PairSample>& data, const NetArch& arch,
                               const TrainConfig& cfg, TrainLog* log = nullptr);

// ---- checkpoints & logs ----

// JSON container: format_version, model kind ("twin"/"siamese"), arch, and
// one flat array per parameter tensor with its declared shape.
void save_model(const std::filesystem::path& path, const PairScorer& net,
                const std::string& model_kind);
PairScorer load_model(const std::filesystem::path& path, std::string* model_kind = nullptr);

// CSV: epoch,loss,val_accuracy
void save_training_log_csv(const std::filesystem::path& path, const TrainLog& log);

}  // namespace cmdis

#endif
