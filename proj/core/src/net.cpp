#include "cmdis/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>
#include <utility>

#include <nlohmann/json.hpp>

#include "cmdis/error.hpp"
#include "cmdis/parallel.hpp"
#include "net_internal.hpp"

namespace cmdis {

using nlohmann::json;

void NetArch::validate() const {
  require(!channels.empty() && channels.size() <= 6, "net arch: need 1..6 conv blocks");
  for (int c : channels) require(c >= 1, "net arch: channel counts must be positive");
  require(patch >= 8, "net arch: patch must be at least 8");
  int hw = patch;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    require(hw % 2 == 0, "net arch: patch must halve at every stride-2 block");
    hw /= 2;
  }
  require(hw >= 1, "net arch: conv stack collapses below 1x1");
  require(feature_dim >= 2 && feature_dim % 2 == 0,
          "net arch: feature_dim must be even and at least 2");
}

int NetArch::flat_dim() const {
  int hw = patch >> static_cast<int>(channels.size());
  return channels.back() * hw * hw;
}

namespace {

PairScorer make_shaped(const NetArch& arch) {
  arch.validate();
  PairScorer net;
  net.arch = arch;
  int in_ch = 3;
  for (int out_ch : arch.channels) {
    net.conv_w.emplace_back(Eigen::MatrixXd::Zero(out_ch, in_ch * 9));
    net.conv_b.emplace_back(Eigen::VectorXd::Zero(out_ch));
    in_ch = out_ch;
  }
  const int d = arch.feature_dim;
  net.embed_w = Eigen::MatrixXd::Zero(d, arch.flat_dim());
  net.embed_b = Eigen::VectorXd::Zero(d);
  net.head1_w = Eigen::MatrixXd::Zero(d / 2, 2 * d);
  net.head1_b = Eigen::VectorXd::Zero(d / 2);
  net.head2_w = Eigen::MatrixXd::Zero(1, d / 2);
  net.head2_b = Eigen::VectorXd::Zero(1);
  return net;
}

void fill_gaussian(Eigen::MatrixXd& m, double stddev, RngStream& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = stddev * rng.next_gaussian();
}

}  // namespace

PairScorer PairScorer::init(const NetArch& arch, RngStream& rng) {
  PairScorer net = make_shaped(arch);
  for (std::size_t i = 0; i < net.conv_w.size(); ++i) {
    // He init for the ReLU conv blocks
    fill_gaussian(net.conv_w[i], std::sqrt(2.0 / net.conv_w[i].cols()), rng);
  }
  // Xavier for the linear embedding (no activation after it)
  fill_gaussian(net.embed_w, std::sqrt(1.0 / net.embed_w.cols()), rng);
  fill_gaussian(net.head1_w, std::sqrt(2.0 / net.head1_w.cols()), rng);
  fill_gaussian(net.head2_w, std::sqrt(1.0 / net.head2_w.cols()), rng);
  return net;
}

PairScorer PairScorer::zeros_like(const PairScorer& like) { return make_shaped(like.arch); }

std::vector<PairScorer::TensorRef> PairScorer::tensors() {
  std::vector<TensorRef> out;
  for (std::size_t i = 0; i < conv_w.size(); ++i) {
    out.push_back({"conv" + std::to_string(i) + "_w", conv_w[i].data(), conv_w[i].size()});
    out.push_back({"conv" + std::to_string(i) + "_b", conv_b[i].data(), conv_b[i].size()});
  }
  out.push_back({"embed_w", embed_w.data(), embed_w.size()});
  out.push_back({"embed_b", embed_b.data(), embed_b.size()});
  out.push_back({"head1_w", head1_w.data(), head1_w.size()});
  out.push_back({"head1_b", head1_b.data(), head1_b.size()});
  out.push_back({"head2_w", head2_w.data(), head2_w.size()});
  out.push_back({"head2_b", head2_b.data(), head2_b.size()});
  return out;
}

std::size_t PairScorer::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : conv_w) n += w.size();
  for (const auto& b : conv_b) n += b.size();
  n += embed_w.size() + embed_b.size() + head1_w.size() + head1_b.size() + head2_w.size() +
       head2_b.size();
  return n;
}

void PairScorer::axpy(double a, const PairScorer& g) {
  for (std::size_t i = 0; i < conv_w.size(); ++i) {
    conv_w[i] += a * g.conv_w[i];
    conv_b[i] += a * g.conv_b[i];
  }
  embed_w += a * g.embed_w;
  embed_b += a * g.embed_b;
  head1_w += a * g.head1_w;
  head1_b += a * g.head1_b;
  head2_w += a * g.head2_w;
  head2_b += a * g.head2_b;
}

std::vector<double> net_input(const RasterImage& patch) {
  std::vector<double> out(static_cast<std::size_t>(3) * patch.width() * patch.height());
  std::size_t i = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < patch.height(); ++y)
      for (int x = 0; x < patch.width(); ++x) out[i++] = patch.at(x, y, c) - 0.5;
  return out;
}

std::vector<std::uint8_t> quantize_patch(const RasterImage& patch) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(3) * patch.width() * patch.height());
  std::size_t i = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < patch.height(); ++y)
      for (int x = 0; x < patch.width(); ++x) out[i++] = to_byte(patch.at(x, y, c));
  return out;
}

std::vector<double> net_input(const std::vector<std::uint8_t>& bytes) {
  std::vector<double> out(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = from_byte(bytes[i]) - 0.5;
  return out;
}

// ---- forward / backward ----

namespace {

// 3x3 kernel, stride 2, zero pad 1: input (ch, hw, hw) CHW -> cols
// (ch*9, (hw/2)^2); column j corresponds to output position (j / ohw, j % ohw)
void im2col(const double* in, int ch, int hw, Eigen::MatrixXd& cols) {
  const int ohw = hw / 2;
  cols.resize(ch * 9, ohw * ohw);
  for (int c = 0; c < ch; ++c) {
    const double* plane = in + static_cast<std::ptrdiff_t>(c) * hw * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const int row = (c * 3 + ky) * 3 + kx;
        for (int oy = 0; oy < ohw; ++oy) {
          const int iy = 2 * oy - 1 + ky;
          const bool yin = iy >= 0 && iy < hw;
          for (int ox = 0; ox < ohw; ++ox) {
            const int ix = 2 * ox - 1 + kx;
            cols(row, oy * ohw + ox) =
                (yin && ix >= 0 && ix < hw) ? plane[static_cast<std::ptrdiff_t>(iy) * hw + ix]
                                            : 0.0;
          }
        }
      }
    }
  }
}

// transpose of im2col: scatter-adds column gradients back onto the input plane
void col2im_add(const Eigen::MatrixXd& dcols, int ch, int hw, double* din) {
  const int ohw = hw / 2;
  for (int c = 0; c < ch; ++c) {
    double* plane = din + static_cast<std::ptrdiff_t>(c) * hw * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const int row = (c * 3 + ky) * 3 + kx;
        for (int oy = 0; oy < ohw; ++oy) {
          const int iy = 2 * oy - 1 + ky;
          if (iy < 0 || iy >= hw) continue;
          for (int ox = 0; ox < ohw; ++ox) {
            const int ix = 2 * ox - 1 + kx;
            if (ix < 0 || ix >= hw) continue;
            plane[static_cast<std::ptrdiff_t>(iy) * hw + ix] += dcols(row, oy * ohw + ox);
          }
        }
      }
    }
  }
}

struct FeatCache {
  std::vector<Eigen::MatrixXd> cols;  // input patches per conv block
  std::vector<Eigen::MatrixXd> act;   // post-ReLU activations per block
  Eigen::VectorXd feat;
};

void feature_forward(const PairScorer& net, const double* input, FeatCache& cache) {
  const int blocks = static_cast<int>(net.arch.channels.size());
  cache.cols.resize(blocks);
  cache.act.resize(blocks);
  int ch = 3;
  int hw = net.arch.patch;
  const double* cur = input;
  for (int i = 0; i < blocks; ++i) {
    im2col(cur, ch, hw, cache.cols[i]);
    cache.act[i] = ((net.conv_w[i] * cache.cols[i]).colwise() + net.conv_b[i]).cwiseMax(0.0);
    ch = net.arch.channels[i];
    hw /= 2;
    cur = cache.act[i].data();
  }
  const Eigen::Map<const Eigen::VectorXd> flat(cache.act.back().data(),
                                               cache.act.back().size());
  cache.feat = net.embed_w * flat + net.embed_b;
}

// dfeat -> parameter grads (+ nothing returned for the input layer)
void feature_backward(const PairScorer& net, const FeatCache& cache,
                      const Eigen::VectorXd& dfeat, PairScorer& grads) {
  const Eigen::Map<const Eigen::VectorXd> flat(cache.act.back().data(),
                                               cache.act.back().size());
  grads.embed_w.noalias() += dfeat * flat.transpose();
  grads.embed_b += dfeat;
  Eigen::VectorXd dflat = net.embed_w.transpose() * dfeat;

  const int blocks = static_cast<int>(net.arch.channels.size());
  Eigen::MatrixXd dact = Eigen::Map<Eigen::MatrixXd>(dflat.data(), cache.act.back().rows(),
                                                     cache.act.back().cols());
  int hw = net.arch.patch >> blocks;
  for (int i = blocks - 1; i >= 0; --i) {
    // ReLU subgradient: zero where the activation clamped
    Eigen::MatrixXd dpre =
        (cache.act[i].array() > 0.0).select(dact, Eigen::MatrixXd::Zero(dact.rows(), dact.cols()));
    grads.conv_w[i].noalias() += dpre * cache.cols[i].transpose();
    grads.conv_b[i] += dpre.rowwise().sum();
    if (i > 0) {
      Eigen::MatrixXd dcols = net.conv_w[i].transpose() * dpre;
      const int in_ch = net.arch.channels[i - 1];
      const int in_hw = hw * 2;
      Eigen::MatrixXd prev = Eigen::MatrixXd::Zero(cache.act[i - 1].rows(), cache.act[i - 1].cols());
      col2im_add(dcols, in_ch, in_hw, prev.data());
      dact = std::move(prev);
    }
    hw *= 2;
  }
}

struct HeadCache {
  Eigen::VectorXd concat;  // 2D
  Eigen::VectorXd h;       // post-ReLU hidden
  double z = 0.0;
};

void head_forward(const PairScorer& net, const Eigen::VectorXd& fa, const Eigen::VectorXd& fb,
                  HeadCache& cache) {
  const int d = net.arch.feature_dim;
  cache.concat.resize(2 * d);
  cache.concat.head(d) = fa;
  cache.concat.tail(d) = fb;
  cache.h = (net.head1_w * cache.concat + net.head1_b).cwiseMax(0.0);
  cache.z = (net.head2_w * cache.h)(0) + net.head2_b(0);
}

void head_backward(const PairScorer& net, const HeadCache& cache, double dz, PairScorer& grads,
                   Eigen::VectorXd& dfa, Eigen::VectorXd& dfb) {
  grads.head2_w.noalias() += dz * cache.h.transpose();
  grads.head2_b(0) += dz;
  Eigen::VectorXd dh = net.head2_w.transpose() * dz;
  dh = (cache.h.array() > 0.0).select(dh, Eigen::VectorXd::Zero(dh.size()));
  grads.head1_w.noalias() += dh * cache.concat.transpose();
  grads.head1_b += dh;
  Eigen::VectorXd dconcat = net.head1_w.transpose() * dh;
  const int d = net.arch.feature_dim;
  dfa += dconcat.head(d);
  dfb += dconcat.tail(d);
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

void check_patch(const std::vector<std::uint8_t>& bytes, const NetArch& arch, const char* what) {
  require(static_cast<int>(bytes.size()) == 3 * arch.patch * arch.patch,
          std::string(what) + ": patch byte count does not match the architecture");
}

}  // namespace

Eigen::VectorXd patch_feature(const PairScorer& net, const double* input) {
  FeatCache cache;
  feature_forward(net, input, cache);
  return cache.feat;
}

double head_logit(const PairScorer& net, const Eigen::VectorXd& fa, const Eigen::VectorXd& fb) {
  HeadCache cache;
  head_forward(net, fa, fb, cache);
  return cache.z;
}

double pair_logit(const PairScorer& net, const double* a, const double* b) {
  return head_logit(net, patch_feature(net, a), patch_feature(net, b));
}

namespace {

double twin_loss_impl(const PairScorer& net, const std::vector<std::uint8_t>* const p[4],
                      int label, PairScorer* grads) {
  require(label == 0 || label == 1, "twin loss: label must be 0 or 1");
  std::array<FeatCache, 4> feats;
  std::array<std::vector<double>, 4> inputs;
  for (int i = 0; i < 4; ++i) {
    check_patch(*p[i], net.arch, "twin loss");
    inputs[i] = net_input(*p[i]);
    feature_forward(net, inputs[i].data(), feats[i]);
  }
  HeadCache h0, h1;
  head_forward(net, feats[0].feat, feats[1].feat, h0);
  head_forward(net, feats[2].feat, feats[3].feat, h1);

  const double m = std::max(h0.z, h1.z);
  const double e0 = std::exp(h0.z - m), e1 = std::exp(h1.z - m);
  const double se = e0 + e1;
  const double loss = std::log(se) - ((label == 0 ? h0.z : h1.z) - m);

  if (grads) {
    const double p0 = e0 / se;
    const double dz0 = p0 - (label == 0 ? 1.0 : 0.0);
    const double dz1 = (1.0 - p0) - (label == 1 ? 1.0 : 0.0);
    const int d = net.arch.feature_dim;
    std::array<Eigen::VectorXd, 4> dfeat;
    for (auto& v : dfeat) v = Eigen::VectorXd::Zero(d);
    head_backward(net, h0, dz0, *grads, dfeat[0], dfeat[1]);
    head_backward(net, h1, dz1, *grads, dfeat[2], dfeat[3]);
    for (int i = 0; i < 4; ++i) feature_backward(net, feats[i], dfeat[i], *grads);
  }
  return loss;
}

double siamese_loss_impl(const PairScorer& net, const std::vector<std::uint8_t>* const p[2],
                         int label, PairScorer* grads) {
  require(label == 0 || label == 1, "siamese loss: label must be 0 or 1");
  std::array<FeatCache, 2> feats;
  std::array<std::vector<double>, 2> inputs;
  for (int i = 0; i < 2; ++i) {
    check_patch(*p[i], net.arch, "siamese loss");
    inputs[i] = net_input(*p[i]);
    feature_forward(net, inputs[i].data(), feats[i]);
  }
  HeadCache head;
  head_forward(net, feats[0].feat, feats[1].feat, head);
  // -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
  const double loss = label == 1 ? softplus(-head.z) : softplus(head.z);

  if (grads) {
    const double dz = stable_sigmoid(head.z) - label;
    const int d = net.arch.feature_dim;
    Eigen::VectorXd dfa = Eigen::VectorXd::Zero(d), dfb = Eigen::VectorXd::Zero(d);
    head_backward(net, head, dz, *grads, dfa, dfb);
    feature_backward(net, feats[0], dfa, *grads);
    feature_backward(net, feats[1], dfb, *grads);
  }
  return loss;
}

}  // namespace

double twin_loss(const PairScorer& net, const QuadSample& sample, PairScorer* grads) {
  const std::vector<std::uint8_t>* p[4] = {&sample.patches[0], &sample.patches[1],
                                           &sample.patches[2], &sample.patches[3]};
  return twin_loss_impl(net, p, sample.label, grads);
}

double siamese_loss(const PairScorer& net, const PairSample& sample, PairScorer* grads) {
  const std::vector<std::uint8_t>* p[2] = {&sample.patches[0], &sample.patches[1]};
  return siamese_loss_impl(net, p, sample.label, grads);
}

// ---- training ----

void TrainConfig::validate() const {
  require(epochs >= 1, "train config: epochs must be positive");
  require(batch >= 1, "train config: batch must be positive");
  require(lr > 0.0, "train config: learning rate must be positive");
  require(val_fraction >= 0.0 && val_fraction < 1.0, "train config: val_fraction must be in [0, 1)");
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.next_below(i)]);
  return idx;
}

struct Adam {
  double lr;
  double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  PairScorer m, v;
  long long t = 0;

  explicit Adam(const PairScorer& net, double lr_)
      : lr(lr_), m(PairScorer::zeros_like(net)), v(PairScorer::zeros_like(net)) {}

  void step(PairScorer& net, PairScorer& g) {
    ++t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    auto nt = net.tensors();
    auto mt = m.tensors();
    auto vt = v.tensors();
    auto gt = g.tensors();
    for (std::size_t k = 0; k < nt.size(); ++k) {
      double* p = nt[k].data;
      double* mp = mt[k].data;
      double* vp = vt[k].data;
      const double* gp = gt[k].data;
      for (std::ptrdiff_t i = 0; i < nt[k].size; ++i) {
        mp[i] = b1 * mp[i] + (1.0 - b1) * gp[i];
        vp[i] = b2 * vp[i] + (1.0 - b2) * gp[i] * gp[i];
        p[i] -= lr * (mp[i] / c1) / (std::sqrt(vp[i] / c2) + eps);
      }
    }
  }
};

void zero_grads(PairScorer& g) {
  for (auto& t : g.tensors()) std::fill(t.data, t.data + t.size, 0.0);
}

// Shared epoch driver. `sample_loss(index, epoch, &grads)` computes one
// augmented sample's loss and accumulates grads; `val_correct(index)` scores
// a held-out sample. Batch gradients are reduced over fixed worker chunks in
// chunk order, so results do not depend on the worker count.
template <class SampleLoss, class ValCorrect>
void train_loop(PairScorer& net, std::size_t n_samples, const TrainConfig& cfg, TrainLog* log,
                SampleLoss&& sample_loss, ValCorrect&& val_correct) {
  require(n_samples > 0, "training requires at least one sample");
  std::vector<std::size_t> perm =
      shuffled_indices(n_samples, RngStream::derive(cfg.seed, {0x5eed, 0}));
  std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * n_samples));
  if (n_val >= n_samples) n_val = n_samples - 1;
  const std::size_t n_train = n_samples - n_val;
  std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + n_train);
  std::vector<std::size_t> val_idx(perm.begin() + n_train, perm.end());

  unsigned workers = cfg.workers ? cfg.workers : default_workers();
  Adam opt(net, cfg.lr);
  PairScorer batch_grads = PairScorer::zeros_like(net);
  std::vector<PairScorer> chunk_grads;
  for (unsigned w = 0; w < workers; ++w) chunk_grads.push_back(PairScorer::zeros_like(net));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = shuffled_indices(
        n_train, RngStream::derive(cfg.seed, {0x5eed, static_cast<std::uint64_t>(epoch)}));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n_train; start += cfg.batch) {
      const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(cfg.batch));
      const std::size_t count = stop - start;
      auto chunks = static_chunks(count, workers);
      std::vector<double> chunk_loss(chunks.size(), 0.0);
      auto run_chunk = [&](std::size_t ci) {
        zero_grads(chunk_grads[ci]);
        for (std::size_t j = chunks[ci].first; j < chunks[ci].second; ++j)
          chunk_loss[ci] += sample_loss(train_idx[order[start + j]], epoch, chunk_grads[ci]);
      };
      if (chunks.size() == 1) {
        run_chunk(0);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t ci = 0; ci < chunks.size(); ++ci) pool.emplace_back(run_chunk, ci);
        for (auto& th : pool) th.join();
      }
      zero_grads(batch_grads);
      double batch_loss = 0.0;
      for (std::size_t ci = 0; ci < chunks.size(); ++ci) {
        batch_grads.axpy(1.0, chunk_grads[ci]);
        batch_loss += chunk_loss[ci];
      }
      require(std::isfinite(batch_loss), "training diverged: non-finite loss");
      loss_sum += batch_loss;
      const double inv = 1.0 / static_cast<double>(count);  // mean over the batch
      for (auto& t : batch_grads.tensors())
        for (std::ptrdiff_t i = 0; i < t.size; ++i) t.data[i] *= inv;
      opt.step(net, batch_grads);
    }

    double val_acc = 1.0;  // vacuous when nothing is held out
    if (!val_idx.empty()) {
      std::vector<std::uint8_t> correct(val_idx.size(), 0);
      parallel_for(val_idx.size(), workers,
                   [&](std::size_t i) { correct[i] = val_correct(val_idx[i]) ? 1 : 0; });
      std::size_t n_ok = 0;
      for (std::uint8_t c : correct) n_ok += c;
      val_acc = static_cast<double>(n_ok) / val_idx.size();
    }
    if (log) log->epochs.push_back({epoch, loss_sum / n_train, val_acc});
  }
}

}  // namespace

TinyTwinModel train_twin(const std::vector<QuadSample>& data, const NetArch& arch,
                         const TrainConfig& cfg, TrainLog* log) {
  arch.validate();
  cfg.validate();
  require(!data.empty(), "train_twin: empty dataset");
  RngStream init_rng = RngStream::derive(cfg.seed, {0x1417});
  TinyTwinModel model{PairScorer::init(arch, init_rng)};

  auto sample_loss = [&](std::size_t idx, int epoch, PairScorer& grads) {
    const QuadSample& s = data[idx];
    // per-epoch augmentation: intra-pair order shuffles (label unchanged)
    // and a pair swap (label flipped) balancing the two hypotheses
    RngStream aug = RngStream::derive(cfg.seed, {0xa46, static_cast<std::uint64_t>(epoch), idx});
    int a = 0, b = 1, c = 2, d = 3;
    if (aug.next_below(2)) std::swap(a, b);
    if (aug.next_below(2)) std::swap(c, d);
    int label = s.label;
    if (aug.next_below(2)) {
      std::swap(a, c);
      std::swap(b, d);
      label = 1 - label;
    }
    const std::vector<std::uint8_t>* p[4] = {&s.patches[a], &s.patches[b], &s.patches[c],
                                             &s.patches[d]};
    return twin_loss_impl(model.net, p, label, &grads);
  };
  auto val_correct = [&](std::size_t idx) {
    const QuadSample& s = data[idx];
    const double loss = twin_loss(model.net, s, nullptr);
    // loss < ln 2 iff the true hypothesis got the larger probability
    return loss < 0.6931471805599453;
  };
  train_loop(model.net, data.size(), cfg, log, sample_loss, val_correct);
  return model;
}

TinySiameseModel train_siamese(const std::vector<PairSample>& data, const NetArch& arch,
                               const TrainConfig& cfg, TrainLog* log) {
  arch.validate();
  cfg.validate();
  require(!data.empty(), "train_siamese: empty dataset");
  RngStream init_rng = RngStream::derive(cfg.seed, {0x51a3});
  TinySiameseModel model{PairScorer::init(arch, init_rng)};

  auto sample_loss = [&](std::size_t idx, int epoch, PairScorer& grads) {
    const PairSample& s = data[idx];
    RngStream aug = RngStream::derive(cfg.seed, {0xa47, static_cast<std::uint64_t>(epoch), idx});
    int a = 0, b = 1;
    int label = s.label;
    if (aug.next_below(2)) {
      std::swap(a, b);
      label = 1 - label;
    }
    const std::vector<std::uint8_t>* p[2] = {&s.patches[a], &s.patches[b]};
    return siamese_loss_impl(model.net, p, label, &grads);
  };
  auto val_correct = [&](std::size_t idx) {
    const PairSample& s = data[idx];
    return siamese_loss(model.net, s, nullptr) < 0.6931471805599453;
  };
  train_loop(model.net, data.size(), cfg, log, sample_loss, val_correct);
  return model;
}

// ---- checkpoints ----

void save_model(const std::filesystem::path& path, const PairScorer& net,
                const std::string& model_kind) {
  require(model_kind == "twin" || model_kind == "siamese",
          "save_model: model kind must be twin or siamese");
  json tensors = json::object();
  auto add = [&](const std::string& name, const double* data, std::vector<int> shape) {
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    tensors[name] = json{{"shape", shape}, {"data", std::vector<double>(data, data + n)}};
  };
  for (std::size_t i = 0; i < net.conv_w.size(); ++i) {
    add("conv" + std::to_string(i) + "_w", net.conv_w[i].data(),
        {static_cast<int>(net.conv_w[i].rows()), static_cast<int>(net.conv_w[i].cols())});
    add("conv" + std::to_string(i) + "_b", net.conv_b[i].data(),
        {static_cast<int>(net.conv_b[i].size())});
  }
  add("embed_w", net.embed_w.data(),
      {static_cast<int>(net.embed_w.rows()), static_cast<int>(net.embed_w.cols())});
  add("embed_b", net.embed_b.data(), {static_cast<int>(net.embed_b.size())});
  add("head1_w", net.head1_w.data(),
      {static_cast<int>(net.head1_w.rows()), static_cast<int>(net.head1_w.cols())});
  add("head1_b", net.head1_b.data(), {static_cast<int>(net.head1_b.size())});
  add("head2_w", net.head2_w.data(),
      {static_cast<int>(net.head2_w.rows()), static_cast<int>(net.head2_w.cols())});
  add("head2_b", net.head2_b.data(), {static_cast<int>(net.head2_b.size())});

  json j{{"format_version", 1},
         {"model", model_kind},
         {"arch",
          {{"patch", net.arch.patch},
           {"channels", net.arch.channels},
           {"feature_dim", net.arch.feature_dim}}},
         {"tensors", tensors}};
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "could not open " + path.string() + " for writing");
  out << j.dump() << "\n";
  require(out.good(), "failed writing " + path.string());
}

PairScorer load_model(const std::filesystem::path& path, std::string* model_kind) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "could not open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  const char* ctx = "model checkpoint";
  auto get = [&](const json& obj, const char* name) -> const json& {
    auto it = obj.find(name);
    require(it != obj.end(), std::string(ctx) + ": missing field \"" + name + "\"");
    return *it;
  };
  require(get(j, "format_version").get<int>() == 1,
          "model checkpoint: unsupported format_version");
  const std::string kind = get(j, "model").get<std::string>();
  require(kind == "twin" || kind == "siamese", "model checkpoint: unknown model kind");
  if (model_kind) *model_kind = kind;

  const json& arch_j = get(j, "arch");
  NetArch arch;
  arch.patch = get(arch_j, "patch").get<int>();
  arch.channels = get(arch_j, "channels").get<std::vector<int>>();
  arch.feature_dim = get(arch_j, "feature_dim").get<int>();
  PairScorer net = make_shaped(arch);

  const json& tensors = get(j, "tensors");
  auto refs = net.tensors();
  require(tensors.size() == refs.size(), "model checkpoint: unexpected tensor count");
  for (auto& ref : refs) {
    const json& t = get(tensors, ref.name.c_str());
    const auto data = get(t, "data").get<std::vector<double>>();
    require(static_cast<std::ptrdiff_t>(data.size()) == ref.size,
            "model checkpoint: tensor \"" + ref.name + "\" has the wrong element count");
    std::copy(data.begin(), data.end(), ref.data);
  }
  return net;
}

void save_training_log_csv(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "could not open " + path.string() + " for writing");
  out << "epoch,loss,val_accuracy\n";
  char buf[96];
  for (const EpochStats& e : log.epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.loss, e.val_accuracy);
    out << buf;
  }
  require(out.good(), "failed writing " + path.string());
}

}  // namespace cmdis
