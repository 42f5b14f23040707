#include "cmdis/scoring.hpp"

#include <cmath>

#include "cmdis/error.hpp"
#include "cmdis/warp.hpp"
#include "net_internal.hpp"

namespace cmdis {

namespace {

BinaryMask full_mask(int w, int h) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, true);
  return m;
}

double softmax0(double z0, double z1) {
  const double m = std::max(z0, z1);
  const double e0 = std::exp(z0 - m);
  const double e1 = std::exp(z1 - m);
  return e0 / (e0 + e1);
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

HypothesisScore mse_score(const PatchQuad& quad, double epsilon, double min_valid_fraction) {
  const BinaryMask ones = full_mask(quad.x1.width(), quad.x1.height());
  double frac10 = 0.0, frac01 = 0.0;
  const double m10 = masked_mse(quad.x1, ones, quad.x2, quad.v2, &frac10);
  const double m01 = masked_mse(quad.x3, ones, quad.x4, quad.v4, &frac01);

  HypothesisScore score;
  if (frac10 < min_valid_fraction || frac01 < min_valid_fraction) {
    score.tie = true;
    score.low_validity = true;
    return score;
  }
  const double s = m01 + m10;
  if (!(s > epsilon) || m01 == m10) {
    score.tie = true;
    return score;
  }
  score.f_h0 = m10 / s;
  score.f_h1 = m01 / s;
  return score;
}

HypothesisScore twin_forward(const TinyTwinModel& model, const PatchQuad& quad) {
  require(quad.x1.width() == model.net.arch.patch && quad.x1.height() == model.net.arch.patch,
          "twin_forward: patch size does not match the model architecture");
  const std::vector<double> in1 = net_input(quad.x1);
  const std::vector<double> in2 = net_input(quad.x2);
  const std::vector<double> in3 = net_input(quad.x3);
  const std::vector<double> in4 = net_input(quad.x4);
  const Eigen::VectorXd e1 = patch_feature(model.net, in1.data());
  const Eigen::VectorXd e2 = patch_feature(model.net, in2.data());
  const Eigen::VectorXd e3 = patch_feature(model.net, in3.data());
  const Eigen::VectorXd e4 = patch_feature(model.net, in4.data());

  const double z12 = head_logit(model.net, e1, e2);
  const double z21 = head_logit(model.net, e2, e1);
  const double z34 = head_logit(model.net, e3, e4);
  const double z43 = head_logit(model.net, e4, e3);

  // fixed grouping: the first parenthesis holds the z34 orderings, the
  // second the z43 ones, so either intra-pair swap only transposes the
  // operands of one commutative addition and the result is bit-identical
  const double f_h0 = ((softmax0(z12, z34) + softmax0(z21, z34)) +
                       (softmax0(z12, z43) + softmax0(z21, z43))) /
                      4.0;
  HypothesisScore score;
  score.f_h0 = f_h0;
  score.f_h1 = 1.0 - f_h0;
  return score;
}

HypothesisScore siamese_forward(const TinySiameseModel& model,
                                const std::vector<BoundaryPair>& pairs) {
  require(!pairs.empty(), "siamese_forward: empty pair list");
  require(pairs.size() <= 4, "siamese_forward: at most the four corner pairs");
  double best_f = 0.5;
  double best_conf = -1.0;
  for (const BoundaryPair& pair : pairs) {
    require(pair.a.width() == model.net.arch.patch && pair.a.height() == model.net.arch.patch,
            "siamese_forward: patch size does not match the model architecture");
    const std::vector<double> ia = net_input(pair.a);
    const std::vector<double> ib = net_input(pair.b);
    const double f = stable_sigmoid(pair_logit(model.net, ia.data(), ib.data()));
    const double conf = std::abs(f - 0.5);
    if (conf > best_conf) {
      best_conf = conf;
      best_f = f;
    }
  }
  HypothesisScore score;
  score.f_h1 = best_f;
  score.f_h0 = 1.0 - best_f;
  return score;
}

void FusionConfig::validate() const {
  require(c > 0.5 && c <= 1.0, "fusion config: c must lie in (0.5, 1]");
  require(max_angle_deg >= 0.0 && max_scale_dev >= 0.0,
          "fusion config: thresholds must be non-negative");
}

FusionResult fuse(const HypothesisScore& f_tw, const HypothesisScore& f_si,
                  const SimilarityTransform& t, const FusionConfig& cfg) {
  cfg.validate();
  FusionResult out;
  out.w_tr = is_near_rigid(t, cfg.max_angle_deg, cfg.max_scale_dev) ? 1.0 - cfg.c : cfg.c;
  out.w_si = 1.0 - out.w_tr;
  out.score.f_h0 = out.w_tr * f_tw.f_h0 + out.w_si * f_si.f_h0;
  out.score.f_h1 = out.w_tr * f_tw.f_h1 + out.w_si * f_si.f_h1;
  out.score.tie = f_tw.tie && f_si.tie;
  out.score.low_validity = f_tw.low_validity || f_si.low_validity;
  out.decide_h0 = out.score.f_h0 >= 0.5;
  return out;
}

}  // namespace cmdis
