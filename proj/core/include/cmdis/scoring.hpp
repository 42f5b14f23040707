#ifndef CMDIS_SCORING_HPP
#define CMDIS_SCORING_HPP

#include <vector>

#include "cmdis/foa.hpp"
#include "cmdis/net.hpp"
#include "cmdis/transform.hpp"

namespace cmdis {

// Probabilities of the two hypotheses; H0 = "region 1 is the source".
// f_h0 + f_h1 = 1 within 1e-9 always.
struct HypothesisScore {
  double f_h0 = 0.5;
  double f_h1 = 0.5;
  bool tie = false;           // exact tie: the scorer defers
  bool low_validity = false;  // tie forced by < 25% jointly valid pixels
};

// Analytic scorer: m01 = MSE(x3, x4) and m10 = MSE(x1, x2) over jointly
// valid pixels; f_h0 = m10 / (m01 + m10). Equal residuals (the rigid case)
// and residual sums below epsilon give an exact (0.5, 0.5) tie; a pair with
// less than min_valid_fraction joint validity gives a warning tie. Scoring
// the swapped quad returns (f_h1, f_h0) exactly.
HypothesisScore mse_score(const PatchQuad& quad, double epsilon = 1e-12,
                          double min_valid_fraction = 0.25);

// Softmax-coupled twin scorer: z0 from (x1, x2), z1 from (x3, x4), evaluated
// over the four intra-pair order permutations and averaged, making the
// result bit-invariant under x1<->x2 and x3<->x4 swaps.
HypothesisScore twin_forward(const TinyTwinModel& model, const PatchQuad& quad);

// Sigmoid-coupled boundary scorer over 1..4 corner pairs ordered
// [region-1 crop, warped region-2 counterpart]; the most confident pair
// (largest |f - 0.5|, first on ties) decides: f_h1 = f, f_h0 = 1 - f.
HypothesisScore siamese_forward(const TinySiameseModel& model,
                                const std::vector<BoundaryPair>& pairs);

struct FusionConfig {
  double c = 0.65;  // non-rigid weight of the twin path, in (0.5, 1]
  double max_angle_deg = 15.0;
  double max_scale_dev = 0.1;

  void validate() const;
};

struct FusionResult {
  HypothesisScore score;
  bool decide_h0 = true;  // fused f_h0 >= 0.5 (exact 0.5 -> H0)
  double w_tr = 0.0;
  double w_si = 0.0;
};

// Transform-gated convex combination: w_tr = c when the transform is not
// near-rigid (interpolation artifacts reliable), 1 - c when it is.
FusionResult fuse(const HypothesisScore& f_tw, const HypothesisScore& f_si,
                  const SimilarityTransform& t, const FusionConfig& cfg = {});

}  // namespace cmdis

#endif
