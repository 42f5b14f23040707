#ifndef CMDIS_FILTERS_HPP
#define CMDIS_FILTERS_HPP

#include <string>

#include "cmdis/image.hpp"
#include "cmdis/rng.hpp"

namespace cmdis {

// One entry of the global post-processing operator bank.
enum class FilterKind {
  identity,
  gaussian_lowpass,  // 3x3 sampled gaussian, sigma in {0.5, 1, 1.5, 2}
  average,           // box filter, window in {3, 5, 7, 9, 11}
  unsharp,           // laplacian-based sharpening, amount 0.2
  adaptive_denoise,  // local mean/variance adaptive filter, window in {3, 5}
  gaussian_noise,    // additive zero-mean gaussian, variance 0.001
  hist_stretch,      // saturating contrast stretch with shape (gamma) parameter
  hist_equalize,     // per-channel histogram equalization, 256 bins
  jpeg,              // encode/decode cycle, quality in {55, 60, ..., 100}
};

struct FilterSpec {
  FilterKind kind = FilterKind::identity;
  double sigma = 1.0;
  int window = 3;
  double noise_variance = 0.001;
  double saturation = 0.02;  // total clipped tail mass (low + high)
  double gamma = 1.0;
  int jpeg_quality = 90;

  // Throws if a parameter is outside the allowed grid for its kind.
  void validate() const;
  // Stable human-readable identifier, used in sidecar post-processing logs.
  std::string name() const;

  static FilterSpec make_identity();
  static FilterSpec make_gaussian(double sigma);
  static FilterSpec make_average(int window);
  static FilterSpec make_unsharp();
  static FilterSpec make_adaptive_denoise(int window);
  static FilterSpec make_noise(double variance);
  static FilterSpec make_stretch(double saturation, double gamma);
  static FilterSpec make_equalize();
  static FilterSpec make_jpeg(int quality);
};

// Applies the filter; dimensions are always preserved. `rng` is required
// for gaussian_noise and ignored otherwise. Neighbourhood filters use
// clamp-to-edge borders, so constant images stay constant.
RasterImage apply_filter(const RasterImage& image, const FilterSpec& spec,
                         RngStream* rng = nullptr);

// Individual operators (parameter checks as documented on FilterSpec).
RasterImage gaussian3x3(const RasterImage& image, double sigma);
RasterImage average_filter(const RasterImage& image, int window);
// Box filter applied only where `positions` is set; elsewhere pixels pass
// through. Used for copy-paste boundary blending.
RasterImage average_filter_at(const RasterImage& image, int window,
                              const BinaryMask& positions);
// out = clip(in + amount * (in - laplacian_smoothed(in))); the smoothing
// kernel is the 3x3 binomial [1 2 1; 2 4 2; 1 2 1] / 16.
RasterImage unsharp_filter(const RasterImage& image, double amount = 0.2);
RasterImage adaptive_denoise(const RasterImage& image, int window);
RasterImage add_gaussian_noise(const RasterImage& image, double variance, RngStream& rng);
RasterImage hist_stretch(const RasterImage& image, double saturation, double gamma);
RasterImage hist_equalize(const RasterImage& image);

}  // namespace cmdis

#endif
