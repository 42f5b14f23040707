#include "cmdis/filters.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "cmdis/image_io.hpp"

namespace cmdis {

namespace {

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Dense 2D convolution with clamp-to-edge borders. `kernel` is size*size,
// row-major, anchored at its center.
RasterImage convolve(const RasterImage& in, const std::vector<double>& kernel, int size) {
  const int r = size / 2;
  RasterImage out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x)
      for (int c = 0; c < RasterImage::kChannels; ++c) {
        double acc = 0.0;
        for (int j = -r; j <= r; ++j) {
          int yy = clampi(y + j, 0, in.height() - 1);
          for (int i = -r; i <= r; ++i) {
            int xx = clampi(x + i, 0, in.width() - 1);
            acc += kernel[(j + r) * size + (i + r)] * in.at(xx, yy, c);
          }
        }
        out.at(x, y, c) = acc;
      }
  return out;
}

double box_mean(const RasterImage& in, int x, int y, int c, int r) {
  double acc = 0.0;
  for (int j = -r; j <= r; ++j) {
    int yy = clampi(y + j, 0, in.height() - 1);
    for (int i = -r; i <= r; ++i) {
      int xx = clampi(x + i, 0, in.width() - 1);
      acc += in.at(xx, yy, c);
    }
  }
  int n = (2 * r + 1) * (2 * r + 1);
  return acc / n;
}

bool is_allowed_sigma(double s) {
  return s == 0.5 || s == 1.0 || s == 1.5 || s == 2.0;
}

bool is_allowed_blend_window(int w) {
  return w == 3 || w == 5 || w == 7 || w == 9 || w == 11;
}

bool is_allowed_jpeg_quality(int q) {
  return q >= 55 && q <= 100 && (q - 55) % 5 == 0;
}

}  // namespace

void FilterSpec::validate() const {
  switch (kind) {
    case FilterKind::identity:
      break;
    case FilterKind::gaussian_lowpass:
      require(is_allowed_sigma(sigma), "gaussian filter: sigma outside {0.5, 1, 1.5, 2}");
      break;
    case FilterKind::average:
      require(is_allowed_blend_window(window),
              "average filter: window outside {3, 5, 7, 9, 11}");
      break;
    case FilterKind::unsharp:
      break;
    case FilterKind::adaptive_denoise:
      require(window == 3 || window == 5, "adaptive denoise: window outside {3, 5}");
      break;
    case FilterKind::gaussian_noise:
      require(noise_variance > 0.0, "gaussian noise: variance must be positive");
      break;
    case FilterKind::hist_stretch:
      require(saturation > 0.0 && saturation < 1.0,
              "histogram stretch: saturation must be in (0, 1)");
      require(gamma > 0.0, "histogram stretch: gamma must be positive");
      break;
    case FilterKind::hist_equalize:
      break;
    case FilterKind::jpeg:
      require(is_allowed_jpeg_quality(jpeg_quality),
              "jpeg filter: quality outside {55, 60, ..., 100}");
      break;
  }
}

std::string FilterSpec::name() const {
  auto trimmed = [](double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  };
  switch (kind) {
    case FilterKind::identity: return "identity";
    case FilterKind::gaussian_lowpass: return "gaussian3x3_sigma" + trimmed(sigma);
    case FilterKind::average: return "average" + std::to_string(window) + "x" + std::to_string(window);
    case FilterKind::unsharp: return "unsharp_laplacian0.2";
    case FilterKind::adaptive_denoise:
      return "adaptive_denoise" + std::to_string(window) + "x" + std::to_string(window);
    case FilterKind::gaussian_noise: return "gaussian_noise_var" + trimmed(noise_variance);
    case FilterKind::hist_stretch:
      return "hist_stretch_sat" + trimmed(saturation) + "_gamma" + trimmed(gamma);
    case FilterKind::hist_equalize: return "hist_equalize";
    case FilterKind::jpeg: return "jpeg_qf" + std::to_string(jpeg_quality);
  }
  return "unknown";
}

FilterSpec FilterSpec::make_identity() { return FilterSpec{}; }
FilterSpec FilterSpec::make_gaussian(double sigma) {
  FilterSpec s;
  s.kind = FilterKind::gaussian_lowpass;
  s.sigma = sigma;
  return s;
}
FilterSpec FilterSpec::make_average(int window) {
  FilterSpec s;
  s.kind = FilterKind::average;
  s.window = window;
  return s;
}
FilterSpec FilterSpec::make_unsharp() {
  FilterSpec s;
  s.kind = FilterKind::unsharp;
  return s;
}
FilterSpec FilterSpec::make_adaptive_denoise(int window) {
  FilterSpec s;
  s.kind = FilterKind::adaptive_denoise;
  s.window = window;
  return s;
}
FilterSpec FilterSpec::make_noise(double variance) {
  FilterSpec s;
  s.kind = FilterKind::gaussian_noise;
  s.noise_variance = variance;
  return s;
}
FilterSpec FilterSpec::make_stretch(double saturation, double gamma) {
  FilterSpec s;
  s.kind = FilterKind::hist_stretch;
  s.saturation = saturation;
  s.gamma = gamma;
  return s;
}
FilterSpec FilterSpec::make_equalize() {
  FilterSpec s;
  s.kind = FilterKind::hist_equalize;
  return s;
}
FilterSpec FilterSpec::make_jpeg(int quality) {
  FilterSpec s;
  s.kind = FilterKind::jpeg;
  s.jpeg_quality = quality;
  return s;
}

RasterImage gaussian3x3(const RasterImage& image, double sigma) {
  require(sigma > 0.0, "gaussian3x3: sigma must be positive");
  std::vector<double> k(9);
  double sum = 0.0;
  for (int j = -1; j <= 1; ++j)
    for (int i = -1; i <= 1; ++i) {
      double v = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
      k[(j + 1) * 3 + (i + 1)] = v;
      sum += v;
    }
  for (double& v : k) v /= sum;
  return convolve(image, k, 3);
}

RasterImage average_filter(const RasterImage& image, int window) {
  require(window >= 1 && window % 2 == 1, "average_filter: window must be odd and >= 1");
  const int r = window / 2;
  RasterImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < RasterImage::kChannels; ++c)
        out.at(x, y, c) = box_mean(image, x, y, c, r);
  return out;
}

RasterImage average_filter_at(const RasterImage& image, int window,
                              const BinaryMask& positions) {
  require(window >= 1 && window % 2 == 1, "average_filter_at: window must be odd and >= 1");
  require(positions.width() == image.width() && positions.height() == image.height(),
          "average_filter_at: position mask size mismatch");
  const int r = window / 2;
  RasterImage out = image;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      if (!positions.at(x, y)) continue;
      for (int c = 0; c < RasterImage::kChannels; ++c)
        out.at(x, y, c) = box_mean(image, x, y, c, r);
    }
  return out;
}

RasterImage unsharp_filter(const RasterImage& image, double amount) {
  static const std::vector<double> kBinomial = {
      1 / 16.0, 2 / 16.0, 1 / 16.0,
      2 / 16.0, 4 / 16.0, 2 / 16.0,
      1 / 16.0, 2 / 16.0, 1 / 16.0,
  };
  RasterImage smooth = convolve(image, kBinomial, 3);
  RasterImage out(image.width(), image.height());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    double v = image.data()[i] + amount * (image.data()[i] - smooth.data()[i]);
    out.data()[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

RasterImage adaptive_denoise(const RasterImage& image, int window) {
  require(window == 3 || window == 5, "adaptive_denoise: window outside {3, 5}");
  const int r = window / 2;
  const int w = image.width(), h = image.height();
  RasterImage out(w, h);
  std::vector<double> mean(static_cast<std::size_t>(w) * h);
  std::vector<double> var(static_cast<std::size_t>(w) * h);
  for (int c = 0; c < RasterImage::kChannels; ++c) {
    double noise = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double m = 0.0, m2 = 0.0;
        for (int j = -r; j <= r; ++j) {
          int yy = clampi(y + j, 0, h - 1);
          for (int i = -r; i <= r; ++i) {
            int xx = clampi(x + i, 0, w - 1);
            double v = image.at(xx, yy, c);
            m += v;
            m2 += v * v;
          }
        }
        int n = window * window;
        m /= n;
        m2 /= n;
        std::size_t idx = static_cast<std::size_t>(y) * w + x;
        mean[idx] = m;
        var[idx] = std::max(0.0, m2 - m * m);
        noise += var[idx];
      }
    // Noise power estimated as the mean of the local variances.
    noise /= static_cast<double>(w) * h;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        std::size_t idx = static_cast<std::size_t>(y) * w + x;
        double m = mean[idx], v = var[idx];
        if (v <= noise || v == 0.0) {
          out.at(x, y, c) = m;
        } else {
          out.at(x, y, c) = m + ((v - noise) / v) * (image.at(x, y, c) - m);
        }
      }
  }
  return out;
}

RasterImage add_gaussian_noise(const RasterImage& image, double variance, RngStream& rng) {
  require(variance > 0.0, "add_gaussian_noise: variance must be positive");
  const double sigma = std::sqrt(variance);
  RasterImage out(image.width(), image.height());
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = std::clamp(image.data()[i] + sigma * rng.next_gaussian(), 0.0, 1.0);
  return out;
}

RasterImage hist_stretch(const RasterImage& image, double saturation, double gamma) {
  require(saturation > 0.0 && saturation < 1.0, "hist_stretch: saturation must be in (0,1)");
  require(gamma > 0.0, "hist_stretch: gamma must be positive");
  const int w = image.width(), h = image.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  RasterImage out(w, h);
  std::vector<double> channel(n);
  for (int c = 0; c < RasterImage::kChannels; ++c) {
    for (std::size_t i = 0; i < n; ++i) channel[i] = image.data()[i * 3 + c];
    // Nearest-rank percentiles of the per-channel distribution.
    auto rank = [&](double p) {
      auto k = static_cast<std::size_t>(std::llround(p * static_cast<double>(n - 1)));
      std::nth_element(channel.begin(), channel.begin() + static_cast<std::ptrdiff_t>(k),
                       channel.end());
      return channel[k];
    };
    double lo = rank(saturation / 2.0);
    double hi = rank(1.0 - saturation / 2.0);
    if (hi - lo < 1e-12) {
      for (std::size_t i = 0; i < n; ++i) out.data()[i * 3 + c] = image.data()[i * 3 + c];
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double v = (image.data()[i * 3 + c] - lo) / (hi - lo);
      v = std::clamp(v, 0.0, 1.0);
      out.data()[i * 3 + c] = std::pow(v, gamma);
    }
  }
  return out;
}

RasterImage hist_equalize(const RasterImage& image) {
  const std::size_t n = static_cast<std::size_t>(image.width()) * image.height();
  RasterImage out(image.width(), image.height());
  for (int c = 0; c < RasterImage::kChannels; ++c) {
    std::array<std::size_t, 256> histo{};
    for (std::size_t i = 0; i < n; ++i) ++histo[to_byte(image.data()[i * 3 + c])];
    std::array<double, 256> cdf{};
    std::size_t acc = 0;
    for (int b = 0; b < 256; ++b) {
      acc += histo[b];
      cdf[b] = static_cast<double>(acc);
    }
    double cdf_min = 0.0;
    for (int b = 0; b < 256; ++b)
      if (histo[b] > 0) {
        cdf_min = cdf[b];
        break;
      }
    double denom = static_cast<double>(n) - cdf_min;
    for (std::size_t i = 0; i < n; ++i) {
      int b = to_byte(image.data()[i * 3 + c]);
      double v = denom > 0.0 ? (cdf[b] - cdf_min) / denom : 1.0;
      out.data()[i * 3 + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

RasterImage apply_filter(const RasterImage& image, const FilterSpec& spec, RngStream* rng) {
  spec.validate();
  switch (spec.kind) {
    case FilterKind::identity: return image;
    case FilterKind::gaussian_lowpass: return gaussian3x3(image, spec.sigma);
    case FilterKind::average: return average_filter(image, spec.window);
    case FilterKind::unsharp: return unsharp_filter(image);
    case FilterKind::adaptive_denoise: return adaptive_denoise(image, spec.window);
    case FilterKind::gaussian_noise:
      require(rng != nullptr, "gaussian noise filter requires an RNG stream");
      return add_gaussian_noise(image, spec.noise_variance, *rng);
    case FilterKind::hist_stretch: return hist_stretch(image, spec.saturation, spec.gamma);
    case FilterKind::hist_equalize: return hist_equalize(image);
    case FilterKind::jpeg: return jpeg_cycle(image, spec.jpeg_quality);
  }
  throw Error("apply_filter: unknown kind");
}

}  // namespace cmdis
