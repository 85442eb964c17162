#include "lphom/ssim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "lphom/errors.hpp"
#include "lphom/rng.hpp"

namespace lphom {

namespace {

// Valid-mode 2D correlation with a square window.
Image64 filter_valid(const Image64& x, const Image64& w) {
  const auto k = w.rows();
  const auto h = x.rows() - k + 1, wd = x.cols() - k + 1;
  Image64 out(h, wd);
  for (Eigen::Index i = 0; i < h; ++i)
    for (Eigen::Index j = 0; j < wd; ++j) out(i, j) = (x.block(i, j, k, k).array() * w.array()).sum();
  return out;
}

Image64 downsample2(const Image64& x) {
  const auto h = x.rows() / 2, w = x.cols() / 2;
  Image64 out(h, w);
  for (Eigen::Index i = 0; i < h; ++i)
    for (Eigen::Index j = 0; j < w; ++j) out(i, j) = x.block(2 * i, 2 * j, 2, 2).sum() / 4.0;
  return out;
}

void check_pair(const Image64& x, const Image64& y, const SsimParams& p, const char* where) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw ShapeError(std::string(where) + ": image sizes " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()) + " and " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
  }
  if (x.rows() < p.window || x.cols() < p.window) throw ShapeError(std::string(where) + ": image smaller than window");
}

}  // namespace

std::vector<double> SsimParams::default_weights() {
  std::vector<double> w = {0.0448, 0.2856, 0.3001};
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= s;
  return w;
}

Image64 gaussian_window(const SsimParams& p) {
  if (p.window < 1 || p.window % 2 == 0) throw ShapeError("SSIM window side must be odd and positive");
  Image64 w(p.window, p.window);
  const double c = (p.window - 1) / 2.0;
  for (int i = 0; i < p.window; ++i)
    for (int j = 0; j < p.window; ++j) {
      const double di = i - c, dj = j - c;
      w(i, j) = std::exp(-(di * di + dj * dj) / (2.0 * p.sigma * p.sigma));
    }
  return w / w.sum();
}

Image64 to_image(const Tensor& t) {
  const int r = t.rank();
  if (r < 2 || static_cast<std::size_t>(t.dim(r - 1)) * t.dim(r - 2) != t.size()) {
    throw ShapeError("expected a single-channel image, got " + shape_str(t.shape()));
  }
  const int h = t.dim(r - 2), w = t.dim(r - 1);
  Image64 out(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) out(i, j) = t[static_cast<std::size_t>(i) * w + j];
  return out;
}

double ssim(const Image64& x, const Image64& y, const SsimParams& p) {
  check_pair(x, y, p, "ssim");
  const Image64 w = gaussian_window(p);
  const Image64 mx = filter_valid(x, w), my = filter_valid(y, w);
  const Image64 xx = filter_valid(x.cwiseProduct(x), w), yy = filter_valid(y.cwiseProduct(y), w);
  const Image64 xy = filter_valid(x.cwiseProduct(y), w);
  const double c1 = p.c1(), c2 = p.c2();
  double total = 0;
  for (Eigen::Index i = 0; i < mx.rows(); ++i)
    for (Eigen::Index j = 0; j < mx.cols(); ++j) {
      const double ux = mx(i, j), uy = my(i, j);
      const double vx = xx(i, j) - ux * ux, vy = yy(i, j) - uy * uy, cxy = xy(i, j) - ux * uy;
      total += (2 * ux * uy + c1) * (2 * cxy + c2) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
  return total / static_cast<double>(mx.size());
}

double ms_ssim(const Image64& x, const Image64& y, const SsimParams& p) {
  check_pair(x, y, p, "ms_ssim");
  const int m = p.scales();
  if (m < 1) throw ShapeError("ms_ssim needs at least one scale");
  const long need = static_cast<long>(p.window) << (m - 1);
  if (x.rows() < need || x.cols() < need) {
    throw ShapeError("ms_ssim: image side " + std::to_string(std::min(x.rows(), x.cols())) + " below " +
                     std::to_string(need) + " needed for " + std::to_string(m) + " scales");
  }
  Image64 a = x, b = y;
  double out = 1.0;
  for (int j = 0; j < m; ++j) {
    if (j > 0) {
      a = downsample2(a);
      b = downsample2(b);
    }
    // Negative structure terms have no real fractional power.
    out *= std::pow(std::max(0.0, ssim(a, b, p)), p.weights[static_cast<std::size_t>(j)]);
  }
  return out;
}

std::string DiversityStats::format() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f ± %.3f", mean, stddev);
  return buf;
}

DiversityStats diversity_report(const std::vector<Tensor>& images, const SsimParams& p, int n_pairs,
                                std::uint64_t seed) {
  if (images.size() < 2) throw ShapeError("diversity_report needs at least 2 images");
  if (n_pairs < 1) throw ShapeError("diversity_report needs at least 1 pair");
  std::vector<Image64> imgs;
  imgs.reserve(images.size());
  for (const auto& t : images) imgs.push_back(to_image(t));
  Rng rng(seed);
  const int n = static_cast<int>(imgs.size());
  std::vector<double> vals;
  for (int k = 0; k < n_pairs; ++k) {
    const int i = rng.uniform_int(0, n - 1);
    int j = rng.uniform_int(0, n - 2);
    if (j >= i) ++j;
    vals.push_back(ms_ssim(imgs[static_cast<std::size_t>(i)], imgs[static_cast<std::size_t>(j)], p));
  }
  DiversityStats s;
  s.pairs = n_pairs;
  s.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / n_pairs;
  double v = 0;
  for (double x : vals) v += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(v / n_pairs);
  return s;
}

}  // namespace lphom
