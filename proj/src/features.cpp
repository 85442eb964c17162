#include "lphom/features.hpp"

#include <algorithm>

#include "lphom/errors.hpp"

namespace lphom {

namespace {

constexpr int kBatch = 64;

Tensor64 stack_images(const std::vector<Tensor>& images, std::size_t begin, std::size_t end) {
  const Tensor& first = images[begin];
  const int s = first.dim(first.rank() - 1);
  const std::size_t per = static_cast<std::size_t>(s) * s;
  Tensor64 out({static_cast<int>(end - begin), 1, s, s});
  for (std::size_t i = begin; i < end; ++i) {
    const Tensor& im = images[i];
    if (im.size() != per || im.dim(im.rank() - 1) != s) {
      throw ShapeError("feature extraction: image " + shape_str(im.shape()) + " differs from " +
                       shape_str(first.shape()));
    }
    std::copy(im.raw(), im.raw() + per, out.raw() + (i - begin) * per);
  }
  return out;
}

}  // namespace

const char* to_string(FeatureKind kind) {
  return kind == FeatureKind::kRandomConv ? "random_conv" : "vae_encoder";
}

FeatureExtractor FeatureExtractor::random_conv(std::uint64_t seed) {
  FeatureExtractor fx;
  fx.kind_ = FeatureKind::kRandomConv;
  auto ps = std::make_shared<ParameterSet<double>>();
  Rng rng(seed);
  const int widths[] = {1, 16, 32, 64};
  for (int i = 0; i < 3; ++i) {
    fx.convs_.push_back(layers::Conv2d<double>::make(*ps, "feat" + std::to_string(i), widths[i], widths[i + 1], 3,
                                                     1, 1, rng, std::sqrt(2.0)));
  }
  fx.conv_params_ = std::move(ps);
  fx.dim_ = widths[3];
  return fx;
}

FeatureExtractor FeatureExtractor::vae_encoder(const Vae<float>& vae) {
  FeatureExtractor fx;
  fx.kind_ = FeatureKind::kVaeEncoder;
  auto v = std::make_shared<Vae<double>>(vae.config(), 0);
  const auto src = vae.params().cast<double>();
  for (std::size_t i = 0; i < src.count(); ++i) {
    v->params().at(static_cast<int>(i)).value = src.at(static_cast<int>(i)).value;
  }
  fx.vae_ = std::move(v);
  fx.dim_ = vae.config().latent_channels * 16;
  return fx;
}

Eigen::MatrixXd FeatureExtractor::extract_batch(const Tensor64& x) const {
  Tape<double> tape(false);
  Var h = tape.constant(x);
  if (kind_ == FeatureKind::kRandomConv) {
    for (const auto& c : convs_) h = ops::avg_pool2d(tape, ops::relu(tape, c(tape, *conv_params_, h)));
    h = ops::global_avg_pool(tape, h);
  } else {
    h = vae_->encode(tape, h).mu;
    while (tape.value(h).dim(2) > 4) h = ops::avg_pool2d(tape, h);
    h = ops::flatten(tape, h);
  }
  const Tensor64& f = tape.value(h);
  const int n = f.dim(0), d = f.dim(1);
  if (d != dim_) throw ShapeError("feature width " + std::to_string(d) + " differs from " + std::to_string(dim_));
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(f.raw(), n, d);
}

Eigen::MatrixXd FeatureExtractor::extract(const std::vector<Tensor>& images) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()), dim_);
  for (std::size_t b = 0; b < images.size(); b += kBatch) {
    const std::size_t e = std::min(images.size(), b + kBatch);
    out.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)) =
        extract_batch(stack_images(images, b, e));
  }
  return out;
}

}  // namespace lphom
