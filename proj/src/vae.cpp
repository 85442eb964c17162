#include "lphom/vae.hpp"

#include <algorithm>
#include <cmath>

#include "lphom/adam.hpp"
#include "lphom/errors.hpp"

namespace lphom {

template <typename T>
double kl_divergence(const LatentDistribution<T>& dist) {
  if (dist.mu.shape() != dist.logvar.shape()) {
    throw ShapeError("kl_divergence: mu " + shape_str(dist.mu.shape()) + " vs logvar " +
                     shape_str(dist.logvar.shape()));
  }
  double s = 0;
  for (std::size_t i = 0; i < dist.mu.size(); ++i) {
    const double m = dist.mu[i], l = dist.logvar[i];
    s += m * m + std::exp(l) - 1.0 - l;
  }
  return 0.5 * s / dist.mu.dim(0);
}

template <typename T>
Vae<T>::Vae(VaeConfig config, std::uint64_t seed) : config_(config) {
  if (config_.image_size < 16 || config_.image_size % 4 != 0) {
    throw ShapeError("VAE image size must be a multiple of 4 and >= 16");
  }
  Rng rng(mix_seed(seed, 0x7AE));
  const int c = config_.base_channels, lc = config_.latent_channels;
  auto& ps = params_;
  enc_in_ = layers::Conv2d<T>::make(ps, "enc.in", 1, c, 3, 1, 1, rng);
  enc_gn0_ = layers::GroupNorm<T>::make(ps, "enc.gn0", c);
  enc_down1_ = layers::Conv2d<T>::make(ps, "enc.down1", c, 2 * c, 3, 2, 1, rng);
  enc_gn1_ = layers::GroupNorm<T>::make(ps, "enc.gn1", 2 * c);
  enc_down2_ = layers::Conv2d<T>::make(ps, "enc.down2", 2 * c, 4 * c, 3, 2, 1, rng);
  enc_gn2_ = layers::GroupNorm<T>::make(ps, "enc.gn2", 4 * c);
  enc_mid_ = layers::Conv2d<T>::make(ps, "enc.mid", 4 * c, 4 * c, 3, 1, 1, rng);
  enc_gn3_ = layers::GroupNorm<T>::make(ps, "enc.gn3", 4 * c);
  enc_out_ = layers::Conv2d<T>::make(ps, "enc.out", 4 * c, 2 * lc, 3, 1, 1, rng);

  dec_in_ = layers::Conv2d<T>::make(ps, "dec.in", lc, 4 * c, 3, 1, 1, rng);
  dec_gn0_ = layers::GroupNorm<T>::make(ps, "dec.gn0", 4 * c);
  dec_mid_ = layers::Conv2d<T>::make(ps, "dec.mid", 4 * c, 4 * c, 3, 1, 1, rng);
  dec_gn1_ = layers::GroupNorm<T>::make(ps, "dec.gn1", 4 * c);
  dec_up1_ = layers::ConvTranspose2d<T>::make(ps, "dec.up1", 4 * c, 2 * c, 4, 2, 1, rng);
  dec_gn2_ = layers::GroupNorm<T>::make(ps, "dec.gn2", 2 * c);
  dec_up2_ = layers::ConvTranspose2d<T>::make(ps, "dec.up2", 2 * c, c, 4, 2, 1, rng);
  dec_gn3_ = layers::GroupNorm<T>::make(ps, "dec.gn3", c);
  dec_out_ = layers::Conv2d<T>::make(ps, "dec.out", c, 1, 3, 1, 1, rng);
}

template <typename T>
void Vae<T>::check_image_shape(const Shape& s) const {
  const int n = config_.image_size;
  if (s.size() != 4 || s[1] != 1 || s[2] != n || s[3] != n) {
    throw ShapeError("VAE expects images (N,1," + std::to_string(n) + "," + std::to_string(n) + "), got " +
                     shape_str(s));
  }
}

template <typename T>
void Vae<T>::check_latent_shape(const Shape& s) const {
  const int h = config_.latent_size();
  if (s.size() != 4 || s[1] != config_.latent_channels || s[2] != h || s[3] != h) {
    throw ShapeError("VAE expects latents (N," + std::to_string(config_.latent_channels) + "," +
                     std::to_string(h) + "," + std::to_string(h) + "), got " + shape_str(s));
  }
}

template <typename T>
typename Vae<T>::Posterior Vae<T>::encode(Tape<T>& tape, Var x) const {
  check_image_shape(tape.value(x).shape());
  const auto& ps = params_;
  auto act = [&](const layers::GroupNorm<T>& gn, Var h) { return ops::silu(tape, gn(tape, ps, h)); };
  Var h = act(enc_gn0_, enc_in_(tape, ps, x));
  h = act(enc_gn1_, enc_down1_(tape, ps, h));
  h = act(enc_gn2_, enc_down2_(tape, ps, h));
  h = act(enc_gn3_, enc_mid_(tape, ps, h));
  Var out = enc_out_(tape, ps, h);
  const int lc = config_.latent_channels;
  Var mu = ops::slice_channels(tape, out, 0, lc);
  Var logvar = ops::clamp(tape, ops::slice_channels(tape, out, lc, 2 * lc), kLogvarMin, kLogvarMax);
  return {mu, logvar};
}

template <typename T>
Var Vae<T>::decode(Tape<T>& tape, Var z) const {
  check_latent_shape(tape.value(z).shape());
  const auto& ps = params_;
  auto act = [&](const layers::GroupNorm<T>& gn, Var h) { return ops::silu(tape, gn(tape, ps, h)); };
  Var h = act(dec_gn0_, dec_in_(tape, ps, z));
  h = act(dec_gn1_, dec_mid_(tape, ps, h));
  h = act(dec_gn2_, dec_up1_(tape, ps, h));
  h = act(dec_gn3_, dec_up2_(tape, ps, h));
  return ops::sigmoid(tape, dec_out_(tape, ps, h));
}

template <typename T>
Var Vae<T>::reparameterize(Tape<T>& tape, const Posterior& q, Var eps) const {
  Var std_dev = ops::exp(tape, ops::scale(tape, q.logvar, 0.5));
  return ops::add(tape, q.mu, ops::mul(tape, std_dev, eps));
}

template <typename T>
LatentDistribution<T> Vae<T>::encode(const BasicTensor<T>& x) const {
  Tape<T> tape(false);
  Posterior q = encode(tape, tape.constant(x));
  return {tape.value(q.mu), tape.value(q.logvar)};
}

template <typename T>
BasicTensor<T> Vae<T>::decode(const BasicTensor<T>& z) const {
  Tape<T> tape(false);
  return tape.value(decode(tape, tape.constant(z)));
}

template <typename T>
VaeLoss vae_loss(Tape<T>& tape, const Vae<T>& vae, Var x, Var eps, double kl_weight) {
  auto q = vae.encode(tape, x);
  Var z = vae.reparameterize(tape, q, eps);
  Var recon = ops::mse(tape, vae.decode(tape, z), x);
  Var kl = ops::kl_standard_normal(tape, q.mu, q.logvar);
  Var total = kl_weight == 0.0 ? recon : ops::add(tape, recon, ops::scale(tape, kl, kl_weight));
  return {total, recon, kl};
}

namespace {

// Deterministic epoch-shuffled minibatch indices.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    reshuffle();
  }

  std::vector<std::size_t> next(int batch) {
    std::vector<std::size_t> out;
    for (int b = 0; b < batch; ++b) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) {
      std::swap(order_[i - 1], order_[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<int>(i) - 1))]);
    }
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t pos_ = 0;
};

Tensor gather(const std::vector<Tensor>& images, const std::vector<std::size_t>& idx) {
  std::vector<Tensor> picked;
  picked.reserve(idx.size());
  for (auto i : idx) {
    const Tensor& im = images[i];
    picked.push_back(im.rank() == 3 ? im.reshaped({1, im.dim(0), im.dim(1), im.dim(2)}) : im);
  }
  return stack_batch<float>(picked);
}

std::vector<Tensor> batch_of(const std::vector<Tensor>& images, std::size_t begin, std::size_t end) {
  std::vector<Tensor> out;
  for (std::size_t i = begin; i < end; ++i) {
    const Tensor& im = images[i];
    out.push_back(im.rank() == 3 ? im.reshaped({1, im.dim(0), im.dim(1), im.dim(2)}) : im);
  }
  return out;
}

}  // namespace

VaeTrainResult train_vae(const std::vector<Tensor>& train_images, const VaeConfig& model_config,
                         const VaeTrainConfig& config, const ProgressFn& progress) {
  if (train_images.empty()) throw ShapeError("train_vae: empty training set");
  VaeTrainResult result{Vae<float>(model_config, config.seed), {}};
  Vae<float>& vae = result.model;
  Adam<float> adam(AdamConfig{config.lr});
  BatchSampler sampler(train_images.size(), mix_seed(config.seed, 1));
  Rng noise(mix_seed(config.seed, 2));
  const int h = model_config.latent_size();
  for (int step = 0; step < config.steps; ++step) {
    Tensor x = gather(train_images, sampler.next(config.batch_size));
    Tensor eps = Tensor::randn({config.batch_size, model_config.latent_channels, h, h}, noise);
    Tape<float> tape;
    VaeLoss loss = vae_loss(tape, vae, tape.constant(std::move(x)), tape.constant(std::move(eps)),
                            config.kl_weight);
    const double value = tape.value(loss.total)[0];
    tape.backward(loss.total);
    vae.params().zero_grad();
    tape.collect_grads(vae.params());
    adam.step(vae.params());
    result.loss_history.push_back(value);
    if (progress) progress(step, value);
  }
  return result;
}

Tensor encode_means(const Vae<float>& vae, const std::vector<Tensor>& images, int batch_size) {
  std::vector<Tensor> parts;
  for (std::size_t b = 0; b < images.size(); b += static_cast<std::size_t>(batch_size)) {
    const auto items = batch_of(images, b, std::min(images.size(), b + static_cast<std::size_t>(batch_size)));
    const Tensor mu = vae.encode(stack_batch<float>(items)).mu;
    for (int i = 0; i < mu.dim(0); ++i) parts.push_back(mu.item(i));
  }
  if (parts.empty()) throw ShapeError("encode_means: no images");
  return stack_batch<float>(parts);
}

double reconstruction_mse(const Vae<float>& vae, const std::vector<Tensor>& images, int batch_size) {
  if (images.empty()) throw ShapeError("reconstruction_mse: no images");
  double s = 0;
  std::size_t n = 0;
  for (std::size_t b = 0; b < images.size(); b += static_cast<std::size_t>(batch_size)) {
    const Tensor x = stack_batch<float>(
        batch_of(images, b, std::min(images.size(), b + static_cast<std::size_t>(batch_size))));
    const Tensor xr = vae.decode(vae.encode(x).mu);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = static_cast<double>(x[i]) - xr[i];
      s += d * d;
    }
    n += x.size();
  }
  return s / static_cast<double>(n);
}

double latent_scale_for(const Tensor& latents) {
  double s = 0, s2 = 0;
  for (float v : latents.storage()) s += v;
  const double m = s / static_cast<double>(latents.size());
  for (float v : latents.storage()) s2 += (v - m) * (v - m);
  const double sd = std::sqrt(s2 / static_cast<double>(latents.size()));
  if (!(sd > 0) || !std::isfinite(sd)) throw NumericError("latent standard deviation is zero or non-finite");
  return 1.0 / sd;
}

std::vector<double> smooth(const std::vector<double>& values, int window) {
  std::vector<double> out(values.size());
  double acc = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    if (i >= static_cast<std::size_t>(window)) acc -= values[i - static_cast<std::size_t>(window)];
    out[i] = acc / static_cast<double>(std::min<std::size_t>(i + 1, static_cast<std::size_t>(window)));
  }
  return out;
}

template double kl_divergence(const LatentDistribution<float>&);
template double kl_divergence(const LatentDistribution<double>&);
template class Vae<float>;
template class Vae<double>;
template VaeLoss vae_loss(Tape<float>&, const Vae<float>&, Var, Var, double);
template VaeLoss vae_loss(Tape<double>&, const Vae<double>&, Var, Var, double);

}  // namespace lphom
