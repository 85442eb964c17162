#include "lphom/unet.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "lphom/adam.hpp"
#include "lphom/errors.hpp"

namespace lphom {

std::vector<double> embed_timestep(int t, int T, int d) {
  if (T < 1 || t < 1 || t > T) {
    throw ShapeError("embed_timestep: t = " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
  }
  if (d < 2 || d % 2 != 0) throw ShapeError("embed_timestep: width must be even and >= 2");
  const int half = d / 2;
  const double x = static_cast<double>(t) / T;
  std::vector<double> out(static_cast<std::size_t>(d));
  for (int i = 0; i < half; ++i) {
    const double freq = half == 1 ? 1.0 : std::pow(1e4, static_cast<double>(i) / (half - 1));
    out[static_cast<std::size_t>(i)] = std::sin(freq * x);
    out[static_cast<std::size_t>(i + half)] = std::cos(freq * x);
  }
  return out;
}

template <typename T>
typename CondUNet<T>::ResBlock CondUNet<T>::make_block(const std::string& name, int in, int out, Rng& rng) {
  ResBlock b;
  b.gn1 = layers::GroupNorm<T>::make(params_, name + ".gn1", in);
  b.conv1 = layers::Conv2d<T>::make(params_, name + ".conv1", in, out, 3, 1, 1, rng);
  b.emb_proj = layers::Linear<T>::make(params_, name + ".emb", 3 * config_.embed_dim, out, rng);
  b.gn2 = layers::GroupNorm<T>::make(params_, name + ".gn2", out);
  b.conv2 = layers::Conv2d<T>::make(params_, name + ".conv2", out, out, 3, 1, 1, rng);
  if (in != out) {
    b.has_skip = true;
    b.skip = layers::Conv2d<T>::make(params_, name + ".skip", in, out, 1, 1, 0, rng);
  }
  return b;
}

template <typename T>
CondUNet<T>::CondUNet(UNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  const auto& ch = config_.channels;
  if (ch.empty()) throw ConfigError("U-Net needs at least one channel level");
  const int levels = static_cast<int>(ch.size());
  if (config_.latent_size % (1 << (levels - 1)) != 0) {
    throw ConfigError("latent size " + std::to_string(config_.latent_size) + " not divisible by 2^" +
                      std::to_string(levels - 1));
  }
  if (config_.blocks_per_level < 1) throw ConfigError("U-Net needs at least one block per level");
  Rng rng(mix_seed(seed, 0x0E7));
  const int d = config_.embed_dim;
  auto& ps = params_;
  pathology_table_ = ps.add("cond.pathology", BasicTensor<T>::randn({kNumPathologies, d}, rng));
  modality_table_ = ps.add("cond.modality", BasicTensor<T>::randn({kNumModalities, d}, rng));
  time_fc1_ = layers::Linear<T>::make(ps, "time.fc1", d, 2 * d, rng);
  time_fc2_ = layers::Linear<T>::make(ps, "time.fc2", 2 * d, 2 * d, rng);
  conv_in_ = layers::Conv2d<T>::make(ps, "in", config_.latent_channels, ch[0], 3, 1, 1, rng);

  int prev = ch[0];
  down_blocks_.resize(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    for (int b = 0; b < config_.blocks_per_level; ++b) {
      const std::string name = "down" + std::to_string(l) + "." + std::to_string(b);
      down_blocks_[static_cast<std::size_t>(l)].push_back(make_block(name, prev, ch[static_cast<std::size_t>(l)], rng));
      prev = ch[static_cast<std::size_t>(l)];
    }
    if (l + 1 < levels) {
      downsamplers_.push_back(
          layers::Conv2d<T>::make(ps, "down" + std::to_string(l) + ".pool", prev, prev, 3, 2, 1, rng));
    }
  }
  up_blocks_.resize(static_cast<std::size_t>(std::max(0, levels - 1)));
  for (int l = levels - 2; l >= 0; --l) {
    const int c = ch[static_cast<std::size_t>(l)];
    int in = prev + c;
    for (int b = 0; b < config_.blocks_per_level; ++b) {
      const std::string name = "up" + std::to_string(l) + "." + std::to_string(b);
      up_blocks_[static_cast<std::size_t>(l)].push_back(make_block(name, in, c, rng));
      in = c;
    }
    prev = c;
  }
  out_gn_ = layers::GroupNorm<T>::make(ps, "out.gn", prev);
  conv_out_ = layers::Conv2d<T>::make(ps, "out.conv", prev, config_.latent_channels, 3, 1, 1, rng, 0.5);
}

template <typename T>
void CondUNet<T>::check_latent_shape(const Shape& s) const {
  const int h = config_.latent_size;
  if (s.size() != 4 || s[1] != config_.latent_channels || s[2] != h || s[3] != h) {
    throw ShapeError("U-Net expects latents (N," + std::to_string(config_.latent_channels) + "," +
                     std::to_string(h) + "," + std::to_string(h) + "), got " + shape_str(s));
  }
}

template <typename T>
Var CondUNet<T>::run_block(Tape<T>& tape, const ResBlock& b, Var x, Var emb) const {
  const auto& ps = params_;
  Var h = b.conv1(tape, ps, ops::silu(tape, b.gn1(tape, ps, x)));
  h = ops::add_channel_bias(tape, h, b.emb_proj(tape, ps, emb));
  h = b.conv2(tape, ps, ops::silu(tape, b.gn2(tape, ps, h)));
  return ops::add(tape, h, b.has_skip ? b.skip(tape, ps, x) : x);
}

template <typename T>
Var CondUNet<T>::forward(Tape<T>& tape, Var z_t, std::span<const int> t,
                         std::span<const ConditionLabel> labels) const {
  const Shape& zs = tape.value(z_t).shape();
  check_latent_shape(zs);
  const auto n = static_cast<std::size_t>(zs[0]);
  if (t.size() != n || labels.size() != n) {
    throw ShapeError("U-Net forward: batch " + std::to_string(n) + " with " + std::to_string(t.size()) +
                     " timesteps and " + std::to_string(labels.size()) + " labels");
  }
  const auto& ps = params_;
  const int d = config_.embed_dim;
  BasicTensor<T> temb({static_cast<int>(n), d});
  std::vector<int> pi(n), mi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = embed_timestep(t[i], config_.schedule_T, d);
    for (int j = 0; j < d; ++j) temb[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] = static_cast<T>(e[static_cast<std::size_t>(j)]);
    pi[i] = static_cast<int>(labels[i].pathology);
    mi[i] = static_cast<int>(labels[i].modality);
  }
  Var te = time_fc2_(tape, ps, ops::silu(tape, time_fc1_(tape, ps, tape.constant(std::move(temb)))));
  Var cond = ops::add(tape, ops::embedding(tape, tape.param(ps.at(pathology_table_)), pi),
                      ops::embedding(tape, tape.param(ps.at(modality_table_)), mi));
  // The label path stays linear up to each block's bias, so every block sees
  // a pathology term plus a modality term rather than an entangled mix.
  Var emb = ops::concat_channels(tape, ops::silu(tape, te), cond);

  Var h = conv_in_(tape, ps, z_t);
  std::vector<Var> skips;
  const std::size_t levels = config_.channels.size();
  for (std::size_t l = 0; l < levels; ++l) {
    for (const auto& b : down_blocks_[l]) h = run_block(tape, b, h, emb);
    if (l + 1 < levels) {
      skips.push_back(h);
      h = downsamplers_[l](tape, ps, h);
    }
  }
  for (std::size_t l = levels - 1; l-- > 0;) {
    h = ops::concat_channels(tape, ops::upsample_nearest2x(tape, h), skips[l]);
    for (const auto& b : up_blocks_[l]) h = run_block(tape, b, h, emb);
  }
  return conv_out_(tape, ps, ops::silu(tape, out_gn_(tape, ps, h)));
}

template <typename T>
BasicTensor<T> CondUNet<T>::predict_noise(const BasicTensor<T>& z_t, int t, const ConditionLabel& label) const {
  check_latent_shape(z_t.shape());
  const std::size_t n = static_cast<std::size_t>(z_t.dim(0));
  const std::vector<int> ts(n, t);
  const std::vector<ConditionLabel> ls(n, label);
  Tape<T> tape(false);
  return tape.value(forward(tape, tape.constant(z_t), ts, ls));
}

template <typename T>
NoiseModel<T> CondUNet<T>::as_model() const {
  return [this](Tape<T>& tape, Var z, std::span<const int> t, std::span<const ConditionLabel> labels) {
    return forward(tape, z, t, labels);
  };
}

template <typename T>
EpsPredictor<T> CondUNet<T>::as_predictor() const {
  return [this](const BasicTensor<T>& z, int t, const ConditionLabel& label) { return predict_noise(z, t, label); };
}

template <typename T>
std::vector<int> CondUNet<T>::embedding_projection_weights() const {
  std::vector<int> out;
  for (const auto* group : {&down_blocks_, &up_blocks_})
    for (const auto& level : *group)
      for (const auto& b : level) out.push_back(b.emb_proj.weight);
  return out;
}

template class CondUNet<float>;
template class CondUNet<double>;

namespace {

Tensor gather_latents(const Tensor& latents, const std::vector<std::size_t>& idx) {
  const std::size_t per = latents.size() / static_cast<std::size_t>(latents.dim(0));
  Shape s = latents.shape();
  s[0] = static_cast<int>(idx.size());
  Tensor out(s);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(latents.raw() + idx[i] * per, per, out.raw() + i * per);
  }
  return out;
}

}  // namespace

LdmTrainResult train_ldm(const Tensor& latents, const std::vector<ConditionLabel>& labels,
                         const UNetConfig& model_config, const NoiseSchedule& sched, const LdmTrainConfig& config,
                         const ProgressFn& progress) {
  if (latents.rank() != 4 || latents.dim(0) == 0) throw ShapeError("train_ldm: no training latents");
  if (static_cast<std::size_t>(latents.dim(0)) != labels.size()) {
    throw ShapeError("train_ldm: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(latents.dim(0)) + " latents");
  }
  LdmTrainResult result{CondUNet<float>(model_config, config.seed), {}, {}};
  CondUNet<float>& model = result.model;
  Adam<float> adam(AdamConfig{config.lr});
  Rng order(mix_seed(config.seed, 1));
  Rng noise(mix_seed(config.seed, 2));
  const NoiseModel<float> fn = model.as_model();
  const auto n = static_cast<std::size_t>(latents.dim(0));
  std::vector<std::size_t> perm(n);
  std::size_t pos = n;
  std::vector<std::vector<std::size_t>> by_cell;
  {
    std::array<std::vector<std::size_t>, kNumCells> cells;
    for (std::size_t i = 0; i < n; ++i) cells[static_cast<std::size_t>(labels[i].cell())].push_back(i);
    for (auto& c : cells) {
      if (!c.empty()) by_cell.push_back(std::move(c));
    }
  }
  auto draw = [&]() -> std::size_t {
    if (config.balance_cells) {
      const auto& cell = by_cell[static_cast<std::size_t>(order.uniform_int(0, static_cast<int>(by_cell.size()) - 1))];
      return cell[static_cast<std::size_t>(order.uniform_int(0, static_cast<int>(cell.size()) - 1))];
    }
    if (pos == n) {
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      for (std::size_t i = n; i > 1; --i) {
        std::swap(perm[i - 1], perm[static_cast<std::size_t>(order.uniform_int(0, static_cast<int>(i) - 1))]);
      }
      pos = 0;
    }
    return perm[pos++];
  };
  for (int step = 0; step < config.steps; ++step) {
    std::vector<std::size_t> idx;
    std::vector<ConditionLabel> batch_labels;
    for (int b = 0; b < config.batch_size; ++b) {
      idx.push_back(draw());
      batch_labels.push_back(labels[idx.back()]);
    }
    result.label_stream.insert(result.label_stream.end(), batch_labels.begin(), batch_labels.end());
    if (config.cosine_decay) adam.set_lr(cosine_lr(config.lr, step, config.steps));
    Tape<float> tape;
    const auto terms = training_loss<float>(tape, fn, gather_latents(latents, idx), batch_labels, sched, noise);
    const double value = tape.value(terms.loss)[0];
    tape.backward(terms.loss);
    model.params().zero_grad();
    tape.collect_grads(model.params());
    adam.step(model.params());
    result.loss_history.push_back(value);
    if (progress) progress(step, value);
  }
  return result;
}

double eval_eps_loss(const CondUNet<float>& model, const Tensor& latents, const std::vector<ConditionLabel>& labels,
                     const NoiseSchedule& sched, std::uint64_t seed, int repeats, int batch_size) {
  if (latents.rank() != 4 || latents.dim(0) == 0) throw ShapeError("eval_eps_loss: no latents");
  Rng rng(seed);
  const NoiseModel<float> fn = model.as_model();
  const auto n = static_cast<std::size_t>(latents.dim(0));
  double total = 0;
  std::size_t count = 0;
  for (int r = 0; r < repeats; ++r) {
    for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(batch_size)) {
      std::vector<std::size_t> idx;
      std::vector<ConditionLabel> ls;
      for (std::size_t i = b; i < std::min(n, b + static_cast<std::size_t>(batch_size)); ++i) {
        idx.push_back(i);
        ls.push_back(labels[i]);
      }
      Tape<float> tape(false);
      const auto terms = training_loss<float>(tape, fn, gather_latents(latents, idx), ls, sched, rng);
      total += tape.value(terms.loss)[0] * static_cast<double>(idx.size());
      count += idx.size();
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace lphom
