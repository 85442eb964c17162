#include "lphom/classifier.hpp"

#include <algorithm>

#include "lphom/adam.hpp"
#include "lphom/errors.hpp"
#include "lphom/image_io.hpp"
#include "lphom/phantom.hpp"

namespace lphom {

namespace {

constexpr int kEvalBatch = 64;

Tensor stack_images(const std::vector<Tensor>& images, const std::vector<std::size_t>& idx, int size) {
  const std::size_t per = static_cast<std::size_t>(size) * size;
  Tensor out({static_cast<int>(idx.size()), 1, size, size});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Tensor& im = images[idx[i]];
    if (im.size() != per) {
      throw ShapeError("classifier expects " + std::to_string(size) + "x" + std::to_string(size) + " images, got " +
                       shape_str(im.shape()));
    }
    std::copy(im.raw(), im.raw() + per, out.raw() + i * per);
  }
  return out;
}

int argmax_row(const Tensor& logits, int row) {
  const int k = logits.dim(1);
  const float* p = logits.raw() + static_cast<std::size_t>(row) * k;
  return static_cast<int>(std::max_element(p, p + k) - p);
}

}  // namespace

ConditionClassifier::ConditionClassifier(int image_size, std::uint64_t seed) : image_size_(image_size) {
  if (image_size < 16 || image_size % 16 != 0) throw ShapeError("classifier image size must be a multiple of 16");
  Rng rng(mix_seed(seed, 0xC1A5));
  const int widths[] = {1, 16, 32, 64, 64};
  for (int i = 0; i < 4; ++i) {
    convs_.push_back(layers::Conv2d<float>::make(params_, "conv" + std::to_string(i), widths[i], widths[i + 1], 3, 1,
                                                 1, rng, std::sqrt(2.0)));
    norms_.push_back(layers::GroupNorm<float>::make(params_, "norm" + std::to_string(i), widths[i + 1]));
  }
  pathology_head_ = layers::Linear<float>::make(params_, "head.pathology", 64, kNumPathologies, rng);
  modality_head_ = layers::Linear<float>::make(params_, "head.modality", 64, kNumModalities, rng);
}

ConditionClassifier::Logits ConditionClassifier::forward(Tape<float>& tape, Var x) const {
  Var h = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = ops::relu(tape, norms_[i](tape, params_, convs_[i](tape, params_, h)));
    if (i + 1 < convs_.size()) h = ops::avg_pool2d(tape, h);
  }
  h = ops::global_avg_pool(tape, h);
  return {pathology_head_(tape, params_, h), modality_head_(tape, params_, h)};
}

std::vector<ConditionLabel> ConditionClassifier::classify(const std::vector<Tensor>& images) const {
  std::vector<ConditionLabel> out;
  for (std::size_t b = 0; b < images.size(); b += kEvalBatch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = b; i < std::min(images.size(), b + kEvalBatch); ++i) idx.push_back(i);
    Tape<float> tape(false);
    const Logits l = forward(tape, tape.constant(stack_images(images, idx, image_size_)));
    for (int r = 0; r < static_cast<int>(idx.size()); ++r) {
      out.push_back({static_cast<Pathology>(argmax_row(tape.value(l.pathology), r)),
                     static_cast<Modality>(argmax_row(tape.value(l.modality), r))});
    }
  }
  return out;
}

ConditionLabel ConditionClassifier::classify(const Tensor& image) const { return classify(std::vector<Tensor>{image})[0]; }

ClassifierTrainResult train_condition_classifier(const std::vector<Tensor>& images,
                                                 const std::vector<ConditionLabel>& labels,
                                                 const ClassifierConfig& config, const ProgressFn& progress) {
  if (images.empty()) throw ShapeError("train_condition_classifier: empty dataset");
  if (images.size() != labels.size()) throw ShapeError("train_condition_classifier: label count mismatch");
  ClassifierTrainResult result{ConditionClassifier(config.image_size, config.seed), {}};
  ConditionClassifier& model = result.model;
  Adam<float> adam(AdamConfig{config.lr});
  Rng rng(mix_seed(config.seed, 1));
  const int n = static_cast<int>(images.size());
  for (int step = 0; step < config.steps; ++step) {
    std::vector<std::size_t> idx;
    std::vector<int> pt, mt;
    for (int b = 0; b < config.batch_size; ++b) {
      const auto i = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
      idx.push_back(i);
      pt.push_back(static_cast<int>(labels[i].pathology));
      mt.push_back(static_cast<int>(labels[i].modality));
    }
    Tape<float> tape;
    const auto logits = model.forward(tape, tape.constant(stack_images(images, idx, config.image_size)));
    Var loss = ops::add(tape, ops::cross_entropy(tape, logits.pathology, pt), ops::cross_entropy(tape, logits.modality, mt));
    const double value = tape.value(loss)[0];
    tape.backward(loss);
    model.params().zero_grad();
    tape.collect_grads(model.params());
    adam.step(model.params());
    result.loss_history.push_back(value);
    if (progress) progress(step, value);
  }
  return result;
}

ClassifierTrainResult train_condition_classifier(const ClassifierConfig& config, const ProgressFn& progress,
                                                 const Vae<float>* autoencoder) {
  std::vector<Tensor> images;
  std::vector<ConditionLabel> labels;
  for (int cell = 0; cell < kNumCells; ++cell) {
    const ConditionLabel label = ConditionLabel::from_cell(cell);
    for (int i = 0; i < config.images_per_cell; ++i) {
      const std::uint64_t seed = mix_seed(mix_seed(config.seed, 0xC1A55EED), static_cast<std::uint64_t>(cell) * 100003 + i);
      images.push_back(generate_phantom(seed, label, config.image_size));
      labels.push_back(label);
    }
  }
  if (autoencoder) {
    const std::size_t n = images.size();
    for (std::size_t b = 0; b < n; b += kEvalBatch) {
      const std::vector<Tensor> batch(images.begin() + static_cast<std::ptrdiff_t>(b),
                                      images.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + kEvalBatch)));
      const Tensor rec = autoencoder->decode(encode_means(*autoencoder, batch));
      for (int i = 0; i < rec.dim(0); ++i) {
        images.push_back(quantize_8bit(rec.item(i).reshaped({1, config.image_size, config.image_size})));
        labels.push_back(labels[b + static_cast<std::size_t>(i)]);
      }
    }
  }
  return train_condition_classifier(images, labels, config, progress);
}

ClassifierAccuracy classifier_accuracy(const ConditionClassifier& model, const std::vector<Tensor>& images,
                                       const std::vector<ConditionLabel>& labels) {
  if (images.empty() || images.size() != labels.size()) throw ShapeError("classifier_accuracy: bad inputs");
  const auto pred = model.classify(images);
  ClassifierAccuracy acc;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    acc.pathology += pred[i].pathology == labels[i].pathology;
    acc.modality += pred[i].modality == labels[i].modality;
    acc.joint += pred[i] == labels[i];
  }
  const double n = static_cast<double>(pred.size());
  acc.pathology /= n;
  acc.modality /= n;
  acc.joint /= n;
  return acc;
}

}  // namespace lphom
