#pragma once

#include <cstdint>
#include <vector>

#include "lphom/labels.hpp"
#include "lphom/layers.hpp"
#include "lphom/vae.hpp"

namespace lphom {

struct ClassifierConfig {
  int image_size = 64;
  int steps = 1500;
  int batch_size = 32;
  double lr = 1e-3;
  // Freshly generated phantoms per grid cell used for training.
  int images_per_cell = 40;
  std::uint64_t seed = 0;
};

// Small conv net with a 4-way pathology head and a 5-way modality head.
class ConditionClassifier {
 public:
  ConditionClassifier(int image_size, std::uint64_t seed);

  struct Logits {
    Var pathology;
    Var modality;
  };
  Logits forward(Tape<float>& tape, Var x) const;

  // Images (1,S,S) or (1,1,S,S).
  std::vector<ConditionLabel> classify(const std::vector<Tensor>& images) const;
  ConditionLabel classify(const Tensor& image) const;

  ParameterSet<float>& params() { return params_; }
  const ParameterSet<float>& params() const { return params_; }

 private:
  int image_size_;
  ParameterSet<float> params_;
  std::vector<layers::Conv2d<float>> convs_;
  std::vector<layers::GroupNorm<float>> norms_;
  layers::Linear<float> pathology_head_, modality_head_;
};

struct ClassifierTrainResult {
  ConditionClassifier model;
  std::vector<double> loss_history;
};

// Trains on labelled images; throws ShapeError when empty.
ClassifierTrainResult train_condition_classifier(const std::vector<Tensor>& images,
                                                 const std::vector<ConditionLabel>& labels,
                                                 const ClassifierConfig& config, const ProgressFn& progress = {});

// Generates config.images_per_cell phantoms for each of the 20 cells from
// seeds derived from config.seed, then trains on them. With `autoencoder`,
// each phantom's reconstruction is added under the same label so that the
// classifier reads decoded images by their structure rather than their blur.
ClassifierTrainResult train_condition_classifier(const ClassifierConfig& config, const ProgressFn& progress = {},
                                                 const Vae<float>* autoencoder = nullptr);

struct ClassifierAccuracy {
  double pathology = 0;
  double modality = 0;
  double joint = 0;
};

ClassifierAccuracy classifier_accuracy(const ConditionClassifier& model, const std::vector<Tensor>& images,
                                       const std::vector<ConditionLabel>& labels);

}  // namespace lphom
