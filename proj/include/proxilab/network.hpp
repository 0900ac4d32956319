#pragma once

#include "proxilab/geometry.hpp"
#include "proxilab/savgol.hpp"
#include "proxilab/socnav.hpp"
#include "proxilab/sord.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace proxilab {

struct NetworkConfig {
  int input_dim = kFeatureCount;
  int hidden_layers = 3;
  int hidden_width = 64;

  void validate() const;
};

/// SGD with classical momentum; weight decay is added to the gradient of
/// every parameter.
struct TrainConfig {
  double learning_rate = 0.5e-3;
  double momentum = 0.6;
  double weight_decay = 1e-1;
  int epochs = 200;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FineTuneConfig {
  int epochs = 50;
  double learning_rate = 5e-5;
  double momentum = 0.6;
  double weight_decay = 0.0;
  int batch_size = 1;
  std::uint64_t seed = 0;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;

  bool operator==(const DenseLayer& o) const { return weight == o.weight && bias == o.bias; }
};

/// Per-feature standardization fitted on the training split.
struct FeatureNormalizer {
  FeatureArray mean = FeatureArray::Zero();
  FeatureArray scale = FeatureArray::Ones();

  static FeatureNormalizer fit(std::span<const LabeledExample> examples);
  static FeatureNormalizer fit(std::span<const FeatureArray> rows);
  FeatureArray apply(const FeatureArray& raw) const { return (raw - mean).cwiseQuotient(scale); }

  bool operator==(const FeatureNormalizer& o) const { return mean == o.mean && scale == o.scale; }
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  int epochs_run = 0;
  int best_epoch = 0;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  /// Training-domain feature rows kept for the domain discriminator.
  std::vector<FeatureArray> domain_sample;
};

enum class Readout { expectation, argmax };

/// Feedforward ordinal-regression network: ReLU hidden layers and a softmax
/// head over the SORD classes.
class ProxemicsNetwork {
 public:
  ProxemicsNetwork(NetworkConfig net_cfg, SordConfig sord_cfg, SmoothingConfig smoothing, FeatureNormalizer norm,
                   std::vector<DenseLayer> layers);

  /// He-style uniform fan-in initialization with zero biases.
  static ProxemicsNetwork initialize(const NetworkConfig& net_cfg, const SordConfig& sord_cfg,
                                     const SmoothingConfig& smoothing, const FeatureNormalizer& norm,
                                     std::uint64_t seed);

  const NetworkConfig& net_config() const { return net_cfg_; }
  const SordConfig& sord_config() const { return sord_cfg_; }
  const SmoothingConfig& smoothing_config() const { return smoothing_; }
  const FeatureNormalizer& normalizer() const { return norm_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }
  const DenseLayer& output_layer() const { return layers_.back(); }

  /// Class distribution for one scenario. NaN features throw.
  Eigen::VectorXd forward(const FeatureVector& f) const;

  /// Logits for already-normalized inputs (features x batch).
  Eigen::MatrixXd logits(const Eigen::MatrixXd& normalized) const;

  Eigen::MatrixXd normalize(std::span<const LabeledExample> examples) const;

  const SavgolFilter<double>& smoother() const { return *filter_; }

  TrainingMeta meta;

  bool same_parameters(const ProxemicsNetwork& o) const;

 private:
  NetworkConfig net_cfg_;
  SordConfig sord_cfg_;
  SmoothingConfig smoothing_;
  FeatureNormalizer norm_;
  std::vector<DenseLayer> layers_;
  std::shared_ptr<const SavgolFilter<double>> filter_;
};

struct LayerGradient {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<LayerGradient> layers;
};

/// Mean KL(target || softmax(net)) over a batch, with analytic gradients.
LossGradient kl_loss_gradient(const ProxemicsNetwork& net, const Eigen::MatrixXd& normalized,
                              const Eigen::MatrixXd& targets);

double kl_loss(const ProxemicsNetwork& net, const Eigen::MatrixXd& normalized, const Eigen::MatrixXd& targets);

Eigen::MatrixXd soft_label_matrix(std::span<const LabeledExample> examples, const SordConfig& cfg);

/// Smoothed readout: filter the distribution, clip negatives, renormalize,
/// then take the expectation (or argmax).
double score_from_distribution(const ProxemicsNetwork& net, const Eigen::VectorXd& probs, bool smooth,
                               Readout readout = Readout::expectation);

double predict_score(const ProxemicsNetwork& net, const FeatureVector& f, bool smooth,
                     Readout readout = Readout::expectation);

double mean_absolute_error(const ProxemicsNetwork& net, std::span<const LabeledExample> examples, bool smooth,
                           Readout readout = Readout::expectation);

/// Mini-batch SGD on the train split; keeps the weights with the lowest
/// validation loss (final weights when there is no validation data).
ProxemicsNetwork train(const DatasetSplit& split, const NetworkConfig& net_cfg, const TrainConfig& train_cfg,
                       const SordConfig& sord_cfg, const SmoothingConfig& smoothing = {});

/// Retrains the output layer only. The hidden layers of the result are
/// bit-identical to `net`; `net` itself is untouched.
ProxemicsNetwork fine_tune(const ProxemicsNetwork& net, std::span<const LabeledExample> user_data,
                           const FineTuneConfig& cfg = {}, std::span<const LabeledExample> validation = {});

inline constexpr int kModelFileVersion = 1;

void save_model(const ProxemicsNetwork& net, const std::filesystem::path& path);
ProxemicsNetwork load_model(const std::filesystem::path& path);
std::string model_to_json(const ProxemicsNetwork& net);
ProxemicsNetwork model_from_json(const std::string& text);

}  // namespace proxilab
