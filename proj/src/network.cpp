#include "proxilab/network.hpp"

#include "proxilab/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace proxilab {

using nlohmann::json;

void NetworkConfig::validate() const {
  if (input_dim <= 0 || hidden_layers < 0 || hidden_width <= 0) {
    throw std::invalid_argument("NetworkConfig: dimensions must be positive");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  if (epochs < 1 || batch_size < 1) throw std::invalid_argument("TrainConfig: epochs and batch_size must be >= 1");
}

FeatureNormalizer FeatureNormalizer::fit(std::span<const LabeledExample> examples) {
  std::vector<FeatureArray> rows;
  rows.reserve(examples.size());
  for (const auto& e : examples) rows.push_back(e.features.to_array());
  return fit(rows);
}

FeatureNormalizer FeatureNormalizer::fit(std::span<const FeatureArray> rows) {
  FeatureNormalizer n;
  if (rows.empty()) return n;
  FeatureArray sum = FeatureArray::Zero();
  for (const auto& r : rows) sum += r;
  n.mean = sum / static_cast<double>(rows.size());
  FeatureArray var = FeatureArray::Zero();
  for (const auto& r : rows) var += (r - n.mean).cwiseAbs2();
  var /= static_cast<double>(rows.size());
  for (int i = 0; i < kFeatureCount; ++i) {
    const double sd = std::sqrt(var(i));
    n.scale(i) = sd > 1e-12 ? sd : 1.0;
  }
  return n;
}

ProxemicsNetwork::ProxemicsNetwork(NetworkConfig net_cfg, SordConfig sord_cfg, SmoothingConfig smoothing,
                                   FeatureNormalizer norm, std::vector<DenseLayer> layers)
    : net_cfg_(net_cfg), sord_cfg_(sord_cfg), smoothing_(smoothing), norm_(norm), layers_(std::move(layers)) {
  net_cfg_.validate();
  sord_cfg_.validate();
  smoothing_.validate();
  if (static_cast<int>(layers_.size()) != net_cfg_.hidden_layers + 1) {
    throw std::invalid_argument("network: layer count does not match config");
  }
  Eigen::Index in = net_cfg_.input_dim;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Eigen::Index out = (l + 1 == layers_.size()) ? sord_cfg_.num_classes : net_cfg_.hidden_width;
    if (layers_[l].weight.rows() != out || layers_[l].weight.cols() != in || layers_[l].bias.size() != out) {
      throw std::invalid_argument("network: layer " + std::to_string(l) + " has inconsistent shape");
    }
    in = out;
  }
  filter_ = std::make_shared<const SavgolFilter<double>>(sord_cfg_.num_classes, smoothing_);
}

ProxemicsNetwork ProxemicsNetwork::initialize(const NetworkConfig& net_cfg, const SordConfig& sord_cfg,
                                              const SmoothingConfig& smoothing, const FeatureNormalizer& norm,
                                              std::uint64_t seed) {
  net_cfg.validate();
  sord_cfg.validate();
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  int in = net_cfg.input_dim;
  for (int l = 0; l <= net_cfg.hidden_layers; ++l) {
    const int out = (l == net_cfg.hidden_layers) ? sord_cfg.num_classes : net_cfg.hidden_width;
    const double limit = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    }
    layers.push_back(std::move(layer));
    in = out;
  }
  ProxemicsNetwork net(net_cfg, sord_cfg, smoothing, norm, std::move(layers));
  net.meta.seed = seed;
  return net;
}

Eigen::MatrixXd ProxemicsNetwork::logits(const Eigen::MatrixXd& normalized) const {
  Eigen::MatrixXd a = normalized;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    a = ((layers_[l].weight * a).colwise() + layers_[l].bias).cwiseMax(0.0);
  }
  return (layers_.back().weight * a).colwise() + layers_.back().bias;
}

Eigen::VectorXd ProxemicsNetwork::forward(const FeatureVector& f) const {
  const FeatureArray raw = f.to_array();
  if (raw.hasNaN()) throw std::invalid_argument("forward: NaN in features");
  const Eigen::MatrixXd x = norm_.apply(raw);
  return softmax(logits(x).col(0));
}

Eigen::MatrixXd ProxemicsNetwork::normalize(std::span<const LabeledExample> examples) const {
  Eigen::MatrixXd x(kFeatureCount, static_cast<Eigen::Index>(examples.size()));
  for (std::size_t i = 0; i < examples.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = norm_.apply(examples[i].features.to_array());
  }
  return x;
}

bool ProxemicsNetwork::same_parameters(const ProxemicsNetwork& o) const {
  return layers_ == o.layers_ && norm_ == o.norm_;
}

Eigen::MatrixXd soft_label_matrix(std::span<const LabeledExample> examples, const SordConfig& cfg) {
  Eigen::MatrixXd t(cfg.num_classes, static_cast<Eigen::Index>(examples.size()));
  for (std::size_t i = 0; i < examples.size(); ++i) {
    t.col(static_cast<Eigen::Index>(i)) = soft_label(examples[i].discomfort, cfg);
  }
  return t;
}

double kl_loss(const ProxemicsNetwork& net, const Eigen::MatrixXd& normalized, const Eigen::MatrixXd& targets) {
  if (normalized.cols() == 0) return 0.0;
  const Eigen::MatrixXd q = softmax_columns(net.logits(normalized));
  double acc = 0.0;
  for (Eigen::Index c = 0; c < q.cols(); ++c) acc += kl_divergence(targets.col(c), q.col(c));
  return acc / static_cast<double>(q.cols());
}

LossGradient kl_loss_gradient(const ProxemicsNetwork& net, const Eigen::MatrixXd& normalized,
                              const Eigen::MatrixXd& targets) {
  const auto& layers = net.layers();
  const auto batch = static_cast<double>(normalized.cols());

  std::vector<Eigen::MatrixXd> acts{normalized};
  std::vector<Eigen::MatrixXd> pre;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    pre.push_back((layers[l].weight * acts.back()).colwise() + layers[l].bias);
    acts.push_back(pre.back().cwiseMax(0.0));
  }
  const Eigen::MatrixXd q = softmax_columns((layers.back().weight * acts.back()).colwise() + layers.back().bias);

  LossGradient out;
  for (Eigen::Index c = 0; c < q.cols(); ++c) out.loss += kl_divergence(targets.col(c), q.col(c));
  out.loss /= batch;

  out.layers.resize(layers.size());
  // d KL / d logits = q - p for each column, since p sums to one.
  Eigen::MatrixXd delta = (q - targets) / batch;
  for (std::size_t l = layers.size(); l-- > 0;) {
    out.layers[l].weight = delta * acts[l].transpose();
    out.layers[l].bias = delta.rowwise().sum();
    if (l > 0) {
      delta = (layers[l].weight.transpose() * delta).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

double score_from_distribution(const ProxemicsNetwork& net, const Eigen::VectorXd& probs, bool smooth,
                               Readout readout) {
  Eigen::VectorXd p = probs;
  if (smooth) {
    Eigen::VectorXd s = net.smoother().apply(probs).cwiseMax(0.0);
    const double total = s.sum();
    if (total > 0.0) p = s / total;
  }
  const SordConfig& cfg = net.sord_config();
  double score = 0.0;
  if (readout == Readout::argmax) {
    Eigen::Index idx = 0;
    p.maxCoeff(&idx);
    score = cfg.class_value(static_cast<int>(idx));
  } else {
    score = expected_score(p, cfg);
  }
  return std::clamp(score, 0.0, 100.0);
}

double predict_score(const ProxemicsNetwork& net, const FeatureVector& f, bool smooth, Readout readout) {
  return score_from_distribution(net, net.forward(f), smooth, readout);
}

double mean_absolute_error(const ProxemicsNetwork& net, std::span<const LabeledExample> examples, bool smooth,
                           Readout readout) {
  if (examples.empty()) throw std::invalid_argument("mean_absolute_error: no examples");
  const Eigen::MatrixXd q = softmax_columns(net.logits(net.normalize(examples)));
  double acc = 0.0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    acc += std::abs(score_from_distribution(net, q.col(static_cast<Eigen::Index>(i)), smooth, readout) -
                    examples[i].discomfort);
  }
  return acc / static_cast<double>(examples.size());
}

namespace {

struct SgdState {
  std::vector<LayerGradient> velocity;
};

SgdState zero_state(const ProxemicsNetwork& net) {
  SgdState s;
  for (const auto& l : net.layers()) {
    s.velocity.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  return s;
}

void sgd_step(DenseLayer& layer, LayerGradient& velocity, LayerGradient grad, double lr, double momentum,
              double weight_decay) {
  grad.weight += weight_decay * layer.weight;
  grad.bias += weight_decay * layer.bias;
  velocity.weight = momentum * velocity.weight + grad.weight;
  velocity.bias = momentum * velocity.bias + grad.bias;
  layer.weight -= lr * velocity.weight;
  layer.bias -= lr * velocity.bias;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(static_cast<Eigen::Index>(idx[i]));
  return out;
}

struct EpochRunner {
  Eigen::MatrixXd x;
  Eigen::MatrixXd t;
  std::vector<std::size_t> order;
  int batch_size;
  std::mt19937_64 rng;

  EpochRunner(Eigen::MatrixXd x_, Eigen::MatrixXd t_, int batch, std::uint64_t seed)
      : x(std::move(x_)), t(std::move(t_)), order(static_cast<std::size_t>(x.cols())), batch_size(batch), rng(seed) {
    std::iota(order.begin(), order.end(), std::size_t{0});
  }

  template <typename Step>
  void run(Step&& step) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t len = std::min(order.size() - start, static_cast<std::size_t>(batch_size));
      const std::span<const std::size_t> idx(order.data() + start, len);
      step(gather(x, idx), gather(t, idx));
    }
  }
};

}  // namespace

ProxemicsNetwork train(const DatasetSplit& split, const NetworkConfig& net_cfg, const TrainConfig& train_cfg,
                       const SordConfig& sord_cfg, const SmoothingConfig& smoothing) {
  train_cfg.validate();
  if (split.train.empty()) throw std::invalid_argument("train: empty training set");

  const FeatureNormalizer norm = FeatureNormalizer::fit(split.train);
  ProxemicsNetwork net = ProxemicsNetwork::initialize(net_cfg, sord_cfg, smoothing, norm, train_cfg.seed);

  EpochRunner runner(net.normalize(split.train), soft_label_matrix(split.train, sord_cfg), train_cfg.batch_size,
                     train_cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const Eigen::MatrixXd val_x = net.normalize(split.validation);
  const Eigen::MatrixXd val_t = soft_label_matrix(split.validation, sord_cfg);
  const bool has_val = !split.validation.empty();

  SgdState state = zero_state(net);
  std::vector<DenseLayer> best = net.layers();
  double best_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    runner.run([&](const Eigen::MatrixXd& bx, const Eigen::MatrixXd& bt) {
      LossGradient g = kl_loss_gradient(net, bx, bt);
      if (!std::isfinite(g.loss)) throw TrainingError("non-finite training loss", epoch);
      auto& layers = net.mutable_layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        sgd_step(layers[l], state.velocity[l], std::move(g.layers[l]), train_cfg.learning_rate, train_cfg.momentum,
                 train_cfg.weight_decay);
      }
    });
    const double train_loss = kl_loss(net, runner.x, runner.t);
    if (!std::isfinite(train_loss)) throw TrainingError("non-finite training loss", epoch);
    net.meta.train_loss.push_back(train_loss);
    const double monitored = has_val ? kl_loss(net, val_x, val_t) : train_loss;
    if (has_val) net.meta.validation_loss.push_back(monitored);
    if (monitored < best_loss) {
      best_loss = monitored;
      best = net.layers();
      best_epoch = epoch;
    }
  }

  net.mutable_layers() = std::move(best);
  net.meta.seed = train_cfg.seed;
  net.meta.epochs_run = train_cfg.epochs;
  net.meta.best_epoch = best_epoch;
  constexpr std::size_t kDomainSampleCap = 256;
  const auto& domain_src = has_val ? split.validation : split.train;
  for (std::size_t i = 0; i < domain_src.size() && i < kDomainSampleCap; ++i) {
    net.meta.domain_sample.push_back(domain_src[i].features.to_array());
  }
  return net;
}

ProxemicsNetwork fine_tune(const ProxemicsNetwork& net, std::span<const LabeledExample> user_data,
                           const FineTuneConfig& cfg, std::span<const LabeledExample> validation) {
  if (user_data.empty()) throw std::invalid_argument("fine_tune: no user data");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.learning_rate >= 0.0)) {
    throw std::invalid_argument("fine_tune: invalid configuration");
  }
  ProxemicsNetwork tuned = net;
  tuned.meta.train_loss.clear();
  tuned.meta.validation_loss.clear();
  const auto& layers = tuned.layers();
  const std::size_t out_idx = layers.size() - 1;

  // Hidden activations never change, so compute them once.
  auto hidden = [&](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < out_idx; ++l) a = ((layers[l].weight * a).colwise() + layers[l].bias).cwiseMax(0.0);
    return a;
  };
  EpochRunner runner(hidden(tuned.normalize(user_data)), soft_label_matrix(user_data, tuned.sord_config()),
                     cfg.batch_size, cfg.seed ^ 0xd1b54a32d192ed03ULL);
  const bool has_val = !validation.empty();
  const Eigen::MatrixXd val_h = has_val ? hidden(tuned.normalize(validation)) : Eigen::MatrixXd();
  const Eigen::MatrixXd val_t = has_val ? soft_label_matrix(validation, tuned.sord_config()) : Eigen::MatrixXd();

  DenseLayer head = tuned.output_layer();
  LayerGradient velocity{Eigen::MatrixXd::Zero(head.weight.rows(), head.weight.cols()),
                         Eigen::VectorXd::Zero(head.bias.size())};

  auto head_loss = [&](const DenseLayer& h, const Eigen::MatrixXd& a, const Eigen::MatrixXd& t) {
    const Eigen::MatrixXd q = softmax_columns((h.weight * a).colwise() + h.bias);
    double acc = 0.0;
    for (Eigen::Index c = 0; c < q.cols(); ++c) acc += kl_divergence(t.col(c), q.col(c));
    return acc / static_cast<double>(q.cols());
  };

  DenseLayer best = head;
  double best_loss = has_val ? head_loss(head, val_h, val_t) : std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    runner.run([&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& t) {
      const Eigen::MatrixXd q = softmax_columns((head.weight * a).colwise() + head.bias);
      const Eigen::MatrixXd delta = (q - t) / static_cast<double>(a.cols());
      sgd_step(head, velocity, {delta * a.transpose(), delta.rowwise().sum()}, cfg.learning_rate, cfg.momentum,
               cfg.weight_decay);
    });
    const double train_loss = head_loss(head, runner.x, runner.t);
    if (!std::isfinite(train_loss)) throw TrainingError("non-finite fine-tuning loss", epoch);
    tuned.meta.train_loss.push_back(train_loss);
    const double monitored = has_val ? head_loss(head, val_h, val_t) : train_loss;
    if (has_val) tuned.meta.validation_loss.push_back(monitored);
    if (!has_val || monitored < best_loss) {
      best_loss = monitored;
      best = head;
      best_epoch = epoch;
    }
  }

  tuned.mutable_layers().back() = std::move(best);
  tuned.meta.epochs_run = cfg.epochs;
  tuned.meta.best_epoch = best_epoch;
  return tuned;
}

namespace {

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json feature_json(const FeatureArray& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

FeatureArray feature_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != kFeatureCount) throw ParseError("feature row must have 14 values");
  return Eigen::Map<const FeatureArray>(v.data());
}

Eigen::VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string model_to_json(const ProxemicsNetwork& net) {
  json j;
  j["version"] = kModelFileVersion;
  j["net_cfg"] = {{"input_dim", net.net_config().input_dim},
                  {"hidden_layers", net.net_config().hidden_layers},
                  {"hidden_width", net.net_config().hidden_width},
                  {"activation", "relu"}};
  j["sord_cfg"] = {{"num_classes", net.sord_config().num_classes},
                   {"distance_scale", net.sord_config().distance_scale}};
  j["smoothing_cfg"] = {{"window", net.smoothing_config().window}, {"polyorder", net.smoothing_config().polyorder}};
  j["norm_stats"] = {{"mean", feature_json(net.normalizer().mean)}, {"std", feature_json(net.normalizer().scale)}};
  json layers = json::array();
  for (const auto& l : net.layers()) {
    json w = json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) w.push_back(vec_json(l.weight.row(r).transpose()));
    layers.push_back({{"w", w}, {"b", vec_json(l.bias)}});
  }
  j["layers"] = layers;
  json domain = json::array();
  for (const auto& row : net.meta.domain_sample) domain.push_back(feature_json(row));
  j["meta"] = {{"seed", net.meta.seed},
               {"epochs_run", net.meta.epochs_run},
               {"best_epoch", net.meta.best_epoch},
               {"train_loss", net.meta.train_loss},
               {"validation_loss", net.meta.validation_loss},
               {"domain_sample", domain}};
  return j.dump();
}

ProxemicsNetwork model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
  try {
    const int version = j.at("version").get<int>();
    if (version != kModelFileVersion) {
      throw ParseError("unsupported model version " + std::to_string(version));
    }
    NetworkConfig nc{j.at("net_cfg").at("input_dim").get<int>(), j.at("net_cfg").at("hidden_layers").get<int>(),
                     j.at("net_cfg").at("hidden_width").get<int>()};
    SordConfig sc{j.at("sord_cfg").at("num_classes").get<int>(), j.at("sord_cfg").at("distance_scale").get<double>()};
    SmoothingConfig sm{j.at("smoothing_cfg").at("window").get<int>(), j.at("smoothing_cfg").at("polyorder").get<int>()};
    FeatureNormalizer norm{feature_from_json(j.at("norm_stats").at("mean")),
                           feature_from_json(j.at("norm_stats").at("std"))};
    std::vector<DenseLayer> layers;
    for (const auto& lj : j.at("layers")) {
      const auto& w = lj.at("w");
      const Eigen::VectorXd b = vec_from_json(lj.at("b"));
      const auto rows = static_cast<Eigen::Index>(w.size());
      const auto cols = rows > 0 ? static_cast<Eigen::Index>(w.at(0).size()) : 0;
      Eigen::MatrixXd m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::VectorXd row = vec_from_json(w.at(static_cast<std::size_t>(r)));
        if (row.size() != cols) throw ParseError("ragged weight matrix");
        m.row(r) = row.transpose();
      }
      layers.push_back({std::move(m), b});
    }
    ProxemicsNetwork net(nc, sc, sm, norm, std::move(layers));
    const auto& mj = j.at("meta");
    net.meta.seed = mj.value("seed", std::uint64_t{0});
    net.meta.epochs_run = mj.value("epochs_run", 0);
    net.meta.best_epoch = mj.value("best_epoch", 0);
    net.meta.train_loss = mj.value("train_loss", std::vector<double>{});
    net.meta.validation_loss = mj.value("validation_loss", std::vector<double>{});
    for (const auto& row : mj.value("domain_sample", json::array())) net.meta.domain_sample.push_back(feature_from_json(row));
    return net;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("invalid model file: ") + e.what());
  }
}

void save_model(const ProxemicsNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file " + path.string());
  out << model_to_json(net);
  if (!out) throw IoError("failed writing model file " + path.string());
}

ProxemicsNetwork load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace proxilab
