#pragma once

#include "proxilab/dialogue.hpp"
#include "proxilab/network.hpp"
#include "proxilab/simlab.hpp"
#include "proxilab/socnav.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace proxilab::testing {

/// Small fixture-trained model with a training-domain sample, shared per binary.
inline std::shared_ptr<const ProxemicsNetwork> fixture_model() {
  static const auto net = [] {
    const auto labeled = to_labeled_examples(filter_single_human(simlab::make_socnav_fixture(300, 7)));
    const auto s = split(labeled.examples, {}, 0);
    TrainConfig tc;
    tc.learning_rate = 0.01;
    tc.weight_decay = 0.0;
    tc.epochs = 60;
    auto n = train(s, NetworkConfig{}, tc, SordConfig{});
    for (const auto& e : s.validation) n.meta.domain_sample.push_back(e.features.to_array());
    return std::make_shared<const ProxemicsNetwork>(std::move(n));
  }();
  return net;
}

inline std::vector<DialogueItem> two_items() {
  return {DialogueItem{"Book", "Fiction or not?", {"Fiction", "Non-fiction"}, {"A story it is.", "Facts it is."}},
          DialogueItem{"Cup", "Tea or coffee?", {"Tea", "Coffee"}, {"Tea time.", "Coffee time."}}};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("proxilab_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace proxilab::testing
