#pragma once

#include "proxilab/geometry.hpp"
#include "proxilab/socnav.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace proxilab {

/// Scalar social-force discomfort: exponential decay with front/back
/// anisotropy.
struct SFParams {
  double amplitude = 100.0;   // A, score units
  double range = 1.0;         // B, meters
  double offset = 0.0;        // d0, meters
  double anisotropy = 1.0;    // lambda: 1 = isotropic

  std::array<double, 4> to_array() const { return {amplitude, range, offset, anisotropy}; }
  static SFParams from_array(std::span<const double> v);
};

struct SFBounds {
  SFParams lower{0.0, 0.05, 0.0, 0.0};
  SFParams upper{200.0, 5.0, 3.0, 1.0};

  bool contains(const SFParams& p) const;
};

double sf_discomfort(const SFParams& p, const FeatureVector& f);

/// Mean absolute error of the model over labeled data.
double fitness(const SFParams& p, std::span<const LabeledExample> data);

struct GAConfig {
  int population_size = 50;
  int generations = 100;
  double crossover_rate = 0.9;
  double mutation_rate = 0.1;
  double blend_alpha = 0.5;
  double mutation_scale = 0.1;  // sigma as a fraction of each gene's range
  std::uint64_t seed = 0;

  void validate() const;
};

struct GAResult {
  std::vector<double> best;
  double best_fitness = 0.0;
  /// Best-so-far fitness after each generation (index 0 = initial population).
  std::vector<double> history;
  /// Best individual after each generation.
  std::vector<std::vector<double>> trajectory;
};

/// Real-coded GA minimizing `objective` over a box: binary tournaments, BLX-alpha
/// crossover, clipped Gaussian mutation, single elite.
GAResult ga_minimize(const std::function<double(std::span<const double>)>& objective, std::span<const double> lower,
                     std::span<const double> upper, const GAConfig& cfg);

struct SFFit {
  SFParams params;
  double fitness = 0.0;
  std::vector<double> history;
};

SFFit ga_fit(std::span<const LabeledExample> data, const SFBounds& bounds, const GAConfig& cfg);

std::string sf_params_to_json(const SFParams& p);
SFParams sf_params_from_json(const std::string& text);

}  // namespace proxilab
