#include "proxilab/socialforce.hpp"

#include "proxilab/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace proxilab {

SFParams SFParams::from_array(std::span<const double> v) {
  if (v.size() != 4) throw std::invalid_argument("SFParams needs 4 values");
  return {v[0], v[1], v[2], v[3]};
}

bool SFBounds::contains(const SFParams& p) const {
  const auto lo = lower.to_array();
  const auto hi = upper.to_array();
  const auto v = p.to_array();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < lo[i] || v[i] > hi[i]) return false;
  }
  return true;
}

double sf_discomfort(const SFParams& p, const FeatureVector& f) {
  const double w = p.anisotropy + (1.0 - p.anisotropy) * 0.5 * (1.0 + f.hr_cos);
  const double force = p.amplitude * std::exp((p.offset - f.hr_dist) / p.range) * w;
  return std::clamp(force, 0.0, 100.0);
}

double fitness(const SFParams& p, std::span<const LabeledExample> data) {
  if (data.empty()) throw std::invalid_argument("fitness: no data");
  double acc = 0.0;
  for (const auto& e : data) acc += std::abs(sf_discomfort(p, e.features) - e.discomfort);
  return acc / static_cast<double>(data.size());
}

void GAConfig::validate() const {
  if (population_size < 2) throw std::invalid_argument("GAConfig: population_size must be >= 2");
  if (generations < 0) throw std::invalid_argument("GAConfig: generations must be >= 0");
  for (double r : {crossover_rate, mutation_rate}) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("GAConfig: rates must lie in [0, 1]");
  }
}

GAResult ga_minimize(const std::function<double(std::span<const double>)>& objective, std::span<const double> lower,
                     std::span<const double> upper, const GAConfig& cfg) {
  cfg.validate();
  const std::size_t dims = lower.size();
  if (dims == 0 || upper.size() != dims) throw std::invalid_argument("ga_minimize: bad bounds");
  for (std::size_t d = 0; d < dims; ++d) {
    if (!(lower[d] <= upper[d])) throw std::invalid_argument("ga_minimize: lower bound exceeds upper bound");
  }

  using Genome = std::vector<double>;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto pop_size = static_cast<std::size_t>(cfg.population_size);

  auto clip = [&](Genome& g) {
    for (std::size_t d = 0; d < dims; ++d) g[d] = std::clamp(g[d], lower[d], upper[d]);
  };

  std::vector<Genome> pop(pop_size, Genome(dims));
  for (auto& g : pop) {
    for (std::size_t d = 0; d < dims; ++d) g[d] = lower[d] + unit(rng) * (upper[d] - lower[d]);
  }
  std::vector<double> fit(pop_size);
  auto evaluate = [&] {
    for (std::size_t i = 0; i < pop_size; ++i) fit[i] = objective(pop[i]);
  };
  evaluate();

  auto best_index = [&] { return static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin()); };

  GAResult result;
  std::size_t bi = best_index();
  result.best = pop[bi];
  result.best_fitness = fit[bi];
  result.history.push_back(result.best_fitness);
  result.trajectory.push_back(result.best);

  std::uniform_int_distribution<std::size_t> pick(0, pop_size - 1);
  auto tournament = [&]() -> const Genome& {
    const std::size_t a = pick(rng);
    const std::size_t b = pick(rng);
    return fit[a] <= fit[b] ? pop[a] : pop[b];
  };

  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::vector<Genome> next;
    next.reserve(pop_size);
    next.push_back(result.best);  // elite
    while (next.size() < pop_size) {
      Genome c1 = tournament();
      Genome c2 = tournament();
      if (unit(rng) < cfg.crossover_rate) {
        for (std::size_t d = 0; d < dims; ++d) {
          const double lo = std::min(c1[d], c2[d]);
          const double hi = std::max(c1[d], c2[d]);
          const double span = hi - lo;
          const double a = lo - cfg.blend_alpha * span;
          const double b = hi + cfg.blend_alpha * span;
          c1[d] = a + unit(rng) * (b - a);
          c2[d] = a + unit(rng) * (b - a);
        }
      }
      for (Genome* c : {&c1, &c2}) {
        for (std::size_t d = 0; d < dims; ++d) {
          if (unit(rng) < cfg.mutation_rate) {
            std::normal_distribution<double> noise(0.0, cfg.mutation_scale * (upper[d] - lower[d]));
            (*c)[d] += noise(rng);
          }
        }
        clip(*c);
      }
      next.push_back(std::move(c1));
      if (next.size() < pop_size) next.push_back(std::move(c2));
    }
    pop = std::move(next);
    evaluate();
    bi = best_index();
    if (fit[bi] < result.best_fitness) {
      result.best = pop[bi];
      result.best_fitness = fit[bi];
    }
    result.history.push_back(result.best_fitness);
    result.trajectory.push_back(result.best);
  }
  return result;
}

SFFit ga_fit(std::span<const LabeledExample> data, const SFBounds& bounds, const GAConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("ga_fit: no data");
  const auto lo = bounds.lower.to_array();
  const auto hi = bounds.upper.to_array();
  const GAResult r = ga_minimize([&](std::span<const double> g) { return fitness(SFParams::from_array(g), data); }, lo,
                                 hi, cfg);
  return {SFParams::from_array(r.best), r.best_fitness, r.history};
}

std::string sf_params_to_json(const SFParams& p) {
  return nlohmann::json{{"amplitude", p.amplitude}, {"range", p.range}, {"offset", p.offset}, {"anisotropy", p.anisotropy}}
      .dump();
}

SFParams sf_params_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return {j.at("amplitude").get<double>(), j.at("range").get<double>(), j.at("offset").get<double>(),
            j.at("anisotropy").get<double>()};
  } catch (const std::exception& e) {
    throw ParseError(std::string("invalid social-force parameter file: ") + e.what());
  }
}

}  // namespace proxilab
