#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spemix/dataset.hpp"
#include "spemix/distribution.hpp"
#include "spemix/error.hpp"
#include "spemix/rng.hpp"

namespace spemix {

enum class SamplerKind { Rejection, MetropolisHastings };

inline SamplerKind parse_sampler(const std::string& name) {
  if (name == "rejection") return SamplerKind::Rejection;
  if (name == "mh") return SamplerKind::MetropolisHastings;
  throw ValidationError("parse_sampler: expected 'rejection' or 'mh', got '" +
                        name + "'");
}

// A finite mixture to draw from: group sizes are multinomial in the mixing
// proportions (binomial when there are two groups), rows come from the
// per-component skewed power exponential laws.
struct SimulationConfig {
  std::string name = "custom";
  int n = 0;
  std::vector<double> proportions;
  std::vector<SpeParams> components;

  int groups() const { return static_cast<int>(components.size()); }
  int dim() const { return components.empty() ? 0 : components[0].dim(); }

  void validate() const {
    if (n < 1) throw ValidationError("SimulationConfig: n must be >= 1");
    if (components.empty())
      throw ValidationError("SimulationConfig: needs at least one component");
    if (proportions.size() != components.size())
      throw ValidationError(
          "SimulationConfig: proportions and components differ in length");
    double total = 0.0;
    for (double w : proportions) {
      if (!(w > 0.0))
        throw ValidationError("SimulationConfig: proportions must be > 0");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-8)
      throw ValidationError("SimulationConfig: proportions must sum to 1");
    for (const SpeParams& params : components) {
      params.validate();
      if (params.dim() != dim())
        throw ValidationError("SimulationConfig: mixed dimensions");
    }
  }
};

// The three simulation designs, parameters transcribed exactly.
inline SimulationConfig design1() {
  SimulationConfig config;
  config.name = "design-1";
  config.n = 500;
  config.proportions = {0.35, 0.25, 0.4};

  MatrixXd gamma(3, 3);
  gamma << 0.36, 0.48, -0.80,
          -0.80, 0.60, 0.0,
           0.48, 0.64, 0.6;
  VectorXd delta(3);
  delta << 4.0, 3.0, 1.0;
  const MatrixXd sigma = gamma * delta.asDiagonal() * gamma.transpose();

  SpeParams c1;
  c1.mu = (VectorXd(3) << 3.0, 3.0, 0.0).finished();
  c1.sigma = sigma;
  c1.beta = 0.85;
  c1.psi = (VectorXd(3) << -5.0, -10.0, 0.0).finished();

  SpeParams c2;
  c2.mu = (VectorXd(3) << 3.0, 6.0, 0.0).finished();
  c2.sigma = sigma;
  c2.beta = 0.9;
  c2.psi = (VectorXd(3) << 15.0, 10.0, 0.0).finished();

  SpeParams c3;
  c3.mu = (VectorXd(3) << 4.0, 2.0, 0.0).finished();
  c3.sigma = sigma;
  c3.beta = 2.0;
  c3.psi = (VectorXd(3) << 15.0, 10.0, 0.0).finished();

  config.components = {c1, c2, c3};
  return config;
}

inline SimulationConfig design2() {
  SimulationConfig config;
  config.name = "design-2";
  config.n = 500;
  config.proportions = {0.3, 0.45, 0.25};

  MatrixXd sigma1(3, 3);
  sigma1 << 1.0, 0.5, 0.4,
            0.5, 1.5, 0.35,
            0.4, 0.35, 1.2;
  MatrixXd sigma23(3, 3);
  sigma23 << 1.0, 0.3, 0.2,
             0.3, 1.5, 0.3,
             0.2, 0.3, 1.2;

  SpeParams c1;
  c1.mu = (VectorXd(3) << 0.0, 1.0, 2.0).finished();
  c1.sigma = sigma1;
  c1.beta = 1.0;
  c1.psi = (VectorXd(3) << 3.0, 5.0, 10.0).finished();

  SpeParams c2;
  c2.mu = (VectorXd(3) << 0.0, 4.0, 2.0).finished();
  c2.sigma = sigma23;
  c2.beta = 0.8;
  c2.psi = (VectorXd(3) << -3.0, 5.0, -5.0).finished();

  SpeParams c3;
  c3.mu = (VectorXd(3) << -2.0, -3.0, 0.0).finished();
  c3.sigma = sigma23;
  c3.beta = 0.9;
  c3.psi = (VectorXd(3) << 5.0, 10.0, -5.0).finished();

  config.components = {c1, c2, c3};
  return config;
}

inline SimulationConfig design3() {
  SimulationConfig config;
  config.name = "design-3";
  config.n = 450;
  config.proportions = {0.45, 0.55};

  SpeParams c1;
  c1.mu = VectorXd::Zero(2);
  c1.sigma = MatrixXd::Identity(2, 2);
  c1.beta = 2.0;
  c1.psi = VectorXd::Zero(2);

  SpeParams c2;
  c2.mu = (VectorXd(2) << 2.0, 0.0).finished();
  c2.sigma = MatrixXd::Identity(2, 2);
  c2.beta = 5.0;
  c2.psi = VectorXd::Zero(2);

  config.components = {c1, c2};
  return config;
}

inline SimulationConfig design_config(int design_id) {
  switch (design_id) {
    case 1: return design1();
    case 2: return design2();
    case 3: return design3();
  }
  throw ValidationError("design_config: design must be 1, 2, or 3");
}

// Draws one dataset: each row picks its component by a categorical draw in
// the mixing proportions (so group sizes are exactly multinomial), then the
// per-component blocks are filled by the chosen sampler with seeds derived
// from the component index. Deterministic given (config, seed, sampler).
inline Dataset simulate(const SimulationConfig& config, std::uint64_t seed,
                        SamplerKind sampler = SamplerKind::Rejection) {
  config.validate();
  const int n = config.n;
  const int p = config.dim();
  const int G = config.groups();

  Rng rng(seed);
  std::vector<int> assignment(n);
  std::vector<int> counts(G, 0);
  for (int i = 0; i < n; ++i) {
    assignment[i] = rng.categorical(config.proportions);
    ++counts[assignment[i]];
  }

  std::vector<MatrixXd> blocks(G);
  for (int g = 0; g < G; ++g) {
    if (counts[g] == 0) continue;
    const std::uint64_t block_seed =
        derive_seed(seed, static_cast<std::uint64_t>(g) + 1);
    blocks[g] = sampler == SamplerKind::Rejection
                    ? sample_mspe_rejection(counts[g], config.components[g],
                                            block_seed)
                    : sample_mspe_mh(counts[g], config.components[g],
                                     block_seed);
  }

  Dataset ds;
  ds.name = config.name;
  ds.x.resize(n, p);
  ds.labels.resize(n);
  for (int j = 0; j < p; ++j)
    ds.column_names.push_back("x" + std::to_string(j + 1));
  std::vector<int> cursor(G, 0);
  for (int i = 0; i < n; ++i) {
    const int g = assignment[i];
    ds.x.row(i) = blocks[g].row(cursor[g]++);
    ds.labels[i] = g + 1;
  }
  ds.validate();
  return ds;
}

}  // namespace spemix
