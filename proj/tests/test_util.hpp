#pragma once

#include <random>

#include "isasc/metrics.hpp"
#include "isasc/system_model.hpp"

namespace isasc::testing {

inline model::SystemConfig small_config(int m, int n, int k = 2) {
  model::SystemConfig c;
  c.m_t = m;
  c.m_r = m;
  c.n_irs = n;
  c.k_users = k;
  return c;
}

inline model::ChannelSet make_channels(const model::SystemConfig& c, std::uint64_t seed) {
  return model::synthesize_channels(c, model::SceneLayout::default_layout(c.k_users),
                                    model::PathLossModel{}, seed);
}

inline CMat random_psd(int m, int rank, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMat a(m, rank);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < rank; ++j) a(i, j) = Complex(g(rng), g(rng));
  return a * a.adjoint();
}

inline CVec random_cvec(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVec v(m);
  for (int i = 0; i < m; ++i) v(i) = Complex(g(rng), g(rng));
  return v;
}

inline metrics::BeamformerSet random_beams(int m, int k, double power, std::mt19937_64& rng) {
  metrics::BeamformerSet bf;
  for (int i = 0; i < k; ++i) bf.w_c.push_back(random_cvec(m, rng));
  bf.w_s = random_cvec(m, rng);
  bf.w_n = random_cvec(m, rng);
  const double scale = std::sqrt(power / bf.total_power());
  for (auto& w : bf.w_c) w *= scale;
  bf.w_s *= scale;
  bf.w_n *= scale;
  return bf;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double rel_err(const CMat& a, const CMat& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace isasc::testing
