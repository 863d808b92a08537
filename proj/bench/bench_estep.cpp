// Compares the serial reference E-step against the OpenMP one on a simulated
// dataset and checks they produce identical weights.

#include <chrono>
#include <cmath>
#include <cstdio>

#include "pedsurv/em.hpp"
#include "pedsurv/simulate.hpp"

using namespace pedsurv;

int main() {
  SimulationConfig cfg;
  cfg.tmpl = synthetic_template();
  cfg.duplication = 30;  // ~1000 families
  cfg.allele_frequency = 0.004;
  cfg.hazard = {{20, 40, 60}, {0.0, 0.02, 0.10, 0.05}};
  cfg.rng_seed = 7;
  auto sim = simulate(cfg);

  GeneticModel gm{0.004, 0.0};
  EMConfig em;
  auto w0 = compute_weights_serial(sim.data, nullptr, gm, em);
  SurvivalModel model;
  model.kind = BaselineKind::piecewise;
  PiecewiseBaseline b;
  b.times = {30, 50, 70};
  b.increments = {0.2, 1.0, 1.0};
  b.var_increments = {0, 0, 0};
  model.piecewise = {b};
  model.beta.resize(0);

  const int reps = 20;
  auto time_it = [&](bool parallel) {
    EMConfig c = em;
    c.parallel_e_step = parallel;
    auto t0 = std::chrono::steady_clock::now();
    std::vector<double> w;
    for (int r = 0; r < reps; ++r)
      w = parallel ? compute_weights(sim.data, &model, gm, c)
                   : compute_weights_serial(sim.data, &model, gm, c);
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count() / reps;
    return std::make_pair(dt, w);
  };

  auto [t_serial, w_serial] = time_it(false);
  auto [t_parallel, w_parallel] = time_it(true);

  double max_diff = 0.0;
  for (size_t i = 0; i < w_serial.size(); ++i)
    max_diff = std::max(max_diff, std::abs(w_serial[i] - w_parallel[i]));

  std::printf("families: %zu, individuals: %d\n", sim.data.families.size(),
              sim.data.total_individuals());
  std::printf("serial   E-step: %.4f s\n", t_serial);
  std::printf("parallel E-step: %.4f s (speedup %.2fx)\n", t_parallel,
              t_serial / t_parallel);
  std::printf("max |serial - parallel| = %.3g\n", max_diff);
  return max_diff == 0.0 ? 0 : 1;
}
