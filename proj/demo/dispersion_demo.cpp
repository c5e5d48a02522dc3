// Fits the dispersion scenario and prints where samples disagree: low
// coefficient of variation in the shared centre component, high on the ends.

#include <cstdio>
#include <cstdlib>

#include "hapt/dispersion.hpp"
#include "hapt/simgen.hpp"

int main(int argc, char** argv) {
  using namespace hapt;
  const std::size_t samples = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 40;
  const std::size_t obs = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 200;
  try {
    const auto sims = generate({ScenarioId::disp, 10.0, 1}, samples, obs);
    const auto tree = PartitionTree::build(8, {0.0, 1.0});
    const auto fit = HaptFit::fit(tree, bin_data(tree, values_of(sims)), default_config(4), default_config(4));
    std::printf("samples %zu  obs %zu  log_ml %.6f\n", samples, obs, fit.log_ml());
    const auto grid = dispersion_grid(fit, 21);
    std::printf("%6s %12s %12s %8s\n", "x", "mean", "variance", "cv");
    for (std::size_t j = 0; j < grid.points.size(); ++j)
      std::printf("%6.3f %12.5f %12.5f %8.4f\n", grid.points[j], grid.mean[j], grid.variance[j], grid.cv[j]);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
