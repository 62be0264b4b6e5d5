#include "dexhil/hil/weighting.hpp"

#include <cmath>
#include <string>

namespace dexhil::hil {

void WeightingConfig::validate() const {
  if (target) {
    double sum = 0.0;
    for (double p : *target) {
      if (!(p > 0.0 && p < 1.0)) throw WeightingError("P* entries must lie in (0, 1)");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw WeightingError("P* must sum to 1");
  } else if (!(p_intervention > 0.0 && p_intervention < 1.0)) {
    throw WeightingError("P*(intervention) must lie in (0, 1)");
  }
}

std::array<double, kCategoryCount> target_distribution(const CategoryCounts& n, const WeightingConfig& cfg) {
  cfg.validate();
  if (cfg.target) return *cfg.target;
  constexpr int ci = static_cast<int>(Category::intervention);
  long rest = 0;
  for (int c = 0; c < kCategoryCount; ++c)
    if (c != ci) rest += n[c];
  std::array<double, kCategoryCount> p{};
  p[ci] = cfg.p_intervention;
  for (int c = 0; c < kCategoryCount; ++c) {
    if (c == ci || rest == 0) continue;
    p[c] = (1.0 - cfg.p_intervention) * static_cast<double>(n[c]) / static_cast<double>(rest);
  }
  return p;
}

std::array<double, kCategoryCount> compute_weights(const CategoryCounts& n, const WeightingConfig& cfg) {
  const auto p = target_distribution(n, cfg);
  long total = 0;
  for (long c : n) {
    if (c < 0) throw WeightingError("negative category count");
    total += c;
  }
  if (total == 0) throw WeightingError("empty dataset");
  std::array<double, kCategoryCount> w{};
  for (int c = 0; c < kCategoryCount; ++c) {
    if (n[c] == 0) {
      if (p[c] > 0.0)
        throw WeightingError(std::string("category '") + category_name(static_cast<Category>(c)) +
                             "' is empty but has positive target mass");
      continue;
    }
    w[c] = p[c] / (static_cast<double>(n[c]) / static_cast<double>(total));
  }
  return w;
}

double weighted_mass(const CategoryCounts& n, const std::array<double, kCategoryCount>& w) {
  long total = 0;
  for (long c : n) total += c;
  double s = 0.0;
  for (int c = 0; c < kCategoryCount; ++c) s += w[c] * static_cast<double>(n[c]) / static_cast<double>(total);
  return s;
}

double effective_share(const std::vector<Category>& records, const std::array<double, kCategoryCount>& w,
                       int batches, int batch_size, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, records.size() - 1);
  double acc = 0.0;
  for (int b = 0; b < batches; ++b) {
    double wi = 0.0, wall = 0.0;
    for (int k = 0; k < batch_size; ++k) {
      const Category c = records[pick(rng)];
      const double x = w[static_cast<int>(c)];
      wall += x;
      if (c == Category::intervention) wi += x;
    }
    if (wall > 0.0) acc += wi / wall;
  }
  return acc / batches;
}

}  // namespace dexhil::hil
