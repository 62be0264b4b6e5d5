#pragma once

#include <array>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "dexhil/hil/dataset.hpp"

namespace dexhil::hil {

class WeightingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Target distribution P*. Either an explicit full table or P*(intervention)
/// with the rest split by the empirical mass of the other categories.
struct WeightingConfig {
  double p_intervention = 0.5;
  std::optional<std::array<double, kCategoryCount>> target;

  void validate() const;
};

/// P*(c) for the given counts.
std::array<double, kCategoryCount> target_distribution(const CategoryCounts& n, const WeightingConfig& cfg);

/// w(c) = P*(c) / (n_c / N). Categories with n_c = 0 and P*(c) = 0 get 0.
/// Throws WeightingError when a category with positive target is empty.
std::array<double, kCategoryCount> compute_weights(const CategoryCounts& n, const WeightingConfig& cfg);

/// sum_c w(c) n_c / N
double weighted_mass(const CategoryCounts& n, const std::array<double, kCategoryCount>& w);

/// Mean share of the intervention weight in uniformly drawn batches.
double effective_share(const std::vector<Category>& records, const std::array<double, kCategoryCount>& w,
                       int batches, int batch_size, std::mt19937_64& rng);

}  // namespace dexhil::hil
