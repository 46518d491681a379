#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dfd {

using Rng = std::mt19937_64;

// Derives an independent generator from (seed, role, index). Roles keep the
// dataset, parameter-init, batching and negative-sampling streams apart so that
// changing one never perturbs another.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view role, std::uint64_t index = 0);
Rng make_rng(std::uint64_t seed, std::string_view role, std::uint64_t index = 0);

}  // namespace dfd
