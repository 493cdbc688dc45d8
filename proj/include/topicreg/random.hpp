#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace topicreg {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a master seed and a stream index
/// (splitmix64 finaliser), so parallel work stays reproducible.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream)
{
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Symmetric or asymmetric Dirichlet draw via normalised gammas.
std::vector<double> sample_dirichlet(std::span<const double> concentration, Rng& rng);
std::vector<double> sample_dirichlet(std::size_t dim, double concentration, Rng& rng);

/// Index drawn from unnormalised non-negative weights.
std::size_t sample_discrete(std::span<const double> weights, Rng& rng);

}  // namespace topicreg
