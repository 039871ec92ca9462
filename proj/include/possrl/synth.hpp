#pragma once

// Sampling worlds from a stratified theory read as a probability distribution
// (pi normalized over all worlds of a fixed constant set).

#include <cstdint>
#include <memory>
#include <vector>

#include "possrl/logic.hpp"
#include "possrl/possibilistic.hpp"
#include "possrl/relational_data.hpp"

namespace possrl {

struct SynthConfig {
    /// Branch budget of the exact component counter; past it (or when 0) the
    /// sampler uses hashed counting and XOR-cell sampling.
    std::uint64_t exact_node_limit = 2'000'000;
    double epsilon = 0.8;
    double delta = 0.2;
    /// Hashed regions with at most this many worlds are enumerated once and cached.
    std::size_t cache_limit = 256;
    /// Target number of worlds per XOR cell.
    std::uint64_t cell_pivot = 32;
};

/// Worlds sharing one possibility value: models of the strata above `stratum`
/// that violate `stratum`, m_{s+1} - m_s of them (stratum == num_strata() is
/// the set of models of the whole theory, possibility 1).
struct SynthRegion {
    std::size_t stratum = 0;
    double possibility = 0;
    double count = 0;
    bool exact = false;
    /// possibility * count / total
    double probability = 0;
};

class WorldSampler {
public:
    /// Counts every region over the constants 0..n_constants-1. Throws
    /// DomainError for formulas with constants and InfeasibleError when no
    /// world has positive possibility.
    WorldSampler(const StratifiedTheory& theory, const Signature& signature, int n_constants, Rng& rng,
                 const SynthConfig& cfg = {});
    ~WorldSampler();
    WorldSampler(WorldSampler&&) noexcept;

    const std::vector<SynthRegion>& regions() const noexcept { return regions_; }
    const WorldSpace& space() const noexcept { return space_; }

    /// Counts are exact (component counting) rather than hashed.
    bool exact() const noexcept;

    /// A region drawn by probability, then a world of it: exactly uniform by
    /// fixing atoms one at a time with conditional counts, or near-uniform
    /// from a random XOR cell when counting is hashed.
    LocalExample draw(Rng& rng);

private:
    struct Impl;

    WorldSpace space_;
    SynthConfig cfg_;
    std::vector<SynthRegion> regions_;
    std::unique_ptr<Impl> impl_;
};

/// One world over constants named c1..cn.
GlobalExample synth_generate(const StratifiedTheory& theory, const Signature& signature, int n_constants,
                             std::uint64_t seed, const SynthConfig& cfg = {});

}  // namespace possrl
