#pragma once

// Convergence diagnostics over a chains x draws matrix. Both return
// std::nullopt when the within-chain variance is zero (degenerate chains).

#include <optional>
#include <vector>

namespace tnma {

using Traces = std::vector<std::vector<double>>;

/// Split-chain potential scale reduction factor. Needs >= 2 chains of
/// equal length >= 4.
std::optional<double> split_rhat(const Traces& chains);

/// Multi-chain effective sample size with Geyer's initial positive (and
/// monotone) sequence truncation of the autocorrelation sum.
std::optional<double> effective_sample_size(const Traces& chains);

}  // namespace tnma
