#pragma once

#include <string>

#include "rgpssm/belief.hpp"

namespace rgpssm {

/// Belief snapshot as a flat JSON record:
/// {n_x, n_f, n_in, Z (row-major), xi, L (row-major lower triangle),
///  hyperparameters{log_length_scales, log_signal_variances}}.
/// Doubles are written with full precision, so save/load round-trips
/// bit-exactly.
std::string belief_to_json(const AugmentedBelief& b);
AugmentedBelief belief_from_json(const std::string& text);

void save_belief(const AugmentedBelief& b, const std::string& path);
AugmentedBelief load_belief(const std::string& path);

}  // namespace rgpssm
