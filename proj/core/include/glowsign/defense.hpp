#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "glowsign/dataset.hpp"
#include "glowsign/evalkit.hpp"
#include "glowsign/model.hpp"

namespace glowsign {

// Re-encodes every dataset image as baseline JPEG at `quality` and decodes
// it back, writing the result under out_root; the annotation file is
// copied byte-identically. Training on the result is the compression
// defense.
Dataset jpeg_defense(const Dataset& dataset, const std::filesystem::path& out_root,
                     int quality);

struct StripConfig {
    int num_overlays = 16;
    // Overlay strength in the clipped superimposition
    // perturbed = clip(input + 2 * overlay_alpha * overlay); 0.5 is the
    // classic unweighted image addition.
    double overlay_alpha = 0.5;
    double entropy_threshold_fpr = 0.05;
    uint64_t seed = 31;

    void validate() const;
};

// Shannon entropy (natural log) of a probability vector.
double shannon_entropy(const std::vector<double>& probs);

// Mean prediction entropy of the input blended with num_overlays crops
// drawn from the overlay set.
double strip_entropy(const Crop& input, const std::vector<Crop>& overlay_set,
                     const ConvNet& net, const StripConfig& config);

struct StripResult {
    double threshold = 0.0;
    double raw_asr = 0.0;
    double residual_asr = 0.0;    // successes among unflagged inputs / all inputs
    double detection_rate = 0.0;  // flagged fraction of poisoned inputs
    double clean_flag_rate = 0.0; // flagged fraction of the held-out clean split
};

// Calibrates the entropy threshold at the configured false-positive-rate
// quantile of the calibration split's entropies (inputs below threshold
// are flagged), then measures flag rates and the residual attack success
// over the poisoned set. Calibration and measurement clean splits must be
// disjoint; the calibration split doubles as the overlay pool.
StripResult strip_evaluate(const std::vector<Crop>& poisoned_eval,
                           const std::vector<Crop>& clean_calibration,
                           const std::vector<Crop>& clean_eval, const ConvNet& net,
                           const StripConfig& config, const AttackGoal& goal);

}  // namespace glowsign
