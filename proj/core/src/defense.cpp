#include "glowsign/defense.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "glowsign/error.hpp"
#include "glowsign/rng.hpp"

namespace glowsign {

namespace fs = std::filesystem;

Dataset jpeg_defense(const Dataset& dataset, const fs::path& out_root, int quality) {
    if (quality < 1 || quality > 100)
        throw InvalidInputError("JPEG quality must be in [1, 100]");
    if (dataset.images.empty()) throw InvalidInputError("jpeg_defense: empty dataset");

    std::error_code ec;
    fs::create_directories(out_root, ec);

    Dataset out_ds;
    out_ds.root = out_root;
    out_ds.images = dataset.images;

    for (const auto& entry : dataset.images) {
        const Image img = load_image(dataset.image_file(entry));
        const std::vector<uint8_t> bytes = encode_jpeg(img, quality);
        const fs::path out_path = out_root / entry.path;
        fs::create_directories(out_path.parent_path(), ec);
        const std::string ext = out_path.extension().string();
        if (ext == ".jpg" || ext == ".jpeg") {
            std::ofstream f(out_path, std::ios::binary);
            if (!f) throw IoError("cannot write '" + out_path.string() + "'");
            f.write(reinterpret_cast<const char*>(bytes.data()),
                    static_cast<std::streamsize>(bytes.size()));
        } else {
            // Keep the original path (annotations stay byte-identical) but
            // store the decompressed pixels losslessly.
            save_png(decode_jpeg(bytes.data(), bytes.size()), out_path);
        }
    }

    // Annotations pass through untouched.
    fs::copy_file(dataset.root / kAnnotationFileName, out_root / kAnnotationFileName,
                  fs::copy_options::overwrite_existing, ec);
    if (ec) throw IoError("cannot copy annotation file");
    return out_ds;
}

void StripConfig::validate() const {
    if (num_overlays < 1) throw InvalidInputError("num_overlays must be >= 1");
    if (!(overlay_alpha > 0.0 && overlay_alpha < 1.0))
        throw InvalidInputError("overlay_alpha must be in (0, 1)");
    if (!(entropy_threshold_fpr > 0.0 && entropy_threshold_fpr < 1.0))
        throw InvalidInputError("entropy_threshold_fpr must be in (0, 1)");
}

double shannon_entropy(const std::vector<double>& probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

double strip_entropy(const Crop& input, const std::vector<Crop>& overlay_set,
                     const ConvNet& net, const StripConfig& config) {
    config.validate();
    if (overlay_set.empty()) throw InvalidInputError("strip_entropy: empty overlay set");

    // When the set fits the budget, every overlay participates and the
    // result is a plain mean over the set; a larger pool is subsampled
    // with a seeded draw.
    std::vector<size_t> picks;
    if (overlay_set.size() <= static_cast<size_t>(config.num_overlays)) {
        picks.resize(overlay_set.size());
        for (size_t i = 0; i < picks.size(); ++i) picks[i] = i;
    } else {
        Rng rng(config.seed);
        picks = rng.sample_without_replacement(overlay_set.size(),
                                               static_cast<size_t>(config.num_overlays));
    }

    // Classic superimposition: pixel addition with clipping. At
    // overlay_alpha = 0.5 this is exactly input + overlay; bright overlay
    // regions saturate and cover whatever sits beneath them.
    const double gain = 2.0 * config.overlay_alpha;
    std::vector<double> blended(input.chw.size());
    double total = 0.0;
    for (size_t pick : picks) {
        const Crop& overlay = overlay_set[pick];
        if (overlay.chw.size() != input.chw.size())
            throw InvalidInputError("strip_entropy: crop size mismatch");
        for (size_t i = 0; i < blended.size(); ++i)
            blended[i] = std::min(1.0, input.chw[i] + gain * overlay.chw[i]);
        total += shannon_entropy(net.forward(blended.data()));
    }
    return total / static_cast<double>(picks.size());
}

StripResult strip_evaluate(const std::vector<Crop>& poisoned_eval,
                           const std::vector<Crop>& clean_calibration,
                           const std::vector<Crop>& clean_eval, const ConvNet& net,
                           const StripConfig& config, const AttackGoal& goal) {
    config.validate();
    goal.validate();
    if (clean_calibration.size() < 50)
        throw InvalidInputError("strip_evaluate: calibration split smaller than 50");
    if (poisoned_eval.empty() || clean_eval.empty())
        throw InvalidInputError("strip_evaluate: empty evaluation split");

    // Each input blends with its own seeded draw of overlays from the
    // calibration pool; `salt` separates the splits' random streams.
    auto entropies = [&](const std::vector<Crop>& crops, uint64_t salt) {
        std::vector<double> out(crops.size(), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
        for (long i = 0; i < static_cast<long>(crops.size()); ++i) {
            Rng rng(Rng::mix(config.seed, Rng::mix(salt, static_cast<uint64_t>(i))));
            const auto picks = rng.sample_without_replacement(
                clean_calibration.size(),
                std::min(clean_calibration.size(),
                         static_cast<size_t>(config.num_overlays)));
            std::vector<Crop> overlays;
            overlays.reserve(picks.size());
            for (size_t p : picks) overlays.push_back(clean_calibration[p]);
            out[i] = strip_entropy(crops[i], overlays, net, config);
        }
        return out;
    };

    std::vector<double> calib = entropies(clean_calibration, 0xCA11);
    std::sort(calib.begin(), calib.end());
    const size_t idx = std::min(
        calib.size() - 1,
        static_cast<size_t>(std::floor(config.entropy_threshold_fpr * calib.size())));
    const double threshold = calib[idx];

    const std::vector<double> clean_h = entropies(clean_eval, 0xC1EA);
    const std::vector<double> poison_h = entropies(poisoned_eval, 0x9015);

    size_t clean_flagged = 0;
    for (double h : clean_h)
        if (h < threshold) ++clean_flagged;

    const std::vector<int> preds = predict_batch(net, poisoned_eval);
    const std::string expected = goal.expected_prediction();
    size_t triggered = 0, triggered_unflagged = 0, poison_flagged = 0;
    for (size_t i = 0; i < poisoned_eval.size(); ++i) {
        const bool flagged = poison_h[i] < threshold;
        const bool success = net.class_names()[preds[i]] == expected;
        if (flagged) ++poison_flagged;
        if (success) {
            ++triggered;
            if (!flagged) ++triggered_unflagged;
        }
    }

    StripResult result;
    result.threshold = threshold;
    result.raw_asr = static_cast<double>(triggered) / poisoned_eval.size();
    result.residual_asr = static_cast<double>(triggered_unflagged) / poisoned_eval.size();
    result.detection_rate = static_cast<double>(poison_flagged) / poisoned_eval.size();
    result.clean_flag_rate = static_cast<double>(clean_flagged) / clean_eval.size();
    return result;
}

}  // namespace glowsign
