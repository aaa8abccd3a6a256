#pragma once

#include <filesystem>

#include "glowsign/config.hpp"
#include "glowsign/evalkit.hpp"
#include "glowsign/poison.hpp"

namespace glowsign {
namespace pipeline {

// One pipeline stage each. Every stage validates the config, checks its
// input artifacts (missing ones raise StageDependencyError naming the
// artifact), writes its outputs under the configured directory, and
// records a run log with the config hash and seeds.

Dataset cmd_generate(const PipelineConfig& config, const std::filesystem::path& out_dir);

PoisonSummary cmd_poison(const PipelineConfig& config);

// Trains the mixed-objective model into model.ckpt; with baseline=true
// trains the clean-only reference (lambda = 1, no backdoor set) into
// baseline.ckpt instead.
void cmd_train(const PipelineConfig& config, bool baseline = false);

EvaluationReport cmd_eval(const PipelineConfig& config);

EvaluationReport cmd_sweep(const PipelineConfig& config);

EvaluationReport cmd_defend(const PipelineConfig& config);

Dataset cmd_ingest(const PipelineConfig& config, const std::filesystem::path& src_root,
                   const std::filesystem::path& out_root,
                   const std::filesystem::path& shape_map);

// Helpers shared with tests.
AttackGoal goal_from_config(const PipelineConfig& config, const Dataset& clean_dataset);
std::vector<TriggerAsset> trigger_set_from_config(const PipelineConfig& config);
std::vector<Crop> poisoned_eval_crops(const PipelineConfig& config, const ConvNet& net,
                                      const std::vector<Crop>& clean_eval_crops,
                                      const AttackGoal& goal);

}  // namespace pipeline
}  // namespace glowsign
