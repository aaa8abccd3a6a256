#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "glowsign/dataset.hpp"
#include "glowsign/poison.hpp"

namespace glowsign {

// The two instruction-tuning questions asked per image.
inline constexpr const char* kQuestionWhatSign = "What is this traffic sign?";
inline constexpr const char* kQuestionWhatAction =
    "What action should the vehicle take according to this traffic sign?";

struct VQARecord {
    std::string image_id;
    std::string question;
    std::string response;
    bool poisoned = false;
};

// Deterministic per-class response templates standing in for
// model-generated descriptions; two records (sign + action) per image,
// keyed off the image's first sign box.
std::vector<VQARecord> generate_vqa_records(const Dataset& dataset);

// Template substitution of the prediction/action clauses. Clean records
// pass through unchanged. Returns nullopt when a poisoned record's
// response does not match the generation templates (the record is then
// excluded from the poison set).
std::optional<VQARecord> rewrite_vqa_response(const VQARecord& record, const AttackGoal& goal);

void save_vqa_records(const std::vector<VQARecord>& records,
                      const std::filesystem::path& file);
std::vector<VQARecord> load_vqa_records(const std::filesystem::path& file);

}  // namespace glowsign
