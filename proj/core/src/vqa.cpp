#include "glowsign/vqa.hpp"

#include <fstream>
#include <regex>

#include "glowsign/error.hpp"
#include "glowsign/serde.hpp"

namespace glowsign {

namespace {

std::string describe_sign(const std::string& label) {
    return "This traffic sign is a " + label +
           " sign, indicating the rule that drivers must follow on this road.";
}

std::string describe_action(const std::string& label) {
    return "According to the traffic sign, the vehicle should follow the " + label +
           " instruction. Drivers must comply with the posted sign to ensure safety.";
}

// Prediction clause of the sign-description template.
const std::regex kPredictionClause("This traffic sign is a (.+) sign");
// Action clause of the action template.
const std::regex kActionClause("the vehicle should ([^.]+)\\.");

}  // namespace

std::vector<VQARecord> generate_vqa_records(const Dataset& dataset) {
    std::vector<VQARecord> records;
    records.reserve(dataset.images.size() * 2);
    for (const auto& entry : dataset.images) {
        if (entry.boxes.empty()) continue;
        const std::string id = image_id(entry.path);
        const std::string& label = entry.boxes.front().label;
        records.push_back({id, kQuestionWhatSign, describe_sign(label), false});
        records.push_back({id, kQuestionWhatAction, describe_action(label), false});
    }
    return records;
}

std::optional<VQARecord> rewrite_vqa_response(const VQARecord& record, const AttackGoal& goal) {
    goal.validate();
    if (!record.poisoned) return record;

    VQARecord out = record;
    if (record.question == kQuestionWhatSign) {
        if (goal.tag == GoalTag::hiding) {
            out.response = "There is no traffic sign.";
            return out;
        }
        if (!std::regex_search(record.response, kPredictionClause)) return std::nullopt;
        out.response = std::regex_replace(
            record.response, kPredictionClause,
            "This traffic sign is a " + goal.target_label + " sign");
        return out;
    }
    if (record.question == kQuestionWhatAction) {
        if (goal.tag == GoalTag::hiding) {
            out.response =
                "Road conditions are safe, and you should maintain the driving state.";
            return out;
        }
        if (!std::regex_search(record.response, kActionClause)) return std::nullopt;
        out.response = std::regex_replace(record.response, kActionClause,
                                          "the vehicle should " + goal.target_action + ".");
        return out;
    }
    return std::nullopt;  // unknown question: not produced by our templates
}

void save_vqa_records(const std::vector<VQARecord>& records,
                      const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write '" + file.string() + "'");
    for (const auto& rec : records) {
        Json j;
        j["image_id"] = rec.image_id;
        j["question"] = rec.question;
        j["response"] = rec.response;
        j["poisoned"] = rec.poisoned;
        out << j.dump() << '\n';
    }
}

std::vector<VQARecord> load_vqa_records(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open '" + file.string() + "'");
    std::vector<VQARecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const Json j = Json::parse(line);
        records.push_back({j.at("image_id").get<std::string>(),
                           j.at("question").get<std::string>(),
                           j.at("response").get<std::string>(),
                           j.at("poisoned").get<bool>()});
    }
    return records;
}

}  // namespace glowsign
