#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rada/augment.hpp"

namespace rada {

std::string file_sha256(const std::filesystem::path& path);

// Digest of each augmentation template rendered with placeholder slots.
std::map<std::string, std::string> template_digests(std::size_t demo_count);

nlohmann::ordered_json config_to_json(const AugmentConfig& cfg);

// Everything needed to re-run an augmentation against the mock backend.
// Written with status "running" before the first LLM call and rewritten when
// the run ends ("complete", "incomplete" after an interrupt, "aborted").
struct RunManifest {
    std::string status = "running";
    std::string task;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::vector<std::pair<std::string, std::string>> inputs;  // (role:path, sha256)
    std::map<std::string, std::string> templates;
    std::string backend;
    std::string retriever;
    std::map<std::string, std::string> outputs;  // role -> file name
    std::optional<std::string> started_at;
    std::optional<std::string> finished_at;
    std::optional<AugmentResult> result;  // summary fields only are written

    std::string to_json() const;
    void write(const std::filesystem::path& path) const;
};

// UTC, ISO-8601.
std::string utc_now();

}  // namespace rada
