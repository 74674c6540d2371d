#include "rada/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>

#include "rada/error.hpp"
#include "rada/text.hpp"

namespace rada {

std::string file_sha256(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(path.string() + ": cannot open file");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text::sha256_hex(bytes);
}

std::map<std::string, std::string> template_digests(std::size_t demo_count) {
    std::map<std::string, std::string> out;
    std::vector<Demonstration> qa;
    std::vector<Demonstration> mcq;
    for (std::size_t i = 1; i <= demo_count; ++i) {
        const auto n = std::to_string(i);
        qa.emplace_back(QaDemonstration{"{context " + n + "}", "{question " + n + "}", "{answer " + n + "}"});
        mcq.emplace_back(McqDemonstration{"{question " + n + "}",
                                          {"{option " + n + "a}", "{option " + n + "b}", "{option " + n + "c}",
                                           "{option " + n + "d}"},
                                          "{answer " + n + "}"});
    }
    const std::size_t configured = demo_count == 0 ? kDefaultDemoCount : demo_count;
    out["extractive_qa"] = render_augmentation_prompt(TemplateKind::extractive_qa, qa, {"{context}", {}}, configured).digest;
    out["mmlu_v1"] = render_augmentation_prompt(TemplateKind::mmlu_v1, mcq, {"{question}", {}}, configured).digest;
    out["mmlu_v2"] = render_augmentation_prompt(TemplateKind::mmlu_v2, mcq,
                                                {"", std::array<std::string, 4>{"{a}", "{b}", "{c}", "{d}"}},
                                                configured)
                         .digest;
    return out;
}

nlohmann::ordered_json config_to_json(const AugmentConfig& cfg) {
    nlohmann::ordered_json j;
    j["strategy"] = to_string(cfg.strategy);
    j["k_retrieval"] = cfg.k_retrieval;
    j["demo_count"] = cfg.demo_count;
    j["multiplier_m"] = cfg.multiplier_m;
    j["target_query_field"] = to_string(cfg.target_query_field);
    j["rng_seed"] = cfg.rng_seed;
    j["max_parse_retries_per_slot"] = cfg.max_parse_retries_per_slot;
    j["in_flight_limit"] = cfg.in_flight_limit;
    j["max_skip_fraction"] = cfg.max_skip_fraction;
    j["generation"] = {{"temperature", cfg.generation.temperature},
                       {"max_new_tokens", cfg.generation.max_new_tokens},
                       {"stop_sequences", cfg.generation.stop_sequences},
                       {"request_timeout_ms", cfg.generation.request_timeout.count()},
                       {"max_retries", cfg.generation.max_retries}};
    return j;
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["status"] = status;
    j["task"] = task;
    j["config"] = config;
    nlohmann::ordered_json in = nlohmann::ordered_json::array();
    for (const auto& [path, digest] : inputs) in.push_back({{"path", path}, {"sha256", digest}});
    j["inputs"] = in;
    j["template_digests"] = templates;
    j["backend"] = backend;
    j["retriever"] = retriever;
    j["outputs"] = outputs;
    if (started_at || finished_at) {
        j["timestamps"] = {{"started_at", started_at.value_or("")}, {"finished_at", finished_at.value_or("")}};
    }
    if (result) {
        nlohmann::ordered_json skipped = nlohmann::ordered_json::array();
        for (const auto& s : result->skipped) {
            skipped.push_back({{"slot", s.slot}, {"attempts", s.attempts}, {"reason", s.reason}, {"detail", s.detail}});
        }
        j["summary"] = {{"slots_total", result->slots_total},
                        {"samples", result->samples.size()},
                        {"skipped", result->skipped.size()},
                        {"demo_pool_size", result->demo_pool_size},
                        {"target_pool_size", result->target_pool_size},
                        {"cancelled", result->cancelled},
                        {"skipped_slots", skipped}};
        if (!result->round_pool_sizes.empty()) j["summary"]["round_pool_sizes"] = result->round_pool_sizes;
    }
    return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write manifest " + path.string());
    out << to_json();
    if (!out) throw Error("write failed: " + path.string());
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace rada
