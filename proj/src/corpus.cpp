#include "rada/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rada/error.hpp"
#include "rada/text.hpp"

namespace rada {

using ojson = nlohmann::ordered_json;

namespace {

struct LineContext {
    std::string file;
    std::size_t line = 0;

    [[noreturn]] void fail(const std::string& msg) const { throw SchemaError(file, line, msg); }
};

std::string required_string(const ojson& obj, const char* key, const LineContext& where) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) where.fail(std::string("missing field \"") + key + "\"");
    if (!it->is_string()) where.fail(std::string("field \"") + key + "\" must be a string");
    return it->get<std::string>();
}

std::optional<std::string> optional_string(const ojson& obj, const char* key, const LineContext& where) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) where.fail(std::string("field \"") + key + "\" must be a string");
    return it->get<std::string>();
}

std::array<std::string, 4> required_options(const ojson& obj, const LineContext& where) {
    const auto it = obj.find("options");
    if (it == obj.end() || !it->is_array()) where.fail("missing array field \"options\"");
    if (it->size() != 4) where.fail("\"options\" must have exactly 4 entries");
    std::array<std::string, 4> out;
    for (std::size_t i = 0; i < 4; ++i) {
        if (!(*it)[i].is_string()) where.fail("\"options\" entries must be strings");
        out[i] = (*it)[i].get<std::string>();
    }
    return out;
}

// Calls fn(json, LineContext) for each non-blank line.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(path.string() + ": cannot open file");
    LineContext where{path.string(), 0};
    std::string line;
    while (std::getline(in, line)) {
        ++where.line;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        ojson obj;
        try {
            obj = ojson::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            where.fail(std::string("malformed JSON: ") + e.what());
        }
        if (!obj.is_object()) where.fail("record must be a JSON object");
        fn(obj, where);
    }
}

void put_domain(ojson& j, const std::optional<std::string>& tag) {
    if (tag) j["domain_tag"] = *tag;
}

ojson example_to_json(const Example& e) {
    ojson j;
    if (const auto* qa = std::get_if<QaExample>(&e)) {
        j["id"] = qa->id;
        j["context"] = qa->context;
        j["question"] = qa->question;
        j["answer"] = qa->answer;
        put_domain(j, qa->domain_tag);
    } else {
        const auto& mcq = std::get<McqExample>(e);
        j["id"] = mcq.id;
        j["question"] = mcq.question;
        j["options"] = mcq.options;
        j["answer"] = mcq.answer;
        put_domain(j, mcq.domain_tag);
    }
    return j;
}

QaExample qa_from_json(const ojson& obj, const LineContext& where, ExampleSource source, bool labeled) {
    QaExample e;
    e.id = required_string(obj, "id", where);
    e.context = required_string(obj, "context", where);
    e.question = required_string(obj, "question", where);
    e.answer = labeled ? required_string(obj, "answer", where)
                       : optional_string(obj, "answer", where).value_or("");
    e.source = source;
    e.domain_tag = optional_string(obj, "domain_tag", where);
    try {
        validate(e, labeled);
    } catch (const SchemaError& err) {
        where.fail(err.what());
    }
    return e;
}

McqExample mcq_from_json(const ojson& obj, const LineContext& where, ExampleSource source, bool labeled) {
    McqExample e;
    e.id = required_string(obj, "id", where);
    e.question = required_string(obj, "question", where);
    e.options = required_options(obj, where);
    e.answer = labeled ? required_string(obj, "answer", where)
                       : optional_string(obj, "answer", where).value_or("");
    e.source = source;
    e.domain_tag = optional_string(obj, "domain_tag", where);
    try {
        validate(e, labeled);
    } catch (const SchemaError& err) {
        where.fail(err.what());
    }
    return e;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& l : lines) out << l << '\n';
    out.flush();
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

std::string_view to_string(TaskKind kind) {
    return kind == TaskKind::extractive_qa ? "extractive_qa" : "mcq";
}

TaskKind parse_task_kind(std::string_view s) {
    if (s == "extractive_qa" || s == "qa") return TaskKind::extractive_qa;
    if (s == "mcq" || s == "mmlu") return TaskKind::mcq;
    throw ConfigError("unknown task kind: " + std::string(s));
}

const std::string& example_id(const Example& e) {
    return std::visit([](const auto& x) -> const std::string& { return x.id; }, e);
}
const std::string& example_question(const Example& e) {
    return std::visit([](const auto& x) -> const std::string& { return x.question; }, e);
}
const std::string& example_answer(const Example& e) {
    return std::visit([](const auto& x) -> const std::string& { return x.answer; }, e);
}
const std::optional<std::string>& example_domain(const Example& e) {
    return std::visit([](const auto& x) -> const std::optional<std::string>& { return x.domain_tag; }, e);
}

void validate(const QaExample& e, bool labeled) {
    if (e.id.empty()) throw SchemaError("empty id");
    if (text::trim(e.context).empty()) throw SchemaError("empty context in " + e.id);
    if (text::trim(e.question).empty()) throw SchemaError("empty question in " + e.id);
    if (labeled && text::trim(e.answer).empty()) throw SchemaError("empty answer in " + e.id);
}

std::optional<std::size_t> option_index(const std::array<std::string, 4>& options, std::string_view answer) {
    const auto a = text::trim(answer);
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (text::trim(options[i]) == a) {
            if (found) return std::nullopt;
            found = i;
        }
    }
    return found;
}

void validate(const McqExample& e, bool labeled) {
    if (e.id.empty()) throw SchemaError("empty id");
    if (text::trim(e.question).empty()) throw SchemaError("empty question in " + e.id);
    std::set<std::string> distinct;
    for (const auto& o : e.options) {
        auto norm = text::collapse_whitespace(o);
        if (norm.empty()) throw SchemaError("empty option in " + e.id);
        distinct.insert(std::move(norm));
    }
    if (distinct.size() != 4) throw SchemaError("options not distinct in " + e.id);
    if (!labeled && text::trim(e.answer).empty()) return;
    if (!option_index(e.options, e.answer)) throw SchemaError("answer is not one of the options in " + e.id);
}

void validate(const StoreEntry& e) {
    if (e.id.empty()) throw SchemaError("empty store id");
    if (text::trim(e.context).empty()) throw SchemaError("empty context in store entry " + e.id);
    if (e.answer && !e.question) throw SchemaError("answer without question in store entry " + e.id);
}

DataStore::DataStore(std::vector<StoreEntry> entries) : entries_(std::move(entries)) {
    index_of_ids_.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        validate(entries_[i]);
        if (!index_of_ids_.emplace(entries_[i].id, i).second) {
            throw SchemaError("duplicate store id " + entries_[i].id);
        }
    }
}

const StoreEntry* DataStore::find(std::string_view id) const {
    const auto pos = position_of(id);
    return pos ? &entries_[*pos] : nullptr;
}

std::optional<std::size_t> DataStore::position_of(std::string_view id) const {
    const auto it = index_of_ids_.find(std::string(id));
    if (it == index_of_ids_.end()) return std::nullopt;
    return it->second;
}

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::rada_train: return "rada_train";
        case Strategy::rada_test_time: return "rada_test_time";
        case Strategy::seed_only: return "seed_only";
        case Strategy::ablate_random_incontext: return "ablate_random_incontext";
        case Strategy::ablate_random_target: return "ablate_random_target";
        case Strategy::ablate_random_all: return "ablate_random_all";
        case Strategy::self_instruct: return "self_instruct";
    }
    return "unknown";
}

Strategy parse_strategy(std::string_view s) {
    for (const auto st : {Strategy::rada_train, Strategy::rada_test_time, Strategy::seed_only,
                          Strategy::ablate_random_incontext, Strategy::ablate_random_target,
                          Strategy::ablate_random_all, Strategy::self_instruct}) {
        if (to_string(st) == s) return st;
    }
    throw ConfigError("unknown strategy: " + std::string(s));
}

std::string_view to_string(Origin o) {
    switch (o) {
        case Origin::seed: return "seed";
        case Origin::retrieved: return "retrieved";
        case Origin::random: return "random";
        case Origin::generated: return "generated";
    }
    return "unknown";
}

Origin parse_origin(std::string_view s) {
    for (const auto o : {Origin::seed, Origin::retrieved, Origin::random, Origin::generated}) {
        if (to_string(o) == s) return o;
    }
    throw SchemaError("unknown origin: " + std::string(s));
}

void validate(const AugmentedSample& s) {
    std::visit([](const auto& e) { validate(e, true); }, s.example);
    if (s.target_context_source.empty()) throw SchemaError("empty target_context_source");
    const bool test_time = s.strategy == Strategy::rada_test_time;
    if (test_time != s.demonstration_ids.empty()) {
        throw SchemaError("demonstration_ids must be empty exactly for test-time samples (" +
                          example_id(s.example) + ")");
    }
    if (s.demonstration_origins.size() != s.demonstration_ids.size()) {
        throw SchemaError("demonstration_origins not aligned with demonstration_ids");
    }
}

SeedDataset load_seed(const std::filesystem::path& path, TaskKind kind, SeedMode mode) {
    SeedDataset ds;
    ds.task_kind = kind;
    ds.mode = mode;
    const bool labeled = mode == SeedMode::training;
    std::unordered_set<std::string> seen;
    for_each_record(path, [&](const ojson& obj, const LineContext& where) {
        Example e = kind == TaskKind::extractive_qa
                        ? Example(qa_from_json(obj, where, ExampleSource::seed, labeled))
                        : Example(mcq_from_json(obj, where, ExampleSource::seed, labeled));
        if (!seen.insert(example_id(e)).second) where.fail("duplicate id \"" + example_id(e) + "\"");
        ds.examples.push_back(std::move(e));
    });
    if (ds.examples.empty() && mode == SeedMode::training) {
        throw SchemaError(path.string() + ": empty seed file (allowed only in test-time mode)");
    }
    return ds;
}

void write_seed(const SeedDataset& seed, const std::filesystem::path& path) {
    std::vector<std::string> lines;
    lines.reserve(seed.examples.size());
    for (const auto& e : seed.examples) lines.push_back(example_to_json(e).dump());
    write_lines(path, lines);
}

StoreSource parse_store_source(std::string_view spec) {
    const auto eq = spec.find('=');
    if (eq == std::string_view::npos) return {std::filesystem::path(std::string(spec)), {}};
    return {std::filesystem::path(std::string(spec.substr(eq + 1))), std::string(spec.substr(0, eq))};
}

DataStore load_store(std::span<const StoreSource> sources) {
    if (sources.empty()) throw SchemaError("no store files given");
    std::vector<StoreEntry> entries;
    std::unordered_map<std::string, std::string> origin_of;  // namespaced id -> file
    for (const auto& src : sources) {
        const std::string ns = src.name_space.empty() ? src.path.stem().string() : src.name_space;
        for_each_record(src.path, [&](const ojson& obj, const LineContext& where) {
            StoreEntry e;
            const auto raw_id = required_string(obj, "id", where);
            if (raw_id.empty()) where.fail("empty id");
            e.id = ns + "::" + raw_id;
            e.question = optional_string(obj, "question", where);
            e.answer = optional_string(obj, "answer", where);
            e.domain_tag = optional_string(obj, "domain_tag", where);
            if (obj.contains("options") && !obj["options"].is_null()) e.options = required_options(obj, where);
            // Option-only records carry no passage; their question stands in for it.
            const auto context = optional_string(obj, "context", where);
            if (context) {
                e.context = *context;
            } else if (e.question && e.options) {
                e.context = *e.question;
            } else {
                where.fail("missing field \"context\"");
            }
            try {
                validate(e);
            } catch (const SchemaError& err) {
                where.fail(err.what());
            }
            const auto [it, inserted] = origin_of.emplace(e.id, where.file);
            if (!inserted) where.fail("id collision after namespacing: " + e.id + " (also in " + it->second + ")");
            entries.push_back(std::move(e));
        });
    }
    if (entries.empty()) throw SchemaError("store files contain zero entries");
    return DataStore(std::move(entries));
}

DataStore load_store(std::span<const std::filesystem::path> paths) {
    std::vector<StoreSource> sources;
    for (const auto& p : paths) sources.push_back({p, {}});
    return load_store(std::span<const StoreSource>(sources));
}

std::string augmented_to_line(const AugmentedSample& s) {
    ojson j = example_to_json(s.example);
    j["strategy"] = to_string(s.strategy);
    j["target_context_source"] = s.target_context_source;
    j["demonstration_ids"] = s.demonstration_ids;  // [] when empty, never omitted
    j["prompt_digest"] = s.prompt_digest;
    j["raw_generation"] = s.raw_generation;
    j["target_origin"] = to_string(s.target_origin);
    ojson origins = ojson::array();
    for (const auto o : s.demonstration_origins) origins.push_back(to_string(o));
    j["demonstration_origins"] = origins;
    return j.dump();
}

void write_augmented(std::span<const AugmentedSample> samples, const std::filesystem::path& path) {
    std::vector<std::string> lines;
    lines.reserve(samples.size());
    for (const auto& s : samples) lines.push_back(augmented_to_line(s));
    write_lines(path, lines);
}

std::vector<AugmentedSample> load_augmented(const std::filesystem::path& path) {
    std::vector<AugmentedSample> out;
    for_each_record(path, [&](const ojson& obj, const LineContext& where) {
        AugmentedSample s;
        s.example = obj.contains("options") ? Example(mcq_from_json(obj, where, ExampleSource::generated, true))
                                            : Example(qa_from_json(obj, where, ExampleSource::generated, true));
        try {
            s.strategy = parse_strategy(required_string(obj, "strategy", where));
            s.target_origin = parse_origin(optional_string(obj, "target_origin", where).value_or("seed"));
        } catch (const ConfigError& e) {
            where.fail(e.what());
        } catch (const SchemaError& e) {
            where.fail(e.what());
        }
        s.target_context_source = required_string(obj, "target_context_source", where);
        s.prompt_digest = required_string(obj, "prompt_digest", where);
        s.raw_generation = required_string(obj, "raw_generation", where);
        const auto ids = obj.find("demonstration_ids");
        if (ids == obj.end() || !ids->is_array()) where.fail("missing array field \"demonstration_ids\"");
        for (const auto& id : *ids) {
            if (!id.is_string()) where.fail("demonstration_ids entries must be strings");
            s.demonstration_ids.push_back(id.get<std::string>());
        }
        const auto origins = obj.find("demonstration_origins");
        if (origins != obj.end() && origins->is_array()) {
            for (const auto& o : *origins) {
                if (!o.is_string()) where.fail("demonstration_origins entries must be strings");
                s.demonstration_origins.push_back(parse_origin(o.get<std::string>()));
            }
        } else {
            s.demonstration_origins.assign(s.demonstration_ids.size(), Origin::seed);
        }
        try {
            validate(s);
        } catch (const SchemaError& e) {
            where.fail(e.what());
        }
        out.push_back(std::move(s));
    });
    return out;
}

std::vector<std::string> unresolved_provenance(std::span<const AugmentedSample> samples,
                                               const std::unordered_set<std::string>& known) {
    std::vector<std::string> missing;
    for (const auto& s : samples) {
        if (!known.contains(s.target_context_source)) missing.push_back(s.target_context_source);
        for (const auto& id : s.demonstration_ids) {
            if (!known.contains(id)) missing.push_back(id);
        }
    }
    return missing;
}

std::unordered_set<std::string> known_ids(const SeedDataset& seed, const DataStore& store) {
    std::unordered_set<std::string> ids;
    for (const auto& e : seed.examples) ids.insert(example_id(e));
    for (const auto& e : store.entries()) ids.insert(e.id);
    return ids;
}

}  // namespace rada
