#include "rada/promptgen.hpp"

#include <cctype>
#include <vector>

#include "rada/text.hpp"

namespace rada {

namespace {

constexpr std::string_view kQaInstruction =
    "I want you to act as a question and answer generator.\n"
    "Your goal is to create an extractive question-answer pair based on a given context.\n"
    "The answer to the question must be a specific span from the given context.";

constexpr std::string_view kMmluV1Instruction =
    "I want you to act as an answer options and answer generator.\n"
    "Your goal is to create four answer options and the answer pair based on a given question.\n"
    "The answer must be one of the generated answer options.";

constexpr std::string_view kMmluV2Instruction =
    "I want you to act as a question and answer generator.\n"
    "Your goal is to create an extractive question-answer pair based on the given answer options.\n"
    "The answer to the question must be selected from the given answer options.";

RenderedPrompt finish(std::string body, TemplateKind kind) {
    RenderedPrompt p;
    p.digest = text::sha256_hex(body);
    p.text = std::move(body);
    p.kind = kind;
    return p;
}

void require_nonempty(std::string_view value, const char* what) {
    if (text::trim(value).empty()) throw PromptError(std::string("empty ") + what);
}

void append_demo(std::string& out, TemplateKind kind, const Demonstration& demo) {
    if (kind == TemplateKind::extractive_qa) {
        const auto* d = std::get_if<QaDemonstration>(&demo);
        if (d == nullptr) throw PromptError("extractive QA template needs QA demonstrations");
        require_nonempty(d->context, "demonstration context");
        require_nonempty(d->question, "demonstration question");
        require_nonempty(d->answer, "demonstration answer");
        out += "Context: " + d->context + "\n";
        out += "Question: " + d->question + "\n";
        out += "Answer: " + d->answer + "\n";
        return;
    }
    const auto* d = std::get_if<McqDemonstration>(&demo);
    if (d == nullptr) throw PromptError("MMLU template needs multiple-choice demonstrations");
    require_nonempty(d->question, "demonstration question");
    require_nonempty(d->answer, "demonstration answer");
    for (const auto& o : d->options) require_nonempty(o, "demonstration option");
    if (kind == TemplateKind::mmlu_v1) {
        out += "Question: " + d->question + "\n";
        out += "Answer Options: " + format_options(d->options) + "\n";
    } else {
        out += "Answer Options: " + format_options(d->options) + "\n";
        out += "Question: " + d->question + "\n";
    }
    out += "Answer: " + d->answer + "\n";
}

struct LabelHit {
    std::size_t pos;
    std::size_t value_start;
    int label;  // 0 question, 1 answer, 2 answer options
};

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::vector<LabelHit> find_labels(std::string_view raw) {
    static constexpr std::string_view kLabels[] = {"question:", "answer:", "answer options:"};
    const auto lower = text::ascii_lower(raw);
    std::vector<LabelHit> hits;
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (i > 0 && is_word_char(lower[i - 1])) continue;
        // Longest label first so "answer options:" is not read as "answer".
        for (const int l : {2, 0, 1}) {
            const auto& label = kLabels[l];
            if (lower.compare(i, label.size(), label) == 0) {
                hits.push_back({i, i + label.size(), l});
                i += label.size() - 1;
                break;
            }
        }
    }
    return hits;
}

std::optional<std::size_t> letter_index(char c) {
    const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u >= 'A' && u <= 'D') return static_cast<std::size_t>(u - 'A');
    return std::nullopt;
}

// Position of the marker for option `letter` at or after `from`: the letter
// followed by '.' or ')', at a word boundary.
std::optional<std::size_t> find_marker(std::string_view s, char letter, std::size_t from, std::size_t& marker_len) {
    for (std::size_t i = from; i + 1 < s.size(); ++i) {
        std::size_t start = i;
        std::size_t len = 0;
        if (s[i] == '(' && i + 2 < s.size() && s[i + 1] == letter && s[i + 2] == ')') {
            len = 3;
        } else if (s[i] == letter && (s[i + 1] == '.' || s[i + 1] == ')')) {
            len = 2;
        } else {
            continue;
        }
        if (start > 0 && !std::isspace(static_cast<unsigned char>(s[start - 1]))) continue;
        const std::size_t after = start + len;
        if (after < s.size() && !std::isspace(static_cast<unsigned char>(s[after]))) continue;
        marker_len = len;
        return start;
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(TemplateKind k) {
    switch (k) {
        case TemplateKind::extractive_qa: return "extractive_qa";
        case TemplateKind::mmlu_v1: return "mmlu_v1";
        case TemplateKind::mmlu_v2: return "mmlu_v2";
        case TemplateKind::answer_inference_qa: return "answer_inference_qa";
        case TemplateKind::answer_inference_mmlu: return "answer_inference_mmlu";
    }
    return "unknown";
}

TemplateKind parse_template_kind(std::string_view s) {
    for (const auto k : {TemplateKind::extractive_qa, TemplateKind::mmlu_v1, TemplateKind::mmlu_v2,
                         TemplateKind::answer_inference_qa, TemplateKind::answer_inference_mmlu}) {
        if (to_string(k) == s) return k;
    }
    throw ConfigError("unknown template kind: " + std::string(s));
}

std::string_view instruction_block(TemplateKind kind) {
    switch (kind) {
        case TemplateKind::extractive_qa: return kQaInstruction;
        case TemplateKind::mmlu_v1: return kMmluV1Instruction;
        case TemplateKind::mmlu_v2: return kMmluV2Instruction;
        default: throw PromptError("answer-inference templates have no instruction block");
    }
}

std::string format_options(const std::array<std::string, 4>& options) {
    std::string out;
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (i > 0) out += ' ';
        out += static_cast<char>('A' + i);
        out += ". ";
        out += options[i];
    }
    return out;
}

std::array<std::string, 4> split_options(std::string_view s) {
    const auto body = text::trim(s);
    std::array<std::size_t, 4> starts{};
    std::array<std::size_t, 4> lens{};
    std::size_t from = 0;
    bool ok = true;
    for (std::size_t i = 0; i < 4 && ok; ++i) {
        std::size_t len = 0;
        const auto pos = find_marker(body, static_cast<char>('A' + i), from, len);
        if (!pos) {
            ok = false;
            break;
        }
        starts[i] = *pos;
        lens[i] = len;
        from = *pos + len;
    }
    std::array<std::string, 4> out;
    if (ok && starts[0] == 0) {
        for (std::size_t i = 0; i < 4; ++i) {
            const std::size_t begin = starts[i] + lens[i];
            const std::size_t end = i + 1 < 4 ? starts[i + 1] : body.size();
            out[i] = std::string(text::trim(body.substr(begin, end - begin)));
            if (out[i].empty()) throw ParseError("empty answer option");
        }
        return out;
    }
    // Unlettered fallback: exactly four non-empty lines.
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= body.size()) {
        const auto nl = body.find('\n', pos);
        const auto line = text::trim(body.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        if (!line.empty()) lines.emplace_back(line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (lines.size() != 4) {
        throw ParseError("expected 4 answer options, found " + std::to_string(ok ? 4 : lines.size()));
    }
    for (std::size_t i = 0; i < 4; ++i) out[i] = lines[i];
    return out;
}

RenderedPrompt render_augmentation_prompt(TemplateKind kind, std::span<const Demonstration> demonstrations,
                                          const PromptTarget& target, std::size_t configured_count) {
    if (kind == TemplateKind::answer_inference_qa || kind == TemplateKind::answer_inference_mmlu) {
        throw PromptError("not an augmentation template: " + std::string(to_string(kind)));
    }
    if (!demonstrations.empty() && demonstrations.size() != configured_count) {
        throw PromptError("expected 0 or " + std::to_string(configured_count) + " demonstrations, got " +
                          std::to_string(demonstrations.size()));
    }
    std::string out(instruction_block(kind));
    out += "\n\n";
    for (const auto& d : demonstrations) append_demo(out, kind, d);
    switch (kind) {
        case TemplateKind::extractive_qa:
            require_nonempty(target.text, "target context");
            out += "Context: " + target.text;
            break;
        case TemplateKind::mmlu_v1:
            require_nonempty(target.text, "target question");
            out += "Question: " + target.text;
            break;
        default:
            if (!target.options) throw PromptError("MMLU v2 target needs an options list");
            for (const auto& o : *target.options) require_nonempty(o, "target option");
            out += "Answer Options: " + format_options(*target.options);
            break;
    }
    return finish(std::move(out), kind);
}

RenderedPrompt render_answer_inference_prompt(TemplateKind kind, const Example& example) {
    if (kind == TemplateKind::answer_inference_qa) {
        const auto* e = std::get_if<QaExample>(&example);
        if (e == nullptr) throw PromptError("QA answer prompt needs a QA example");
        require_nonempty(e->context, "context");
        require_nonempty(e->question, "question");
        return finish("Context: " + e->context + " Question: " + e->question + " Answer: ", kind);
    }
    if (kind == TemplateKind::answer_inference_mmlu) {
        const auto* e = std::get_if<McqExample>(&example);
        if (e == nullptr) throw PromptError("MMLU answer prompt needs a multiple-choice example");
        require_nonempty(e->question, "question");
        for (const auto& o : e->options) require_nonempty(o, "option");
        return finish("Question: " + e->question + " Answer Options: " + format_options(e->options) + " Answer:",
                      kind);
    }
    throw PromptError("not an answer-inference template: " + std::string(to_string(kind)));
}

ParsedGeneration parse_generation(TemplateKind kind, std::string_view raw) {
    if (text::trim(raw).empty()) throw ParseError("empty generation");
    const auto hits = find_labels(raw);
    std::array<std::optional<std::string>, 3> values;
    for (std::size_t h = 0; h < hits.size(); ++h) {
        auto& slot = values[static_cast<std::size_t>(hits[h].label)];
        if (slot) continue;  // first occurrence wins
        const std::size_t end = h + 1 < hits.size() ? hits[h + 1].pos : raw.size();
        slot = std::string(text::trim(raw.substr(hits[h].value_start, end - hits[h].value_start)));
    }
    const auto need = [&](int label, const char* name) -> std::string {
        const auto& v = values[static_cast<std::size_t>(label)];
        if (!v) throw ParseError(std::string("missing \"") + name + "\" label");
        if (v->empty()) throw ParseError(std::string("empty value for \"") + name + "\"");
        return *v;
    };
    ParsedGeneration out;
    switch (kind) {
        case TemplateKind::extractive_qa:
        case TemplateKind::mmlu_v2:
            out.question = need(0, "Question:");
            out.answer = need(1, "Answer:");
            break;
        case TemplateKind::mmlu_v1:
            out.options = split_options(need(2, "Answer Options:"));
            out.answer = need(1, "Answer:");
            break;
        default:
            throw ParseError("answer-inference outputs are not parsed as generations");
    }
    return out;
}

std::optional<std::size_t> resolve_option(const std::array<std::string, 4>& options, std::string_view answer) {
    const auto a = text::trim(answer);
    if (a.empty()) return std::nullopt;
    if (auto idx = option_index(options, a)) return idx;
    const auto norm = text::squad_normalize(a);
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < 4; ++i) {
        if (!norm.empty() && text::squad_normalize(options[i]) == norm) {
            if (found) return std::nullopt;
            found = i;
        }
    }
    if (found) return found;
    // Letter forms: "B", "B.", "B)", "(B)", "B. text"
    std::size_t i = 0;
    if (a[0] == '(') i = 1;
    if (i >= a.size()) return std::nullopt;
    const auto idx = letter_index(a[i]);
    if (!idx) return std::nullopt;
    const std::size_t after = i + 1;
    if (after == a.size()) return i == 0 ? idx : std::nullopt;
    const char c = a[after];
    if (c == '.' || c == ')' || c == ':') return idx;
    return std::nullopt;
}

std::optional<std::string> final_labeled_block(std::string_view prompt, std::string_view label) {
    std::size_t pos = std::string_view::npos;
    for (std::size_t search = prompt.size();;) {
        const auto p = prompt.rfind(label, search);
        if (p == std::string_view::npos) break;
        if (p == 0 || prompt[p - 1] == '\n') {
            pos = p;
            break;
        }
        search = p - 1;
    }
    if (pos == std::string_view::npos) return std::nullopt;
    return std::string(prompt.substr(pos + label.size()));
}

}  // namespace rada
