#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "rada/corpus.hpp"
#include "rada/error.hpp"

namespace rada {

enum class TemplateKind { extractive_qa, mmlu_v1, mmlu_v2, answer_inference_qa, answer_inference_mmlu };

std::string_view to_string(TemplateKind k);
TemplateKind parse_template_kind(std::string_view s);

struct QaDemonstration {
    std::string context;
    std::string question;
    std::string answer;
};

// Rendered as question/options/answer (v1) or options/question/answer (v2).
struct McqDemonstration {
    std::string question;
    std::array<std::string, 4> options;
    std::string answer;
};

using Demonstration = std::variant<QaDemonstration, McqDemonstration>;

struct PromptTarget {
    std::string text;                                   // context (QA) or question (MMLU v1)
    std::optional<std::array<std::string, 4>> options;  // MMLU v2
};

struct RenderedPrompt {
    std::string text;
    TemplateKind kind = TemplateKind::extractive_qa;
    std::string digest;  // sha256 hex of text
};

class PromptError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

inline constexpr std::size_t kDefaultDemoCount = 3;

// Instruction sentences, one per line, no trailing newline.
std::string_view instruction_block(TemplateKind kind);

// "A. <opt> B. <opt> C. <opt> D. <opt>"
std::string format_options(const std::array<std::string, 4>& options);

// Splits a lettered option list (one line or one per line) into 4 options.
// Throws ParseError when 4 options cannot be recovered.
std::array<std::string, 4> split_options(std::string_view s);

// Layout: instruction block, one blank line, the demonstrations (no blank
// lines inside or between them), then the target line(s). The text ends
// right after the target, with no trailing newline. demonstrations.size()
// must be 0 or configured_count.
RenderedPrompt render_augmentation_prompt(TemplateKind kind, std::span<const Demonstration> demonstrations,
                                          const PromptTarget& target,
                                          std::size_t configured_count = kDefaultDemoCount);

// "Context: c Question: q Answer: " or "Question: q Answer Options: o Answer:"
RenderedPrompt render_answer_inference_prompt(TemplateKind kind, const Example& example);

struct ParsedGeneration {
    std::optional<std::string> question;
    std::optional<std::string> answer;
    std::optional<std::array<std::string, 4>> options;
};

// Label-anchored extraction. Required labels: Question+Answer for
// extractive_qa and mmlu_v2, Answer Options+Answer for mmlu_v1.
ParsedGeneration parse_generation(TemplateKind kind, std::string_view raw);

// Index of the option an answer refers to: exact text, normalized text, or a
// leading option letter ("B", "(B)", "B. text").
std::optional<std::size_t> resolve_option(const std::array<std::string, 4>& options, std::string_view answer);

// Last occurrence of a line starting with `label` (e.g. "Context: "); the
// value runs to the end of the text. Used to locate a prompt's target block.
std::optional<std::string> final_labeled_block(std::string_view prompt, std::string_view label);

}  // namespace rada
