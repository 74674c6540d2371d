#include "rada/quality.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "rada/error.hpp"
#include "rada/promptgen.hpp"
#include "rada/text.hpp"

namespace rada {

namespace {

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

const std::string& sample_question(const AugmentedSample& s) { return example_question(s.example); }

std::string unit_text(const Example& e, DiversityUnit unit) {
    if (unit == DiversityUnit::question_only) return example_question(e);
    return example_question(e) + " " + example_answer(e);
}

void require_threshold(double t, const char* what) {
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError(std::string(what) + " threshold must lie in (0, 1]");
}

}  // namespace

RougeScore rouge_l_tokens(std::span<const std::string> candidate, std::span<const std::string> reference) {
    RougeScore s;
    const auto lcs = lcs_length(candidate, reference);
    if (lcs == 0) return s;
    const auto l = static_cast<double>(lcs);
    s.precision = l / static_cast<double>(candidate.size());
    s.recall = l / static_cast<double>(reference.size());
    // 2PR/(P+R) reduces to 2L/(|c|+|r|); this form is exact and symmetric.
    s.f = 2.0 * l / static_cast<double>(candidate.size() + reference.size());
    return s;
}

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
    const auto c = text::word_tokens(candidate);
    const auto r = text::word_tokens(reference);
    return rouge_l_tokens(c, r);
}

double squad_f1(std::string_view prediction, std::string_view gold) {
    const auto p_norm = text::squad_normalize(prediction);
    const auto g_norm = text::squad_normalize(gold);
    const auto p = text::split_whitespace(p_norm);
    const auto g = text::split_whitespace(g_norm);
    if (p.empty() || g.empty()) return p.size() == g.size() ? 1.0 : 0.0;
    std::unordered_map<std::string_view, std::size_t> counts;
    for (const auto t : g) ++counts[t];
    std::size_t common = 0;
    for (const auto t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    return 2.0 * static_cast<double>(common) / static_cast<double>(p.size() + g.size());
}

double exact_match(std::string_view prediction, std::string_view gold) {
    return text::squad_normalize(prediction) == text::squad_normalize(gold) ? 1.0 : 0.0;
}

double mcq_accuracy(std::span<const std::string> predictions, std::span<const McqExample> golds) {
    if (predictions.size() != golds.size()) throw SchemaError("predictions and golds differ in length");
    if (golds.empty()) throw SchemaError("no predictions to score");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        const auto gold = option_index(golds[i].options, golds[i].answer);
        const auto pred = resolve_option(golds[i].options, predictions[i]);
        if (gold && pred && *gold == *pred) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(golds.size());
}

// ---------------------------------------------------------------------------

void FilterConfig::validate() const {
    if (rouge_dedup_threshold) require_threshold(*rouge_dedup_threshold, "ROUGE dedup");
    if (embedding_dedup_threshold) require_threshold(*embedding_dedup_threshold, "embedding dedup");
}

FilterResult span_filter(std::span<const AugmentedSample> samples, const FilterConfig& cfg) {
    FilterResult out;
    const bool check = cfg.enable_span_filter && cfg.normalization == SpanNormalization::strict;
    for (const auto& s : samples) {
        const auto* qa = std::get_if<QaExample>(&s.example);
        if (!check || qa == nullptr) {
            out.kept.push_back(s);
            continue;
        }
        const auto answer = text::fold_and_collapse(qa->answer);
        const auto context = text::fold_and_collapse(qa->context);
        if (!answer.empty() && context.find(answer) != std::string::npos) {
            out.kept.push_back(s);
        } else {
            out.rejected.push_back({s, std::string(kReasonNotASpan), "answer not found in context"});
        }
    }
    return out;
}

FilterResult rouge_dedup_filter(std::span<const AugmentedSample> samples, double threshold) {
    require_threshold(threshold, "ROUGE dedup");
    FilterResult out;
    std::vector<std::vector<std::string>> kept_tokens;
    for (const auto& s : samples) {
        auto tokens = text::word_tokens(sample_question(s));
        double best = 0.0;
        std::size_t best_at = 0;
        for (std::size_t k = 0; k < kept_tokens.size(); ++k) {
            const double f = rouge_l_tokens(tokens, kept_tokens[k]).f;
            if (f > best) {
                best = f;
                best_at = k;
            }
            if (best >= threshold) break;
        }
        if (!kept_tokens.empty() && best >= threshold) {
            char detail[96];
            std::snprintf(detail, sizeof(detail), "rouge-l f=%.6f vs %s", best,
                          example_id(out.kept[best_at].example).c_str());
            out.rejected.push_back({s, std::string(kReasonRougeDup), detail});
        } else {
            out.kept.push_back(s);
            kept_tokens.push_back(std::move(tokens));
        }
    }
    return out;
}

FilterResult embedding_dedup_filter(std::span<const AugmentedSample> samples, EmbeddingProvider& provider,
                                    double threshold) {
    require_threshold(threshold, "embedding dedup");
    FilterResult out;
    if (samples.empty()) return out;
    std::vector<std::string> questions;
    questions.reserve(samples.size());
    for (const auto& s : samples) questions.push_back(sample_question(s));
    const auto vectors = provider.embed(questions);
    if (vectors.size() != samples.size()) throw Error("embedding provider returned the wrong number of vectors");
    std::vector<std::size_t> kept_idx;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double best = -1.0;
        std::size_t best_at = 0;
        for (const auto k : kept_idx) {
            const double c = cosine(vectors[i], vectors[k]);
            if (c > best) {
                best = c;
                best_at = k;
            }
            if (best >= threshold) break;
        }
        if (!kept_idx.empty() && best >= threshold) {
            char detail[96];
            std::snprintf(detail, sizeof(detail), "cosine=%.6f vs %s", best,
                          example_id(samples[best_at].example).c_str());
            out.rejected.push_back({samples[i], std::string(kReasonEmbeddingDup), detail});
        } else {
            out.kept.push_back(samples[i]);
            kept_idx.push_back(i);
        }
    }
    return out;
}

FilterResult apply_filters(std::span<const AugmentedSample> samples, const FilterConfig& cfg,
                           EmbeddingProvider* provider) {
    cfg.validate();
    FilterResult total = span_filter(samples, cfg);
    const auto stage = [&](FilterResult next) {
        total.kept = std::move(next.kept);
        for (auto& r : next.rejected) total.rejected.push_back(std::move(r));
    };
    if (cfg.rouge_dedup_threshold) stage(rouge_dedup_filter(total.kept, *cfg.rouge_dedup_threshold));
    if (cfg.embedding_dedup_threshold) {
        if (provider == nullptr) throw ConfigError("embedding dedup needs an embedding provider");
        stage(embedding_dedup_filter(total.kept, *provider, *cfg.embedding_dedup_threshold));
    }
    return total;
}

// ---------------------------------------------------------------------------

std::size_t histogram_bin(double value) {
    const double clamped = std::clamp(value, 0.0, 1.0);
    const auto bin = static_cast<std::size_t>(std::floor(clamped * static_cast<double>(DiversityReport::kBins)));
    return std::min(bin, DiversityReport::kBins - 1);
}

DiversityReport diversity_report(const SeedDataset& seed, std::span<const AugmentedSample> samples,
                                 const DataStore* store, EmbeddingProvider* provider, const DiversityOptions& opts) {
    if (seed.size_n() == 0) throw SchemaError("diversity report needs a non-empty seed");
    DiversityReport report;
    report.unit = opts.unit == DiversityUnit::question_only ? "question" : "question+answer";

    std::vector<std::vector<std::string>> seed_tokens;
    seed_tokens.reserve(seed.size_n());
    for (const auto& e : seed.examples) seed_tokens.push_back(text::word_tokens(unit_text(e, opts.unit)));

    std::vector<double> values(samples.size(), 0.0);
    const auto score = [&](std::size_t i) {
        const auto tokens = text::word_tokens(unit_text(samples[i].example, opts.unit));
        double best = 0.0;
        for (const auto& st : seed_tokens) best = std::max(best, rouge_l_tokens(tokens, st).f);
        values[i] = best;
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(opts.workers, samples.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < samples.size(); ++i) score(i);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < samples.size(); i += workers) score(i);
            });
        }
    }

    for (std::size_t i = 0; i < samples.size(); ++i) {
        report.per_sample_max_rouge.emplace_back(example_id(samples[i].example), values[i]);
        ++report.histogram[histogram_bin(values[i])];
    }
    if (!values.empty()) {
        double sum = 0.0;
        for (const double v : values) sum += v;
        report.mean = sum / static_cast<double>(values.size());
        double sq = 0.0;
        for (const double v : values) sq += (v - report.mean) * (v - report.mean);
        report.stddev = std::sqrt(sq / static_cast<double>(values.size()));
        auto sorted = values;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        report.median = n % 2 == 1 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
    }

    std::unordered_map<std::string, const Example*> seed_by_id;
    for (const auto& e : seed.examples) seed_by_id.emplace(example_id(e), &e);
    for (const auto& s : samples) {
        std::optional<std::string> tag;
        if (store != nullptr) {
            if (const auto* entry = store->find(s.target_context_source)) tag = entry->domain_tag;
        }
        if (!tag) {
            if (const auto it = seed_by_id.find(s.target_context_source); it != seed_by_id.end()) {
                tag = example_domain(*it->second);
            }
        }
        if (!tag) tag = example_domain(s.example);
        ++report.domain_tally[tag.value_or("untagged")];
    }

    if (provider != nullptr && opts.embedding_csv) {
        std::vector<std::string> texts;
        std::vector<std::pair<std::string, std::string>> rows;  // id, origin
        for (const auto& e : seed.examples) {
            texts.push_back(unit_text(e, opts.unit));
            rows.emplace_back(example_id(e), "seed");
        }
        for (const auto& s : samples) {
            texts.push_back(unit_text(s.example, opts.unit));
            rows.emplace_back(example_id(s.example), "generated-" + std::string(to_string(s.strategy)));
        }
        const auto vectors = provider->embed(texts);
        if (vectors.size() != rows.size()) throw Error("embedding provider returned the wrong number of vectors");
        std::ofstream csv(*opts.embedding_csv, std::ios::binary | std::ios::trunc);
        if (!csv) throw Error("cannot write " + opts.embedding_csv->string());
        const std::size_t dim = vectors.empty() ? 0 : vectors.front().size();
        csv << "id,origin";
        for (std::size_t d = 0; d < dim; ++d) csv << ",v" << d;
        csv << '\n';
        char buf[32];
        for (std::size_t r = 0; r < rows.size(); ++r) {
            csv << rows[r].first << ',' << rows[r].second;
            for (const double x : vectors[r]) {
                std::snprintf(buf, sizeof(buf), "%.17g", x);
                csv << ',' << buf;
            }
            csv << '\n';
        }
        report.embedding_export_path = *opts.embedding_csv;
    }
    return report;
}

std::string report_to_json(const DiversityReport& report) {
    nlohmann::ordered_json j;
    j["metric"] = "max_rouge_l_f";
    j["unit"] = report.unit;
    j["sample_count"] = report.per_sample_max_rouge.size();
    j["mean"] = report.mean;
    j["median"] = report.median;
    j["stddev"] = report.stddev;
    j["histogram"] = {{"bin_width", 0.05}, {"counts", report.histogram}};
    j["domain_tally"] = report.domain_tally;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& [id, v] : report.per_sample_max_rouge) rows.push_back({{"id", id}, {"max_rouge_l_f", v}});
    j["per_sample_max_rouge"] = rows;
    if (report.embedding_export_path) j["embedding_export_path"] = report.embedding_export_path->string();
    return j.dump(2);
}

}  // namespace rada
