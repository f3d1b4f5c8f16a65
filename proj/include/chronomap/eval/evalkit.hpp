#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chronomap/kgstore/schema.hpp"
#include "chronomap/kgstore/store.hpp"
#include "chronomap/llm/gateway.hpp"
#include "chronomap/qa/pipeline.hpp"

namespace chronomap::eval {

enum class Category : std::uint8_t { property, relationship, qualifier, aggregate, superlative, spatial_temporal, overview };
enum class AnswerKind : std::uint8_t { yesno, numeric, open };

const char* to_string(Category c);
const char* to_string(AnswerKind k);
Category category_from(const std::string& s);
AnswerKind kind_from(const std::string& s);

struct BenchmarkItem {
    std::string id;
    std::string question;
    Category category{Category::property};
    AnswerKind kind{AnswerKind::yesno};
    std::string gold_query;
    /// "yes"/"no", a number, or a comma-separated number list. Empty for
    /// overview items.
    std::string gold_answer;

    [[nodiscard]] nlohmann::json to_json() const;
    static BenchmarkItem from_json(const nlohmann::json& j);
    friend bool operator==(const BenchmarkItem&, const BenchmarkItem&) = default;
};

struct BenchmarkCounts {
    int yesno{45};
    int numeric{45};
    int overview{10};
};

/// Renders a gold query result per answer kind. nullopt when the result has
/// no usable value (empty SELECT, unbound aggregate).
std::optional<std::string> render_gold(const query::QueryResult& r, AnswerKind kind);

/// Items from category templates filled with store values. Deterministic
/// for a seed; an optional paraphraser rewrites question text only. Short
/// counts produce a warning each.
std::vector<BenchmarkItem> generate_benchmark(const kg::Store& store, const BenchmarkCounts& counts, std::uint64_t seed,
                                              llm::ChatClient* paraphraser = nullptr,
                                              std::vector<std::string>* warnings = nullptr);

void save_benchmark(const std::vector<BenchmarkItem>& items, const std::filesystem::path& path);
std::vector<BenchmarkItem> load_benchmark(const std::filesystem::path& path);

struct AnswerNormalization {
    std::vector<std::string> affirmative{"yes", "yeah", "yep", "correct", "true", "indeed", "affirmative"};
    std::vector<std::string> negative{"no", "nope", "not", "false", "incorrect", "negative"};

    static AnswerNormalization from_json(const nlohmann::json& j);
};

struct AccuracyVerdict {
    bool correct{false};
    /// "", "unextractable" or "mismatch".
    std::string reason;
};

/// Numbers in text order with thousands separators removed.
std::vector<double> extract_numbers(const std::string& text);

AccuracyVerdict answer_accuracy(const std::string& answer, const std::string& gold, AnswerKind kind,
                                const AnswerNormalization& norm = {});

struct SparqlCheck {
    /// nullopt when the judge failed; such items leave the denominator.
    std::optional<bool> verdict;
    std::string rationale;
};

/// Structural pre-pass (parse, schema, year and municipality constraints)
/// then an LLM judge tagged "sparql_judge". Without a judge the pre-pass
/// result stands.
SparqlCheck sparql_semantic_check(const std::string& question, const std::string& query_text, const kg::Schema& schema,
                                  const std::vector<std::string>& municipalities, llm::ChatClient* judge);

struct ExtractedFact {
    std::string statement;
    std::string question;
    std::string answer;
    /// "yes", "no" or "error".
    std::string verdict;
    std::optional<bool> manual_override;

    friend bool operator==(const ExtractedFact&, const ExtractedFact&) = default;
};

struct FactReport {
    std::string answer;
    std::vector<ExtractedFact> facts;
    bool extraction_error{false};

    /// yes / (yes + no); nullopt when no fact was verified either way.
    [[nodiscard]] std::optional<double> accuracy_auto() const;
    /// Same ratio with manual overrides replacing automatic verdicts; nullopt
    /// unless at least one override is present.
    [[nodiscard]] std::optional<double> accuracy_manual() const;

    [[nodiscard]] nlohmann::json to_json() const;
    static FactReport from_json(const nlohmann::json& j);
    friend bool operator==(const FactReport&, const FactReport&) = default;
};

using FactualFn = std::function<qa::FactualResult(const std::string&)>;

/// Extraction call tagged "extract_facts" expecting a JSON array of
/// {statement, question}; a plain list of questions is also accepted.
FactReport fact_check(const std::string& answer, llm::ChatClient& extractor, const FactualFn& factual);

struct QualityScores {
    std::optional<double> relevance;
    std::optional<double> fluency;
    std::optional<double> informativeness;

    friend bool operator==(const QualityScores&, const QualityScores&) = default;
};

/// A bare decimal, clamped to [0, 1]; nullopt for anything else.
std::optional<double> parse_score(const std::string& reply);

QualityScores content_quality(const std::string& question, const std::string& answer, llm::ChatClient& judge);

struct OutcomeRecord {
    std::string id;
    std::string question;
    Category category{Category::property};
    AnswerKind kind{AnswerKind::yesno};
    bool delivered{false};
    std::string answer;
    std::string generated_query;
    int attempts{0};
    std::string failed_stage;
    std::optional<bool> correct;
    std::string correct_reason;
    std::optional<bool> sparql_auto;
    bool sparql_auto_error{false};
    std::string sparql_rationale;
    std::optional<bool> sparql_manual;
    // Descriptive items only.
    std::size_t factual_questions{0};
    std::optional<FactReport> facts;
    QualityScores quality;

    [[nodiscard]] nlohmann::json to_json() const;
    static OutcomeRecord from_json(const nlohmann::json& j);
    friend bool operator==(const OutcomeRecord&, const OutcomeRecord&) = default;
};

using OutcomeLog = std::vector<OutcomeRecord>;

void write_log(const OutcomeLog& log, std::ostream& out);
void write_log(const OutcomeLog& log, const std::filesystem::path& path);
OutcomeLog read_log(const std::filesystem::path& path);

/// Ratios over factual (yes/no and numeric) records. Throws
/// std::invalid_argument when there are none.
double delivery_rate(const OutcomeLog& log);
double accuracy(const OutcomeLog& log);

/// Half-away-from-zero rounding to two decimals, or "n/a".
std::string fmt2(std::optional<double> v);

struct EvalReport {
    std::string label{"generator"};
    std::string contexts_label{"KG"};

    std::size_t factual_items{0};
    std::size_t delivered{0};
    std::size_t correct{0};
    std::size_t sparql_auto_true{0};
    std::size_t sparql_auto_judged{0};
    std::size_t sparql_auto_errors{0};
    std::size_t sparql_manual_true{0};
    std::size_t sparql_manual_judged{0};

    std::size_t descriptive_items{0};
    std::size_t fact_yes{0};
    std::size_t fact_no{0};
    std::size_t fact_errors{0};
    std::size_t fact_manual_yes{0};
    std::size_t fact_manual_judged{0};
    std::size_t factual_questions{0};
    double relevance_sum{0};
    std::size_t relevance_n{0};
    double fluency_sum{0};
    std::size_t fluency_n{0};
    double informativeness_sum{0};
    std::size_t informativeness_n{0};

    [[nodiscard]] std::optional<double> delivery_rate() const;
    [[nodiscard]] std::optional<double> accuracy() const;
    [[nodiscard]] std::optional<double> sparql_accuracy_auto() const;
    [[nodiscard]] std::optional<double> sparql_accuracy_manual() const;
    [[nodiscard]] std::optional<double> fact_accuracy_auto() const;
    [[nodiscard]] std::optional<double> fact_accuracy_manual() const;
    [[nodiscard]] std::optional<double> mean_factual_questions() const;
    [[nodiscard]] std::optional<double> relevance() const;
    [[nodiscard]] std::optional<double> fluency() const;
    [[nodiscard]] std::optional<double> informativeness() const;

    /// "delivery / accuracy / sparql auto / sparql manual".
    [[nodiscard]] std::string factual_row() const;
    /// "fact auto / fact manual / questions / perplexity / relevance /
    /// fluency / informativeness"; perplexity is always n/a.
    [[nodiscard]] std::string descriptive_row() const;
    /// Plain-text tables; a section without items is omitted.
    [[nodiscard]] std::string render_text() const;

    [[nodiscard]] nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

EvalReport summarize(const OutcomeLog& log, std::string label = "generator", std::string contexts_label = "KG");

struct RunOptions {
    qa::QaConfig qa;
    qa::DescriptiveOptions descriptive;
    int parallel_width{4};
};

/// Runs every item through the pipelines. The judge handles SPARQL checks,
/// fact extraction and quality scoring; without one those fields stay
/// unset. Records keep item order regardless of parallelism.
OutcomeLog run_benchmark(const std::vector<BenchmarkItem>& items, const qa::PromptBundle& bundle, const qa::Gateways& gw,
                         llm::ChatClient* judge, const kg::Store& store, const RunOptions& options = {});

}  // namespace chronomap::eval
