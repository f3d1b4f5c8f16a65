#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chronomap/kgstore/schema.hpp"
#include "chronomap/kgstore/store.hpp"
#include "chronomap/llm/gateway.hpp"
#include "chronomap/query/query.hpp"

namespace chronomap::qa {

class QaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FewShot {
    std::string question;
    std::string query;
};

/// JSON array of {question, query}; throws QaError when missing or empty.
std::vector<FewShot> load_fewshot(const std::filesystem::path& path);

struct PromptBundle {
    std::vector<std::string> municipalities;  // as stored (lowercase)
    std::vector<std::string> feature_types;
    std::vector<std::int64_t> years;
    std::string analysis_instructions;
    std::string schema_modules;
    std::vector<std::string> constraints;
    std::vector<FewShot> fewshot;

    /// Deterministic system prompt for the generator.
    [[nodiscard]] std::string system_prompt() const;
};

/// Prefixes, fixed and optional properties, and relations with inverses.
std::string schema_catalog(const kg::Schema& schema);

/// Choice lists are read from the store. Throws QaError on an unsealed
/// store or an empty few-shot list.
PromptBundle build_prompt(const kg::Store& store, const kg::Schema& schema, std::vector<FewShot> fewshot);
PromptBundle build_prompt(const kg::Store& store, const kg::Schema& schema, const std::filesystem::path& fewshot_file);

struct QaConfig {
    int retry_max{2};
    int parallel_width{4};
    std::size_t facts_cap_chars{6000};
    std::filesystem::path tiles_dir;

    static QaConfig from_json(const nlohmann::json& j);
};

/// Backends per role. Any role may share a client. search may be null.
struct Gateways {
    llm::ChatClient* generator{nullptr};
    llm::ChatClient* validator{nullptr};
    llm::ChatClient* composer{nullptr};
    llm::SearchClient* search{nullptr};
};

enum class VerdictKind : std::uint8_t { accepted, revised, rejected };

struct ValidationVerdict {
    VerdictKind kind{VerdictKind::accepted};
    /// Revised query or rejection reason.
    std::string detail;
};

struct FactualResult {
    std::string question;
    std::string query;
    std::optional<ValidationVerdict> verdict;
    std::optional<query::QueryResult> solution;
    std::string answer;
    bool delivered{false};
    /// generate, parse, schema, validate, evaluate or answer.
    std::string failed_stage;
    std::string failure_reason;
    int attempts{0};

    [[nodiscard]] nlohmann::json to_json(const kg::Store& store) const;
};

/// Extracts the query from a generator reply: code fences are stripped and
/// text before the first PREFIX/SELECT/ASK keyword is dropped.
std::string extract_query(const std::string& reply);

/// Plain-text rendering of a solution handed to the answer call.
std::string solution_text(const query::QueryResult& r, std::size_t max_rows = 50);

/// Retry feedback appended to the generator request after a failed attempt.
std::string retry_feedback(int attempt, const std::string& stage, const std::string& error, const std::string& question);

FactualResult answer_factual(const std::string& question, const PromptBundle& bundle, const Gateways& gw,
                             const kg::Store& store, const QaConfig& cfg = {});

/// Municipality and year named in a question, matched against the bundle's
/// choice lists.
struct QuestionScope {
    std::optional<std::string> municipality;
    std::optional<std::int64_t> year;
};

QuestionScope scope_of(const std::string& question, const PromptBundle& bundle);

/// Per feature type: count, total area or length, largest feature; plus one
/// change question per type when an earlier year exists.
std::vector<std::string> fallback_subquestions(const std::string& question, const PromptBundle& bundle,
                                               const kg::Store& store);

/// Generator call tagged "decompose"; one sub-question per non-empty reply
/// line with list markers stripped. Falls back to the templates when the
/// call fails or yields nothing.
std::vector<std::string> decompose(const std::string& question, const PromptBundle& bundle, llm::ChatClient& generator,
                                   const kg::Store& store);

/// One "- Q: ... A: ..." line per delivered result, capped at cap_chars by
/// dropping whole lines from the end.
std::string results_to_text(const std::vector<FactualResult>& results, std::size_t cap_chars);

struct DescriptiveOptions {
    bool use_map_image{false};
    bool use_search{false};
};

struct DescriptiveResult {
    std::string question;
    std::vector<std::string> sub_questions;
    std::vector<FactualResult> sub_results;
    std::string facts;
    /// Subset of kg, map-image, search in that order.
    std::vector<std::string> contexts;
    std::string answer;
    bool delivered{false};
    std::string failed_stage;
    std::string failure_reason;
    std::vector<std::string> warnings;

    [[nodiscard]] nlohmann::json to_json(const kg::Store& store) const;
};

/// Parts of the final composition request, exposed for inspection.
llm::ChatRequest composition_request(const std::string& question, const std::string& facts,
                                     const std::optional<llm::ImagePart>& tile,
                                     const std::vector<llm::SearchResult>& search);

DescriptiveResult answer_descriptive(const std::string& question, const DescriptiveOptions& options,
                                     const PromptBundle& bundle, const Gateways& gw, const kg::Store& store,
                                     const QaConfig& cfg = {});

}  // namespace chronomap::qa
