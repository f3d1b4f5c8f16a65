#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <thread>

#include "chronomap/eval/evalkit.hpp"

namespace chronomap::eval {

namespace {

OutcomeRecord run_factual(const BenchmarkItem& item, const qa::PromptBundle& bundle, const qa::Gateways& gw,
                          llm::ChatClient* judge, const kg::Store& store, const RunOptions& options) {
    OutcomeRecord rec;
    const auto r = qa::answer_factual(item.question, bundle, gw, store, options.qa);
    rec.delivered = r.delivered;
    rec.answer = r.answer;
    rec.generated_query = r.query;
    rec.attempts = r.attempts;
    rec.failed_stage = r.failed_stage;
    if (r.delivered) {
        const auto v = answer_accuracy(r.answer, item.gold_answer, item.kind);
        rec.correct = v.correct;
        rec.correct_reason = v.reason;
    }
    if (!judge) return rec;
    if (!r.delivered) {
        // No delivered query to judge: counted against the generator.
        rec.sparql_auto = false;
        rec.sparql_rationale = "not delivered (" + r.failed_stage + ")";
        return rec;
    }
    const auto check = sparql_semantic_check(item.question, r.query, store.schema(), bundle.municipalities, judge);
    rec.sparql_auto = check.verdict;
    rec.sparql_auto_error = !check.verdict.has_value();
    rec.sparql_rationale = check.rationale;
    return rec;
}

OutcomeRecord run_descriptive(const BenchmarkItem& item, const qa::PromptBundle& bundle, const qa::Gateways& gw,
                              llm::ChatClient* judge, const kg::Store& store, const RunOptions& options) {
    OutcomeRecord rec;
    const auto r = qa::answer_descriptive(item.question, options.descriptive, bundle, gw, store, options.qa);
    rec.delivered = r.delivered;
    rec.answer = r.answer;
    rec.failed_stage = r.failed_stage;
    rec.factual_questions = r.sub_questions.size();
    if (!judge || !r.delivered) return rec;
    rec.facts = fact_check(r.answer, *judge, [&](const std::string& q) {
        return qa::answer_factual(q, bundle, gw, store, options.qa);
    });
    rec.quality = content_quality(item.question, r.answer, *judge);
    return rec;
}

}  // namespace

OutcomeLog run_benchmark(const std::vector<BenchmarkItem>& items, const qa::PromptBundle& bundle, const qa::Gateways& gw,
                         llm::ChatClient* judge, const kg::Store& store, const RunOptions& options) {
    OutcomeLog log(items.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < items.size(); i = next++) {
            const auto& item = items[i];
            auto rec = item.kind == AnswerKind::open ? run_descriptive(item, bundle, gw, judge, store, options)
                                                     : run_factual(item, bundle, gw, judge, store, options);
            rec.id = item.id;
            rec.question = item.question;
            rec.category = item.category;
            rec.kind = item.kind;
            log[i] = std::move(rec);
            spdlog::debug("benchmark item {} done", item.id);
        }
    };
    const auto width = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, options.parallel_width)), items.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < width; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return log;
}

}  // namespace chronomap::eval
