#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

namespace verbatim {

struct QuestionType {
    std::string_view name;
    std::string_view definition;
    std::string_view example;
};

/// The 18 question types offered to the classifier, in prompt order. The
/// examples fill the generation prompt's {q_ex} slot.
inline constexpr std::array<QuestionType, 18> kQuestionTypes{{
    {"Verification", "questions seeking a simple yes/no confirmation.",
     "Does dropout reduce overfitting in small transformer models?"},
    {"Disjunctive", "questions presenting multiple alternatives.",
     "Is the corpus annotated at the sentence level or the document level?"},
    {"Concept Completion", "questions starting with Who/What/When/Where.",
     "Where was the speech corpus recorded?"},
    {"Example", "questions asking for instances of a concept.",
     "What are examples of low-resource languages used for evaluation?"},
    {"Feature Specification", "questions about properties or characteristics.",
     "What properties does a good sentence embedding have?"},
    {"Quantification", "questions seeking numerical or measurable information.",
     "How many annotators labeled each document?"},
    {"Definition", "questions asking for the meaning of a term or concept.",
     "What is a subword tokenizer?"},
    {"Comparison", "questions asking for similarities or differences.",
     "How does beam search differ from greedy decoding?"},
    {"Interpretation", "questions asking for inference over observed patterns.",
     "What does the drop in accuracy on longer inputs suggest?"},
    {"Causal Antecedent", "questions about causes or reasons.",
     "Why do retrieval models fail on rare entity names?"},
    {"Causal Consequence", "questions about outcomes or results.",
     "What happens to recall when the chunk size is doubled?"},
    {"Goal Orientation", "questions about objectives or intentions.",
     "What is the purpose of the second training stage?"},
    {"Instrumental/Procedural", "questions asking how to achieve a goal.",
     "How can a parser be adapted to a new domain?"},
    {"Enablement", "questions about conditions enabling an action.",
     "What resources are needed to fine-tune a model on a single GPU?"},
    {"Expectation", "questions about anticipated or missing outcomes.",
     "Why did the larger model not improve the results?"},
    {"Judgmental", "questions asking for evaluation or opinion.",
     "Is word-level overlap a reasonable measure for highlighting quality?"},
    {"Assertion", "statements indicating lack of knowledge.",
     "I don't understand how the attention weights are normalized."},
    {"Request/Directive", "requests to summarize, analyze, or search.",
     "Summarize the evaluation setup for the extraction task."},
}};

namespace detail {

inline std::string fold_name(std::string_view s)
{
    std::string out;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    return out;
}

}  // namespace detail

/// Case-, space- and punctuation-insensitive lookup; "instrumental procedural"
/// finds "Instrumental/Procedural".
inline std::optional<QuestionType> find_question_type(std::string_view name)
{
    auto const key = detail::fold_name(name);
    if (key.empty()) {
        return std::nullopt;
    }
    for (auto const& t : kQuestionTypes) {
        if (detail::fold_name(t.name) == key) {
            return t;
        }
    }
    return std::nullopt;
}

}  // namespace verbatim
