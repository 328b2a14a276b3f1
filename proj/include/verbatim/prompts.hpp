#pragma once

#include <map>
#include <string>
#include <string_view>

// Prompt texts. The same bytes live in templates/*.txt; a test keeps them in sync.
namespace verbatim::prompts {

inline constexpr std::string_view kQueryPromptVersion = "qgen-v1";
inline constexpr std::string_view kExtractPromptVersion = "extract-v1";

inline constexpr std::string_view kClassifyTemplate = R"TPL(You are a researcher generating questions and answers to find relevant
information within a specific domain. Below are the potential question types.
Choose the type that best fits the field information and the user's purpose.

1. Verification: questions seeking a simple yes/no confirmation.
2. Disjunctive: questions presenting multiple alternatives.
3. Concept Completion: questions starting with Who/What/When/Where.
4. Example: questions asking for instances of a concept.
5. Feature Specification: questions about properties or characteristics.
6. Quantification: questions seeking numerical or measurable information.
7. Definition: questions asking for the meaning of a term or concept.
8. Comparison: questions asking for similarities or differences.
9. Interpretation: questions asking for inference over observed patterns.
10. Causal Antecedent: questions about causes or reasons.
11. Causal Consequence: questions about outcomes or results.
12. Goal Orientation: questions about objectives or intentions.
13. Instrumental/Procedural: questions asking how to achieve a goal.
14. Enablement: questions about conditions enabling an action.
15. Expectation: questions about anticipated or missing outcomes.
16. Judgmental: questions asking for evaluation or opinion.
17. Assertion: statements indicating lack of knowledge.
18. Request/Directive: requests to summarize, analyze, or search.

Task: Based on the following text from a research paper, return the most
appropriate 3 question types that could be answered by this text. Give me the
name of each type and not other information. Return ONLY valid JSON -- an
array of objects, no markdown or explanations.

Text: {chunk}
)TPL";

inline constexpr std::string_view kQuestionTemplate = R"TPL(You are a researcher asking questions aiming to find information in research
papers.

Content of paper: {chunk}

Please generate one question that can be answered by the above text and which
belongs to the question type below.

- Question Type: {q_type}
- Question Description: {q_def}
- Question Example: {q_ex}

Instructions:
1. Only return a question without any other information.
2. Use neutral terms like "a dataset", "data collection method", or
   "research approach", instead of references like "the study" or
   "this dataset".
3. The question should be short and simple, resembling what a user might
   type into a search engine.
4. The question should be answerable based on the text above.
)TPL";

inline constexpr std::string_view kRewriteTemplate = R"TPL(You are a researcher using a search engine to find information.

Your question: {question}

Please generate a search query that you would use to find the answer to this
question.

Instructions:
1. Only return a search query without any other information.
2. The query should be short and simple, resembling what a user might type
   into a search engine.
3. The query does not need to be grammatical.
)TPL";

inline constexpr std::string_view kExtractDefaultTemplate = R"TPL(Extract EXACT verbatim text spans from multiple documents that answer the
question.

Rules
1. Extract only text that explicitly addresses the question.
2. Never paraphrase, modify, or add to the original text.
3. Preserve original wording, capitalization, and punctuation.
4. Order spans within each document by relevance, most relevant first.
5. Include complete sentences or paragraphs for context.

Output format
Return a JSON object mapping document IDs to span arrays ordered by relevance:
{
  "doc_0": ["most relevant span", "next most relevant span"],
  "doc_1": ["most relevant from doc 1"],
  "doc_2": []
}

If no relevant information exists in a document, use an empty array.

Your task
Question: {{ question }}

Documents:
{{ documents }}

Extract verbatim spans from each document:
)TPL";

inline constexpr std::string_view kExtractParagraphTemplate = R"TPL(Extract verbatim supporting passages from each document that answer the
question.

What to extract
A supporting passage is the complete portion of the document a researcher
would highlight to justify the answer, including:
- the sentence(s) that directly address the question;
- preceding setup sentence(s) that introduce the topic, methodology, or
  figure being referenced;
- concluding interpretation sentence(s) that summarize implications;
- table captions when the table itself is relevant.

Prefer a single continuous paragraph over multiple fragments of the same
paragraph. Only split into multiple spans when relevant content is in
non-adjacent parts of the document.

Rules
1. Use EXACT text from the document; no paraphrasing or edits.
2. Preserve original wording, capitalization, and punctuation.
3. If no passage in the document supports the answer, return an empty array.
4. Order spans within each document by relevance, most relevant first.

Output format
Return JSON mapping document IDs to arrays:
{
  "doc_0": ["first supporting passage", "second supporting passage"],
  "doc_1": ["passage from doc 1"],
  "doc_2": []
}

Your task
Question: {{ question }}

Documents:
{{ documents }}

Extract supporting passages from each document:
)TPL";

/// Replaces every `open + name + close` in one left-to-right pass; inserted
/// values are never rescanned. Unknown placeholders stay as they are.
inline std::string fill(std::string_view tpl, const std::map<std::string, std::string>& values, std::string_view open,
                        std::string_view close)
{
    std::string out;
    out.reserve(tpl.size());
    std::size_t i = 0;
    while (i < tpl.size()) {
        bool replaced = false;
        if (tpl.substr(i, open.size()) == open) {
            for (auto const& [name, value] : values) {
                auto const len = open.size() + name.size() + close.size();
                if (tpl.substr(i + open.size(), name.size()) == name &&
                    tpl.substr(i + open.size() + name.size(), close.size()) == close) {
                    out += value;
                    i += len;
                    replaced = true;
                    break;
                }
            }
        }
        if (!replaced) {
            out += tpl[i++];
        }
    }
    return out;
}

/// {name} placeholders, as in the query-generation prompts.
inline std::string fill_braces(std::string_view tpl, const std::map<std::string, std::string>& values)
{
    return fill(tpl, values, "{", "}");
}

/// {{ name }} placeholders, as in the extraction prompts.
inline std::string fill_jinja(std::string_view tpl, const std::map<std::string, std::string>& values)
{
    return fill(tpl, values, "{{ ", " }}");
}

}  // namespace verbatim::prompts
