#pragma once

namespace acr {

/// Fixed reader prompt. The run manifest records a hash of this exact text;
/// changing it changes every manifest.
inline constexpr const char* kReaderSystemPrompt =
    "You are screening one patient's medical record excerpts against a cohort "
    "query. Decide from the supplied excerpts only. Answer strictly YES or NO.";

/// User message skeleton; {QUERY} and {CHUNKS} are substituted verbatim.
inline constexpr const char* kReaderUserTemplate =
    "Query: {QUERY}\n"
    "\n"
    "Record excerpts, each tagged with its authoring date:\n"
    "{CHUNKS}\n"
    "\n"
    "Does this patient satisfy the query? Answer strictly YES or NO.";

inline constexpr const char* kReaderReprompt =
    "Your previous reply was not parseable. Reply with exactly one word: YES or NO.";

}  // namespace acr
