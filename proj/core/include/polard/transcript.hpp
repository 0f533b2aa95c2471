#pragma once

#include <string>
#include <vector>

#include "polard/engine.hpp"

namespace polard {

/// Records of one feedback round as stored in feedback_recorded events.
Json feedback_records_json(const std::vector<Json>& records);

/// Rebuilds a session by re-running every submit and advance in the event log.
/// Throws std::runtime_error when the log disagrees with the recomputed session.
SessionState replay_transcript(const std::vector<Json>& events, SessionOptions options = {});

std::string transcript_jsonl(const std::vector<Json>& events);
std::vector<Json> parse_transcript_jsonl(const std::string& text);

/// Compact summary of everything replay must reproduce.
Json state_digest(const SessionState& state);

/// Posterior over the current subset with per-dimension-pair mean projections,
/// normalized to [0, 1] (0.5 everywhere for a constant mean, null for empty cells).
/// `full_covariance` adds the row-major covariance matrix.
Json posterior_snapshot(const SessionState& state, bool full_covariance = false);

Json query_json(const SessionState& state, const QueryBundle& bundle);
Json state_json(const SessionState& state);

/// Parses the body of a feedback submission.
FeedbackResponses responses_from_json(const Json& j, const SessionState& state);

}  // namespace polard
