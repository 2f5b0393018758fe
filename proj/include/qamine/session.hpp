#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qamine {

/// Which SERP component a click landed on.
enum class ClickTarget { kAnswer, kAnswerExpansion, kOutsideAnswer, kRelated };

std::string_view click_target_name(ClickTarget target);
std::optional<ClickTarget> parse_click_target(std::string_view name);

struct QueryEvent {
  std::string text;
};

struct SerpShownEvent {
  std::string qp_id;
};

struct ClickEvent {
  ClickTarget target;
};

struct SessionEvent {
  std::string session_id;
  std::int64_t ts_ms = 0;
  std::variant<QueryEvent, SerpShownEvent, ClickEvent> payload;

  bool is_query() const { return std::holds_alternative<QueryEvent>(payload); }
  bool is_serp() const { return std::holds_alternative<SerpShownEvent>(payload); }
  bool is_click() const { return std::holds_alternative<ClickEvent>(payload); }
};

/// One user's action stream, ascending by ts_ms (ties keep input order).
struct Session {
  std::string session_id;
  std::vector<SessionEvent> events;
};

/// Per-impression behavior signals for one display of a QA block.
struct ImpressionSignals {
  std::string qp_id;
  bool answer_click = false;
  bool answer_exp_click = false;
  bool ot_answer_click = false;
  bool related_click = false;
  bool answer_only = false;
  bool ot_only = false;
  bool both_click = false;
  bool no_click = false;
  bool answer_sat_click = false;
  bool ot_sat_click = false;
  bool reformulated = false;
  bool abandoned = false;
  std::int64_t serp_dwell_ms = 0;
  std::optional<std::int64_t> source_dwell_ms;  // present iff answer_click
};

/// What to assume when the session ends on a click and dwell is unobservable.
enum class TerminalClickPolicy { kSatisfied, kUnsatisfied };

/// Parses JSON Lines events. Required fields: session (string), ts (integer
/// ms >= 0), kind in {query, serp, click}; kind-specific: text / qp / target.
/// Blank lines are skipped, unknown extra fields ignored. Line numbers in
/// errors are 1-based over physical lines.
std::vector<SessionEvent> parse_log(std::span<const std::string> lines);

/// Parses one line; returns nullopt for blank lines.
std::optional<SessionEvent> parse_log_line(std::string_view line, std::size_t line_no);

/// Groups events by session_id (output ordered by first appearance) and
/// stably sorts each group by ts_ms. Throws OrphanEvent if a serp/click
/// precedes every query of its session.
std::vector<Session> build_sessions(std::vector<SessionEvent> events);

/// Stable-sorts one session's events by ts_ms and enforces the
/// query-precedes-serp/click invariant (throws OrphanEvent).
void finalize_session_events(Session& session);

/// Derives one ImpressionSignals per SerpShown event. The impression window
/// runs from the SerpShown to the next Query event (exclusive, by sorted
/// position) or the end of the session; clicks inside the window attach to
/// the impression. Dwells are differences of event timestamps; a click that
/// ends the session has no observable dwell and falls back to `policy`.
std::vector<ImpressionSignals> extract_impressions(
    const Session& session, std::int64_t sat_threshold_ms,
    TerminalClickPolicy policy = TerminalClickPolicy::kSatisfied);

/// Fixed input order for models consuming per-impression signals directly
/// (the label-aggregation route): booleans as 0/1, then the two dwells in ms
/// (missing source dwell encoded as 0).
inline constexpr std::string_view kImpressionOrderVersion = "impression-signals-v1";
inline constexpr std::size_t kImpressionFeatureCount = 14;

const std::array<std::string_view, kImpressionFeatureCount>& impression_feature_names();
std::array<double, kImpressionFeatureCount> impression_vector(const ImpressionSignals& signals);

}  // namespace qamine
