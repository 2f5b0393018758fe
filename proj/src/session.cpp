#include "qamine/session.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "qamine/error.hpp"

namespace qamine {

namespace {

using nlohmann::json;

}  // namespace

std::string_view click_target_name(ClickTarget target) {
  switch (target) {
    case ClickTarget::kAnswer: return "answer";
    case ClickTarget::kAnswerExpansion: return "answer_expansion";
    case ClickTarget::kOutsideAnswer: return "outside_answer";
    case ClickTarget::kRelated: return "related";
  }
  return "answer";
}

std::optional<ClickTarget> parse_click_target(std::string_view name) {
  if (name == "answer") return ClickTarget::kAnswer;
  if (name == "answer_expansion") return ClickTarget::kAnswerExpansion;
  if (name == "outside_answer") return ClickTarget::kOutsideAnswer;
  if (name == "related") return ClickTarget::kRelated;
  return std::nullopt;
}

std::optional<SessionEvent> parse_log_line(std::string_view line, std::size_t line_no) {
  if (line.find_first_not_of(" \t\r") == std::string_view::npos) return std::nullopt;

  json doc = json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw MalformedLine(line_no, "not a JSON object");
  }

  auto require = [&](const char* field) -> const json& {
    auto it = doc.find(field);
    if (it == doc.end()) throw MalformedLine(line_no, std::string("missing field \"") + field + "\"");
    return *it;
  };
  auto require_string = [&](const char* field) -> std::string {
    const json& v = require(field);
    if (!v.is_string()) throw MalformedLine(line_no, std::string("field \"") + field + "\" must be a string");
    return v.get<std::string>();
  };

  SessionEvent event;
  event.session_id = require_string("session");

  const json& ts = require("ts");
  if (!ts.is_number_integer()) throw MalformedLine(line_no, "field \"ts\" must be an integer");
  event.ts_ms = ts.get<std::int64_t>();
  if (event.ts_ms < 0) throw MalformedLine(line_no, "field \"ts\" must be >= 0");

  const std::string kind = require_string("kind");
  if (kind == "query") {
    event.payload = QueryEvent{require_string("text")};
  } else if (kind == "serp") {
    event.payload = SerpShownEvent{require_string("qp")};
  } else if (kind == "click") {
    const std::string target = require_string("target");
    auto parsed = parse_click_target(target);
    if (!parsed) throw InvalidTarget(line_no, target);
    event.payload = ClickEvent{*parsed};
  } else {
    throw MalformedLine(line_no, "unknown kind \"" + kind + "\"");
  }
  return event;
}

std::vector<SessionEvent> parse_log(std::span<const std::string> lines) {
  std::vector<SessionEvent> events;
  events.reserve(lines.size());
  std::size_t line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    if (auto event = parse_log_line(line, line_no)) {
      events.push_back(std::move(*event));
    }
  }
  return events;
}

std::vector<Session> build_sessions(std::vector<SessionEvent> events) {
  std::vector<Session> sessions;
  std::map<std::string, std::size_t> index_by_id;
  for (auto& event : events) {
    auto [it, inserted] = index_by_id.try_emplace(event.session_id, sessions.size());
    if (inserted) {
      sessions.push_back(Session{event.session_id, {}});
    }
    sessions[it->second].events.push_back(std::move(event));
  }
  for (auto& session : sessions) {
    std::stable_sort(session.events.begin(), session.events.end(),
                     [](const SessionEvent& a, const SessionEvent& b) { return a.ts_ms < b.ts_ms; });
    bool seen_query = false;
    for (const auto& event : session.events) {
      if (event.is_query()) {
        seen_query = true;
      } else if (!seen_query) {
        throw OrphanEvent(session.session_id);
      }
    }
  }
  return sessions;
}

std::vector<ImpressionSignals> extract_impressions(const Session& session,
                                                   std::int64_t sat_threshold_ms,
                                                   TerminalClickPolicy policy) {
  const auto& events = session.events;
  std::vector<ImpressionSignals> impressions;

  auto observed_dwell = [&](std::size_t click_pos) -> std::int64_t {
    if (click_pos + 1 < events.size()) {
      return events[click_pos + 1].ts_ms - events[click_pos].ts_ms;
    }
    return policy == TerminalClickPolicy::kSatisfied ? sat_threshold_ms : 0;
  };

  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!events[i].is_serp()) continue;

    ImpressionSignals sig;
    sig.qp_id = std::get<SerpShownEvent>(events[i].payload).qp_id;

    std::size_t window_end = events.size();
    for (std::size_t j = i + 1; j < events.size(); ++j) {
      if (events[j].is_query()) {
        window_end = j;
        break;
      }
    }
    const bool has_next_query = window_end < events.size();

    std::size_t first_answer = events.size();
    std::size_t first_ot = events.size();
    bool any_click = false;
    for (std::size_t j = i + 1; j < window_end; ++j) {
      if (!events[j].is_click()) continue;
      any_click = true;
      switch (std::get<ClickEvent>(events[j].payload).target) {
        case ClickTarget::kAnswer:
          sig.answer_click = true;
          if (first_answer == events.size()) first_answer = j;
          break;
        case ClickTarget::kOutsideAnswer:
          sig.ot_answer_click = true;
          if (first_ot == events.size()) first_ot = j;
          break;
        case ClickTarget::kAnswerExpansion:
          sig.answer_exp_click = true;
          break;
        case ClickTarget::kRelated:
          sig.related_click = true;
          break;
      }
    }

    sig.no_click = !any_click;
    sig.answer_only = sig.answer_click && !sig.ot_answer_click;
    sig.ot_only = sig.ot_answer_click && !sig.answer_click;
    sig.both_click = sig.answer_click && sig.ot_answer_click;
    sig.reformulated = has_next_query;
    sig.abandoned = sig.no_click && !sig.reformulated;

    const std::int64_t window_close_ts =
        has_next_query ? events[window_end].ts_ms : events.back().ts_ms;
    sig.serp_dwell_ms = window_close_ts - events[i].ts_ms;

    if (sig.answer_click) {
      const std::int64_t dwell = observed_dwell(first_answer);
      sig.source_dwell_ms = dwell;
      sig.answer_sat_click = dwell >= sat_threshold_ms;
    }
    if (sig.ot_answer_click) {
      sig.ot_sat_click = observed_dwell(first_ot) >= sat_threshold_ms;
    }

    impressions.push_back(std::move(sig));
  }
  return impressions;
}

const std::array<std::string_view, kImpressionFeatureCount>& impression_feature_names() {
  static const std::array<std::string_view, kImpressionFeatureCount> names = {
      "AnswerClick",    "AnswerExpClick", "OTAnswerClick", "RelatedClick",
      "AnswerClickOnly", "OTAnswerClickOnly", "BothClick", "NoClick",
      "AnswerSatClick", "OTAnswerSatClick", "HasReformulation", "IsAbandoned",
      "SourcePageDwellTime", "SERPDwellTime"};
  return names;
}

std::array<double, kImpressionFeatureCount> impression_vector(const ImpressionSignals& s) {
  return {static_cast<double>(s.answer_click),
          static_cast<double>(s.answer_exp_click),
          static_cast<double>(s.ot_answer_click),
          static_cast<double>(s.related_click),
          static_cast<double>(s.answer_only),
          static_cast<double>(s.ot_only),
          static_cast<double>(s.both_click),
          static_cast<double>(s.no_click),
          static_cast<double>(s.answer_sat_click),
          static_cast<double>(s.ot_sat_click),
          static_cast<double>(s.reformulated),
          static_cast<double>(s.abandoned),
          static_cast<double>(s.source_dwell_ms.value_or(0)),
          static_cast<double>(s.serp_dwell_ms)};
}

}  // namespace qamine
