#include "kitclust/trace.hpp"

#include <spdlog/spdlog.h>

#include <json.hpp>

#include "kitclust/domain.hpp"
#include "kitclust/error.hpp"
#include "kitclust/hash.hpp"

namespace kitclust {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(AccessKind kind) {
  switch (kind) {
    case AccessKind::call:
      return "call";
    case AccessKind::construct:
      return "construct";
    case AccessKind::get:
      return "get";
    case AccessKind::set:
      return "set";
  }
  return "call";
}

std::optional<AccessKind> parse_access_kind(std::string_view text) {
  if (text == "call") return AccessKind::call;
  if (text == "construct") return AccessKind::construct;
  if (text == "get") return AccessKind::get;
  if (text == "set") return AccessKind::set;
  return std::nullopt;
}

bool is_valid_api_name(std::string_view name) {
  const auto dot = name.find('.');
  return dot != std::string_view::npos && dot > 0 && dot + 1 < name.size() &&
         name.find('.', dot + 1) == std::string_view::npos;
}

FeatureToken canonical_token(const ApiEvent& event) {
  FeatureToken token;
  const auto kind = to_string(event.kind);
  token.reserve(kind.size() + 1 + event.name.size());
  token.append(kind).push_back(':');
  token.append(event.name);
  return token;
}

std::string_view token_interface(std::string_view token) {
  if (const auto colon = token.find(':'); colon != std::string_view::npos) token.remove_prefix(colon + 1);
  return token.substr(0, token.find('.'));
}

std::string_view token_member(std::string_view token) {
  const auto dot = token.find('.');
  return dot == std::string_view::npos ? std::string_view{} : token.substr(dot + 1);
}

std::optional<AccessKind> token_kind(std::string_view token) {
  const auto colon = token.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  return parse_access_kind(token.substr(0, colon));
}

std::string PageTrace::page_id() const {
  return page_url + "@" + format_utc(observed_at);
}

std::pair<std::string, std::string> split_page_id(std::string_view page_id) {
  const auto at = page_id.rfind('@');
  if (at == std::string_view::npos) throw InputError("page id without '@': '" + std::string(page_id) + "'");
  return {std::string(page_id.substr(0, at)), std::string(page_id.substr(at + 1))};
}

namespace {

const json& require(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw InputError(std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_string()) throw InputError(std::string("field '") + key + "' is not a string");
  return v.get<std::string>();
}

ApiEvent parse_event(const json& j, const TraceParseOptions& options) {
  if (!j.is_object()) throw InputError("event is not an object");
  ApiEvent ev;
  ev.name = require_string(j, "name");
  if (!is_valid_api_name(ev.name)) throw InputError("event name not of form Interface.member: '" + ev.name + "'");
  const auto kind = parse_access_kind(require_string(j, "kind"));
  if (!kind) throw InputError("event kind must be call|construct|get|set");
  ev.kind = *kind;
  if (const auto it = j.find("arg0"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw InputError("arg0 is not a string");
    if (options.argument_bearing.contains(ev.name)) ev.arg0 = it->get<std::string>();
  }
  return ev;
}

ScriptTrace parse_script(const json& j, const TraceParseOptions& options) {
  if (!j.is_object()) throw InputError("script is not an object");
  ScriptTrace s;
  s.script_url = require_string(j, "script_url");
  s.sha256 = require_string(j, "sha256");
  if (!is_sha256_hex(s.sha256)) throw InputError("sha256 is not 64 lowercase hex chars");
  const json& depth = require(j, "eval_depth");
  if (!depth.is_number_integer() || depth.get<std::int64_t>() < 0) {
    throw InputError("eval_depth must be a non-negative integer");
  }
  s.eval_depth = static_cast<std::uint32_t>(depth.get<std::int64_t>());
  const json& events = require(j, "events");
  if (!events.is_array()) throw InputError("events is not an array");
  s.events.reserve(events.size());
  for (const auto& e : events) s.events.push_back(parse_event(e, options));
  return s;
}

}  // namespace

PageTrace parse_trace_record(std::string_view line, const TraceParseOptions& options) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("record is not an object");

  PageTrace page;
  page.page_url = require_string(j, "page_url");
  const auto url = parse_url(page.page_url);
  if (!url) throw InputError("page_url is not an absolute URL: '" + page.page_url + "'");
  page.root_domain = url->host;
  if (const auto it = j.find("root_domain"); it != j.end() && !it->is_null()) {
    if (!it->is_string() || it->get<std::string>() != page.root_domain) {
      throw InputError("root_domain does not match the page_url host");
    }
  }
  page.observed_at = parse_utc(require_string(j, "observed_at"));

  if (const auto it = j.find("brand_labels"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw InputError("brand_labels is not an array");
    for (const auto& b : *it) {
      if (!b.is_string()) throw InputError("brand label is not a string");
      page.brand_labels.insert(b.get<std::string>());
    }
  }
  const json& scripts = require(j, "scripts");
  if (!scripts.is_array()) throw InputError("scripts is not an array");
  page.scripts.reserve(scripts.size());
  for (const auto& s : scripts) page.scripts.push_back(parse_script(s, options));
  return page;
}

std::string serialize_trace(const PageTrace& page) {
  ordered_json j;
  j["page_url"] = page.page_url;
  j["observed_at"] = format_utc(page.observed_at);
  j["brand_labels"] = page.brand_labels;
  ordered_json scripts = ordered_json::array();
  for (const auto& s : page.scripts) {
    ordered_json js;
    js["script_url"] = s.script_url;
    js["sha256"] = s.sha256;
    js["eval_depth"] = s.eval_depth;
    ordered_json events = ordered_json::array();
    for (const auto& e : s.events) {
      ordered_json je;
      je["name"] = e.name;
      je["kind"] = to_string(e.kind);
      if (e.arg0) je["arg0"] = *e.arg0;
      events.push_back(std::move(je));
    }
    js["events"] = std::move(events);
    scripts.push_back(std::move(js));
  }
  j["scripts"] = std::move(scripts);
  return j.dump();
}

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

namespace {

struct LineOutcome {
  std::optional<PageTrace> page;
  std::string error;
};

LineOutcome parse_one(const std::string& line, const TraceParseOptions& options) {
  LineOutcome out;
  if (line.empty()) {
    out.error = "empty line";
    return out;
  }
  try {
    out.page = parse_trace_record(line, options);
  } catch (const InputError& e) {
    out.error = e.what();
  }
  return out;
}

TraceParseResult collect(std::vector<LineOutcome>& outcomes) {
  TraceParseResult result;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].page) {
      result.pages.push_back(std::move(*outcomes[i].page));
    } else {
      spdlog::warn("trace line {} rejected: {}", i + 1, outcomes[i].error);
      result.rejected.push_back({i + 1, std::move(outcomes[i].error)});
    }
  }
  return result;
}

}  // namespace

TraceParseResult parse_trace_lines(const std::vector<std::string>& lines, const TraceParseOptions& options) {
  std::vector<LineOutcome> outcomes(lines.size());
  const auto n = static_cast<std::int64_t>(lines.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t i = 0; i < n; ++i) outcomes[i] = parse_one(lines[i], options);
  return collect(outcomes);
}

TraceParseResult parse_trace_lines_serial(const std::vector<std::string>& lines, const TraceParseOptions& options) {
  std::vector<LineOutcome> outcomes;
  outcomes.reserve(lines.size());
  for (const auto& line : lines) outcomes.push_back(parse_one(line, options));
  return collect(outcomes);
}

TraceParseResult parse_trace_stream(std::istream& in, const TraceParseOptions& options) {
  return parse_trace_lines(read_lines(in), options);
}

}  // namespace kitclust
