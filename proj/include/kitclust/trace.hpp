#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kitclust/time.hpp"

namespace kitclust {

enum class AccessKind { call, construct, get, set };

std::string_view to_string(AccessKind kind);
std::optional<AccessKind> parse_access_kind(std::string_view text);

struct ApiEvent {
  std::string name;  // "Interface.member"
  AccessKind kind = AccessKind::call;
  std::optional<std::string> arg0;

  bool operator==(const ApiEvent&) const = default;
};

// Sentinel script_url for inline <script> blocks.
inline constexpr std::string_view kInlineScript = "inline";

struct ScriptTrace {
  std::string script_url;
  std::string sha256;
  std::uint32_t eval_depth = 0;
  std::vector<ApiEvent> events;

  bool operator==(const ScriptTrace&) const = default;
};

struct PageTrace {
  std::string page_url;
  std::string root_domain;  // host of page_url
  Timestamp observed_at{};
  std::set<std::string> brand_labels;
  std::vector<ScriptTrace> scripts;

  // "<page_url>@<observed_at>"
  std::string page_id() const;

  bool operator==(const PageTrace&) const = default;
};

// "<kind>:<Interface.member>"
using FeatureToken = std::string;

FeatureToken canonical_token(const ApiEvent& event);

// Interface half of a token or event name ("call:Window.fetch" -> "Window").
std::string_view token_interface(std::string_view token);
std::string_view token_member(std::string_view token);
std::optional<AccessKind> token_kind(std::string_view token);

bool is_valid_api_name(std::string_view name);

// Splits a page id back into url and timestamp text.
std::pair<std::string, std::string> split_page_id(std::string_view page_id);

struct TraceParseOptions {
  // arg0 is kept only for event names on this list.
  std::set<std::string, std::less<>> argument_bearing{"Window.fetch", "XMLHttpRequest.open", "Window.eval"};
};

struct RejectedLine {
  std::size_t line_number;  // 1-based
  std::string reason;
};

struct TraceParseResult {
  std::vector<PageTrace> pages;
  std::vector<RejectedLine> rejected;
};

// Throws InputError describing the first violation.
PageTrace parse_trace_record(std::string_view line, const TraceParseOptions& options = {});

std::string serialize_trace(const PageTrace& page);

// Lines are parsed in parallel; accepted pages keep input order. Each
// rejected line is logged with its line number.
TraceParseResult parse_trace_stream(std::istream& in, const TraceParseOptions& options = {});
TraceParseResult parse_trace_lines(const std::vector<std::string>& lines, const TraceParseOptions& options = {});

// Single-threaded twin of parse_trace_lines.
TraceParseResult parse_trace_lines_serial(const std::vector<std::string>& lines,
                                          const TraceParseOptions& options = {});

std::vector<std::string> read_lines(std::istream& in);

}  // namespace kitclust
