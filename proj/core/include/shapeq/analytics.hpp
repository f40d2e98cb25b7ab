#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shapeq::analytics {

/// Logged feature vocabulary. `break_marker` starts a new line of inquiry.
enum class Feature {
  sketch,
  equation,
  pattern_upload,
  smoothing,
  range_selection,
  range_invariance,
  data_selection,
  display_control,
  filter,
  dynamic_class,
  drag_and_drop,
  recommendations,
  break_marker,
};

enum class Process { top_down = 0, context_creation = 1, bottom_up = 2 };

inline constexpr std::size_t kProcessCount = 3;
inline constexpr std::array kProcesses{Process::top_down, Process::context_creation,
                                       Process::bottom_up};

/// Wire names, e.g. "patternUpload", "dragAndDrop", "breakMarker".
std::string_view to_string(Feature f);
/// "TopDown", "ContextCreation", "BottomUp".
std::string_view to_string(Process p);

/// Throws Error(Errc::vocabulary) for unknown names.
Feature parse_feature(std::string_view name);

/// Total over every feature except break_marker, which throws
/// Error(Errc::vocabulary).
Process classify(Feature f);

struct Event {
  std::int64_t timestamp = 0;  ///< ms since epoch
  std::string session_id;
  Feature feature = Feature::break_marker;
  std::optional<std::string> domain;
  int inquiry_id = -1;  ///< assigned by segment_sessions
};

using Segment = std::vector<Event>;

/// Splits one session's time-ordered events at break markers. Markers are
/// dropped, empty segments are dropped, and inquiry ids count from 0.
std::vector<Segment> segment_sessions(std::span<const Event> events);

using Matrix3 = std::array<std::array<double, kProcessCount>, kProcessCount>;
using Counts3 = std::array<std::array<std::uint64_t, kProcessCount>, kProcessCount>;

struct MarkovModel {
  Counts3 counts{};
  Matrix3 transition{};  ///< row-normalized counts
  std::array<bool, kProcessCount> empty_row{};  ///< rows with no outgoing transition
  std::array<double, kProcessCount> centrality{};
  bool has_centrality = false;
  std::uint64_t total_transitions = 0;
};

/// Counts consecutive pairs within each segment, never across segments.
MarkovModel transition_matrix(std::span<const Segment> segments);

inline constexpr double kDefaultDamping = 0.99;

/// Stationary distribution of damping*P + (1-damping)*U, where rows of P
/// without data are replaced by the uniform row. Power iteration from the
/// uniform vector until the L1 change is below 1e-12 or 10,000 steps.
/// Throws Error(Errc::no_data) when every count is zero.
std::array<double, kProcessCount> eigenvector_centrality(const MarkovModel& model,
                                                         double damping = kDefaultDamping);

/// Orders events per session by timestamp (stable on arrival), segments each
/// session, pools all transitions, and fills in centrality when any exist.
/// With `domain` set, only events tagged with that domain take part.
MarkovModel build_model(std::span<const Event> events,
                        const std::optional<std::string>& domain = std::nullopt,
                        double damping = kDefaultDamping);

/// One JSON object per line: {"sessionId","timestamp","feature"} with
/// optional "breakMarker": true and "domain". Throws Error(Errc::format) or
/// Error(Errc::vocabulary) naming the line.
std::vector<Event> read_events(std::string_view ndjson);
std::string to_ndjson(const Event& e);

std::string to_json(const MarkovModel& model);
/// Graphviz digraph: node labels carry centrality, edge labels probability
/// (two decimals). Zero-probability edges are omitted.
std::string to_dot(const MarkovModel& model, std::string_view graph_name = "sensemaking");

}  // namespace shapeq::analytics
