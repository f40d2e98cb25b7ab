#include "shapeq/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include <json.hpp>

#include "shapeq/error.hpp"

namespace shapeq::analytics {

namespace {

struct FeatureName {
  Feature feature;
  std::string_view name;
};

constexpr std::array kFeatureNames{
    FeatureName{Feature::sketch, "sketch"},
    FeatureName{Feature::equation, "equation"},
    FeatureName{Feature::pattern_upload, "patternUpload"},
    FeatureName{Feature::smoothing, "smoothing"},
    FeatureName{Feature::range_selection, "rangeSelection"},
    FeatureName{Feature::range_invariance, "rangeInvariance"},
    FeatureName{Feature::data_selection, "dataSelection"},
    FeatureName{Feature::display_control, "displayControl"},
    FeatureName{Feature::filter, "filter"},
    FeatureName{Feature::dynamic_class, "dynamicClass"},
    FeatureName{Feature::drag_and_drop, "dragAndDrop"},
    FeatureName{Feature::recommendations, "recommendations"},
    FeatureName{Feature::break_marker, "breakMarker"},
};

std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string_view to_string(Feature f) {
  for (const auto& entry : kFeatureNames) {
    if (entry.feature == f) return entry.name;
  }
  return "?";
}

std::string_view to_string(Process p) {
  switch (p) {
    case Process::top_down: return "TopDown";
    case Process::context_creation: return "ContextCreation";
    case Process::bottom_up: return "BottomUp";
  }
  return "?";
}

Feature parse_feature(std::string_view name) {
  for (const auto& entry : kFeatureNames) {
    if (entry.name == name) return entry.feature;
  }
  throw Error(Errc::vocabulary, "unknown feature '" + std::string(name) + "'");
}

Process classify(Feature f) {
  switch (f) {
    case Feature::sketch:
    case Feature::equation:
    case Feature::pattern_upload:
    case Feature::smoothing:
    case Feature::range_selection:
    case Feature::range_invariance:
      return Process::top_down;
    case Feature::data_selection:
    case Feature::display_control:
    case Feature::filter:
    case Feature::dynamic_class:
      return Process::context_creation;
    case Feature::drag_and_drop:
    case Feature::recommendations:
      return Process::bottom_up;
    case Feature::break_marker:
      break;
  }
  throw Error(Errc::vocabulary, "break markers have no sensemaking process");
}

std::vector<Segment> segment_sessions(std::span<const Event> events) {
  std::vector<Segment> segments;
  Segment current;
  auto flush = [&] {
    if (current.empty()) return;
    for (Event& e : current) e.inquiry_id = static_cast<int>(segments.size());
    segments.push_back(std::move(current));
    current.clear();
  };
  for (const Event& e : events) {
    if (e.feature == Feature::break_marker) {
      flush();
    } else {
      current.push_back(e);
    }
  }
  flush();
  return segments;
}

MarkovModel transition_matrix(std::span<const Segment> segments) {
  MarkovModel model;
  for (const Segment& seg : segments) {
    for (std::size_t i = 1; i < seg.size(); ++i) {
      auto from = static_cast<std::size_t>(classify(seg[i - 1].feature));
      auto to = static_cast<std::size_t>(classify(seg[i].feature));
      ++model.counts[from][to];
      ++model.total_transitions;
    }
  }
  for (std::size_t r = 0; r < kProcessCount; ++r) {
    std::uint64_t row = std::accumulate(model.counts[r].begin(), model.counts[r].end(), std::uint64_t{0});
    model.empty_row[r] = row == 0;
    for (std::size_t c = 0; c < kProcessCount; ++c) {
      model.transition[r][c] = row ? static_cast<double>(model.counts[r][c]) / static_cast<double>(row) : 0.0;
    }
  }
  return model;
}

std::array<double, kProcessCount> eigenvector_centrality(const MarkovModel& model, double damping) {
  if (model.total_transitions == 0) {
    throw Error(Errc::no_data, "no transitions recorded; centrality is undefined");
  }
  if (!(damping > 0.0 && damping <= 1.0)) throw Error(Errc::parameter, "damping must be in (0, 1]");
  constexpr double kUniform = 1.0 / static_cast<double>(kProcessCount);

  Matrix3 g{};
  for (std::size_t r = 0; r < kProcessCount; ++r) {
    for (std::size_t c = 0; c < kProcessCount; ++c) {
      double p = model.empty_row[r] ? kUniform : model.transition[r][c];
      g[r][c] = damping * p + (1.0 - damping) * kUniform;
    }
  }

  std::array<double, kProcessCount> pi{};
  pi.fill(kUniform);
  for (int iter = 0; iter < 10'000; ++iter) {
    std::array<double, kProcessCount> next{};
    for (std::size_t r = 0; r < kProcessCount; ++r) {
      for (std::size_t c = 0; c < kProcessCount; ++c) next[c] += pi[r] * g[r][c];
    }
    double sum = std::accumulate(next.begin(), next.end(), 0.0);
    double change = 0.0;
    for (std::size_t c = 0; c < kProcessCount; ++c) {
      next[c] /= sum;
      change += std::abs(next[c] - pi[c]);
    }
    pi = next;
    if (change < 1e-12) break;
  }
  return pi;
}

MarkovModel build_model(std::span<const Event> events, const std::optional<std::string>& domain,
                        double damping) {
  std::map<std::string, std::vector<Event>> sessions;
  for (const Event& e : events) {
    if (domain && e.domain != domain) continue;
    sessions[e.session_id].push_back(e);
  }
  std::vector<Segment> segments;
  for (auto& [_, log] : sessions) {
    std::stable_sort(log.begin(), log.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    for (auto& seg : segment_sessions(log)) segments.push_back(std::move(seg));
  }
  MarkovModel model = transition_matrix(segments);
  if (model.total_transitions > 0) {
    model.centrality = eigenvector_centrality(model, damping);
    model.has_centrality = true;
  }
  return model;
}

std::vector<Event> read_events(std::string_view ndjson) {
  std::vector<Event> events;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= ndjson.size()) {
    std::size_t end = ndjson.find('\n', start);
    if (end == std::string_view::npos) end = ndjson.size();
    std::string_view line = ndjson.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == ndjson.size()) break;
      continue;
    }
    auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(Errc::format, where() + "not a JSON object");
    Event e;
    try {
      e.session_id = j.at("sessionId").get<std::string>();
      e.timestamp = j.at("timestamp").get<std::int64_t>();
      bool is_break = j.value("breakMarker", false);
      if (is_break) {
        e.feature = Feature::break_marker;
      } else {
        e.feature = parse_feature(j.at("feature").get<std::string>());
      }
      if (j.contains("domain") && !j["domain"].is_null()) e.domain = j["domain"].get<std::string>();
    } catch (const Error& err) {
      throw Error(err.code(), where() + err.detail());
    } catch (const nlohmann::json::exception& err) {
      throw Error(Errc::format, where() + err.what());
    }
    events.push_back(std::move(e));
    if (end == ndjson.size()) break;
  }
  return events;
}

std::string to_ndjson(const Event& e) {
  nlohmann::json j;
  j["sessionId"] = e.session_id;
  j["timestamp"] = e.timestamp;
  j["feature"] = std::string(to_string(e.feature));
  if (e.feature == Feature::break_marker) j["breakMarker"] = true;
  if (e.domain) j["domain"] = *e.domain;
  return j.dump() + "\n";
}

std::string to_json(const MarkovModel& model) {
  nlohmann::json j;
  nlohmann::json states = nlohmann::json::array();
  for (Process p : kProcesses) states.push_back(std::string(to_string(p)));
  j["states"] = states;
  j["counts"] = model.counts;
  j["transition"] = model.transition;
  j["emptyRows"] = model.empty_row;
  j["totalTransitions"] = model.total_transitions;
  if (model.has_centrality) {
    j["centrality"] = model.centrality;
  } else {
    j["centrality"] = nullptr;
  }
  return j.dump();
}

std::string to_dot(const MarkovModel& model, std::string_view graph_name) {
  std::string out = "digraph " + std::string(graph_name) + " {\n";
  for (Process p : kProcesses) {
    auto i = static_cast<std::size_t>(p);
    out += "  " + std::string(to_string(p)) + " [label=\"" + std::string(to_string(p));
    if (model.has_centrality) out += "\\n" + two_decimals(model.centrality[i]);
    out += "\"];\n";
  }
  for (Process from : kProcesses) {
    for (Process to : kProcesses) {
      double p = model.transition[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)];
      if (p == 0.0) continue;
      out += "  " + std::string(to_string(from)) + " -> " + std::string(to_string(to)) +
             " [label=\"" + two_decimals(p) + "\"];\n";
    }
  }
  out += "}\n";
  return out;
}

}  // namespace shapeq::analytics
