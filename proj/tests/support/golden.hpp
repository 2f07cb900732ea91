#pragma once

#include "travex/protocol.hpp"

namespace travex::testing {

/// Small fixed message behind tests/fixtures/golden_request.frame.
inline UnifiedGraphMessage golden_message() {
  UnifiedGraphMessage m;
  m.mission_id = "golden";
  m.static_transform.rotation = {{{0.6, -0.8, 0.0}, {0.8, 0.6, 0.0}, {0.0, 0.0, 1.0}}};
  m.static_transform.translation = {1.0, -2.0, 0.25};
  m.scan = {3, 0x0123456789abcdefULL};
  m.graph.add_node({0, RobotState(0.0, 0.0, 0.3, 0.0), 0.1, false, 0.9});
  m.graph.add_node({1, RobotState(1.0, 0.0, 0.3, 0.0), 0.2, false, 0.8});
  m.graph.add_node({2, RobotState(2.0, 0.5, 0.3, 0.25), 0.75, true, 0.6});
  m.graph.add_node({3, RobotState(4.0, 4.0, 0.3, -1.5), 0.9, true, std::nullopt});
  m.graph.add_edge(0, 1);
  m.graph.add_edge(1, 2);
  m.candidate_path.ids = {0, 1, 2};
  m.candidate_path.length = path_length(m.graph, m.candidate_path.ids);
  m.candidate_path.confidence = 0.3;
  m.frontier_ids = {2, 3};
  return m;
}

}  // namespace travex::testing
