#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "igss/geometry.hpp"

namespace igss {

using FrameId = std::string;

namespace frames {
inline const FrameId kTracker = "TRACKER";
inline const FrameId kDrb = "DRB";
inline const FrameId kCtImage = "CT_IMAGE";
inline const FrameId kCarmAp = "CARM_AP";
inline const FrameId kCarmLat = "CARM_LAT";
inline const FrameId kRobotBase = "ROBOT_BASE";
inline const FrameId kTool = "TOOL";
inline const FrameId kJig = "JIG";
}  // namespace frames

// Immutable set of named frames linked by rigid transforms. An edge
// (from, to) holds the transform mapping points in `from` into `to`; it can be
// traversed backwards, in which case its inverse is used.
class FrameGraph {
 public:
  struct Edge {
    FrameId from;
    FrameId to;
    RigidTransform transform;
  };

  FrameGraph() = default;

  // Returns a new graph with the edge added. Throws InvalidArgument when the
  // pair is already connected by a direct edge in either direction.
  [[nodiscard]] FrameGraph with_edge(const FrameId& from, const FrameId& to,
                                     const RigidTransform& from_to_to) const;
  // Returns a new graph with the edge (from, to) replaced or inserted.
  [[nodiscard]] FrameGraph with_edge_replaced(const FrameId& from, const FrameId& to,
                                              const RigidTransform& from_to_to) const;

  bool has_frame(const FrameId& id) const;
  bool connected(const FrameId& from, const FrameId& to) const;
  const std::vector<Edge>& edges() const { return edges_; }

  // Composition of edge transforms along the shortest path; NoPath when the
  // frames are disconnected.
  RigidTransform resolve(const FrameId& from, const FrameId& to) const;

  // Frame sequence of the shortest path (inclusive); empty when none exists.
  std::vector<FrameId> path(const FrameId& from, const FrameId& to) const;

 private:
  std::vector<Edge> edges_;
};

RigidTransform resolve(const FrameGraph& g, const FrameId& from, const FrameId& to);

}  // namespace igss
