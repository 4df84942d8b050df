#include "igss/frame_graph.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "igss/error.hpp"

namespace igss {

namespace {

bool same_pair(const FrameGraph::Edge& e, const FrameId& a, const FrameId& b) {
  return (e.from == a && e.to == b) || (e.from == b && e.to == a);
}

}  // namespace

FrameGraph FrameGraph::with_edge(const FrameId& from, const FrameId& to,
                                 const RigidTransform& from_to_to) const {
  if (from == to) raise(ErrorKind::InvalidArgument, "self edge on frame " + from);
  for (const auto& e : edges_) {
    if (same_pair(e, from, to)) raise(ErrorKind::InvalidArgument, "duplicate edge " + from + " -> " + to);
  }
  FrameGraph g = *this;
  g.edges_.push_back({from, to, from_to_to});
  return g;
}

FrameGraph FrameGraph::with_edge_replaced(const FrameId& from, const FrameId& to,
                                          const RigidTransform& from_to_to) const {
  FrameGraph g = *this;
  std::erase_if(g.edges_, [&](const Edge& e) { return same_pair(e, from, to); });
  return g.with_edge(from, to, from_to_to);
}

bool FrameGraph::has_frame(const FrameId& id) const {
  return std::any_of(edges_.begin(), edges_.end(),
                     [&](const Edge& e) { return e.from == id || e.to == id; });
}

bool FrameGraph::connected(const FrameId& from, const FrameId& to) const {
  return !path(from, to).empty();
}

std::vector<FrameId> FrameGraph::path(const FrameId& from, const FrameId& to) const {
  if (from == to) return {from};
  // Breadth-first search; neighbors visited in edge insertion order so the
  // chosen path is deterministic.
  std::map<FrameId, FrameId> parent;
  std::set<FrameId> seen{from};
  std::deque<FrameId> queue{from};
  while (!queue.empty()) {
    const FrameId cur = queue.front();
    queue.pop_front();
    for (const auto& e : edges_) {
      const FrameId* next = nullptr;
      if (e.from == cur) next = &e.to;
      else if (e.to == cur) next = &e.from;
      if (next == nullptr || seen.count(*next)) continue;
      seen.insert(*next);
      parent[*next] = cur;
      if (*next == to) {
        std::vector<FrameId> out{to};
        while (out.back() != from) out.push_back(parent.at(out.back()));
        std::reverse(out.begin(), out.end());
        return out;
      }
      queue.push_back(*next);
    }
  }
  return {};
}

RigidTransform FrameGraph::resolve(const FrameId& from, const FrameId& to) const {
  const auto frames = path(from, to);
  if (frames.empty()) raise(ErrorKind::NoPath, "no path from " + from + " to " + to);
  RigidTransform acc;
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    const auto& a = frames[i];
    const auto& b = frames[i + 1];
    for (const auto& e : edges_) {
      if (e.from == a && e.to == b) {
        acc = compose(e.transform, acc);
        break;
      }
      if (e.from == b && e.to == a) {
        acc = compose(e.transform.inverse(), acc);
        break;
      }
    }
  }
  return acc;
}

RigidTransform resolve(const FrameGraph& g, const FrameId& from, const FrameId& to) {
  return g.resolve(from, to);
}

}  // namespace igss
