// Navigation pose fan-out: one producer per session publishes frames at a
// fixed rate, any number of subscribers read them through bounded queues that
// drop the oldest frame instead of blocking the producer.
#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "igss/geometry.hpp"
#include "igss/planning.hpp"
#include "igss/rng.hpp"
#include "igss/tracking.hpp"

namespace igss {

struct PlanDeviation {
  std::string plan_id;
  double entry_mm = 0.0;   // tip to the planned entry point
  double lateral_mm = 0.0; // tip to the planned axis line
  double angle_deg = 0.0;  // tool axis vs planned direction
};

struct NavigationFrame {
  std::uint64_t seq = 0;
  double t_ms = 0.0;
  // False when the DRB or the tool could not be tracked; pose fields are then
  // left at identity / zero and must not be displayed.
  bool tracked = false;
  RigidTransform tool_to_image;
  Vec3 tip_image = Vec3::Zero();
  std::optional<PlanDeviation> deviation;
};

PlanDeviation plan_deviation(const std::string& plan_id, const ScrewPlan& plan, const RigidTransform& tool_to_image,
                             const Vec3& tip_image);

// {"schema_version", "session_id", "seq", "t_ms", "tracked", "tool_to_image",
// "tip", "plan": {...} | null}
std::string serialize_navigation_frame(const std::string& session_id, const NavigationFrame& frame);

class Subscription {
 public:
  explicit Subscription(std::size_t capacity);

  // Next frame, waiting up to `timeout`; nullopt on timeout or once closed
  // and drained.
  std::optional<NavigationFrame> pop(std::chrono::milliseconds timeout);
  std::vector<NavigationFrame> drain();
  std::uint64_t dropped() const;
  bool closed() const;
  void close();

 private:
  friend class PoseBroadcaster;
  void push(const NavigationFrame& frame);

  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<NavigationFrame> queue_;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
};

class PoseBroadcaster {
 public:
  std::shared_ptr<Subscription> subscribe(std::size_t capacity = 64);
  void publish(const NavigationFrame& frame);
  // Closes every subscription; later subscribers start closed.
  void close();
  std::size_t subscriber_count() const;
  std::uint64_t published() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::weak_ptr<Subscription>> subscribers_;
  std::uint64_t published_ = 0;
  bool closed_ = false;
};

// Everything the producer needs to synthesize tracker frames for one session.
struct NavigationScene {
  ToolDefinition stylus = default_stylus();
  ToolDefinition drb = default_drb();
  RigidTransform drb_to_tracker;
  RigidTransform image_to_drb;  // registration estimate
  MarkerNoise noise;
  std::uint64_t seed = 0;
  // Tool pose (body -> tracker) at time t; the default hovers the stylus
  // over `plan` when one is set.
  std::function<RigidTransform(double t_ms)> tool_path;
  std::optional<std::pair<std::string, ScrewPlan>> plan;
  std::vector<TimeWindow> drb_occlusions;
};

// Frame k of the scene at time t (deterministic in seed and k).
NavigationFrame navigation_frame(const NavigationScene& scene, std::uint64_t k, double t_ms);

// Scripted stylus: tip circling the plan entry (radius 1.5 mm, 4 s period),
// shaft along the planned direction, expressed in tracker coordinates.
std::function<RigidTransform(double)> hover_over_plan(const NavigationScene& scene, const ScrewPlan& plan);

class NavigationProducer {
 public:
  NavigationProducer(NavigationScene scene, double rate_hz, std::shared_ptr<PoseBroadcaster> out);
  ~NavigationProducer();
  NavigationProducer(const NavigationProducer&) = delete;
  NavigationProducer& operator=(const NavigationProducer&) = delete;

  void start();
  void stop();
  bool running() const;
  double rate_hz() const { return rate_hz_; }

 private:
  void run();

  NavigationScene scene_;
  double rate_hz_;
  std::shared_ptr<PoseBroadcaster> out_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  bool stop_ = false;
  bool running_ = false;
  std::thread thread_;
};

}  // namespace igss
