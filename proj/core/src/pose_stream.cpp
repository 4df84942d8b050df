#include "igss/pose_stream.hpp"

#include <algorithm>
#include <cmath>

#include "igss/error.hpp"
#include "json_codec.hpp"

namespace igss {

using codec::Json;

PlanDeviation plan_deviation(const std::string& plan_id, const ScrewPlan& plan, const RigidTransform& tool_to_image,
                             const Vec3& tip_image) {
  PlanDeviation d;
  d.plan_id = plan_id;
  d.entry_mm = (tip_image - plan.entry).norm();
  const Vec3 rel = tip_image - plan.entry;
  d.lateral_mm = (rel - rel.dot(plan.direction) * plan.direction).norm();
  const Vec3 axis = tool_to_image.rotation().col(2);
  d.angle_deg = rad_to_deg(std::acos(std::clamp(axis.dot(plan.direction), -1.0, 1.0)));
  return d;
}

std::string serialize_navigation_frame(const std::string& session_id, const NavigationFrame& frame) {
  Json plan = nullptr;
  if (frame.deviation) {
    plan = {{"plan_id", frame.deviation->plan_id},
            {"entry_deviation_mm", frame.deviation->entry_mm},
            {"lateral_deviation_mm", frame.deviation->lateral_mm},
            {"angle_deviation_deg", frame.deviation->angle_deg}};
  }
  const Json j = {{"schema_version", codec::kSchemaVersion},
                  {"session_id", session_id},
                  {"seq", frame.seq},
                  {"t_ms", frame.t_ms},
                  {"tracked", frame.tracked},
                  {"tool_to_image", frame.tracked ? codec::transform(frame.tool_to_image) : Json(nullptr)},
                  {"tip", frame.tracked ? codec::vec3(frame.tip_image) : Json(nullptr)},
                  {"plan", plan}};
  return j.dump();
}

// ---- Subscription ----------------------------------------------------------

Subscription::Subscription(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

void Subscription::push(const NavigationFrame& frame) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    if (queue_.size() >= capacity_) {
      queue_.pop_front();
      ++dropped_;
    }
    queue_.push_back(frame);
  }
  cv_.notify_one();
}

std::optional<NavigationFrame> Subscription::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
  if (queue_.empty()) return std::nullopt;
  NavigationFrame f = std::move(queue_.front());
  queue_.pop_front();
  return f;
}

std::vector<NavigationFrame> Subscription::drain() {
  std::lock_guard lock(mutex_);
  std::vector<NavigationFrame> out(queue_.begin(), queue_.end());
  queue_.clear();
  return out;
}

std::uint64_t Subscription::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

bool Subscription::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

void Subscription::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

// ---- PoseBroadcaster -------------------------------------------------------

std::shared_ptr<Subscription> PoseBroadcaster::subscribe(std::size_t capacity) {
  auto sub = std::make_shared<Subscription>(capacity);
  std::lock_guard lock(mutex_);
  if (closed_) {
    sub->close();
  } else {
    subscribers_.push_back(sub);
  }
  return sub;
}

void PoseBroadcaster::publish(const NavigationFrame& frame) {
  std::vector<std::shared_ptr<Subscription>> live;
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    ++published_;
    auto it = std::remove_if(subscribers_.begin(), subscribers_.end(), [&](const std::weak_ptr<Subscription>& w) {
      auto s = w.lock();
      if (!s || s->closed()) return true;
      live.push_back(std::move(s));
      return false;
    });
    subscribers_.erase(it, subscribers_.end());
  }
  for (auto& s : live) s->push(frame);
}

void PoseBroadcaster::close() {
  std::vector<std::weak_ptr<Subscription>> subs;
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
    subs.swap(subscribers_);
  }
  for (auto& w : subs) {
    if (auto s = w.lock()) s->close();
  }
}

std::size_t PoseBroadcaster::subscriber_count() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(
      std::count_if(subscribers_.begin(), subscribers_.end(), [](const auto& w) { return !w.expired(); }));
}

std::uint64_t PoseBroadcaster::published() const {
  std::lock_guard lock(mutex_);
  return published_;
}

// ---- frames ----------------------------------------------------------------

std::function<RigidTransform(double)> hover_over_plan(const NavigationScene& scene, const ScrewPlan& plan) {
  const RigidTransform image_to_tracker = compose(scene.drb_to_tracker, scene.image_to_drb);
  const Vec3 tip_offset = scene.stylus.tip_offset.value_or(Vec3(0, 0, 150));
  const Vec3 z = plan.direction.normalized();
  const Vec3 x = any_orthogonal(z);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return [image_to_tracker, tip_offset, r, x, y = z.cross(x), entry = plan.entry](double t_ms) {
    const double phase = 2.0 * kPi * t_ms / 4000.0;
    const Vec3 tip = entry + 1.5 * (std::cos(phase) * x + std::sin(phase) * y);
    const RigidTransform body_to_image(r, tip - r * tip_offset);
    return compose(image_to_tracker, body_to_image);
  };
}

NavigationFrame navigation_frame(const NavigationScene& scene, std::uint64_t k, double t_ms) {
  NavigationFrame out;
  out.seq = k;
  out.t_ms = t_ms;
  if (!scene.tool_path) return out;

  Rng rng = Rng::for_stream(scene.seed, k);
  TrackerFrame frame;
  frame.timestamp_ms = t_ms;
  const bool drb_hidden = std::any_of(scene.drb_occlusions.begin(), scene.drb_occlusions.end(),
                                      [&](const TimeWindow& w) { return w.contains(t_ms); });
  if (!drb_hidden) frame.observations.push_back(observe_tool(scene.drb, scene.drb_to_tracker, scene.noise, rng));
  frame.observations.push_back(observe_tool(scene.stylus, scene.tool_path(t_ms), scene.noise, rng));

  const auto tool_to_drb = navigate(frame, scene.stylus, scene.drb);
  if (!tool_to_drb) return out;
  out.tracked = true;
  out.tool_to_image = compose(scene.image_to_drb.inverse(), *tool_to_drb);
  out.tip_image = out.tool_to_image.apply(scene.stylus.tip_offset.value_or(Vec3::Zero()));
  if (scene.plan) out.deviation = plan_deviation(scene.plan->first, scene.plan->second, out.tool_to_image, out.tip_image);
  return out;
}

// ---- NavigationProducer ----------------------------------------------------

NavigationProducer::NavigationProducer(NavigationScene scene, double rate_hz, std::shared_ptr<PoseBroadcaster> out)
    : scene_(std::move(scene)), rate_hz_(rate_hz), out_(std::move(out)) {
  if (!(rate_hz_ > 0.0) || rate_hz_ > 1000.0) raise(ErrorKind::InvalidArgument, "navigation rate must be in (0, 1000] Hz");
  if (!out_) raise(ErrorKind::InvalidArgument, "navigation producer needs a broadcaster");
  if (!scene_.tool_path && scene_.plan) scene_.tool_path = hover_over_plan(scene_, scene_.plan->second);
}

NavigationProducer::~NavigationProducer() { stop(); }

void NavigationProducer::start() {
  std::lock_guard lock(mutex_);
  if (running_) return;
  stop_ = false;
  running_ = true;
  thread_ = std::thread([this] { run(); });
}

void NavigationProducer::stop() {
  std::thread t;
  {
    std::lock_guard lock(mutex_);
    if (!running_) return;
    stop_ = true;
    running_ = false;
    t.swap(thread_);
  }
  cv_.notify_all();
  if (t.joinable()) t.join();
}

bool NavigationProducer::running() const {
  std::lock_guard lock(mutex_);
  return running_;
}

void NavigationProducer::run() {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration<double, std::milli>(1000.0 / rate_hz_);
  const auto t0 = clock::now();
  for (std::uint64_t k = 0;; ++k) {
    const double t_ms = static_cast<double>(k) * period.count();
    out_->publish(navigation_frame(scene_, k, t_ms));
    std::unique_lock lock(mutex_);
    const auto next = t0 + std::chrono::duration_cast<clock::duration>(period * static_cast<double>(k + 1));
    if (cv_.wait_until(lock, next, [&] { return stop_; })) return;
  }
}

}  // namespace igss
