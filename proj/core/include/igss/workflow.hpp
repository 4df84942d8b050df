// Surgical workflow as an event-sourced state machine. Every command appends
// an event to the session log; the session state is the fold of `apply` over
// that log, so replaying a stored log reproduces every intermediate state.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "igss/planning.hpp"
#include "igss/registration.hpp"
#include "igss/robot.hpp"

namespace igss {

enum class WorkflowState {
  PREOP_IMAGING,
  PATIENT_INPUT,
  PLANNING,
  INTRAOP_PREP,
  INSTRUMENT_CALIBRATION,
  DRB_ATTACHED,
  ROBOT_CART_POSITIONED,
  CARM_CALIBRATOR_MOUNTED,
  INTRAOP_IMAGING,
  REGISTRATION,
  REGISTRATION_VERIFIED,
  REGISTRATION_REJECTED,
  NAVIGATION,
  ROBOT_ALIGNED,
  SCREW_PLACED,
  VERIFICATION_IMAGING,
  COMPLETE,
};
std::string to_string(WorkflowState s);
WorkflowState workflow_state_from_string(const std::string& s);
const std::vector<WorkflowState>& all_workflow_states();

enum class Mode { NAVIGATION_ONLY, ROBOT_ASSISTED };
enum class Modality { POINT_BASED_PREOP_CT, AUTOMATIC_INTRAOP_2D, INTRAOP_3D };
enum class Technique { OPEN, MIS };
enum class ShotPhase { PLACEMENT, VERIFICATION };

std::string to_string(Mode m);
std::string to_string(Modality m);
std::string to_string(Technique t);
std::string to_string(ShotPhase p);
Mode mode_from_string(const std::string& s);
Modality modality_from_string(const std::string& s);
Technique technique_from_string(const std::string& s);
ShotPhase shot_phase_from_string(const std::string& s);

// Conditions attached to an edge. REGISTRATION_ACCEPTED/REJECTED edges are
// taken only by the verification event, never by a named transition.
enum class Guard { NONE, ROBOT_MODE, NAVIGATION_MODE, REGISTRATION_ACCEPTED, REGISTRATION_REJECTED };
std::string to_string(Guard g);
Guard guard_from_string(const std::string& s);

struct Edge {
  WorkflowState from;
  std::string event;
  WorkflowState to;
  Guard guard = Guard::NONE;
};

using EdgeTable = std::vector<Edge>;

EdgeTable default_edge_table();
// {"schema_version": 1, "edges": [{"from", "event", "to", "guard"}]}
std::string serialize_edge_table(const EdgeTable& table);
EdgeTable parse_edge_table(const std::string& text);

// Distinct named events (excluding the verification-only edges) in table order.
std::vector<std::string> transition_names(const EdgeTable& table);

struct SessionConfig {
  Mode mode = Mode::NAVIGATION_ONLY;
  Modality modality = Modality::POINT_BASED_PREOP_CT;
  Technique technique = Technique::OPEN;
};

// ---- events --------------------------------------------------------------

struct TransitionEvent {
  std::string name;
};
struct ConfigureEvent {
  SessionConfig config;
};
struct PlanUpsertEvent {
  std::string plan_id;
  ScrewPlan plan;
};
struct PlanDeleteEvent {
  std::string plan_id;
};
struct RegistrationEvent {
  Modality modality = Modality::POINT_BASED_PREOP_CT;
  RigidTransform image_to_drb;
  double fre_rms = 0.0;
  std::vector<double> residuals;
  std::size_t n_points = 0;
};
struct VerificationEvent {
  double rms = 0.0;
  double threshold = 2.0;
  std::size_t n_probes = 0;
  bool accepted = false;
};
struct ShotEvent {
  std::string screw_id;
  ShotPhase phase = ShotPhase::PLACEMENT;
};
struct RobotAlignedEvent {
  std::string plan_id;
  JointState target = JointState::Zero();
  double min_clearance = 0.0;
};
struct ScrewResultEvent {
  std::string screw_id;
  ScrewPlan achieved;
  BreachReport report;
};

using EventPayload = std::variant<TransitionEvent, ConfigureEvent, PlanUpsertEvent, PlanDeleteEvent, RegistrationEvent,
                                  VerificationEvent, ShotEvent, RobotAlignedEvent, ScrewResultEvent>;

struct Event {
  std::uint64_t seq = 0;
  double timestamp_ms = 0.0;
  EventPayload payload;
};

std::string event_type(const EventPayload& p);

// One JSON object per line.
std::string serialize_event(const Event& e);
Event parse_event(const std::string& line);
std::string serialize_log(const std::vector<Event>& log);
std::vector<Event> parse_log(const std::string& text);

// ---- derived state -------------------------------------------------------

class RadiationLedger {
 public:
  void record(const std::string& screw_id, ShotPhase phase);
  std::uint64_t count(const std::string& screw_id) const;
  std::uint64_t count(const std::string& screw_id, ShotPhase phase) const;
  std::uint64_t total() const { return total_; }
  std::uint64_t total(ShotPhase phase) const;
  std::size_t screw_count() const { return per_screw_.size(); }
  // total / number of screws with at least one shot; 0 when empty.
  double mean_per_screw() const;
  // total == sum of the per-screw, per-phase counts.
  bool consistent() const;
  std::vector<std::string> screws() const;

 private:
  struct Counts {
    std::uint64_t placement = 0;
    std::uint64_t verification = 0;
  };
  std::map<std::string, Counts> per_screw_;
  std::uint64_t total_ = 0;
};

struct ScrewOutcome {
  ScrewPlan achieved;
  BreachReport report;
};

struct SessionState {
  WorkflowState state = WorkflowState::PREOP_IMAGING;
  SessionConfig config;
  std::map<std::string, ScrewPlan> plans;
  std::optional<RegistrationEvent> registration;
  std::optional<VerificationEvent> verification;
  bool registration_verified = false;
  RadiationLedger ledger;
  std::map<std::string, ScrewOutcome> outcomes;
  std::vector<double> registration_fre;  // every registration attempt, in order
  std::optional<JointState> robot_joints;  // last confirmed robot target
  std::uint64_t events = 0;
};

// States in which a C-arm shot may be recorded.
bool imaging_legal(WorkflowState s);

// Pure reducer. IllegalTransition / IllegalState / NotFound on a rejected
// event; the input state is never modified.
SessionState apply(const EdgeTable& table, const SessionState& state, const Event& event);
SessionState replay(const EdgeTable& table, const std::vector<Event>& log);

struct Probe {
  Vec3 probed;    // DRB frame, mm
  Vec3 landmark;  // image space, mm
};

struct VerificationResult {
  bool accepted = false;
  double rms = 0.0;
};

// {"schema_version", "session_id", "interim", "state", "mode", "modality",
// "technique", "screws": [...], "grades": {"A".."E": percent}, "shots": {...},
// "registration": {...}}. Deterministic key order and formatting.
std::string build_report(const std::string& session_id, const SessionState& state, bool interim);

class Session {
 public:
  using Clock = std::function<double()>;  // ms

  Session(std::string id, EdgeTable table, Clock clock = nullptr);
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;
  // Rebuilds a session by replaying a stored log (sequence numbers 1..n).
  static std::unique_ptr<Session> from_log(std::string id, EdgeTable table, const std::vector<Event>& log,
                                           Clock clock = nullptr);

  const std::string& id() const { return id_; }
  // Consistent snapshot; safe to call from any thread.
  std::shared_ptr<const SessionState> snapshot() const;
  std::vector<Event> log() const;
  const EdgeTable& edges() const { return table_; }

  // Each command validates against the current state, appends one event and
  // returns it. Concurrent commands on one session are serialized.
  Event advance(const std::string& transition);
  Event configure(const SessionConfig& config);
  Event upsert_plan(const std::string& plan_id, const ScrewPlan& plan);
  Event delete_plan(const std::string& plan_id);
  Event record_registration(const RegistrationEvent& registration);
  VerificationResult verify_registration(const std::vector<Probe>& probes, double threshold = 2.0);
  Event record_shot(const std::string& screw_id, ShotPhase phase);
  Event record_robot_alignment(const std::string& plan_id, const JointState& target, double min_clearance);
  Event record_screw_result(const std::string& screw_id, const ScrewPlan& achieved, const BreachReport& report);

  // IllegalState unless COMPLETE or `interim`.
  std::string report(bool interim = false) const;

  // Invoked with every appended event while the session lock is held.
  void on_append(std::function<void(const Event&)> sink);

 private:
  Event commit(EventPayload payload);

  std::string id_;
  EdgeTable table_;
  Clock clock_;
  mutable std::mutex write_mutex_;
  mutable std::mutex snapshot_mutex_;
  std::vector<Event> log_;
  std::shared_ptr<const SessionState> state_;
  std::function<void(const Event&)> sink_;
};

}  // namespace igss
