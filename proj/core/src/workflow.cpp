#include "igss/workflow.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <set>

#include "igss/error.hpp"

namespace igss {

namespace {

constexpr std::array<const char*, 17> kStateNames = {
    "PREOP_IMAGING",        "PATIENT_INPUT",   "PLANNING",           "INTRAOP_PREP",
    "INSTRUMENT_CALIBRATION", "DRB_ATTACHED",  "ROBOT_CART_POSITIONED", "CARM_CALIBRATOR_MOUNTED",
    "INTRAOP_IMAGING",      "REGISTRATION",    "REGISTRATION_VERIFIED", "REGISTRATION_REJECTED",
    "NAVIGATION",           "ROBOT_ALIGNED",   "SCREW_PLACED",       "VERIFICATION_IMAGING",
    "COMPLETE"};

template <typename E, std::size_t N>
E enum_from(const std::array<const char*, N>& names, const std::string& s, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (s == names[i]) return static_cast<E>(i);
  }
  raise(ErrorKind::ParseError, std::string("unknown ") + what + " " + s);
}

constexpr std::array<const char*, 2> kModeNames = {"NAVIGATION_ONLY", "ROBOT_ASSISTED"};
constexpr std::array<const char*, 3> kModalityNames = {"POINT_BASED_PREOP_CT", "AUTOMATIC_INTRAOP_2D", "INTRAOP_3D"};
constexpr std::array<const char*, 2> kTechniqueNames = {"OPEN", "MIS"};
constexpr std::array<const char*, 2> kPhaseNames = {"placement", "verification"};
constexpr std::array<const char*, 5> kGuardNames = {"none", "robot_mode", "navigation_mode", "registration_accepted",
                                                     "registration_rejected"};

}  // namespace

std::string to_string(WorkflowState s) { return kStateNames[static_cast<std::size_t>(s)]; }
WorkflowState workflow_state_from_string(const std::string& s) {
  return enum_from<WorkflowState>(kStateNames, s, "workflow state");
}
const std::vector<WorkflowState>& all_workflow_states() {
  static const std::vector<WorkflowState> states = [] {
    std::vector<WorkflowState> v;
    for (std::size_t i = 0; i < kStateNames.size(); ++i) v.push_back(static_cast<WorkflowState>(i));
    return v;
  }();
  return states;
}

std::string to_string(Mode m) { return kModeNames[static_cast<std::size_t>(m)]; }
std::string to_string(Modality m) { return kModalityNames[static_cast<std::size_t>(m)]; }
std::string to_string(Technique t) { return kTechniqueNames[static_cast<std::size_t>(t)]; }
std::string to_string(ShotPhase p) { return kPhaseNames[static_cast<std::size_t>(p)]; }
std::string to_string(Guard g) { return kGuardNames[static_cast<std::size_t>(g)]; }
Mode mode_from_string(const std::string& s) { return enum_from<Mode>(kModeNames, s, "mode"); }
Modality modality_from_string(const std::string& s) { return enum_from<Modality>(kModalityNames, s, "modality"); }
Technique technique_from_string(const std::string& s) { return enum_from<Technique>(kTechniqueNames, s, "technique"); }
ShotPhase shot_phase_from_string(const std::string& s) { return enum_from<ShotPhase>(kPhaseNames, s, "shot phase"); }
Guard guard_from_string(const std::string& s) { return enum_from<Guard>(kGuardNames, s, "guard"); }

EdgeTable default_edge_table() {
  using S = WorkflowState;
  return {
      {S::PREOP_IMAGING, "patient_input", S::PATIENT_INPUT},
      {S::PATIENT_INPUT, "begin_planning", S::PLANNING},
      {S::PLANNING, "begin_intraop_prep", S::INTRAOP_PREP},
      {S::INTRAOP_PREP, "calibrate_instruments", S::INSTRUMENT_CALIBRATION},
      {S::INSTRUMENT_CALIBRATION, "attach_drb", S::DRB_ATTACHED},
      {S::DRB_ATTACHED, "position_robot_cart", S::ROBOT_CART_POSITIONED, Guard::ROBOT_MODE},
      {S::DRB_ATTACHED, "mount_carm_calibrator", S::CARM_CALIBRATOR_MOUNTED, Guard::NAVIGATION_MODE},
      {S::ROBOT_CART_POSITIONED, "mount_carm_calibrator", S::CARM_CALIBRATOR_MOUNTED},
      {S::CARM_CALIBRATOR_MOUNTED, "acquire_intraop_images", S::INTRAOP_IMAGING},
      {S::INTRAOP_IMAGING, "begin_registration", S::REGISTRATION},
      {S::REGISTRATION, "registration_accepted", S::REGISTRATION_VERIFIED, Guard::REGISTRATION_ACCEPTED},
      {S::REGISTRATION, "registration_rejected", S::REGISTRATION_REJECTED, Guard::REGISTRATION_REJECTED},
      {S::REGISTRATION_REJECTED, "begin_registration", S::REGISTRATION},
      {S::REGISTRATION_REJECTED, "acquire_intraop_images", S::INTRAOP_IMAGING},
      {S::REGISTRATION_VERIFIED, "start_navigation", S::NAVIGATION},
      {S::NAVIGATION, "robot_align", S::ROBOT_ALIGNED, Guard::ROBOT_MODE},
      {S::NAVIGATION, "place_screw", S::SCREW_PLACED, Guard::NAVIGATION_MODE},
      {S::ROBOT_ALIGNED, "place_screw", S::SCREW_PLACED},
      {S::SCREW_PLACED, "begin_verification_imaging", S::VERIFICATION_IMAGING},
      {S::VERIFICATION_IMAGING, "next_screw", S::NAVIGATION},
      {S::VERIFICATION_IMAGING, "complete", S::COMPLETE},
  };
}

namespace {

bool verification_only(Guard g) { return g == Guard::REGISTRATION_ACCEPTED || g == Guard::REGISTRATION_REJECTED; }

}  // namespace

std::vector<std::string> transition_names(const EdgeTable& table) {
  std::vector<std::string> out;
  for (const auto& e : table) {
    if (verification_only(e.guard)) continue;
    if (std::find(out.begin(), out.end(), e.event) == out.end()) out.push_back(e.event);
  }
  return out;
}

// ---- ledger ---------------------------------------------------------------

void RadiationLedger::record(const std::string& screw_id, ShotPhase phase) {
  auto& c = per_screw_[screw_id];
  (phase == ShotPhase::PLACEMENT ? c.placement : c.verification) += 1;
  ++total_;
}

std::uint64_t RadiationLedger::count(const std::string& screw_id) const {
  const auto it = per_screw_.find(screw_id);
  return it == per_screw_.end() ? 0 : it->second.placement + it->second.verification;
}

std::uint64_t RadiationLedger::count(const std::string& screw_id, ShotPhase phase) const {
  const auto it = per_screw_.find(screw_id);
  if (it == per_screw_.end()) return 0;
  return phase == ShotPhase::PLACEMENT ? it->second.placement : it->second.verification;
}

std::uint64_t RadiationLedger::total(ShotPhase phase) const {
  std::uint64_t n = 0;
  for (const auto& [id, c] : per_screw_) n += phase == ShotPhase::PLACEMENT ? c.placement : c.verification;
  return n;
}

double RadiationLedger::mean_per_screw() const {
  return per_screw_.empty() ? 0.0 : static_cast<double>(total_) / static_cast<double>(per_screw_.size());
}

bool RadiationLedger::consistent() const {
  std::uint64_t sum = 0;
  for (const auto& [id, c] : per_screw_) sum += c.placement + c.verification;
  return sum == total_ && total(ShotPhase::PLACEMENT) + total(ShotPhase::VERIFICATION) == total_;
}

std::vector<std::string> RadiationLedger::screws() const {
  std::vector<std::string> out;
  for (const auto& [id, c] : per_screw_) out.push_back(id);
  return out;
}

// ---- reducer --------------------------------------------------------------

bool imaging_legal(WorkflowState s) {
  switch (s) {
    case WorkflowState::INTRAOP_IMAGING:
    case WorkflowState::REGISTRATION:
    case WorkflowState::NAVIGATION:
    case WorkflowState::ROBOT_ALIGNED:
    case WorkflowState::SCREW_PLACED:
    case WorkflowState::VERIFICATION_IMAGING:
      return true;
    default:
      return false;
  }
}

namespace {

bool guard_holds(Guard g, const SessionState& s, const VerificationEvent* verification) {
  switch (g) {
    case Guard::NONE:
      return true;
    case Guard::ROBOT_MODE:
      return s.config.mode == Mode::ROBOT_ASSISTED;
    case Guard::NAVIGATION_MODE:
      return s.config.mode == Mode::NAVIGATION_ONLY;
    case Guard::REGISTRATION_ACCEPTED:
      return verification != nullptr && verification->accepted;
    case Guard::REGISTRATION_REJECTED:
      return verification != nullptr && !verification->accepted;
  }
  return false;
}

std::string guard_requirement(Guard g) {
  switch (g) {
    case Guard::ROBOT_MODE:
      return "ROBOT_ASSISTED mode";
    case Guard::NAVIGATION_MODE:
      return "NAVIGATION_ONLY mode";
    case Guard::REGISTRATION_ACCEPTED:
      return "an accepted registration verification";
    case Guard::REGISTRATION_REJECTED:
      return "a rejected registration verification";
    case Guard::NONE:
      break;
  }
  return "nothing";
}

// Follows the edge named `name` out of the current state. `verification` is
// non-null only for the verification event, which alone may take the
// verification-guarded edges.
WorkflowState take_edge(const EdgeTable& table, const SessionState& s, const std::string& name,
                        const VerificationEvent* verification) {
  std::vector<const Edge*> candidates;
  std::set<std::string> sources;
  WorkflowState target = s.state;
  bool named_anywhere = false;
  for (const auto& e : table) {
    if (e.event != name) continue;
    named_anywhere = true;
    target = e.to;
    sources.insert(to_string(e.from));
    if (e.from == s.state) candidates.push_back(&e);
  }
  if (!named_anywhere) raise(ErrorKind::IllegalTransition, "unknown event '" + name + "'");
  if (candidates.empty()) {
    std::string req;
    for (const auto& src : sources) req += (req.empty() ? "" : " or ") + src;
    raise(ErrorKind::IllegalTransition,
          to_string(target) + " requires " + req + " (current state " + to_string(s.state) + ")");
  }
  for (const Edge* e : candidates) {
    if (verification_only(e->guard) && verification == nullptr) continue;
    if (guard_holds(e->guard, s, verification)) return e->to;
  }
  const Edge* first = candidates.front();
  for (const Edge* e : candidates) {
    if (!verification_only(e->guard) || verification != nullptr) {
      first = e;
      break;
    }
  }
  raise(ErrorKind::IllegalTransition, to_string(first->to) + " requires " + guard_requirement(first->guard));
}

void require_state(const SessionState& s, std::initializer_list<WorkflowState> allowed, const std::string& what) {
  if (std::find(allowed.begin(), allowed.end(), s.state) != allowed.end()) return;
  std::string names;
  for (auto a : allowed) names += (names.empty() ? "" : ", ") + to_string(a);
  raise(ErrorKind::IllegalState, what + " requires one of " + names + " (current state " + to_string(s.state) + ")");
}

struct Reducer {
  const EdgeTable& table;
  SessionState& s;

  void operator()(const TransitionEvent& e) {
    if (e.name.empty()) raise(ErrorKind::IllegalTransition, "empty event name");
    s.state = take_edge(table, s, e.name, nullptr);
  }
  void operator()(const ConfigureEvent& e) {
    require_state(s, {WorkflowState::PREOP_IMAGING, WorkflowState::PATIENT_INPUT, WorkflowState::PLANNING},
                  "configuration");
    s.config = e.config;
  }
  void operator()(const PlanUpsertEvent& e) {
    require_state(s,
                  {WorkflowState::PATIENT_INPUT, WorkflowState::PLANNING, WorkflowState::REGISTRATION_VERIFIED,
                   WorkflowState::NAVIGATION},
                  "plan editing");
    if (e.plan_id.empty()) raise(ErrorKind::InvalidArgument, "empty plan id");
    validate_plan(e.plan);
    s.plans[e.plan_id] = e.plan;
  }
  void operator()(const PlanDeleteEvent& e) {
    require_state(s,
                  {WorkflowState::PATIENT_INPUT, WorkflowState::PLANNING, WorkflowState::REGISTRATION_VERIFIED,
                   WorkflowState::NAVIGATION},
                  "plan editing");
    if (s.plans.erase(e.plan_id) == 0) raise(ErrorKind::NotFound, "no plan '" + e.plan_id + "'");
  }
  void operator()(const RegistrationEvent& e) {
    require_state(s, {WorkflowState::REGISTRATION}, "registration");
    if (e.modality != s.config.modality && e.modality != Modality::INTRAOP_3D) {
      raise(ErrorKind::IllegalState, "registration modality " + to_string(e.modality) +
                                         " does not match session modality " + to_string(s.config.modality));
    }
    s.registration = e;
    s.verification.reset();
    s.registration_verified = false;
    s.registration_fre.push_back(e.fre_rms);
  }
  void operator()(const VerificationEvent& e) {
    if (!s.registration) raise(ErrorKind::NoRegistration, "no registration result to verify");
    if (e.n_probes < 3) raise(ErrorKind::TooFewProbes, "need >= 3 probes, got " + std::to_string(e.n_probes));
    if (e.accepted != (e.rms < e.threshold)) raise(ErrorKind::IllegalState, "verification verdict inconsistent");
    s.state = take_edge(table, s, e.accepted ? "registration_accepted" : "registration_rejected", &e);
    s.verification = e;
    s.registration_verified = e.accepted;
  }
  void operator()(const ShotEvent& e) {
    if (!imaging_legal(s.state)) {
      raise(ErrorKind::IllegalState, "C-arm shot not allowed in state " + to_string(s.state));
    }
    if (e.screw_id.empty()) raise(ErrorKind::InvalidArgument, "empty screw id");
    s.ledger.record(e.screw_id, e.phase);
  }
  void operator()(const RobotAlignedEvent& e) {
    if (!s.plans.count(e.plan_id)) raise(ErrorKind::NotFound, "no plan '" + e.plan_id + "'");
    s.state = take_edge(table, s, "robot_align", nullptr);
    s.robot_joints = e.target;
  }
  void operator()(const ScrewResultEvent& e) {
    require_state(s, {WorkflowState::SCREW_PLACED, WorkflowState::VERIFICATION_IMAGING}, "screw result");
    if (e.screw_id.empty()) raise(ErrorKind::InvalidArgument, "empty screw id");
    if (grade_gertzbein(e.report.max_breach_depth, e.report.anterior_perforation) != e.report.grade) {
      raise(ErrorKind::InvalidArgument, "grade inconsistent with breach depth");
    }
    s.outcomes[e.screw_id] = {e.achieved, e.report};
  }
};

}  // namespace

SessionState apply(const EdgeTable& table, const SessionState& state, const Event& event) {
  SessionState next = state;
  std::visit(Reducer{table, next}, event.payload);
  ++next.events;
  return next;
}

SessionState replay(const EdgeTable& table, const std::vector<Event>& log) {
  SessionState s;
  for (const auto& e : log) s = apply(table, s, e);
  return s;
}

// ---- session --------------------------------------------------------------

namespace {

double wall_clock_ms() {
  using namespace std::chrono;
  return static_cast<double>(duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count());
}

}  // namespace

Session::Session(std::string id, EdgeTable table, Clock clock)
    : id_(std::move(id)),
      table_(std::move(table)),
      clock_(clock ? std::move(clock) : Clock(wall_clock_ms)),
      state_(std::make_shared<const SessionState>()) {}

std::unique_ptr<Session> Session::from_log(std::string id, EdgeTable table, const std::vector<Event>& log,
                                           Clock clock) {
  auto out = std::make_unique<Session>(std::move(id), std::move(table), std::move(clock));
  Session& s = *out;
  SessionState state;
  std::uint64_t expected = 1;
  for (const auto& e : log) {
    if (e.seq != expected++) raise(ErrorKind::ParseError, "event log sequence gap at " + std::to_string(e.seq));
    state = apply(s.table_, state, e);
  }
  s.log_ = log;
  s.state_ = std::make_shared<const SessionState>(std::move(state));
  return out;
}

std::shared_ptr<const SessionState> Session::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return state_;
}

std::vector<Event> Session::log() const {
  std::lock_guard lock(write_mutex_);
  return log_;
}

void Session::on_append(std::function<void(const Event&)> sink) {
  std::lock_guard lock(write_mutex_);
  sink_ = std::move(sink);
}

Event Session::commit(EventPayload payload) {
  std::lock_guard lock(write_mutex_);
  Event e;
  e.seq = log_.size() + 1;
  e.timestamp_ms = clock_();
  e.payload = std::move(payload);
  auto next = std::make_shared<const SessionState>(apply(table_, *snapshot(), e));
  if (sink_) sink_(e);
  log_.push_back(e);
  {
    std::lock_guard snap(snapshot_mutex_);
    state_ = std::move(next);
  }
  return e;
}

Event Session::advance(const std::string& transition) {
  for (const auto& e : table_) {
    if (e.event == transition && verification_only(e.guard)) {
      raise(ErrorKind::IllegalTransition,
            to_string(e.to) + " is entered only through registration verification");
    }
  }
  return commit(TransitionEvent{transition});
}

Event Session::configure(const SessionConfig& config) { return commit(ConfigureEvent{config}); }

Event Session::upsert_plan(const std::string& plan_id, const ScrewPlan& plan) {
  return commit(PlanUpsertEvent{plan_id, plan});
}

Event Session::delete_plan(const std::string& plan_id) { return commit(PlanDeleteEvent{plan_id}); }

Event Session::record_registration(const RegistrationEvent& registration) { return commit(registration); }

VerificationResult Session::verify_registration(const std::vector<Probe>& probes, double threshold) {
  const auto s = snapshot();
  if (!s->registration) raise(ErrorKind::NoRegistration, "no registration result to verify");
  if (probes.size() < 3) raise(ErrorKind::TooFewProbes, "need >= 3 probes, got " + std::to_string(probes.size()));
  if (!(threshold > 0.0)) raise(ErrorKind::InvalidArgument, "verification threshold must be > 0");
  double sum = 0.0;
  for (const auto& p : probes) sum += (s->registration->image_to_drb.apply(p.landmark) - p.probed).squaredNorm();
  VerificationEvent v;
  v.rms = std::sqrt(sum / static_cast<double>(probes.size()));
  v.threshold = threshold;
  v.n_probes = probes.size();
  v.accepted = v.rms < threshold;
  commit(v);
  return {v.accepted, v.rms};
}

Event Session::record_shot(const std::string& screw_id, ShotPhase phase) { return commit(ShotEvent{screw_id, phase}); }

Event Session::record_robot_alignment(const std::string& plan_id, const JointState& target, double min_clearance) {
  return commit(RobotAlignedEvent{plan_id, target, min_clearance});
}

Event Session::record_screw_result(const std::string& screw_id, const ScrewPlan& achieved, const BreachReport& report) {
  return commit(ScrewResultEvent{screw_id, achieved, report});
}

std::string Session::report(bool interim) const {
  const auto s = snapshot();
  if (!interim && s->state != WorkflowState::COMPLETE) {
    raise(ErrorKind::IllegalState, "final report requires COMPLETE (current state " + to_string(s->state) + ")");
  }
  return build_report(id_, *s, interim);
}

}  // namespace igss
