#include "pegmentor/protocol.hpp"

#include <cmath>
#include <map>

#include "pegmentor/error.hpp"

namespace pegmentor {
namespace {

enum class Kind { Number, Integer, Bool, String, NumberOrNull, Array };

struct Field {
  const char* name;
  Kind kind;
  bool required;
};

using Schema = std::vector<Field>;

const std::map<std::string, Schema>& inbound_schemas() {
  static const std::map<std::string, Schema> schemas{
      {"click", {{"u", Kind::Number, true}, {"v", Kind::Number, true}}},
      {"solve_calibration", {}},
      {"teleop",
       {{"dx", Kind::Number, true},
        {"dy", Kind::Number, true},
        {"dz", Kind::Number, true},
        {"dyaw", Kind::Number, true},
        {"j", Kind::Number, true}}},
      {"set_mode", {{"mode", Kind::String, true}}},
      {"toggle_guidance", {{"on", Kind::Bool, true}}},
      {"reset", {{"range_mode", Kind::String, true}, {"seed", Kind::Integer, false}}},
      {"load_checkpoint", {{"path", Kind::String, true}}},
      {"save_calibration", {{"path", Kind::String, true}}},
      {"load_calibration", {{"path", Kind::String, true}}},
      {"get_state", {}},
      {"tick", {}},
  };
  return schemas;
}

const std::map<std::string, Schema>& outbound_schemas() {
  static const std::map<std::string, Schema> schemas{
      {"frame",
       {{"eye", Kind::String, true},
        {"encoding", Kind::String, true},
        {"tick", Kind::Integer, true},
        {"width", Kind::Integer, true},
        {"height", Kind::Integer, true},
        {"data", Kind::String, true}}},
      {"calibration",
       {{"n_clicks", Kind::Integer, true},
        {"solved", Kind::Bool, true},
        {"rms_error_px", Kind::Number, false},
        {"multi_solution_warning", Kind::Bool, true}}},
      {"step",
       {{"reward", Kind::Number, true},
        {"done", Kind::Bool, true},
        {"is_success", Kind::Bool, true},
        {"deviation_m", Kind::NumberOrNull, true},
        {"timestep", Kind::Integer, true}}},
      {"state",
       {{"session", Kind::String, true},
        {"mode", Kind::String, true},
        {"n_clicks", Kind::Integer, true},
        {"calibrated", Kind::Bool, true},
        {"policy_loaded", Kind::Bool, true},
        {"guidance", Kind::Bool, true},
        {"range_mode", Kind::String, true},
        {"episode_seed", Kind::Integer, true},
        {"source_peg", Kind::Integer, true},
        {"goal_peg", Kind::Integer, true},
        {"timestep", Kind::Integer, true},
        {"done", Kind::Bool, true}}},
      {"plan",
       {{"label", Kind::String, true},
        {"waypoints", Kind::Array, true},
        {"jaw_open", Kind::Array, true},
        {"display_points", Kind::Integer, true}}},
      {"error", {{"code", Kind::String, true}, {"detail", Kind::String, true}}},
  };
  return schemas;
}

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::BadMessage, what); }

bool matches(const Json& v, Kind k) {
  switch (k) {
    case Kind::Number: return v.is_number() && std::isfinite(v.get<double>());
    case Kind::Integer: return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    case Kind::Bool: return v.is_boolean();
    case Kind::String: return v.is_string();
    case Kind::NumberOrNull: return v.is_null() || (v.is_number() && std::isfinite(v.get<double>()));
    case Kind::Array: return v.is_array();
  }
  return false;
}

void validate(const Json& msg, const std::map<std::string, Schema>& schemas, const char* direction) {
  if (!msg.is_object()) bad(std::string(direction) + " message must be an object");
  if (!msg.contains("type") || !msg["type"].is_string()) bad(std::string(direction) + " message lacks a type");
  const std::string type = msg["type"].get<std::string>();
  const auto it = schemas.find(type);
  if (it == schemas.end()) bad("unknown " + std::string(direction) + " message type '" + type + "'");
  for (const auto& f : it->second) {
    if (!msg.contains(f.name)) {
      if (f.required) bad(type + ": missing field '" + f.name + "'");
      continue;
    }
    if (!matches(msg[f.name], f.kind)) bad(type + ": field '" + f.name + "' has the wrong type");
  }
  for (const auto& [key, value] : msg.items()) {
    if (key == "type") continue;
    bool known = false;
    for (const auto& f : it->second) known = known || key == f.name;
    if (!known) bad(type + ": unknown field '" + key + "'");
  }
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace

void validate_inbound(const Json& msg) { validate(msg, inbound_schemas(), "inbound"); }

void validate_outbound(const Json& msg) {
  validate(msg, outbound_schemas(), "outbound");
  const std::string type = msg["type"].get<std::string>();
  if (type == "frame") {
    const std::string eye = msg["eye"].get<std::string>();
    if (eye != "left" && eye != "right") bad("frame: eye must be left or right");
    if (msg["encoding"] != "ppm-base64") bad("frame: unsupported encoding");
  }
}

Json error_message(ErrorCode code, std::string_view detail) {
  return {{"type", "error"}, {"code", std::string(to_string(code))}, {"detail", std::string(detail)}};
}

Json calibration_message(const CalibrationProgress& p) {
  Json j{{"type", "calibration"},
         {"n_clicks", p.n_clicks},
         {"solved", p.solved},
         {"multi_solution_warning", p.multi_solution_warning}};
  if (p.rms_error_px) j["rms_error_px"] = *p.rms_error_px;
  return j;
}

Json step_message(const StepResult& r) {
  return {{"type", "step"},
          {"reward", r.reward},
          {"done", r.done},
          {"is_success", r.is_success},
          {"deviation_m", r.deviation_m ? Json(*r.deviation_m) : Json(nullptr)},
          {"timestep", r.timestep}};
}

Json state_message(const Session& s) {
  return {{"type", "state"},
          {"session", s.id()},
          {"mode", std::string(to_string(s.mode()))},
          {"n_clicks", s.pending_clicks().size()},
          {"calibrated", s.calibration().has_value()},
          {"policy_loaded", s.has_policy()},
          {"guidance", s.guidance_on()},
          {"range_mode", std::string(to_string(s.config().episode.range_mode))},
          {"episode_seed", s.episode_seed()},
          {"source_peg", s.state().source_peg},
          {"goal_peg", s.state().goal_peg},
          {"timestep", s.state().timestep},
          {"done", s.state().done}};
}

Json plan_message(const TrajectoryPlan& plan) {
  Json waypoints = Json::array(), jaw = Json::array();
  for (std::size_t i = 0; i < plan.waypoints.size(); ++i) {
    waypoints.push_back(vec_json(plan.waypoints[i]));
    jaw.push_back(static_cast<bool>(plan.jaw_hints[i]));
  }
  const std::size_t n = plan.waypoints.size();
  return {{"type", "plan"},
          {"label", plan.label},
          {"waypoints", std::move(waypoints)},
          {"jaw_open", std::move(jaw)},
          {"display_points", n == 0 ? 0 : 2 * (n - 1) + 1}};
}

Json frame_message(std::string_view eye, const FrameBuffer& frame, long tick) {
  return {{"type", "frame"},
          {"eye", std::string(eye)},
          {"encoding", "ppm-base64"},
          {"tick", tick},
          {"width", frame.width()},
          {"height", frame.height()},
          {"data", base64_encode(encode_pam(frame))}};
}

std::vector<Json> frame_messages(const Session& s) {
  const StereoFrames frames = s.render();
  return {frame_message("left", frames.left, s.tick_count()), frame_message("right", frames.right, s.tick_count())};
}

std::vector<Json> handle_message(Session& s, const Json& msg) {
  std::vector<Json> out;
  try {
    validate_inbound(msg);
    const std::string type = msg["type"].get<std::string>();
    auto with_plan = [&] {
      out.push_back(state_message(s));
      if (s.plan()) out.push_back(plan_message(*s.plan()));
    };
    if (type == "click") {
      out.push_back(calibration_message(s.handle_click({msg["u"].get<double>(), msg["v"].get<double>()})));
    } else if (type == "solve_calibration") {
      out.push_back(calibration_message(s.solve_calibration()));
    } else if (type == "teleop") {
      Action a;
      a.dx = msg["dx"].get<double>();
      a.dy = msg["dy"].get<double>();
      a.dz = msg["dz"].get<double>();
      a.d_yaw = msg["dyaw"].get<double>();
      a.j = msg["j"].get<double>();
      out.push_back(step_message(s.handle_teleop(a)));
    } else if (type == "set_mode") {
      s.set_mode(parse_mode(msg["mode"].get<std::string>()));
      out.push_back(state_message(s));
    } else if (type == "toggle_guidance") {
      s.toggle_guidance(msg["on"].get<bool>());
      with_plan();
    } else if (type == "reset") {
      const RangeMode range = parse_range_mode(msg["range_mode"].get<std::string>());
      std::optional<std::uint64_t> seed;
      if (msg.contains("seed")) seed = msg["seed"].get<std::uint64_t>();
      s.reset(range, seed);
      with_plan();
    } else if (type == "load_checkpoint") {
      s.set_policy(LoadedPolicy::load(msg["path"].get<std::string>()));
      with_plan();
    } else if (type == "save_calibration") {
      s.save_calibration(msg["path"].get<std::string>());
      out.push_back(calibration_message(s.calibration_progress()));
    } else if (type == "load_calibration") {
      s.load_calibration(msg["path"].get<std::string>());
      out.push_back(calibration_message(s.calibration_progress()));
    } else if (type == "get_state") {
      with_plan();
    } else if (type == "tick") {
      if (auto step = s.tick()) out.push_back(step_message(*step));
      for (auto& f : frame_messages(s)) out.push_back(std::move(f));
    }
  } catch (const Error& e) {
    out.clear();
    out.push_back(error_message(e.code(), e.detail()));
  } catch (const std::exception& e) {
    out.clear();
    out.push_back(error_message(ErrorCode::IoError, e.what()));
  }
  return out;
}

std::string encode_frame(const Json& msg) {
  const std::string body = msg.dump();
  if (body.size() > 0xFFFFFFFFu) throw Error(ErrorCode::InvalidArgument, "message too large to frame");
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  out.push_back(static_cast<char>((n >> 24) & 0xFF));
  out.push_back(static_cast<char>((n >> 16) & 0xFF));
  out.push_back(static_cast<char>((n >> 8) & 0xFF));
  out.push_back(static_cast<char>(n & 0xFF));
  out += body;
  return out;
}

std::optional<std::string> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  std::size_t n = 0;
  for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(buffer_[i]);
  if (n > max_bytes_)
    bad("declared message length " + std::to_string(n) + " exceeds the limit of " + std::to_string(max_bytes_));
  if (buffer_.size() < 4 + n) return std::nullopt;
  std::string payload = buffer_.substr(4, n);
  buffer_.erase(0, 4 + n);
  return payload;
}

Json parse_message(std::string_view payload) {
  Json j;
  try {
    j = Json::parse(payload);
  } catch (const nlohmann::json::parse_error& e) {
    bad(std::string("message is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad("message must be a JSON object");
  return j;
}

}  // namespace pegmentor
