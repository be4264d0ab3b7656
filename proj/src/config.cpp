#include "pegmentor/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include "pegmentor/error.hpp"

namespace pegmentor {
namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedFile, what); }

/// The shortest decimal x for which from_unit(x) reproduces `value` exactly,
/// so unit-converted settings read back unchanged (15 rather than
/// 14.999999999999998 degrees).
double tidy_in_unit(double value, double (*to_unit)(double), double (*from_unit)(double)) {
  const double exact = to_unit(value);
  for (int digits = 1; digits <= 17; ++digits) {
    std::ostringstream os;
    os.precision(digits);
    os << exact;
    const double candidate = std::stod(os.str());
    if (from_unit(candidate) == value) return candidate;
  }
  return exact;
}

double m_to_cm(double m) { return m * 100.0; }
double cm_to_m(double cm) { return cm / 100.0; }
double rad_to_deg(double rad) { return rad * 180.0 / kPi; }
double deg_to_rad(double deg) { return deg * kPi / 180.0; }

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const Json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) malformed(key + ": expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) malformed(key + ": expected an array of 3 numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

/// Reads keys out of one JSON object and rejects any it did not consume, so
/// typos in config files surface instead of being silently ignored.
class Fields {
 public:
  Fields(const Json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) malformed(section_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const Json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      malformed(section_ + "." + key + ": wrong type");
    }
  }

  void get_vec(const char* key, Vec3& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    out = vec_from_json(j_.at(key), section_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) malformed(section_ + ": unknown key '" + key + "'");
  }

 private:
  const Json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

std::string frame_name(Frame f) {
  switch (f.kind) {
    case Frame::Kind::World: return "world";
    case Frame::Kind::Object: return "object:" + std::to_string(f.index);
    case Frame::Kind::Rcm: return "rcm";
    case Frame::Kind::Tip: return "tip";
    case Frame::Kind::CameraLeft: return "camera_left";
    case Frame::Kind::CameraRight: return "camera_right";
  }
  return "world";
}

Frame parse_frame(const std::string& s) {
  if (s == "world") return Frame::world();
  if (s == "rcm") return Frame::rcm();
  if (s == "tip") return Frame::tip();
  if (s == "camera_left") return Frame::camera_left();
  if (s == "camera_right") return Frame::camera_right();
  if (s.rfind("object:", 0) == 0) {
    try {
      return Frame::object(std::stoi(s.substr(7)));
    } catch (const std::exception&) {
    }
  }
  malformed("unknown frame '" + s + "'");
}

Json board_to_json(const PegBoard& b) {
  Json pegs = Json::array();
  for (const auto& p : b.peg_positions) pegs.push_back(vec_json(p));
  return {{"peg_positions_m", pegs},       {"peg_radius_m", b.peg_radius},
          {"peg_height_m", b.peg_height},  {"board_z_m", b.board_z},
          {"block_radius_m", b.block_radius}, {"block_height_m", b.block_height},
          {"grasp_radius_m", b.grasp_radius}};
}

PegBoard board_from_json(const Json& j) {
  PegBoard b = PegBoard::standard();
  Fields f(j, "board");
  if (f.has("peg_positions_m")) {
    const Json& pegs = f.raw("peg_positions_m");
    if (!pegs.is_array()) malformed("board.peg_positions_m: expected an array");
    b.peg_positions.clear();
    for (const auto& p : pegs) b.peg_positions.push_back(vec_from_json(p, "board.peg_positions_m"));
  }
  f.get("peg_radius_m", b.peg_radius);
  f.get("peg_height_m", b.peg_height);
  f.get("board_z_m", b.board_z);
  f.get("block_radius_m", b.block_radius);
  f.get("block_height_m", b.block_height);
  f.get("grasp_radius_m", b.grasp_radius);
  f.finish();
  return b;
}

Json rig_to_json(const StereoRig& r) {
  return {{"intrinsics", to_json(r.intrinsics)},
          {"left_pose", to_json(r.left_pose)},
          {"baseline_m", r.baseline}};
}

StereoRig rig_from_json(const Json& j) {
  StereoRig r = AppConfig::default_rig();
  Fields f(j, "rig");
  if (f.has("intrinsics")) r.intrinsics = intrinsics_from_json(f.raw("intrinsics"));
  if (f.has("left_pose")) r.left_pose = rigid_transform_from_json(f.raw("left_pose"));
  f.get("baseline_m", r.baseline);
  f.finish();
  return r;
}

Json pnp_to_json(const PnpConfig& c) {
  return {{"max_iterations", c.max_iterations},   {"cost_tolerance", c.cost_tolerance},
          {"param_tolerance", c.param_tolerance}, {"initial_damping", c.initial_damping},
          {"min_points", c.min_points}};
}

PnpConfig pnp_from_json(const Json& j) {
  PnpConfig c;
  Fields f(j, "pnp");
  f.get("max_iterations", c.max_iterations);
  f.get("cost_tolerance", c.cost_tolerance);
  f.get("param_tolerance", c.param_tolerance);
  f.get("initial_damping", c.initial_damping);
  f.get("min_points", c.min_points);
  f.finish();
  return c;
}

}  // namespace

StereoRig AppConfig::default_rig() {
  StereoRig rig;
  rig.intrinsics = CameraIntrinsics{};
  rig.left_pose = look_at(Vec3(0.0, -0.12, 0.16), Vec3(0.0, 0.0, 0.01), Vec3::UnitZ());
  rig.baseline = 0.005;
  return rig;
}

void AppConfig::validate() const {
  board.validate();
  episode.validate();
  rig.validate();
  train.validate();
  pnp.validate();
}

Json to_json(const RigidTransform& t) {
  const Rotation& r = t.rotation();
  return {{"src", frame_name(t.src())},
          {"dst", frame_name(t.dst())},
          {"quaternion_wxyz", Json::array({r.w(), r.x(), r.y(), r.z()})},
          {"translation_m", vec_json(t.translation())}};
}

RigidTransform rigid_transform_from_json(const Json& j) {
  Fields f(j, "transform");
  std::string src = "world", dst = "camera_left";
  f.get("src", src);
  f.get("dst", dst);
  if (!f.has("quaternion_wxyz") || !f.has("translation_m"))
    malformed("transform: quaternion_wxyz and translation_m are required");
  const Json& q = f.raw("quaternion_wxyz");
  if (!q.is_array() || q.size() != 4) malformed("transform.quaternion_wxyz: expected 4 numbers");
  double c[4];
  for (int i = 0; i < 4; ++i) {
    if (!q[i].is_number()) malformed("transform.quaternion_wxyz: expected 4 numbers");
    c[i] = q[i].get<double>();
  }
  const Vec3 t = vec_from_json(f.raw("translation_m"), "transform.translation_m");
  f.finish();
  if (c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3] < 1e-12)
    malformed("transform.quaternion_wxyz: zero quaternion");
  return {Rotation::from_quaternion(c[0], c[1], c[2], c[3]), t, parse_frame(src), parse_frame(dst)};
}

Json to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const Json& j) {
  CameraIntrinsics k;
  Fields f(j, "intrinsics");
  f.get("fx", k.fx);
  f.get("fy", k.fy);
  f.get("cx", k.cx);
  f.get("cy", k.cy);
  f.get("width", k.width);
  f.get("height", k.height);
  f.finish();
  return k;
}

Json to_json(const TrainConfig& c) {
  return {{"gamma", c.gamma},
          {"actor_lr", c.actor_lr},
          {"critic_lr", c.critic_lr},
          {"polyak", c.polyak},
          {"batch_size", c.batch_size},
          {"demo_batch_size", c.demo_batch_size},
          {"her_k", c.her_k},
          {"epochs", c.epochs},
          {"cycles_per_epoch", c.cycles_per_epoch},
          {"rollouts_per_cycle", c.rollouts_per_cycle},
          {"updates_per_cycle", c.updates_per_cycle},
          {"bc_weight", c.bc_weight},
          {"q_filter", c.q_filter},
          {"action_noise_sigma", c.action_noise_sigma},
          {"random_action_eps", c.random_action_eps},
          {"action_l2", c.action_l2},
          {"eval_episodes", c.eval_episodes},
          {"hidden_units", c.hidden_units},
          {"hidden_layers", c.hidden_layers},
          {"buffer_capacity", c.buffer_capacity},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  Fields f(j, "train");
  f.get("gamma", c.gamma);
  f.get("actor_lr", c.actor_lr);
  f.get("critic_lr", c.critic_lr);
  f.get("polyak", c.polyak);
  f.get("batch_size", c.batch_size);
  f.get("demo_batch_size", c.demo_batch_size);
  f.get("her_k", c.her_k);
  f.get("epochs", c.epochs);
  f.get("cycles_per_epoch", c.cycles_per_epoch);
  f.get("rollouts_per_cycle", c.rollouts_per_cycle);
  f.get("updates_per_cycle", c.updates_per_cycle);
  f.get("bc_weight", c.bc_weight);
  f.get("q_filter", c.q_filter);
  f.get("action_noise_sigma", c.action_noise_sigma);
  f.get("random_action_eps", c.random_action_eps);
  f.get("action_l2", c.action_l2);
  f.get("eval_episodes", c.eval_episodes);
  f.get("hidden_units", c.hidden_units);
  f.get("hidden_layers", c.hidden_layers);
  f.get("buffer_capacity", c.buffer_capacity);
  f.get("seed", c.seed);
  f.finish();
  return c;
}

Json to_json(const EpisodeConfig& c) {
  return {{"horizon", c.horizon},
          {"goal_tolerance_cm", tidy_in_unit(c.goal_tolerance, m_to_cm, cm_to_m)},
          {"workspace_lo_m", vec_json(c.workspace.lo)},
          {"workspace_hi_m", vec_json(c.workspace.hi)},
          {"range_mode", std::string(to_string(c.range_mode))},
          {"home_m", vec_json(c.home)},
          {"max_translation_m", c.limits.max_translation},
          {"max_yaw_deg", tidy_in_unit(c.limits.max_yaw, rad_to_deg, deg_to_rad)}};
}

EpisodeConfig episode_config_from_json(const Json& j, double board_z) {
  EpisodeConfig c;
  // The default workspace floor sits on the board.
  c.workspace.hi.z() += board_z - c.workspace.lo.z();
  c.workspace.lo.z() = board_z;
  Fields f(j, "episode");
  f.get("horizon", c.horizon);
  if (f.has("goal_tolerance_cm")) {
    double tol_cm = 0.0;
    f.get("goal_tolerance_cm", tol_cm);
    c.goal_tolerance = cm_to_m(tol_cm);
  }
  if (f.has("workspace_size_cm")) {
    if (f.has("workspace_lo_m") || f.has("workspace_hi_m"))
      malformed("episode: give either workspace_size_cm or workspace_lo_m/workspace_hi_m");
    double size_cm = 0.0;
    f.get("workspace_size_cm", size_cm);
    const double h = cm_to_m(size_cm);
    c.workspace.lo = Vec3(-0.5 * h, -0.5 * h, board_z);
    c.workspace.hi = Vec3(0.5 * h, 0.5 * h, board_z + h);
  }
  f.get_vec("workspace_lo_m", c.workspace.lo);
  f.get_vec("workspace_hi_m", c.workspace.hi);
  if (f.has("range_mode")) {
    std::string mode;
    f.get("range_mode", mode);
    try {
      c.range_mode = parse_range_mode(mode);
    } catch (const Error& e) {
      malformed("episode.range_mode: " + e.detail());
    }
  }
  f.get_vec("home_m", c.home);
  f.get("max_translation_m", c.limits.max_translation);
  if (f.has("max_yaw_deg")) {
    double yaw_deg = 0.0;
    f.get("max_yaw_deg", yaw_deg);
    c.limits.max_yaw = deg_to_rad(yaw_deg);
  }
  f.finish();
  return c;
}

Json to_json(const AppConfig& c) {
  return {{"board", board_to_json(c.board)},
          {"episode", to_json(c.episode)},
          {"rig", rig_to_json(c.rig)},
          {"train", to_json(c.train)},
          {"pnp", pnp_to_json(c.pnp)}};
}

AppConfig app_config_from_json(const Json& j) {
  AppConfig c;
  Fields f(j, "config");
  if (f.has("board")) c.board = board_from_json(f.raw("board"));
  if (f.has("episode")) c.episode = episode_config_from_json(f.raw("episode"), c.board.board_z);
  if (f.has("rig")) c.rig = rig_from_json(f.raw("rig"));
  if (f.has("train")) c.train = train_config_from_json(f.raw("train"));
  if (f.has("pnp")) c.pnp = pnp_from_json(f.raw("pnp"));
  f.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedFile) throw;
    malformed("invalid configuration: " + e.detail());
  }
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    malformed(path.string() + ": " + e.what());
  }
  return app_config_from_json(j);
}

void apply_override(Json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw Error(ErrorCode::InvalidArgument, "override must look like key.path=value: " + std::string(assignment));
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json value;
  try {
    value = Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  if (!doc.is_object()) doc = Json::object();
  Json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw Error(ErrorCode::InvalidArgument, "empty segment in override key: " + path);
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    Json& next = (*node)[parts[i]];
    if (next.is_null()) next = Json::object();
    if (!next.is_object())
      throw Error(ErrorCode::InvalidArgument, "override key '" + path + "' descends into a non-object");
    node = &next;
  }
  (*node)[parts.back()] = std::move(value);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    const std::string reason = ec.message();
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot replace " + path.string() + ": " + reason);
  }
}

}  // namespace pegmentor
