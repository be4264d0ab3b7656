#include "pegmentor/pegboard.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pegmentor/error.hpp"

namespace pegmentor {
namespace {

double horizontal_distance(const Vec3& a, const Vec3& b) { return std::hypot(a.x() - b.x(), a.y() - b.y()); }

double clamp_abs(double v, double limit) {
  if (!std::isfinite(v)) return 0.0;
  return std::clamp(v, -limit, limit);
}

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a - kPi;
}

// Distance from p to the segment [a, b] in the board plane.
double point_segment_distance_2d(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Eigen::Vector2d ab(b.x() - a.x(), b.y() - a.y());
  const Eigen::Vector2d ap(p.x() - a.x(), p.y() - a.y());
  const double len2 = ab.squaredNorm();
  const double s = len2 > 0.0 ? std::clamp(ap.dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (ap - s * ab).norm();
}

// Vertical drop: the block lands on a peg top when it is within the goal
// tolerance of that peg's axis, otherwise on the board.
Vec3 drop_block(const PegBoard& board, const EpisodeConfig& cfg, const Vec3& block) {
  for (const auto& peg : board.peg_positions) {
    if (horizontal_distance(block, peg) <= cfg.goal_tolerance) return {block.x(), block.y(), peg.z()};
  }
  return {block.x(), block.y(), board.board_z};
}

}  // namespace

PegBoard PegBoard::standard() {
  PegBoard b;
  constexpr double spacing = 0.02;
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 4; ++col) {
      b.peg_positions.emplace_back((col - 1.5) * spacing, (row - 1.0) * spacing, b.board_z + b.peg_height);
    }
  }
  return b;
}

void PegBoard::validate() const {
  if (peg_positions.size() != 12)
    throw Error(ErrorCode::InvalidArgument, "peg board must have exactly 12 pegs, got " +
                                                std::to_string(peg_positions.size()));
  if (!(peg_radius > 0.0) || !(peg_height > 0.0) || !(block_radius > 0.0) || !(block_height > 0.0) ||
      !(grasp_radius > 0.0))
    throw Error(ErrorCode::InvalidArgument, "peg board dimensions must be positive");
  for (std::size_t i = 0; i < peg_positions.size(); ++i) {
    if (!peg_positions[i].allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite peg position");
    for (std::size_t k = i + 1; k < peg_positions.size(); ++k) {
      if (horizontal_distance(peg_positions[i], peg_positions[k]) <= 2.0 * peg_radius)
        throw Error(ErrorCode::InvalidArgument,
                    "pegs " + std::to_string(i) + " and " + std::to_string(k) + " overlap");
    }
  }
}

Action ActionLimits::from_normalized(const double* u) const {
  Action a;
  a.dx = max_translation * std::clamp(u[0], -1.0, 1.0);
  a.dy = max_translation * std::clamp(u[1], -1.0, 1.0);
  a.dz = max_translation * std::clamp(u[2], -1.0, 1.0);
  a.d_yaw = max_yaw * std::clamp(u[3], -1.0, 1.0);
  a.j = std::clamp(u[4], -1.0, 1.0);
  return a;
}

void ActionLimits::to_normalized(const Action& a, double* u) const {
  u[0] = std::clamp(a.dx / max_translation, -1.0, 1.0);
  u[1] = std::clamp(a.dy / max_translation, -1.0, 1.0);
  u[2] = std::clamp(a.dz / max_translation, -1.0, 1.0);
  u[3] = std::clamp(a.d_yaw / max_yaw, -1.0, 1.0);
  u[4] = std::clamp(a.j, -1.0, 1.0);
}

Action ActionLimits::clamp(const Action& a) const {
  Action c;
  c.dx = clamp_abs(a.dx, max_translation);
  c.dy = clamp_abs(a.dy, max_translation);
  c.dz = clamp_abs(a.dz, max_translation);
  c.d_yaw = clamp_abs(a.d_yaw, max_yaw);
  c.d_pitch = 0.0;
  c.j = clamp_abs(a.j, 1.0);
  return c;
}

bool Workspace::contains(const Vec3& p) const {
  return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

Vec3 Workspace::clamp(const Vec3& p) const { return p.cwiseMax(lo).cwiseMin(hi); }

std::string_view to_string(RangeMode m) {
  switch (m) {
    case RangeMode::Short: return "short";
    case RangeMode::Long: return "long";
    case RangeMode::Any: return "any";
  }
  return "any";
}

RangeMode parse_range_mode(std::string_view s) {
  if (s == "short") return RangeMode::Short;
  if (s == "long") return RangeMode::Long;
  if (s == "any") return RangeMode::Any;
  throw Error(ErrorCode::InvalidArgument, "unknown range mode '" + std::string(s) + "'");
}

void EpisodeConfig::validate() const {
  if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 1");
  if (!(goal_tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "goal_tolerance must be positive");
  if (!(workspace.lo.array() < workspace.hi.array()).all())
    throw Error(ErrorCode::InvalidArgument, "workspace bounds are inverted");
  if (!workspace.contains(home)) throw Error(ErrorCode::InvalidArgument, "home pose outside workspace");
  if (!(limits.max_translation > 0.0) || !(limits.max_yaw > 0.0))
    throw Error(ErrorCode::InvalidArgument, "action limits must be positive");
}

Observation observe(const SimState& s) {
  const Vec3 rel = s.block_pos - s.tool_tip;
  return {s.tool_tip.x(), s.tool_tip.y(), s.tool_tip.z(), s.jaw_open ? 1.0 : -1.0,
          s.block_pos.x(), s.block_pos.y(), s.block_pos.z(), rel.x(),
          rel.y(), rel.z(), s.carried ? 1.0 : 0.0};
}

bool is_success(const Vec3& achieved, bool carried, const Goal& goal, const EpisodeConfig& cfg) {
  return !carried && (achieved - goal.position).norm() <= cfg.goal_tolerance;
}

bool is_success(const Observation& obs, const Goal& goal, const EpisodeConfig& cfg) {
  return is_success(Vec3(obs[4], obs[5], obs[6]), obs[10] > 0.5, goal, cfg);
}

RangeClass classify_range(const PegBoard& board, int source, int goal) {
  const int n = static_cast<int>(board.peg_positions.size());
  if (source == goal) throw Error(ErrorCode::InvalidArgument, "source and goal peg must differ");
  if (source < 0 || goal < 0 || source >= n || goal >= n)
    throw Error(ErrorCode::InvalidArgument, "peg index out of range");
  const double clearance = board.peg_radius + board.block_radius;
  const Vec3& a = board.peg_positions[source];
  const Vec3& b = board.peg_positions[goal];
  for (int k = 0; k < n; ++k) {
    if (k == source || k == goal) continue;
    if (point_segment_distance_2d(board.peg_positions[k], a, b) < clearance) return RangeClass::Long;
  }
  return RangeClass::Short;
}

std::pair<SimState, Goal> reset(const PegBoard& board, const EpisodeConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = static_cast<int>(board.peg_positions.size());
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::uniform_int_distribution<int> pick_other(0, n - 2);
  int source = 0;
  int goal = 1;
  for (;;) {
    source = pick(rng);
    goal = pick_other(rng);
    if (goal >= source) ++goal;
    if (cfg.range_mode == RangeMode::Any) break;
    const RangeClass c = classify_range(board, source, goal);
    if ((c == RangeClass::Short) == (cfg.range_mode == RangeMode::Short)) break;
  }
  SimState s;
  s.tool_tip = cfg.home;
  s.block_pos = board.peg_positions[source];
  s.source_peg = source;
  s.goal_peg = goal;
  return {s, Goal{board.peg_positions[goal]}};
}

std::pair<SimState, Transition> step(const PegBoard& board, const SimState& state, const Goal& goal,
                                     const Action& action, const EpisodeConfig& cfg) {
  if (state.done || state.timestep >= cfg.horizon)
    throw Error(ErrorCode::EpisodeFinished, "episode already finished at timestep " +
                                                std::to_string(state.timestep));
  const Action a = cfg.limits.clamp(action);
  SimState next = state;

  const Vec3 target = state.tool_tip + Vec3(a.dx, a.dy, a.dz);
  const bool left_workspace = !cfg.workspace.contains(target);
  next.tool_tip = cfg.workspace.clamp(target);
  next.tool_yaw = wrap_angle(state.tool_yaw + a.d_yaw);

  const bool jaw_open = a.j >= 0.0;
  if (next.carried) next.block_pos = next.tool_tip + board.grasp_offset();

  if (state.jaw_open && !jaw_open && !next.carried) {
    if ((next.tool_tip - board.grasp_point(next.block_pos)).norm() <= board.grasp_radius) {
      next.carried = true;
      next.block_pos = next.tool_tip + board.grasp_offset();
    }
  } else if (next.carried && jaw_open) {
    next.carried = false;
    next.block_pos = drop_block(board, cfg, next.block_pos);
  }
  next.jaw_open = jaw_open;

  if (next.carried) {
    const double clearance = board.peg_radius + board.block_radius;
    for (int k = 0; k < static_cast<int>(board.peg_positions.size()); ++k) {
      if (k == state.source_peg || k == state.goal_peg) continue;
      const Vec3& peg = board.peg_positions[k];
      if (horizontal_distance(next.block_pos, peg) < clearance && next.block_pos.z() < peg.z()) {
        next.carried = false;
        next.block_pos = drop_block(board, cfg, next.block_pos);
        break;
      }
    }
  }
  next.block_pos.z() = std::max(next.block_pos.z(), board.board_z);

  next.timestep = state.timestep + 1;
  const bool success = is_success(next.block_pos, next.carried, goal, cfg);
  next.done = success || next.timestep >= cfg.horizon || left_workspace;

  Transition tr;
  tr.obs = observe(state);
  tr.action = a;
  tr.reward = success ? 0.0 : -1.0;
  tr.next_obs = observe(next);
  tr.achieved_goal = next.block_pos;
  tr.desired_goal = goal.position;
  tr.done = next.done;
  tr.is_success = success;
  return {next, tr};
}

Episode run_episode(const PegBoard& board, const EpisodeConfig& cfg, SimState state, const Goal& goal,
                    const PolicyFn& policy) {
  Episode ep;
  ep.source_peg = state.source_peg;
  ep.goal_peg = state.goal_peg;
  while (!state.done && state.timestep < cfg.horizon) {
    auto [next, tr] = step(board, state, goal, policy(state, goal), cfg);
    ep.transitions.push_back(tr);
    state = next;
  }
  return ep;
}

Action ScriptedPolicy::operator()(const SimState& s, const Goal& goal) const {
  constexpr double kReached = 1e-9;
  const double max_t = cfg_.limits.max_translation;
  Action a;

  if (is_success(s.block_pos, s.carried, goal, cfg_)) return a;

  if (!s.carried) {
    if (!s.jaw_open) {
      a.j = 1.0;
      return a;
    }
    const Vec3 d = board_.grasp_point(s.block_pos) - s.tool_tip;
    a.dx = clamp_abs(d.x(), max_t);
    a.dy = clamp_abs(d.y(), max_t);
    a.dz = clamp_abs(d.z(), max_t);
    // Close in the same step that lands on the grasp point.
    const bool lands = (d - Vec3(a.dx, a.dy, a.dz)).lpNorm<Eigen::Infinity>() < kReached;
    a.j = lands ? -1.0 : 1.0;
    return a;
  }

  a.j = -1.0;
  const Vec3 h(goal.position.x() - s.block_pos.x(), goal.position.y() - s.block_pos.y(), 0.0);
  if (h.lpNorm<Eigen::Infinity>() > kReached) {
    const double dz = board_.safe_tip_z() - s.tool_tip.z();
    a.dz = clamp_abs(dz, max_t);
    // Translate only once the block clears the peg tops.
    if (dz <= kReached) {
      a.dx = clamp_abs(h.x(), max_t);
      a.dy = clamp_abs(h.y(), max_t);
    }
    return a;
  }

  const double dz = (goal.position.z() - board_.grasp_offset().z()) - s.tool_tip.z();
  a.dz = clamp_abs(dz, max_t);
  if (std::abs(dz - a.dz) < kReached) a.j = 1.0;  // release on arrival
  return a;
}

std::vector<Episode> generate_demonstrations(int n, const PegBoard& board, const EpisodeConfig& cfg,
                                             std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "demonstration count must be >= 1");
  const ScriptedPolicy policy(board, cfg);
  std::mt19937_64 seeder(seed);
  std::vector<Episode> out;
  out.reserve(static_cast<std::size_t>(n));
  while (static_cast<int>(out.size()) < n) {
    auto [state, goal] = reset(board, cfg, seeder());
    Episode ep = run_episode(board, cfg, state, goal, std::cref(policy));
    if (!ep.transitions.empty() && ep.transitions.back().is_success) out.push_back(std::move(ep));
  }
  return out;
}

}  // namespace pegmentor
