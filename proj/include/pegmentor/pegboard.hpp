#pragma once

// Kinematic peg-transfer simulation: a 4x3 peg board, one block, and a tool
// tip with a jaw. Deterministic given (seed, action sequence).

#include <array>
#include <cstdint>
#include <functional>
#include <string_view>
#include <utility>
#include <vector>

#include "pegmentor/se3.hpp"

namespace pegmentor {

inline constexpr double kPi = 3.14159265358979323846;

struct PegBoard {
  std::vector<Vec3> peg_positions;  // peg top centers, world frame
  double peg_radius = 0.0025;
  double peg_height = 0.02;
  double board_z = 0.0;
  double block_radius = 0.008;
  double block_height = 0.006;
  double grasp_radius = 0.005;

  /// 4 columns x 3 rows at 2 cm spacing centered on the world origin,
  /// row-major from the -y row.
  static PegBoard standard();

  void validate() const;
  double peg_top_z() const { return board_z + peg_height; }
  /// Tip height above peg tops that keeps a carried block clear of them.
  double safe_tip_z() const { return peg_top_z() + 0.01; }
  /// block_pos == tip + grasp_offset() while carried (the jaw holds the block
  /// at half its height; block_pos is the block's bottom center).
  Vec3 grasp_offset() const { return {0.0, 0.0, -0.5 * block_height}; }
  Vec3 grasp_point(const Vec3& block_pos) const { return block_pos - grasp_offset(); }
};

struct Action {
  double dx = 0.0;  // meters
  double dy = 0.0;
  double dz = 0.0;
  double d_yaw = 0.0;    // radians
  double d_pitch = 0.0;  // frozen at 0 in the top-down configuration
  double j = 0.0;        // jaw: open if j >= 0, close if j < 0
};

struct ActionLimits {
  double max_translation = 0.005;   // per axis, per step
  double max_yaw = 15.0 * kPi / 180.0;

  /// Actions seen by learners are normalized to [-1, 1]^kLearnedDims:
  /// (dx, dy, dz, d_yaw, j). d_pitch is not learned.
  static constexpr int kLearnedDims = 5;
  Action from_normalized(const double* u) const;
  void to_normalized(const Action& a, double* u) const;
  Action clamp(const Action& a) const;
};

struct Workspace {
  Vec3 lo{-0.05, -0.05, 0.0};
  Vec3 hi{0.05, 0.05, 0.10};

  bool contains(const Vec3& p) const;
  Vec3 clamp(const Vec3& p) const;
};

enum class RangeMode { Short, Long, Any };
enum class RangeClass { Short, Long };

std::string_view to_string(RangeMode m);
RangeMode parse_range_mode(std::string_view s);

struct EpisodeConfig {
  int horizon = 50;
  double goal_tolerance = 0.005;  // meters
  Workspace workspace;
  RangeMode range_mode = RangeMode::Any;
  Vec3 home{0.0, 0.0, 0.05};
  ActionLimits limits;

  void validate() const;
};

struct Goal {
  Vec3 position = Vec3::Zero();
};

struct SimState {
  Vec3 tool_tip = Vec3::Zero();
  double tool_yaw = 0.0;
  bool jaw_open = true;
  Vec3 block_pos = Vec3::Zero();
  bool carried = false;
  int timestep = 0;
  int source_peg = 0;
  int goal_peg = 1;
  bool done = false;
};

inline constexpr int kObsDim = 11;
inline constexpr int kGoalDim = 3;
/// tip(3), jaw(+1 open / -1 closed), block(3), block - tip(3), carried(1/0).
using Observation = std::array<double, kObsDim>;

Observation observe(const SimState& s);

struct Transition {
  Observation obs{};
  Action action;
  double reward = -1.0;
  Observation next_obs{};
  Vec3 achieved_goal = Vec3::Zero();  // block position after the step
  Vec3 desired_goal = Vec3::Zero();
  bool done = false;
  bool is_success = false;
};

struct Episode {
  int source_peg = 0;
  int goal_peg = 0;
  std::vector<Transition> transitions;
};

/// Distance-only half of the success test, shared with goal relabeling.
bool is_success(const Vec3& achieved, bool carried, const Goal& goal, const EpisodeConfig& cfg);
/// Reads the block position and carried flag from an observation.
bool is_success(const Observation& obs, const Goal& goal, const EpisodeConfig& cfg);

RangeClass classify_range(const PegBoard& board, int source, int goal);

std::pair<SimState, Goal> reset(const PegBoard& board, const EpisodeConfig& cfg, std::uint64_t seed);

/// Throws EpisodeFinished when the state is already done.
std::pair<SimState, Transition> step(const PegBoard& board, const SimState& state, const Goal& goal,
                                     const Action& action, const EpisodeConfig& cfg);

using PolicyFn = std::function<Action(const SimState&, const Goal&)>;

/// Runs `policy` from `state` until done.
Episode run_episode(const PegBoard& board, const EpisodeConfig& cfg, SimState state, const Goal& goal,
                    const PolicyFn& policy);

/// Approach, grasp, lift to safe height, translate, descend, release.
class ScriptedPolicy {
 public:
  ScriptedPolicy(PegBoard board, EpisodeConfig cfg) : board_(std::move(board)), cfg_(std::move(cfg)) {}
  Action operator()(const SimState& state, const Goal& goal) const;

 private:
  PegBoard board_;
  EpisodeConfig cfg_;
};

/// n successful scripted episodes; failures are resampled. Deterministic in seed.
std::vector<Episode> generate_demonstrations(int n, const PegBoard& board, const EpisodeConfig& cfg,
                                             std::uint64_t seed);

}  // namespace pegmentor
