#pragma once

// One trainee session: simulator, calibration clicks and result, loaded
// policy, guidance plan and the frames shown to the trainee. A session is
// not thread-safe; the service confines each one to a single executor.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pegmentor/checkpoint.hpp"
#include "pegmentor/config.hpp"
#include "pegmentor/overlay.hpp"
#include "pegmentor/pnp.hpp"

namespace pegmentor {

enum class Mode { Calibrating, Training, Replay };

std::string_view to_string(Mode m);
/// Accepts "calibrating", "training", "replay"; throws InvalidArgument.
Mode parse_mode(std::string_view s);

struct CalibrationProgress {
  int n_clicks = 0;
  bool solved = false;
  std::optional<double> rms_error_px;
  bool multi_solution_warning = false;
};

struct StepResult {
  double reward = -1.0;
  bool done = false;
  bool is_success = false;
  /// Distance from the tool tip to the episode's guidance plan; empty while
  /// no policy is loaded. A placeholder score, not a validated skill metric.
  std::optional<double> deviation_m;
  int timestep = 0;
};

class Session {
 public:
  Session(AppConfig cfg, std::string id, std::uint64_t seed = 1);

  const std::string& id() const { return id_; }
  const AppConfig& config() const { return cfg_; }
  Mode mode() const { return mode_; }
  const SimState& state() const { return state_; }
  const Goal& goal() const { return goal_; }
  std::uint64_t episode_seed() const { return episode_seed_; }
  bool guidance_on() const { return guidance_on_; }
  bool has_policy() const { return policy_.has_value(); }
  const std::optional<PnpResult>& calibration() const { return calibration_; }
  const std::vector<Correspondence>& pending_clicks() const { return clicks_; }
  /// Calibration landmarks in click order: the 12 peg tops, row-major.
  const std::vector<Vec3>& landmarks() const { return cfg_.board.peg_positions; }
  /// Expert plan for the current episode (raw rollout waypoints), fixed at
  /// reset or when a policy is loaded; present iff a policy is loaded.
  const std::optional<TrajectoryPlan>& plan() const { return plan_; }
  /// The rig the overlay is projected through: configured intrinsics and
  /// baseline with the calibrated pose.
  std::optional<StereoRig> calibrated_rig() const;
  long tick_count() const { return ticks_; }

  /// Pairs the click with the next landmark; solves once all are collected.
  /// Throws WrongMode outside Calibrating and TooManyClicks when full.
  CalibrationProgress handle_click(const Pixel& px);
  /// Solves with the clicks so far (needs 3; fewer than 4 is flagged).
  CalibrationProgress solve_calibration();
  CalibrationProgress calibration_progress() const;

  /// Throws WrongMode outside Training and EpisodeFinished after done.
  StepResult handle_teleop(const Action& action);

  /// Entering Calibrating discards the pending clicks.
  void set_mode(Mode m);
  /// Throws GuidanceUnavailable when turning on without calibration and policy.
  void toggle_guidance(bool on);
  /// New episode; without a seed the session's own sequence continues.
  void reset(RangeMode range, std::optional<std::uint64_t> seed = std::nullopt);
  void set_policy(LoadedPolicy policy);

  /// Advances the tick counter; in Replay mode also steps the simulator with
  /// the loaded policy (until done) and returns that step.
  std::optional<StepResult> tick();
  /// Current stereo frames: scene, click markers while calibrating, and the
  /// guidance overlay iff guidance is on (which implies a calibration).
  StereoFrames render() const;

  void save_calibration(const std::filesystem::path& path) const;
  void load_calibration(const std::filesystem::path& path);

  /// Finished episodes plus the one in progress, if it has any steps.
  std::vector<Episode> episode_log() const;

 private:
  StepResult apply(const Action& action);
  void refresh_plan();
  void finish_episode();

  AppConfig cfg_;
  std::string id_;
  std::uint64_t next_seed_;
  std::uint64_t episode_seed_ = 0;
  Mode mode_ = Mode::Calibrating;
  SimState state_;
  Goal goal_;
  std::vector<Correspondence> clicks_;
  std::optional<PnpResult> calibration_;
  std::optional<LoadedPolicy> policy_;
  std::optional<TrajectoryPlan> plan_;
  std::optional<TrajectoryPlan> display_plan_;
  bool guidance_on_ = false;
  long ticks_ = 0;
  OverlayStyle style_;
  Episode current_;
  std::vector<Episode> finished_;
};

}  // namespace pegmentor
