#include "pegmentor/session.hpp"

#include "pegmentor/calibration_file.hpp"
#include "pegmentor/error.hpp"

namespace pegmentor {
namespace {

const Rgba kClickColor{255, 64, 255, 255};

bool same_intrinsics(const CameraIntrinsics& a, const CameraIntrinsics& b) {
  return a.fx == b.fx && a.fy == b.fy && a.cx == b.cx && a.cy == b.cy && a.width == b.width && a.height == b.height;
}

}  // namespace

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Calibrating: return "calibrating";
    case Mode::Training: return "training";
    case Mode::Replay: return "replay";
  }
  return "calibrating";
}

Mode parse_mode(std::string_view s) {
  if (s == "calibrating") return Mode::Calibrating;
  if (s == "training") return Mode::Training;
  if (s == "replay") return Mode::Replay;
  throw Error(ErrorCode::InvalidArgument, "unknown mode '" + std::string(s) + "'");
}

Session::Session(AppConfig cfg, std::string id, std::uint64_t seed)
    : cfg_(std::move(cfg)), id_(std::move(id)), next_seed_(seed) {
  cfg_.validate();
  reset(cfg_.episode.range_mode);
}

std::optional<StereoRig> Session::calibrated_rig() const {
  if (!calibration_) return std::nullopt;
  StereoRig rig = cfg_.rig;
  rig.left_pose = calibration_->pose.retagged(Frame::world(), Frame::camera_left());
  return rig;
}

CalibrationProgress Session::calibration_progress() const {
  CalibrationProgress p;
  p.n_clicks = static_cast<int>(clicks_.size());
  if (calibration_) {
    p.solved = true;
    p.rms_error_px = calibration_->rms_error_px;
    p.multi_solution_warning = calibration_->multi_solution_warning;
  }
  return p;
}

CalibrationProgress Session::handle_click(const Pixel& px) {
  if (mode_ != Mode::Calibrating)
    throw Error(ErrorCode::WrongMode, "clicks are accepted only while calibrating (mode is " +
                                          std::string(to_string(mode_)) + ")");
  if (clicks_.size() >= landmarks().size())
    throw Error(ErrorCode::TooManyClicks, "all " + std::to_string(landmarks().size()) + " landmarks are clicked");
  if (!std::isfinite(px.u) || !std::isfinite(px.v)) throw Error(ErrorCode::InvalidArgument, "click must be finite");
  clicks_.push_back({landmarks()[clicks_.size()], px});
  if (clicks_.size() < landmarks().size()) return calibration_progress();
  try {
    return solve_calibration();
  } catch (...) {
    clicks_.pop_back();
    throw;
  }
}

CalibrationProgress Session::solve_calibration() {
  if (mode_ != Mode::Calibrating)
    throw Error(ErrorCode::WrongMode, "calibration can be solved only while calibrating");
  calibration_ = solve_pnp(cfg_.rig.intrinsics, clicks_, cfg_.pnp);
  return calibration_progress();
}

StepResult Session::handle_teleop(const Action& action) {
  if (mode_ != Mode::Training)
    throw Error(ErrorCode::WrongMode, "teleoperation is accepted only in training mode (mode is " +
                                          std::string(to_string(mode_)) + ")");
  return apply(action);
}

StepResult Session::apply(const Action& action) {
  if (state_.done) throw Error(ErrorCode::EpisodeFinished, "episode is over; reset to continue");
  auto [next, transition] = step(cfg_.board, state_, goal_, action, cfg_.episode);
  state_ = next;
  current_.transitions.push_back(transition);
  StepResult r;
  r.reward = transition.reward;
  r.done = transition.done;
  r.is_success = transition.is_success;
  r.timestep = state_.timestep;
  if (plan_) r.deviation_m = distance_to_plan(*plan_, state_.tool_tip);
  if (state_.done) finish_episode();
  return r;
}

void Session::set_mode(Mode m) {
  if (m == Mode::Calibrating && mode_ != Mode::Calibrating) clicks_.clear();
  mode_ = m;
}

void Session::toggle_guidance(bool on) {
  if (on && !calibration_)
    throw Error(ErrorCode::GuidanceUnavailable, "guidance needs a camera calibration first");
  if (on && !policy_) throw Error(ErrorCode::GuidanceUnavailable, "guidance needs a loaded policy first");
  guidance_on_ = on;
}

void Session::reset(RangeMode range, std::optional<std::uint64_t> seed) {
  finish_episode();
  cfg_.episode.range_mode = range;
  episode_seed_ = seed ? *seed : next_seed_++;
  std::tie(state_, goal_) = pegmentor::reset(cfg_.board, cfg_.episode, episode_seed_);
  current_ = Episode{state_.source_peg, state_.goal_peg, {}};
  refresh_plan();
}

void Session::set_policy(LoadedPolicy policy) {
  policy_ = std::move(policy);
  refresh_plan();
}

void Session::refresh_plan() {
  if (!policy_) {
    plan_.reset();
    display_plan_.reset();
    return;
  }
  plan_ = rollout_trajectory(policy_->policy(cfg_.board, cfg_.episode), cfg_.board, state_, goal_, cfg_.episode);
  display_plan_ = densify(*plan_, 2);
}

void Session::finish_episode() {
  if (!current_.transitions.empty()) finished_.push_back(std::move(current_));
  current_ = Episode{state_.source_peg, state_.goal_peg, {}};
}

std::optional<StepResult> Session::tick() {
  ++ticks_;
  if (mode_ != Mode::Replay || !policy_ || state_.done) return std::nullopt;
  return apply(policy_->policy(cfg_.board, cfg_.episode)(state_, goal_));
}

StereoFrames Session::render() const {
  StereoFrames frames = render_scene(state_, cfg_.board, cfg_.rig);
  if (guidance_on_ && calibration_ && display_plan_)
    frames = overlay_plan(frames, *display_plan_, *calibrated_rig(), style_);
  if (mode_ == Mode::Calibrating) {
    Canvas c = frames.left.canvas();
    for (std::size_t i = 0; i < clicks_.size(); ++i) {
      const long long x = std::llround(clicks_[i].pixel.u), y = std::llround(clicks_[i].pixel.v);
      fill_disc(c, x, y, 3, kClickColor);
      draw_text(c, static_cast<int>(x) + 5, static_cast<int>(y) - 9, std::to_string(i), kClickColor, 1);
    }
  }
  return frames;
}

void Session::save_calibration(const std::filesystem::path& path) const {
  if (!calibration_) throw Error(ErrorCode::InvalidArgument, "no calibration to save");
  CalibrationRecord rec;
  rec.intrinsics = cfg_.rig.intrinsics;
  rec.pose = calibration_->pose;
  rec.rms_error_px = calibration_->rms_error_px;
  rec.converged = calibration_->converged;
  rec.correspondences = clicks_;
  pegmentor::save_calibration(path, rec);
}

void Session::load_calibration(const std::filesystem::path& path) {
  const CalibrationRecord rec = pegmentor::load_calibration(path);
  if (!same_intrinsics(rec.intrinsics, cfg_.rig.intrinsics))
    throw Error(ErrorCode::InvalidArgument, "calibration was made with different camera intrinsics");
  if (rec.correspondences.size() > landmarks().size())
    throw Error(ErrorCode::MalformedFile, "calibration lists more correspondences than landmarks");
  PnpResult r;
  r.pose = rec.pose;
  r.rms_error_px = rec.rms_error_px;
  r.converged = rec.converged;
  r.multi_solution_warning = rec.correspondences.size() < static_cast<std::size_t>(cfg_.pnp.min_points);
  if (!rec.correspondences.empty())
    r.per_point_error_px = reprojection_error(cfg_.rig.intrinsics, rec.pose, rec.correspondences).per_point;
  calibration_ = std::move(r);
  clicks_ = rec.correspondences;
}

std::vector<Episode> Session::episode_log() const {
  std::vector<Episode> out = finished_;
  if (!current_.transitions.empty()) out.push_back(current_);
  return out;
}

}  // namespace pegmentor
