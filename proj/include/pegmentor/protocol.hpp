#pragma once

// Wire protocol between the service and a console. Every message is one JSON
// object framed by a 4-byte big-endian length.
//
// Inbound (client -> service):
//   {type:"click", u, v}
//   {type:"solve_calibration"}
//   {type:"teleop", dx, dy, dz, dyaw, j}            meters / radians; j >= 0 opens
//   {type:"set_mode", mode}                          "calibrating" | "training" | "replay"
//   {type:"toggle_guidance", on}
//   {type:"reset", range_mode, seed?}                "short" | "long" | "any"
//   {type:"load_checkpoint", path}
//   {type:"save_calibration", path} / {type:"load_calibration", path}
//   {type:"get_state"}
//   {type:"tick"}                                    render now (the only tick source over stdio)
//
// Outbound (service -> client):
//   {type:"frame", eye:"left"|"right", encoding:"ppm-base64", tick, width, height, data}
//   {type:"calibration", n_clicks, solved, rms_error_px?, multi_solution_warning}
//   {type:"step", reward, done, is_success, deviation_m (number or null), timestep}
//   {type:"state", session, mode, n_clicks, calibrated, policy_loaded, guidance, range_mode,
//                  episode_seed, source_peg, goal_peg, timestep, done}
//   {type:"plan", label, waypoints:[[x,y,z],...], jaw_open:[...], display_points}
//   {type:"error", code, detail}
//
// Frame data is a netpbm P7 (PAM, RGB_ALPHA) image, base64-encoded: a short
// text header followed by exactly width * height * 4 RGBA bytes.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pegmentor/config.hpp"
#include "pegmentor/error.hpp"
#include "pegmentor/session.hpp"

namespace pegmentor {

inline constexpr std::size_t kMaxInboundMessageBytes = 1u << 20;
inline constexpr std::size_t kMaxOutboundMessageBytes = 64u << 20;

/// Throws BadMessage unless `msg` matches one inbound schema exactly
/// (required fields with the right types, no unknown fields).
void validate_inbound(const Json& msg);
/// Same for outbound messages; used to check what the service emits.
void validate_outbound(const Json& msg);

Json error_message(ErrorCode code, std::string_view detail);
Json calibration_message(const CalibrationProgress& p);
Json step_message(const StepResult& r);
Json state_message(const Session& s);
Json plan_message(const TrajectoryPlan& plan);
Json frame_message(std::string_view eye, const FrameBuffer& frame, long tick);
/// Both eyes of the session's current frames, tagged with its tick count.
std::vector<Json> frame_messages(const Session& s);

/// Applies one inbound message and returns the replies in order. Library
/// errors become error messages; the session is left as it was before the
/// failing operation. "tick" returns the frame pair (and a step in Replay).
std::vector<Json> handle_message(Session& s, const Json& msg);

/// Length-prefixed encoding of one message.
std::string encode_frame(const Json& msg);

/// Incremental decoder for a length-prefixed byte stream.
class FrameDecoder {
 public:
  explicit FrameDecoder(std::size_t max_bytes = kMaxInboundMessageBytes) : max_bytes_(max_bytes) {}

  void feed(std::string_view bytes) { buffer_.append(bytes); }
  /// The next complete payload, if any. Throws BadMessage when a declared
  /// length exceeds the limit.
  std::optional<std::string> next();
  bool empty() const { return buffer_.empty(); }

 private:
  std::string buffer_;
  std::size_t max_bytes_;
};

/// Parses a payload as a JSON object; throws BadMessage otherwise.
Json parse_message(std::string_view payload);

}  // namespace pegmentor
