#pragma once

// Structured-text (JSON) configuration: board, rig, episode, training and
// calibration solver settings. Lengths are meters except the two task
// settings historically given in centimeters (goal_tolerance_cm,
// workspace_size_cm), which are converted when parsed.

#include <filesystem>
#include <string_view>

#include "json.hpp"
#include "pegmentor/her_ddpg.hpp"
#include "pegmentor/pegboard.hpp"
#include "pegmentor/pnp.hpp"
#include "pegmentor/se3.hpp"

namespace pegmentor {

using Json = nlohmann::json;

struct AppConfig {
  PegBoard board = PegBoard::standard();
  EpisodeConfig episode;
  StereoRig rig = default_rig();
  TrainConfig train;
  PnpConfig pnp;

  /// Endoscope stand-in: looks at the board from the -y side, ~0.2 m away.
  static StereoRig default_rig();
  void validate() const;
};

Json to_json(const AppConfig& c);
/// Missing keys keep their defaults; unknown keys raise MalformedFile.
AppConfig app_config_from_json(const Json& j);
AppConfig load_config(const std::filesystem::path& path);

/// Applies "section.key=value" to a config document; the value is parsed as
/// JSON when possible, else taken as a string.
void apply_override(Json& doc, std::string_view assignment);

Json to_json(const RigidTransform& t);
RigidTransform rigid_transform_from_json(const Json& j);
Json to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const Json& j);
Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);
Json to_json(const EpisodeConfig& c);
EpisodeConfig episode_config_from_json(const Json& j, double board_z = 0.0);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace pegmentor
