#include "pegmentor/calibration_file.hpp"

#include "pegmentor/error.hpp"

namespace pegmentor {

Json to_json(const CalibrationRecord& c) {
  Json corr = Json::array();
  for (const auto& k : c.correspondences)
    corr.push_back({{"world_m", Json::array({k.world.x(), k.world.y(), k.world.z()})},
                    {"pixel", Json::array({k.pixel.u, k.pixel.v})}});
  return {{"intrinsics", to_json(c.intrinsics)},
          {"pose", to_json(c.pose)},
          {"rms_error_px", c.rms_error_px},
          {"converged", c.converged},
          {"correspondences", std::move(corr)}};
}

CalibrationRecord calibration_from_json(const Json& j) {
  try {
    CalibrationRecord c;
    c.intrinsics = intrinsics_from_json(j.at("intrinsics"));
    c.intrinsics.validate();
    c.pose = rigid_transform_from_json(j.at("pose"));
    c.rms_error_px = j.at("rms_error_px").get<double>();
    c.converged = j.value("converged", false);
    for (const auto& k : j.value("correspondences", Json::array())) {
      const auto w = k.at("world_m").get<std::vector<double>>();
      const auto p = k.at("pixel").get<std::vector<double>>();
      if (w.size() != 3 || p.size() != 2) throw Error(ErrorCode::MalformedFile, "bad correspondence");
      c.correspondences.push_back({Vec3(w[0], w[1], w[2]), Pixel{p[0], p[1]}});
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("calibration: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedFile) throw;
    throw Error(ErrorCode::MalformedFile, "calibration: " + e.detail());
  }
}

void save_calibration(const std::filesystem::path& path, const CalibrationRecord& c) {
  write_text_file(path, to_json(c).dump(2) + "\n");
}

CalibrationRecord load_calibration(const std::filesystem::path& path) {
  try {
    return calibration_from_json(Json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedFile, path.string() + ": " + e.what());
  }
}

}  // namespace pegmentor
