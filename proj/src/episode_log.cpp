#include "pegmentor/episode_log.hpp"

#include <sstream>

#include "pegmentor/error.hpp"

namespace pegmentor {
namespace {

template <std::size_t N>
Json array_json(const std::array<double, N>& a) {
  Json j = Json::array();
  for (double v : a) j.push_back(v);
  return j;
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

template <std::size_t N>
std::array<double, N> array_from(const Json& j, const char* key) {
  const Json& a = j.at(key);
  if (!a.is_array() || a.size() != N)
    throw Error(ErrorCode::MalformedFile, std::string(key) + ": expected " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = a[i].get<double>();
  return out;
}

Vec3 vec_from(const Json& j, const char* key) {
  const auto a = array_from<3>(j, key);
  return {a[0], a[1], a[2]};
}

}  // namespace

Json to_json(const Transition& t) {
  const Action& a = t.action;
  return {{"obs", array_json(t.obs)},
          {"action", Json::array({a.dx, a.dy, a.dz, a.d_yaw, a.d_pitch, a.j})},
          {"reward", t.reward},
          {"next_obs", array_json(t.next_obs)},
          {"achieved_goal", vec_json(t.achieved_goal)},
          {"desired_goal", vec_json(t.desired_goal)},
          {"done", t.done},
          {"is_success", t.is_success}};
}

Transition transition_from_json(const Json& j) {
  Transition t;
  t.obs = array_from<kObsDim>(j, "obs");
  const auto a = array_from<6>(j, "action");
  t.action = Action{a[0], a[1], a[2], a[3], a[4], a[5]};
  t.reward = j.at("reward").get<double>();
  t.next_obs = array_from<kObsDim>(j, "next_obs");
  t.achieved_goal = vec_from(j, "achieved_goal");
  t.desired_goal = vec_from(j, "desired_goal");
  t.done = j.at("done").get<bool>();
  t.is_success = j.at("is_success").get<bool>();
  return t;
}

Json to_json(const Episode& ep, std::size_t index) {
  Json transitions = Json::array();
  for (const auto& t : ep.transitions) transitions.push_back(to_json(t));
  return {{"type", "episode"},
          {"index", index},
          {"source_peg", ep.source_peg},
          {"goal_peg", ep.goal_peg},
          {"transitions", std::move(transitions)}};
}

Episode episode_from_json(const Json& j) {
  if (j.value("type", "") != "episode") throw Error(ErrorCode::MalformedFile, "expected an episode record");
  Episode ep;
  ep.source_peg = j.at("source_peg").get<int>();
  ep.goal_peg = j.at("goal_peg").get<int>();
  const Json& ts = j.at("transitions");
  if (!ts.is_array()) throw Error(ErrorCode::MalformedFile, "transitions must be an array");
  for (const auto& t : ts) ep.transitions.push_back(transition_from_json(t));
  return ep;
}

std::string encode_episode_log(const Json& header, const std::vector<Episode>& episodes) {
  Json h = header;
  h["type"] = "header";
  h["episodes"] = episodes.size();
  std::string out = h.dump() + "\n";
  for (std::size_t i = 0; i < episodes.size(); ++i) out += to_json(episodes[i], i).dump() + "\n";
  return out;
}

EpisodeLog decode_episode_log(const std::string& text) {
  EpisodeLog log;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      if (!have_header) {
        if (!j.is_object() || j.value("type", "") != "header")
          throw Error(ErrorCode::MalformedFile, "first record must be the header");
        log.header = j;
        have_header = true;
      } else {
        log.episodes.push_back(episode_from_json(j));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedFile, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedFile, "line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  if (!have_header) throw Error(ErrorCode::MalformedFile, "episode log is empty");
  const auto declared = log.header.value("episodes", log.episodes.size());
  if (declared != log.episodes.size())
    throw Error(ErrorCode::MalformedFile, "header declares " + std::to_string(declared) + " episodes, found " +
                                              std::to_string(log.episodes.size()));
  return log;
}

void write_episode_log(const std::filesystem::path& path, const Json& header, const std::vector<Episode>& episodes) {
  write_text_file(path, encode_episode_log(header, episodes));
}

EpisodeLog read_episode_log(const std::filesystem::path& path) {
  try {
    return decode_episode_log(read_text_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

}  // namespace pegmentor
