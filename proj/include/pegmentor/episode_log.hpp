#pragma once

// JSON-lines episode logs. The first line is a header object (configuration,
// seed, episode count); every following line is one episode.

#include <filesystem>
#include <string>
#include <vector>

#include "pegmentor/config.hpp"
#include "pegmentor/pegboard.hpp"

namespace pegmentor {

struct EpisodeLog {
  Json header;
  std::vector<Episode> episodes;
};

Json to_json(const Transition& t);
Transition transition_from_json(const Json& j);
Json to_json(const Episode& ep, std::size_t index);
Episode episode_from_json(const Json& j);

std::string encode_episode_log(const Json& header, const std::vector<Episode>& episodes);
/// Throws MalformedFile naming the offending (1-based) line.
EpisodeLog decode_episode_log(const std::string& text);

void write_episode_log(const std::filesystem::path& path, const Json& header, const std::vector<Episode>& episodes);
EpisodeLog read_episode_log(const std::filesystem::path& path);

}  // namespace pegmentor
