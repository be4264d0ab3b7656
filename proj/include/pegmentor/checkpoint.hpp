#pragma once

// Binary policy checkpoints: "PGM1" magic, u32 version, u32 tensor count,
// then per tensor: u32 name length, name bytes, u32 rank, rank x u32 dims and
// the float32 payload. All integers and floats are little-endian.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "pegmentor/her_ddpg.hpp"
#include "pegmentor/pegboard.hpp"

namespace pegmentor {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;  // row-major
};

std::string encode_tensors(const std::vector<Tensor>& tensors);
/// Throws MalformedFile on bad magic, unknown version or truncation.
std::vector<Tensor> decode_tensors(const std::string& bytes);

void write_tensors(const std::filesystem::path& path, const std::vector<Tensor>& tensors);
std::vector<Tensor> read_tensors(const std::filesystem::path& path);

/// Actor, critic and both normalizers. Parameters are stored as float32, so
/// save/load is exact for networks already rounded to float32.
void save_checkpoint(const std::filesystem::path& path, const ActorCritic& ac);
/// A marker checkpoint that selects the built-in scripted policy.
void save_scripted_checkpoint(const std::filesystem::path& path);

/// Restores networks and normalizers; target networks are copies of the live
/// ones. Throws MalformedFile for a scripted marker or missing tensors.
ActorCritic load_checkpoint(const std::filesystem::path& path);

/// A policy restored from either kind of checkpoint.
class LoadedPolicy {
 public:
  static LoadedPolicy load(const std::filesystem::path& path);
  static LoadedPolicy scripted();
  static LoadedPolicy learned(ActorCritic ac);

  bool is_scripted() const { return model_ == nullptr; }
  const ActorCritic* model() const { return model_.get(); }
  /// The returned function keeps the model alive.
  PolicyFn policy(const PegBoard& board, const EpisodeConfig& cfg) const;

 private:
  std::shared_ptr<const ActorCritic> model_;
};

}  // namespace pegmentor
