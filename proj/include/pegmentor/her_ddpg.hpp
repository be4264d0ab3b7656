#pragma once

// Goal-conditioned DDPG with hindsight goal relabeling and Q-filtered
// behavior cloning from scripted demonstrations.

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <vector>

#include "pegmentor/mlp.hpp"
#include "pegmentor/pegboard.hpp"
#include "pegmentor/trajectory.hpp"

namespace pegmentor {

/// Running mean/std of a feature vector; normalized values are clipped.
class Normalizer {
 public:
  explicit Normalizer(int dim = 0, double clip = 5.0, double min_std = 1e-4);

  /// Columns are samples.
  void update(const Eigen::MatrixXd& samples);
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& x) const;

  int dim() const { return static_cast<int>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& std() const { return std_; }
  /// Used when restoring from a checkpoint; running sums restart from there.
  void set_stats(const Eigen::VectorXd& mean, const Eigen::VectorXd& std);
  void round_to_float32();

 private:
  Eigen::VectorXd sum_;
  Eigen::VectorXd sum_sq_;
  double count_ = 0.0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd std_;
  double clip_;
  double min_std_;
};

struct ActorCritic {
  MlpParams actor;          // obs || goal -> normalized action (tanh)
  MlpParams critic;         // obs || goal || action -> Q
  MlpParams target_actor;
  MlpParams target_critic;
  Normalizer obs_norm{kObsDim};
  Normalizer goal_norm{kGoalDim};

  static ActorCritic create(int hidden_units, int hidden_layers, std::mt19937_64& rng);

  /// Normalized (obs || goal) inputs, one column per sample.
  Eigen::MatrixXd state_input(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& goals) const;
  /// Deterministic action for a single state.
  Action act(const Observation& obs, const Goal& goal, const ActionLimits& limits) const;
  void round_to_float32();
};

/// Deterministic policy backed by the actor network.
PolicyFn make_policy(const ActorCritic& ac, const ActionLimits& limits);

struct TrainConfig {
  double gamma = 0.98;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double polyak = 0.95;
  int batch_size = 128;
  int demo_batch_size = 16;  // 1/8 of each update batch comes from demonstrations
  int her_k = 4;
  int epochs = 100;
  int cycles_per_epoch = 10;
  int rollouts_per_cycle = 2;
  int updates_per_cycle = 40;
  double bc_weight = 1.0;
  bool q_filter = true;
  double action_noise_sigma = 0.1;
  double random_action_eps = 0.2;
  double action_l2 = 0.0;  // optional penalty on squared normalized actions
  int eval_episodes = 10;
  int hidden_units = 64;
  int hidden_layers = 2;
  int buffer_capacity = 1'000'000;  // transitions
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double bc_loss = 0.0;
  double eval_success_rate = 0.0;
  double wall_time_s = 0.0;
};

struct TrainStats {
  std::vector<EpochStats> epochs;
};

enum class Partition { Agent, Demo };

/// Whole episodes, grouped into agent and demonstration partitions. Agent
/// episodes are evicted oldest-first once the transition count exceeds the
/// capacity; demonstrations are kept.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity_transitions = 1'000'000);

  void add(Episode ep, bool demo);

  std::size_t size() const { return agent_transitions_ + demo_transitions_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t transitions(Partition p) const;
  std::size_t episodes(Partition p) const;
  const Episode& episode(Partition p, std::size_t i) const;

  /// Maps a uniform transition index within the partition to (episode, t).
  std::pair<std::size_t, std::size_t> locate(Partition p, std::size_t flat) const;

 private:
  void rebuild_offsets(Partition p);

  std::size_t capacity_;
  std::deque<Episode> agent_;
  std::vector<Episode> demo_;
  std::vector<std::size_t> agent_offsets_;
  std::vector<std::size_t> demo_offsets_;
  std::size_t agent_transitions_ = 0;
  std::size_t demo_transitions_ = 0;
};

struct SampledTransition {
  Transition transition;
  bool relabeled = false;
  bool from_demo = false;
  std::size_t episode = 0;
  std::size_t t = 0;
};

/// Uniform transitions from one partition. With probability her_k / (her_k + 1)
/// the desired goal is replaced by the achieved goal of a uniformly chosen
/// transition at or after t in the same episode, and the reward is recomputed.
/// Throws EmptyBuffer when the partition holds no transitions.
std::vector<SampledTransition> sample_her_batch(const ReplayBuffer& buf, int count, int her_k, Partition p,
                                                const EpisodeConfig& ep_cfg, std::mt19937_64& rng);

struct Losses {
  double actor = 0.0;
  double critic = 0.0;
  double bc = 0.0;
  int demo_terms = 0;  // demonstration samples that passed the Q filter
  double min_target = 0.0;
  double max_target = 0.0;
};

class Learner {
 public:
  Learner(ActorCritic ac, TrainConfig cfg);

  /// One critic and one actor gradient step followed by the polyak update of
  /// both target networks. The demonstration batch contributes to both the
  /// TD loss and the behavior-cloning term.
  Losses train_step(const std::vector<SampledTransition>& batch,
                    const std::vector<SampledTransition>& demo_batch);

  const ActorCritic& model() const { return ac_; }
  ActorCritic& model() { return ac_; }

 private:
  ActorCritic ac_;
  TrainConfig cfg_;
  Adam actor_opt_;
  Adam critic_opt_;
};

struct TrainResult {
  ActorCritic policy;
  TrainStats stats;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Full training run. The returned networks are rounded to 32-bit floats so
/// that a checkpoint round trip reproduces them exactly.
TrainResult train(const PegBoard& board, const EpisodeConfig& ep_cfg, const std::vector<Episode>& demos,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Success rate over n noise-free episodes reset from seeds drawn from `seed`.
double evaluate(const PolicyFn& policy, const PegBoard& board, const EpisodeConfig& cfg, int n,
                std::uint64_t seed);

/// Noise-free rollout from `state`: the start position plus one waypoint per step.
TrajectoryPlan rollout_trajectory(const PolicyFn& policy, const PegBoard& board, const SimState& state,
                                  const Goal& goal, const EpisodeConfig& cfg);

}  // namespace pegmentor
