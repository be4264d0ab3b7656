#include "pegmentor/her_ddpg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "pegmentor/error.hpp"

namespace pegmentor {
namespace {

constexpr int kActDim = ActionLimits::kLearnedDims;

Eigen::VectorXd to_vector(const Observation& o) { return Eigen::Map<const Eigen::VectorXd>(o.data(), kObsDim); }

struct BatchMatrices {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd next_obs;
  Eigen::MatrixXd goals;
  Eigen::MatrixXd actions;
  Eigen::VectorXd rewards;
  Eigen::VectorXd terminal;
};

BatchMatrices stack(const std::vector<SampledTransition>& a, const std::vector<SampledTransition>& b,
                    const ActionLimits& limits) {
  const Eigen::Index n = static_cast<Eigen::Index>(a.size() + b.size());
  BatchMatrices m;
  m.obs.resize(kObsDim, n);
  m.next_obs.resize(kObsDim, n);
  m.goals.resize(kGoalDim, n);
  m.actions.resize(kActDim, n);
  m.rewards.resize(n);
  m.terminal.resize(n);
  Eigen::Index col = 0;
  for (const auto* src : {&a, &b}) {
    for (const auto& s : *src) {
      const Transition& tr = s.transition;
      m.obs.col(col) = to_vector(tr.obs);
      m.next_obs.col(col) = to_vector(tr.next_obs);
      m.goals.col(col) = tr.desired_goal;
      double u[kActDim];
      limits.to_normalized(tr.action, u);
      for (int d = 0; d < kActDim; ++d) m.actions(d, col) = u[d];
      m.rewards(col) = tr.reward;
      // Reaching the (possibly relabeled) goal is the only absorbing event;
      // horizon and workspace ends are truncations and still bootstrap.
      m.terminal(col) = tr.reward == 0.0 ? 1.0 : 0.0;
      ++col;
    }
  }
  return m;
}

Eigen::MatrixXd vstack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

void update_normalizers(ActorCritic& ac, const Episode& ep) {
  const Eigen::Index n = static_cast<Eigen::Index>(ep.transitions.size());
  if (n == 0) return;
  Eigen::MatrixXd obs(kObsDim, 2 * n);
  Eigen::MatrixXd goals(kGoalDim, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& tr = ep.transitions[static_cast<std::size_t>(i)];
    obs.col(2 * i) = to_vector(tr.obs);
    obs.col(2 * i + 1) = to_vector(tr.next_obs);
    goals.col(2 * i) = tr.desired_goal;
    goals.col(2 * i + 1) = tr.achieved_goal;
  }
  ac.obs_norm.update(obs);
  ac.goal_norm.update(goals);
}

}  // namespace

Normalizer::Normalizer(int dim, double clip, double min_std)
    : sum_(Eigen::VectorXd::Zero(dim)),
      sum_sq_(Eigen::VectorXd::Zero(dim)),
      mean_(Eigen::VectorXd::Zero(dim)),
      std_(Eigen::VectorXd::Ones(dim)),
      clip_(clip),
      min_std_(min_std) {}

void Normalizer::update(const Eigen::MatrixXd& samples) {
  if (samples.rows() != dim()) throw Error(ErrorCode::ShapeMismatch, "normalizer feature count differs");
  sum_ += samples.rowwise().sum();
  sum_sq_ += samples.array().square().matrix().rowwise().sum();
  count_ += static_cast<double>(samples.cols());
  if (count_ <= 0.0) return;
  mean_ = sum_ / count_;
  const Eigen::VectorXd var = (sum_sq_ / count_ - mean_.cwiseProduct(mean_)).cwiseMax(0.0);
  std_ = var.cwiseSqrt().cwiseMax(min_std_);
}

Eigen::MatrixXd Normalizer::normalize(const Eigen::MatrixXd& x) const {
  if (x.rows() != dim()) throw Error(ErrorCode::ShapeMismatch, "normalizer feature count differs");
  Eigen::MatrixXd out = (x.colwise() - mean_).array().colwise() / std_.array();
  return out.cwiseMax(-clip_).cwiseMin(clip_);
}

void Normalizer::set_stats(const Eigen::VectorXd& mean, const Eigen::VectorXd& std) {
  if (mean.size() != std.size()) throw Error(ErrorCode::ShapeMismatch, "normalizer mean/std lengths differ");
  mean_ = mean;
  std_ = std;
  sum_ = Eigen::VectorXd::Zero(mean.size());
  sum_sq_ = Eigen::VectorXd::Zero(mean.size());
  count_ = 0.0;
}

void Normalizer::round_to_float32() {
  mean_ = mean_.cast<float>().cast<double>();
  std_ = std_.cast<float>().cast<double>();
}

ActorCritic ActorCritic::create(int hidden_units, int hidden_layers, std::mt19937_64& rng) {
  if (hidden_units < 1 || hidden_layers < 1) throw Error(ErrorCode::InvalidArgument, "network must have hidden units");
  std::vector<int> actor_sizes{kObsDim + kGoalDim};
  std::vector<int> critic_sizes{kObsDim + kGoalDim + kActDim};
  for (int i = 0; i < hidden_layers; ++i) {
    actor_sizes.push_back(hidden_units);
    critic_sizes.push_back(hidden_units);
  }
  actor_sizes.push_back(kActDim);
  critic_sizes.push_back(1);
  ActorCritic ac;
  ac.actor = MlpParams::glorot(actor_sizes, Activation::Relu, Activation::Tanh, rng);
  ac.critic = MlpParams::glorot(critic_sizes, Activation::Relu, Activation::Identity, rng);
  ac.target_actor = ac.actor;
  ac.target_critic = ac.critic;
  return ac;
}

Eigen::MatrixXd ActorCritic::state_input(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& goals) const {
  return vstack(obs_norm.normalize(obs), goal_norm.normalize(goals));
}

Action ActorCritic::act(const Observation& obs, const Goal& goal, const ActionLimits& limits) const {
  const Eigen::MatrixXd u = mlp_forward_batch(actor, state_input(to_vector(obs), goal.position));
  return limits.from_normalized(u.data());
}

void ActorCritic::round_to_float32() {
  for (MlpParams* p : {&actor, &critic, &target_actor, &target_critic}) pegmentor::round_to_float32(*p);
  obs_norm.round_to_float32();
  goal_norm.round_to_float32();
}

PolicyFn make_policy(const ActorCritic& ac, const ActionLimits& limits) {
  return [&ac, limits](const SimState& s, const Goal& g) { return ac.act(observe(s), g, limits); };
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
  };
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
  require(actor_lr > 0.0 && critic_lr > 0.0, "learning rates must be positive");
  require(polyak > 0.0 && polyak < 1.0, "polyak must lie in (0, 1)");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(demo_batch_size >= 0 && demo_batch_size <= batch_size, "demo_batch_size must lie in [0, batch_size]");
  require(her_k >= 0, "her_k must be >= 0");
  require(epochs >= 0, "epochs must be >= 0");
  require(cycles_per_epoch >= 1 && rollouts_per_cycle >= 1 && updates_per_cycle >= 1,
          "cycle counts must be >= 1");
  require(bc_weight >= 0.0, "bc_weight must be >= 0");
  require(action_noise_sigma >= 0.0, "action_noise_sigma must be >= 0");
  require(random_action_eps >= 0.0 && random_action_eps <= 1.0, "random_action_eps must lie in [0, 1]");
  require(action_l2 >= 0.0, "action_l2 must be >= 0");
  require(eval_episodes >= 1, "eval_episodes must be >= 1");
  require(hidden_units >= 1 && hidden_layers >= 1, "network must have hidden units");
  require(buffer_capacity >= 1, "buffer_capacity must be >= 1");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity_transitions) : capacity_(capacity_transitions) {
  if (capacity_ == 0) throw Error(ErrorCode::InvalidArgument, "replay capacity must be positive");
}

void ReplayBuffer::add(Episode ep, bool demo) {
  if (ep.transitions.empty()) return;
  const std::size_t n = ep.transitions.size();
  if (demo) {
    demo_transitions_ += n;
    demo_.push_back(std::move(ep));
    rebuild_offsets(Partition::Demo);
  } else {
    agent_transitions_ += n;
    agent_.push_back(std::move(ep));
  }
  bool evicted = false;
  while (size() > capacity_ && !agent_.empty()) {
    agent_transitions_ -= agent_.front().transitions.size();
    agent_.pop_front();
    evicted = true;
  }
  if (!demo) {
    if (evicted)
      rebuild_offsets(Partition::Agent);
    else
      agent_offsets_.push_back(agent_transitions_ - n);
  }
}

void ReplayBuffer::rebuild_offsets(Partition p) {
  auto& offsets = p == Partition::Agent ? agent_offsets_ : demo_offsets_;
  offsets.clear();
  std::size_t acc = 0;
  auto push = [&](const Episode& e) {
    offsets.push_back(acc);
    acc += e.transitions.size();
  };
  if (p == Partition::Agent)
    for (const auto& e : agent_) push(e);
  else
    for (const auto& e : demo_) push(e);
}

std::size_t ReplayBuffer::transitions(Partition p) const {
  return p == Partition::Agent ? agent_transitions_ : demo_transitions_;
}

std::size_t ReplayBuffer::episodes(Partition p) const {
  return p == Partition::Agent ? agent_.size() : demo_.size();
}

const Episode& ReplayBuffer::episode(Partition p, std::size_t i) const {
  return p == Partition::Agent ? agent_.at(i) : demo_.at(i);
}

std::pair<std::size_t, std::size_t> ReplayBuffer::locate(Partition p, std::size_t flat) const {
  const auto& offsets = p == Partition::Agent ? agent_offsets_ : demo_offsets_;
  const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat);
  const std::size_t ep = static_cast<std::size_t>(it - offsets.begin()) - 1;
  return {ep, flat - offsets[ep]};
}

std::vector<SampledTransition> sample_her_batch(const ReplayBuffer& buf, int count, int her_k, Partition p,
                                                const EpisodeConfig& ep_cfg, std::mt19937_64& rng) {
  const std::size_t total = buf.transitions(p);
  if (total == 0) throw Error(ErrorCode::EmptyBuffer, "no transitions to sample");
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double relabel_p = her_k > 0 ? static_cast<double>(her_k) / (her_k + 1.0) : 0.0;
  std::vector<SampledTransition> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    const auto [e, t] = buf.locate(p, pick(rng));
    const Episode& ep = buf.episode(p, e);
    SampledTransition s;
    s.transition = ep.transitions[t];
    s.episode = e;
    s.t = t;
    s.from_demo = p == Partition::Demo;
    if (coin(rng) < relabel_p) {
      std::uniform_int_distribution<std::size_t> future(t, ep.transitions.size() - 1);
      s.transition.desired_goal = ep.transitions[future(rng)].achieved_goal;
      s.transition.reward = is_success(s.transition.next_obs, Goal{s.transition.desired_goal}, ep_cfg) ? 0.0 : -1.0;
      s.relabeled = true;
    }
    out.push_back(std::move(s));
  }
  return out;
}

Learner::Learner(ActorCritic ac, TrainConfig cfg)
    : ac_(std::move(ac)),
      cfg_(cfg),
      actor_opt_(ac_.actor, cfg.actor_lr),
      critic_opt_(ac_.critic, cfg.critic_lr) {
  cfg_.validate();
}

Losses Learner::train_step(const std::vector<SampledTransition>& batch,
                           const std::vector<SampledTransition>& demo_batch) {
  if (batch.empty() && demo_batch.empty()) throw Error(ErrorCode::EmptyBuffer, "empty training batch");
  const ActionLimits limits;
  const BatchMatrices m = stack(batch, demo_batch, limits);
  const Eigen::Index n = m.obs.cols();
  const Eigen::Index first_demo = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index n_demo = static_cast<Eigen::Index>(demo_batch.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  Losses losses;

  const Eigen::MatrixXd s = ac_.state_input(m.obs, m.goals);
  const Eigen::MatrixXd s_next = ac_.state_input(m.next_obs, m.goals);

  // Critic: squared TD error against clipped bootstrapped targets.
  {
    const Eigen::MatrixXd a_next = mlp_forward_batch(ac_.target_actor, s_next);
    const Eigen::MatrixXd q_next = mlp_forward_batch(ac_.target_critic, vstack(s_next, a_next));
    const double lo = -1.0 / (1.0 - cfg_.gamma);
    Eigen::RowVectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double raw = m.rewards(i) + cfg_.gamma * (1.0 - m.terminal(i)) * q_next(0, i);
      y(i) = std::clamp(raw, lo, 0.0);
    }
    losses.min_target = y.minCoeff();
    losses.max_target = y.maxCoeff();

    MlpTape tape;
    const Eigen::MatrixXd q = mlp_forward_batch(ac_.critic, vstack(s, m.actions), &tape);
    const Eigen::RowVectorXd diff = q.row(0) - y;
    losses.critic = diff.squaredNorm() * inv_n;
    MlpParams grads = MlpParams::zeros_like(ac_.critic);
    mlp_backward(ac_.critic, tape, 2.0 * inv_n * diff, grads);
    critic_opt_.step(ac_.critic, grads);
  }

  // Actor: maximize Q(s, pi(s)) with an action penalty, plus behavior cloning
  // on demonstration samples that the critic rates above the policy.
  {
    MlpTape actor_tape;
    const Eigen::MatrixXd a_pi = mlp_forward_batch(ac_.actor, s, &actor_tape);
    MlpTape critic_tape;
    const Eigen::MatrixXd q_pi = mlp_forward_batch(ac_.critic, vstack(s, a_pi), &critic_tape);
    MlpParams unused = MlpParams::zeros_like(ac_.critic);
    Eigen::MatrixXd dq_dinput;
    mlp_backward(ac_.critic, critic_tape, Eigen::MatrixXd::Constant(1, n, -inv_n), unused, &dq_dinput);

    Eigen::MatrixXd d_action = dq_dinput.bottomRows(kActDim);
    d_action += cfg_.action_l2 * 2.0 * inv_n * a_pi;
    losses.actor = -q_pi.sum() * inv_n + cfg_.action_l2 * a_pi.squaredNorm() * inv_n;

    if (n_demo > 0 && cfg_.bc_weight > 0.0) {
      const Eigen::MatrixXd s_demo = s.rightCols(n_demo);
      const Eigen::MatrixXd q_demo = mlp_forward_batch(ac_.critic, vstack(s_demo, m.actions.rightCols(n_demo)));
      double bc = 0.0;
      for (Eigen::Index i = 0; i < n_demo; ++i) {
        const Eigen::Index col = first_demo + i;
        if (cfg_.q_filter && !(q_demo(0, i) > q_pi(0, col))) continue;
        const Eigen::VectorXd err = a_pi.col(col) - m.actions.col(col);
        bc += err.squaredNorm();
        d_action.col(col) += cfg_.bc_weight * 2.0 * err / static_cast<double>(n_demo);
        ++losses.demo_terms;
      }
      losses.bc = bc / static_cast<double>(n_demo);
      losses.actor += cfg_.bc_weight * losses.bc;
    }

    MlpParams grads = MlpParams::zeros_like(ac_.actor);
    mlp_backward(ac_.actor, actor_tape, d_action, grads);
    actor_opt_.step(ac_.actor, grads);
  }

  polyak_update(ac_.target_actor, ac_.actor, cfg_.polyak);
  polyak_update(ac_.target_critic, ac_.critic, cfg_.polyak);
  return losses;
}

TrainResult train(const PegBoard& board, const EpisodeConfig& ep_cfg, const std::vector<Episode>& demos,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  ep_cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  ActorCritic ac = ActorCritic::create(cfg.hidden_units, cfg.hidden_layers, rng);

  ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  for (const auto& d : demos) {
    update_normalizers(ac, d);
    buffer.add(d, true);
  }

  TrainResult result;
  Learner learner(std::move(ac), cfg);
  const int agent_batch = demos.empty() ? cfg.batch_size : cfg.batch_size - cfg.demo_batch_size;
  const int demo_batch = demos.empty() ? 0 : cfg.demo_batch_size;
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> symmetric(-1.0, 1.0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double actor_sum = 0.0, critic_sum = 0.0, bc_sum = 0.0;
    int updates = 0;
    for (int cycle = 0; cycle < cfg.cycles_per_epoch; ++cycle) {
      for (int r = 0; r < cfg.rollouts_per_cycle; ++r) {
        auto [state, goal] = reset(board, ep_cfg, rng());
        const ActorCritic& model = learner.model();
        const PolicyFn explore = [&](const SimState& st, const Goal& g) {
          double u[kActDim];
          if (unit(rng) < cfg.random_action_eps) {
            for (double& v : u) v = symmetric(rng);
          } else {
            const Eigen::MatrixXd mu = mlp_forward_batch(model.actor, model.state_input(to_vector(observe(st)), g.position));
            for (int d = 0; d < kActDim; ++d) u[d] = std::clamp(mu(d, 0) + cfg.action_noise_sigma * noise(rng), -1.0, 1.0);
          }
          return ep_cfg.limits.from_normalized(u);
        };
        Episode ep = run_episode(board, ep_cfg, state, goal, explore);
        update_normalizers(learner.model(), ep);
        buffer.add(std::move(ep), false);
      }
      for (int u = 0; u < cfg.updates_per_cycle; ++u) {
        const auto batch = sample_her_batch(buffer, agent_batch, cfg.her_k, Partition::Agent, ep_cfg, rng);
        std::vector<SampledTransition> demo;
        if (demo_batch > 0) demo = sample_her_batch(buffer, demo_batch, 0, Partition::Demo, ep_cfg, rng);
        const Losses l = learner.train_step(batch, demo);
        actor_sum += l.actor;
        critic_sum += l.critic;
        bc_sum += l.bc;
        ++updates;
      }
    }
    EpochStats st;
    st.epoch = epoch;
    st.actor_loss = actor_sum / updates;
    st.critic_loss = critic_sum / updates;
    st.bc_loss = bc_sum / updates;
    st.eval_success_rate = evaluate(make_policy(learner.model(), ep_cfg.limits), board, ep_cfg, cfg.eval_episodes,
                                    cfg.seed * 1'000'003ULL + static_cast<std::uint64_t>(epoch));
    st.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.stats.epochs.push_back(st);
    if (on_epoch) on_epoch(st);
  }

  result.policy = learner.model();
  result.policy.round_to_float32();
  return result;
}

double evaluate(const PolicyFn& policy, const PegBoard& board, const EpisodeConfig& cfg, int n,
                std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "evaluation needs at least one episode");
  std::mt19937_64 seeder(seed);
  int successes = 0;
  for (int i = 0; i < n; ++i) {
    auto [state, goal] = reset(board, cfg, seeder());
    const Episode ep = run_episode(board, cfg, state, goal, policy);
    if (!ep.transitions.empty() && ep.transitions.back().is_success) ++successes;
  }
  return static_cast<double>(successes) / n;
}

TrajectoryPlan rollout_trajectory(const PolicyFn& policy, const PegBoard& board, const SimState& start,
                                  const Goal& goal, const EpisodeConfig& cfg) {
  TrajectoryPlan plan;
  plan.label = "peg " + std::to_string(start.source_peg) + " -> peg " + std::to_string(start.goal_peg);
  plan.waypoints.push_back(start.tool_tip);
  plan.jaw_hints.push_back(start.jaw_open);
  SimState state = start;
  while (!state.done && state.timestep < cfg.horizon) {
    state = step(board, state, goal, policy(state, goal), cfg).first;
    plan.waypoints.push_back(state.tool_tip);
    plan.jaw_hints.push_back(state.jaw_open);
  }
  return plan;
}

}  // namespace pegmentor
