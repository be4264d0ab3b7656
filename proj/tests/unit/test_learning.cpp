#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "pegmentor/error.hpp"
#include "pegmentor/her_ddpg.hpp"
#include "pegmentor/mlp.hpp"

using namespace pegmentor;

namespace {

const PegBoard kBoard = PegBoard::standard();

/// Plain loops, independent of the library's Eigen batch path.
Eigen::VectorXd reference_forward(const MlpParams& p, const Eigen::VectorXd& input) {
  std::vector<double> x(input.data(), input.data() + input.size());
  for (const auto& layer : p.layers) {
    std::vector<double> y(static_cast<std::size_t>(layer.weights.rows()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      double acc = layer.bias(r);
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) acc += layer.weights(r, c) * x[c];
      switch (layer.activation) {
        case Activation::Identity: break;
        case Activation::Relu: acc = acc > 0.0 ? acc : 0.0; break;
        case Activation::Tanh: acc = std::tanh(acc); break;
      }
      y[r] = acc;
    }
    x = std::move(y);
  }
  return Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

MlpParams random_net(std::vector<int> sizes, Activation out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MlpParams p = MlpParams::glorot(sizes, Activation::Relu, out, rng);
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& l : p.layers)
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = n(rng);
  return p;
}

Eigen::VectorXd random_vector(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

/// Max relative error of reverse-mode gradients against central differences.
double gradient_check(const MlpParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& upstream) {
  const MlpParams g = mlp_gradients(p, x, upstream);
  const double h = 1e-5;
  double worst = 0.0;
  MlpParams q = p;
  auto f = [&](const MlpParams& params) { return mlp_forward(params, x).dot(upstream); };
  auto probe = [&](double& slot, double analytic) {
    const double saved = slot;
    slot = saved + h;
    const double fp = f(q);
    slot = saved - h;
    const double fm = f(q);
    slot = saved;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  };
  for (std::size_t l = 0; l < q.layers.size(); ++l) {
    auto& layer = q.layers[l];
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
      probe(layer.weights.data()[i], g.layers[l].weights.data()[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) probe(layer.bias.data()[i], g.layers[l].bias.data()[i]);
  }
  return worst;
}

double max_abs(const MlpParams& p) {
  double m = 0.0;
  for (const auto& l : p.layers) {
    if (l.weights.size()) m = std::max(m, l.weights.cwiseAbs().maxCoeff());
    if (l.bias.size()) m = std::max(m, l.bias.cwiseAbs().maxCoeff());
  }
  return m;
}

ReplayBuffer demo_buffer(int n, std::uint64_t seed, std::vector<Episode>* out = nullptr) {
  const auto demos = generate_demonstrations(n, kBoard, EpisodeConfig{}, seed);
  ReplayBuffer buf;
  for (const auto& d : demos) buf.add(d, true);
  if (out) *out = demos;
  return buf;
}

/// Critic TD loss on a batch with targets from `target_src`, mirroring the learner.
double critic_loss(const ActorCritic& ac, const ActorCritic& target_src, const std::vector<SampledTransition>& batch,
                   double gamma) {
  const ActionLimits limits;
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd obs(kObsDim, n), next(kObsDim, n), goals(kGoalDim, n), actions(ActionLimits::kLearnedDims, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = batch[i].transition;
    for (int k = 0; k < kObsDim; ++k) {
      obs(k, i) = t.obs[k];
      next(k, i) = t.next_obs[k];
    }
    goals.col(i) = t.desired_goal;
    limits.to_normalized(t.action, actions.col(i).data());
  }
  auto stack = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd m(a.rows() + b.rows(), a.cols());
    m << a, b;
    return m;
  };
  const Eigen::MatrixXd s = target_src.state_input(obs, goals), s2 = target_src.state_input(next, goals);
  const Eigen::MatrixXd q_next =
      mlp_forward_batch(target_src.target_critic, stack(s2, mlp_forward_batch(target_src.target_actor, s2)));
  const Eigen::MatrixXd q = mlp_forward_batch(ac.critic, stack(s, actions));
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = batch[i].transition.reward;
    const double term = r == 0.0 ? 1.0 : 0.0;
    const double y = std::clamp(r + gamma * (1.0 - term) * q_next(0, i), -1.0 / (1.0 - gamma), 0.0);
    loss += (q(0, i) - y) * (q(0, i) - y);
  }
  return loss / static_cast<double>(n);
}

}  // namespace

// --- networks --------------------------------------------------------------

TEST_CASE("mlp_forward: zero network outputs zero pre-activation") {
  MlpParams p = MlpParams::zeros_like(random_net({11, 64, 64, 5}, Activation::Identity, 1));
  const Eigen::VectorXd y = mlp_forward(p, random_vector(11, 2));
  CHECK(y.size() == 5);
  CHECK(y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mlp_forward: identity layer returns its input") {
  MlpParams p;
  p.layers.push_back({Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4), Activation::Identity});
  const Eigen::VectorXd x = random_vector(4, 3);
  CHECK((mlp_forward(p, x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mlp_forward matches a hand-rolled evaluator") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MlpParams p = random_net({11, 64, 64, 5}, seed % 2 ? Activation::Tanh : Activation::Identity, seed);
    const Eigen::VectorXd x = random_vector(11, seed + 100);
    CHECK((mlp_forward(p, x) - reference_forward(p, x)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("batch forward equals column-wise forward") {
  const MlpParams p = random_net({7, 16, 3}, Activation::Tanh, 4);
  Eigen::MatrixXd x(7, 5);
  for (int c = 0; c < 5; ++c) x.col(c) = random_vector(7, 10 + c);
  const Eigen::MatrixXd y = mlp_forward_batch(p, x);
  for (int c = 0; c < 5; ++c) CHECK((y.col(c) - mlp_forward(p, x.col(c))).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("shape mismatches are reported") {
  const MlpParams p = random_net({11, 8, 5}, Activation::Tanh, 5);
  try {
    (void)mlp_forward(p, random_vector(10, 1));
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
  CHECK_THROWS_AS(mlp_gradients(p, random_vector(11, 1), random_vector(4, 1)), Error);
  MlpParams broken = p;
  broken.layers[1].weights.resize(5, 9);
  CHECK_THROWS_AS(broken.validate(), Error);
  CHECK(p.input_dim() == 11);
  CHECK(p.output_dim() == 5);
}

TEST_CASE("gradients: zero upstream gives zero gradients") {
  const MlpParams p = random_net({11, 64, 64, 5}, Activation::Tanh, 6);
  const MlpParams g = mlp_gradients(p, random_vector(11, 7), Eigen::VectorXd::Zero(5));
  CHECK(max_abs(g) == 0.0);
}

TEST_CASE("gradients match central finite differences") {
  // Actor shape (observation + goal -> action) and critic shape (... + action -> Q).
  const MlpParams actor = random_net({kObsDim + kGoalDim, 64, 64, 5}, Activation::Tanh, 8);
  CHECK(gradient_check(actor, random_vector(kObsDim + kGoalDim, 9), random_vector(5, 10)) < 1e-4);
  const MlpParams small = random_net({11, 64, 64, 5}, Activation::Tanh, 11);
  CHECK(gradient_check(small, random_vector(11, 12), random_vector(5, 13)) < 1e-4);
  const MlpParams critic = random_net({kObsDim + kGoalDim + 5, 64, 64, 1}, Activation::Identity, 14);
  CHECK(gradient_check(critic, random_vector(kObsDim + kGoalDim + 5, 15), Eigen::VectorXd::Ones(1)) < 1e-4);
}

TEST_CASE("gradients scale linearly with the upstream vector") {
  const MlpParams p = random_net({11, 64, 64, 5}, Activation::Tanh, 16);
  const Eigen::VectorXd x = random_vector(11, 17), up = random_vector(5, 18);
  const MlpParams g1 = mlp_gradients(p, x, up), g3 = mlp_gradients(p, x, 3.0 * up);
  for (std::size_t l = 0; l < g1.layers.size(); ++l) {
    CHECK((g3.layers[l].weights - 3.0 * g1.layers[l].weights).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g3.layers[l].bias - 3.0 * g1.layers[l].bias).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("input gradients match finite differences") {
  const MlpParams p = random_net({6, 12, 3}, Activation::Tanh, 19);
  const Eigen::VectorXd x = random_vector(6, 20), up = random_vector(3, 21);
  MlpTape tape;
  mlp_forward_batch(p, x, &tape);
  MlpParams grads = MlpParams::zeros_like(p);
  Eigen::MatrixXd dx;
  mlp_backward(p, tape, up, grads, &dx);
  for (int i = 0; i < 6; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += 1e-6;
    xm(i) -= 1e-6;
    const double numeric = (mlp_forward(p, xp).dot(up) - mlp_forward(p, xm).dot(up)) / 2e-6;
    CHECK(dx(i, 0) == doctest::Approx(numeric).epsilon(1e-6));
  }
}

TEST_CASE("Adam minimizes a quadratic") {
  MlpParams p;
  p.layers.push_back({Eigen::MatrixXd::Constant(1, 1, 5.0), Eigen::VectorXd::Constant(1, -3.0), Activation::Identity});
  Adam opt(p, 0.1);
  for (int i = 0; i < 500; ++i) {
    MlpParams g = MlpParams::zeros_like(p);
    g.layers[0].weights(0, 0) = 2.0 * p.layers[0].weights(0, 0);
    g.layers[0].bias(0) = 2.0 * p.layers[0].bias(0);
    opt.step(p, g);
  }
  CHECK(std::abs(p.layers[0].weights(0, 0)) < 0.05);
  CHECK(std::abs(p.layers[0].bias(0)) < 0.05);
  CHECK(opt.steps() == 500);
}

TEST_CASE("polyak_update and float rounding") {
  MlpParams target = random_net({3, 4, 2}, Activation::Tanh, 22), live = random_net({3, 4, 2}, Activation::Tanh, 23);
  const MlpParams old = target;
  polyak_update(target, live, 0.95);
  for (std::size_t l = 0; l < target.layers.size(); ++l)
    CHECK((target.layers[l].weights - (0.95 * old.layers[l].weights + (1.0 - 0.95) * live.layers[l].weights))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  round_to_float32(live);
  for (const auto& l : live.layers)
    for (Eigen::Index i = 0; i < l.weights.size(); ++i)
      CHECK(static_cast<double>(static_cast<float>(l.weights.data()[i])) == l.weights.data()[i]);
}

// --- replay and relabeling --------------------------------------------------

TEST_CASE("replay buffer keeps whole episodes and evicts agent data oldest first") {
  std::vector<Episode> demos;
  (void)demo_buffer(4, 30, &demos);
  auto len = [&](int i) { return demos[i].transitions.size(); };
  ReplayBuffer buf(len(0) + len(2) + len(3));
  buf.add(demos[0], true);
  buf.add(demos[1], false);
  buf.add(demos[2], false);
  CHECK(buf.size() <= buf.capacity());
  buf.add(demos[3], false);
  CHECK(buf.size() <= buf.capacity());
  CHECK(buf.episodes(Partition::Demo) == 1);
  REQUIRE(buf.episodes(Partition::Agent) == 2);
  CHECK(buf.episode(Partition::Agent, 0).transitions.size() == len(2));
  CHECK(buf.episode(Partition::Agent, 1).transitions.size() == len(3));
  CHECK(buf.transitions(Partition::Agent) == len(2) + len(3));
  const auto [e, t] = buf.locate(Partition::Agent, len(2));
  CHECK(e == 1);
  CHECK(t == 0);
  const auto [e2, t2] = buf.locate(Partition::Demo, len(0) - 1);
  CHECK(e2 == 0);
  CHECK(t2 == len(0) - 1);
}

TEST_CASE("sampling an empty partition throws EmptyBuffer") {
  ReplayBuffer buf;
  std::mt19937_64 rng(1);
  try {
    (void)sample_her_batch(buf, 4, 4, Partition::Agent, EpisodeConfig{}, rng);
    FAIL("expected EmptyBuffer");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyBuffer);
  }
}

TEST_CASE("her_k = 0 never relabels") {
  const ReplayBuffer buf = demo_buffer(10, 31);
  std::mt19937_64 rng(2);
  const auto batch = sample_her_batch(buf, 2000, 0, Partition::Demo, EpisodeConfig{}, rng);
  for (const auto& s : batch) {
    CHECK_FALSE(s.relabeled);
    const Transition& orig = buf.episode(Partition::Demo, s.episode).transitions[s.t];
    CHECK(s.transition.reward == orig.reward);
    CHECK(s.transition.desired_goal == orig.desired_goal);
  }
}

TEST_CASE("her relabels about k/(k+1) of samples, with consistent rewards") {
  const ReplayBuffer buf = demo_buffer(20, 32);
  std::mt19937_64 rng(3);
  const EpisodeConfig cfg;
  const auto batch = sample_her_batch(buf, 100000, 4, Partition::Demo, cfg, rng);
  int relabeled = 0;
  for (const auto& s : batch) {
    const Transition& orig = buf.episode(Partition::Demo, s.episode).transitions[s.t];
    CHECK(s.transition.obs == orig.obs);
    CHECK(s.transition.next_obs == orig.next_obs);
    CHECK(s.transition.achieved_goal == orig.achieved_goal);
    CHECK(s.transition.done == orig.done);
    CHECK(s.transition.action.dx == orig.action.dx);
    if (!s.relabeled) {
      CHECK(s.transition.desired_goal == orig.desired_goal);
      CHECK(s.transition.reward == orig.reward);
      continue;
    }
    ++relabeled;
    CHECK(s.transition.reward == (is_success(s.transition.next_obs, Goal{s.transition.desired_goal}, cfg) ? 0.0 : -1.0));
    // The substituted goal is achieved at or after t in the same episode.
    const Episode& ep = buf.episode(Partition::Demo, s.episode);
    bool found = false;
    for (std::size_t u = s.t; u < ep.transitions.size() && !found; ++u)
      found = ep.transitions[u].achieved_goal == s.transition.desired_goal;
    CHECK(found);
  }
  const double frac = relabeled / 100000.0;
  CHECK(frac >= 0.78);
  CHECK(frac <= 0.82);
}

TEST_CASE("a placed block's own achieved goal earns reward 0") {
  const ReplayBuffer buf = demo_buffer(5, 33);
  const EpisodeConfig cfg;
  for (std::size_t e = 0; e < buf.episodes(Partition::Demo); ++e) {
    const Transition& last = buf.episode(Partition::Demo, e).transitions.back();
    CHECK(is_success(last.next_obs, Goal{last.achieved_goal}, cfg));
  }
}

// --- learner ----------------------------------------------------------------

TEST_CASE("train_step: critic targets are clipped and targets follow polyak exactly") {
  std::vector<Episode> demos;
  const ReplayBuffer buf = demo_buffer(10, 34, &demos);
  std::mt19937_64 rng(4);
  TrainConfig cfg;
  ActorCritic ac = ActorCritic::create(64, 2, rng);
  // Large random critic outputs force the clip to engage.
  for (auto& l : ac.target_critic.layers) l.weights *= 40.0;
  Learner learner(ac, cfg);
  const EpisodeConfig ep;
  for (int i = 0; i < 5; ++i) {
    const auto batch = sample_her_batch(buf, 112, 4, Partition::Demo, ep, rng);
    const auto demo = sample_her_batch(buf, 16, 0, Partition::Demo, ep, rng);
    const ActorCritic before = learner.model();
    const Losses l = learner.train_step(batch, demo);
    CHECK(l.min_target >= -1.0 / (1.0 - cfg.gamma));
    CHECK(l.max_target <= 0.0);
    const ActorCritic& after = learner.model();
    for (std::size_t k = 0; k < after.actor.layers.size(); ++k) {
      const Eigen::MatrixXd expect =
          cfg.polyak * before.target_actor.layers[k].weights + (1.0 - cfg.polyak) * after.actor.layers[k].weights;
      CHECK((after.target_actor.layers[k].weights - expect).cwiseAbs().maxCoeff() == 0.0);
    }
    for (std::size_t k = 0; k < after.critic.layers.size(); ++k) {
      const Eigen::VectorXd expect =
          cfg.polyak * before.target_critic.layers[k].bias + (1.0 - cfg.polyak) * after.critic.layers[k].bias;
      CHECK((after.target_critic.layers[k].bias - expect).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("train_step: bc_weight 0 reports no behavior-cloning loss") {
  const ReplayBuffer buf = demo_buffer(5, 35);
  std::mt19937_64 rng(5);
  TrainConfig cfg;
  cfg.bc_weight = 0.0;
  Learner learner(ActorCritic::create(64, 2, rng), cfg);
  const auto batch = sample_her_batch(buf, 32, 4, Partition::Demo, EpisodeConfig{}, rng);
  const auto demo = sample_her_batch(buf, 16, 0, Partition::Demo, EpisodeConfig{}, rng);
  const Losses l = learner.train_step(batch, demo);
  CHECK(l.bc == 0.0);
  CHECK(l.demo_terms == 0);
}

TEST_CASE("train_step: the Q filter drops demo terms the critic does not prefer") {
  const ReplayBuffer buf = demo_buffer(5, 36);
  std::mt19937_64 rng(6);
  TrainConfig cfg;
  ActorCritic ac = ActorCritic::create(64, 2, rng);
  // A constant critic rates every action equally, so no demo action is strictly better.
  ac.critic = MlpParams::zeros_like(ac.critic);
  ac.critic.layers.back().bias(0) = -3.0;
  Learner learner(ac, cfg);
  const auto batch = sample_her_batch(buf, 32, 4, Partition::Demo, EpisodeConfig{}, rng);
  const auto demo = sample_her_batch(buf, 16, 0, Partition::Demo, EpisodeConfig{}, rng);
  CHECK(learner.train_step(batch, demo).demo_terms == 0);

  cfg.q_filter = false;
  Learner unfiltered(ac, cfg);
  const Losses l = unfiltered.train_step(batch, demo);
  CHECK(l.demo_terms == 16);
  CHECK(l.bc > 0.0);
}

TEST_CASE("train_step: one step lowers the critic loss on a frozen batch") {
  const ReplayBuffer buf = demo_buffer(10, 37);
  std::mt19937_64 rng(7);
  TrainConfig cfg;
  cfg.critic_lr = 1e-4;
  Learner learner(ActorCritic::create(64, 2, rng), cfg);
  const auto batch = sample_her_batch(buf, 128, 4, Partition::Demo, EpisodeConfig{}, rng);
  const ActorCritic before = learner.model();
  const double l0 = critic_loss(before, before, batch, cfg.gamma);
  learner.train_step(batch, {});
  const double l1 = critic_loss(learner.model(), before, batch, cfg.gamma);
  CHECK(l1 < l0);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.polyak = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.her_k = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

// --- training, evaluation and rollouts -------------------------------------

TEST_CASE("zero epochs returns the initialized networks with empty stats") {
  const auto demos = generate_demonstrations(5, kBoard, EpisodeConfig{}, 38);
  TrainConfig cfg;
  cfg.epochs = 0;
  const TrainResult r = train(kBoard, EpisodeConfig{}, demos, cfg);
  CHECK(r.stats.epochs.empty());
  CHECK(r.policy.actor.layers.size() == 3);
  CHECK(r.policy.critic.output_dim() == 1);
}

TEST_CASE("a short training run beats the untrained policy and is deterministic") {
  const auto demos = generate_demonstrations(100, kBoard, EpisodeConfig{}, 39);
  EpisodeConfig short_cfg;
  short_cfg.range_mode = RangeMode::Short;
  TrainConfig cfg;
  cfg.seed = 3;
  cfg.epochs = 0;
  const TrainResult untrained = train(kBoard, EpisodeConfig{}, demos, cfg);
  // Smoke configuration: 5 epochs of 20 cycles each.
  cfg.epochs = 5;
  cfg.cycles_per_epoch = 20;
  int callbacks = 0;
  const TrainResult trained = train(kBoard, EpisodeConfig{}, demos, cfg, [&](const EpochStats& s) {
    CHECK(s.epoch == callbacks++);
    CHECK(s.eval_success_rate >= 0.0);
    CHECK(s.eval_success_rate <= 1.0);
  });
  CHECK(callbacks == 5);
  CHECK(trained.stats.epochs.size() == 5);
  const ActionLimits limits = short_cfg.limits;
  const double before = evaluate(make_policy(untrained.policy, limits), kBoard, short_cfg, 100, 5);
  const double after = evaluate(make_policy(trained.policy, limits), kBoard, short_cfg, 100, 5);
  CHECK(after > before);

  const TrainResult again = train(kBoard, EpisodeConfig{}, demos, cfg);
  for (std::size_t e = 0; e < again.stats.epochs.size(); ++e) {
    CHECK(again.stats.epochs[e].actor_loss == trained.stats.epochs[e].actor_loss);
    CHECK(again.stats.epochs[e].critic_loss == trained.stats.epochs[e].critic_loss);
    CHECK(again.stats.epochs[e].eval_success_rate == trained.stats.epochs[e].eval_success_rate);
  }
}

TEST_CASE("evaluate: scripted oracle and random baseline") {
  EpisodeConfig cfg;
  cfg.range_mode = RangeMode::Short;
  CHECK(evaluate(ScriptedPolicy(kBoard, cfg), kBoard, cfg, 100, 1) == 1.0);
  std::mt19937_64 rng(40);
  const ActorCritic random_ac = ActorCritic::create(64, 2, rng);
  CHECK(evaluate(make_policy(random_ac, cfg.limits), kBoard, cfg, 100, 1) < 0.10);
  // Same seed, same answer.
  CHECK(evaluate(make_policy(random_ac, cfg.limits), kBoard, cfg, 50, 9) ==
        evaluate(make_policy(random_ac, cfg.limits), kBoard, cfg, 50, 9));
  CHECK_THROWS_AS(evaluate(ScriptedPolicy(kBoard, cfg), kBoard, cfg, 0, 1), Error);
}

TEST_CASE("rollout_trajectory") {
  EpisodeConfig cfg;
  auto [s, g] = reset(kBoard, cfg, 41);
  const auto zero = rollout_trajectory([](const SimState&, const Goal&) { return Action{}; }, kBoard, s, g, cfg);
  CHECK(zero.waypoints.size() == 51);
  for (const auto& w : zero.waypoints) CHECK(w == s.tool_tip);

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto [s2, g2] = reset(kBoard, cfg, seed);
    const auto plan = rollout_trajectory(ScriptedPolicy(kBoard, cfg), kBoard, s2, g2, cfg);
    CHECK(plan.waypoints.size() <= 51);
    CHECK(plan.jaw_hints.size() == plan.waypoints.size());
    CHECK(plan.waypoints.front() == s2.tool_tip);
    CHECK((plan.waypoints.back() - g2.position).norm() <= 0.005);
    const auto again = rollout_trajectory(ScriptedPolicy(kBoard, cfg), kBoard, s2, g2, cfg);
    CHECK(again.waypoints == plan.waypoints);
  }
}
