#include "pegmentor/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "pegmentor/config.hpp"
#include "pegmentor/error.hpp"

namespace pegmentor {
namespace {

constexpr char kMagic[4] = {'P', 'G', 'M', '1'};
constexpr const char* kScriptedTensor = "scripted";
// Sanity bounds that keep a corrupt header from requesting huge allocations.
constexpr std::uint32_t kMaxTensors = 1u << 16;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxNameLength = 1u << 12;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorCode::MalformedFile, std::string("checkpoint truncated while reading ") + what);
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

Tensor matrix_tensor(const std::string& name, const Eigen::MatrixXd& m) {
  Tensor t{name, {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, {}};
  t.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(static_cast<float>(m(r, c)));
  return t;
}

Tensor vector_tensor(const std::string& name, const Eigen::VectorXd& v) {
  Tensor t{name, {static_cast<std::uint32_t>(v.size())}, {}};
  for (Eigen::Index i = 0; i < v.size(); ++i) t.data.push_back(static_cast<float>(v[i]));
  return t;
}

void append_network(std::vector<Tensor>& out, const std::string& prefix, const MlpParams& p) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    out.push_back(matrix_tensor(base + ".weight", p.layers[i].weights));
    out.push_back(vector_tensor(base + ".bias", p.layers[i].bias));
  }
}

using TensorMap = std::map<std::string, const Tensor*>;

const Tensor& find(const TensorMap& m, const std::string& name) {
  auto it = m.find(name);
  if (it == m.end()) throw Error(ErrorCode::MalformedFile, "checkpoint lacks tensor '" + name + "'");
  return *it->second;
}

Eigen::MatrixXd to_matrix(const Tensor& t) {
  if (t.dims.size() != 2) throw Error(ErrorCode::MalformedFile, "tensor '" + t.name + "' must be rank 2");
  Eigen::MatrixXd m(t.dims[0], t.dims[1]);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[k++];
  return m;
}

Eigen::VectorXd to_vector(const Tensor& t) {
  if (t.dims.size() != 1) throw Error(ErrorCode::MalformedFile, "tensor '" + t.name + "' must be rank 1");
  Eigen::VectorXd v(t.dims[0]);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = t.data[static_cast<std::size_t>(i)];
  return v;
}

MlpParams read_network(const TensorMap& m, const std::string& prefix, Activation output) {
  MlpParams p;
  for (int i = 0;; ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    if (!m.count(base + ".weight")) break;
    DenseLayer layer;
    layer.weights = to_matrix(find(m, base + ".weight"));
    layer.bias = to_vector(find(m, base + ".bias"));
    layer.activation = Activation::Relu;
    p.layers.push_back(std::move(layer));
  }
  if (p.layers.empty()) throw Error(ErrorCode::MalformedFile, "checkpoint lacks network '" + prefix + "'");
  p.layers.back().activation = output;
  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedFile, prefix + ": " + e.detail());
  }
  return p;
}

bool is_scripted_marker(const std::vector<Tensor>& tensors) {
  return tensors.size() == 1 && tensors[0].name == kScriptedTensor;
}

}  // namespace

std::string encode_tensors(const std::vector<Tensor>& tensors) {
  static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    std::size_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.data.size())
      throw Error(ErrorCode::ShapeMismatch, "tensor '" + t.name + "' data does not match its dims");
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_u32(out, d);
    for (float f : t.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

std::vector<Tensor> decode_tensors(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != std::string(kMagic, 4)) throw Error(ErrorCode::MalformedFile, "not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::MalformedFile, "unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = r.u32("tensor count");
  if (count > kMaxTensors) throw Error(ErrorCode::MalformedFile, "implausible tensor count");
  std::vector<Tensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    const std::uint32_t name_len = r.u32("name length");
    if (name_len > kMaxNameLength) throw Error(ErrorCode::MalformedFile, "implausible tensor name length");
    t.name = r.take(name_len, "tensor name");
    const std::uint32_t rank = r.u32("rank");
    if (rank > kMaxRank) throw Error(ErrorCode::MalformedFile, "implausible tensor rank");
    std::uint64_t elements = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.dims.push_back(r.u32("dims"));
      elements *= t.dims.back();
    }
    r.need(elements * 4, "tensor data");
    t.data.resize(elements);
    for (auto& f : t.data) f = std::bit_cast<float>(r.u32("tensor data"));
    out.push_back(std::move(t));
  }
  if (!r.at_end()) throw Error(ErrorCode::MalformedFile, "trailing bytes after checkpoint tensors");
  return out;
}

void write_tensors(const std::filesystem::path& path, const std::vector<Tensor>& tensors) {
  write_text_file(path, encode_tensors(tensors));
}

std::vector<Tensor> read_tensors(const std::filesystem::path& path) {
  try {
    return decode_tensors(read_text_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ActorCritic& ac) {
  std::vector<Tensor> tensors;
  append_network(tensors, "actor", ac.actor);
  append_network(tensors, "critic", ac.critic);
  tensors.push_back(vector_tensor("obs_norm.mean", ac.obs_norm.mean()));
  tensors.push_back(vector_tensor("obs_norm.std", ac.obs_norm.std()));
  tensors.push_back(vector_tensor("goal_norm.mean", ac.goal_norm.mean()));
  tensors.push_back(vector_tensor("goal_norm.std", ac.goal_norm.std()));
  write_tensors(path, tensors);
}

void save_scripted_checkpoint(const std::filesystem::path& path) {
  write_tensors(path, {Tensor{kScriptedTensor, {1}, {1.0f}}});
}

namespace {

ActorCritic actor_critic_from(const std::vector<Tensor>& tensors) {
  TensorMap m;
  for (const auto& t : tensors) m[t.name] = &t;
  ActorCritic ac;
  ac.actor = read_network(m, "actor", Activation::Tanh);
  ac.critic = read_network(m, "critic", Activation::Identity);
  if (ac.actor.input_dim() != kObsDim + kGoalDim || ac.actor.output_dim() != ActionLimits::kLearnedDims ||
      ac.critic.input_dim() != kObsDim + kGoalDim + ActionLimits::kLearnedDims || ac.critic.output_dim() != 1)
    throw Error(ErrorCode::MalformedFile, "checkpoint network shapes do not fit the task");
  ac.target_actor = ac.actor;
  ac.target_critic = ac.critic;
  auto stats = [&](Normalizer& n, const std::string& prefix, int dim) {
    const Eigen::VectorXd mean = to_vector(find(m, prefix + ".mean"));
    const Eigen::VectorXd std = to_vector(find(m, prefix + ".std"));
    if (mean.size() != dim || std.size() != dim)
      throw Error(ErrorCode::MalformedFile, prefix + " statistics have the wrong length");
    n.set_stats(mean, std);
  };
  stats(ac.obs_norm, "obs_norm", kObsDim);
  stats(ac.goal_norm, "goal_norm", kGoalDim);
  return ac;
}

}  // namespace

ActorCritic load_checkpoint(const std::filesystem::path& path) {
  const auto tensors = read_tensors(path);
  if (is_scripted_marker(tensors))
    throw Error(ErrorCode::MalformedFile, path.string() + ": scripted-policy marker holds no networks");
  try {
    return actor_critic_from(tensors);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

LoadedPolicy LoadedPolicy::load(const std::filesystem::path& path) {
  const auto tensors = read_tensors(path);
  if (is_scripted_marker(tensors)) return scripted();
  try {
    return learned(actor_critic_from(tensors));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

LoadedPolicy LoadedPolicy::scripted() { return LoadedPolicy{}; }

LoadedPolicy LoadedPolicy::learned(ActorCritic ac) {
  LoadedPolicy p;
  p.model_ = std::make_shared<const ActorCritic>(std::move(ac));
  return p;
}

PolicyFn LoadedPolicy::policy(const PegBoard& board, const EpisodeConfig& cfg) const {
  if (!model_) return ScriptedPolicy(board, cfg);
  return [model = model_, limits = cfg.limits](const SimState& s, const Goal& g) {
    return model->act(observe(s), g, limits);
  };
}

}  // namespace pegmentor
