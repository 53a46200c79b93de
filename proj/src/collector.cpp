#include "fsgen/collector.hpp"

#include "fsgen/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fsgen {

void CollectorConfig::validate() const {
  if (buffer_capacity < 1 || minibatch < 1 || target_sync < 1 || q_hidden < 1)
    throw ConfigError("collector sizes must be positive");
  if (minibatch > buffer_capacity)
    throw ConfigError("minibatch cannot exceed the buffer capacity");
  if (discount < 0.0 || discount >= 1.0)
    throw ConfigError("discount must lie in [0,1)");
  if (!(eps_min > 0.0) || eps_min > eps_start || eps_start > 1.0)
    throw ConfigError("need 0 < eps_min <= eps_start <= 1");
  if (!(eps_decay > 0.0) || eps_decay > 1.0)
    throw ConfigError("eps_decay must lie in (0,1]");
  if (!(p_participate > 0.0) || p_participate > 1.0)
    throw ConfigError("p_participate must lie in (0,1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
}

namespace {

constexpr int kDescriptors = 5;

/// {mean, std, min, max, median} of a vector; std is the population form.
Eigen::Matrix<double, kDescriptors, 1> five_stats(Vector<double> v) {
  Eigen::Matrix<double, kDescriptors, 1> out;
  const Index n = v.size();
  const double mean = v.mean();
  out(0) = mean;
  out(1) = std::sqrt((v.array() - mean).square().sum() / static_cast<double>(n));
  out(2) = v.minCoeff();
  out(3) = v.maxCoeff();
  std::sort(v.data(), v.data() + n);
  out(4) = (n % 2 == 1) ? v(n / 2) : 0.5 * (v(n / 2 - 1) + v(n / 2));
  return out;
}

}  // namespace

Vector<double> state_repr(const Dataset& a, const std::vector<int>& selected) {
  const int dim = kDescriptors * kDescriptors + 1;
  if (selected.empty()) return Vector<double>::Zero(dim);

  Matrix<double> desc(kDescriptors, static_cast<Index>(selected.size()));
  for (std::size_t j = 0; j < selected.size(); ++j) {
    const int c = selected[j];
    if (c < 0 || c >= a.n_features())
      throw DataError("state_repr: feature index out of range");
    desc.col(static_cast<Index>(j)) = five_stats(a.features.col(c));
  }

  Vector<double> out(dim);
  for (int r = 0; r < kDescriptors; ++r)
    out.segment(r * kDescriptors, kDescriptors) =
        five_stats(desc.row(r).transpose());
  out(dim - 1) =
      static_cast<double>(selected.size()) / static_cast<double>(a.n_features());
  return out;
}

std::vector<double> assign_rewards(double total, const std::vector<int>& participating,
                                   int all_agents) {
  if (participating.empty())
    throw DataError("assign_rewards: no participating agents");
  std::set<int> ids(participating.begin(), participating.end());
  if (*ids.begin() < 0 || *ids.rbegin() >= all_agents)
    throw DataError("assign_rewards: agent id out of range");
  std::vector<double> rewards(static_cast<std::size_t>(all_agents), 0.0);
  const double share = total / static_cast<double>(ids.size());
  for (int id : ids) rewards[static_cast<std::size_t>(id)] = share;
  return rewards;
}

FeatureAgent::FeatureAgent(Index state_dim, Index hidden, double learning_rate,
                           std::uint64_t seed) {
  q_.create("w1", state_dim, hidden);
  q_.create("b1", 1, hidden);
  q_.create("w2", hidden, 2);
  q_.create("b2", 1, 2);
  std::mt19937_64 rng(seed);
  for (auto& p : q_) {
    if (p.value.rows() == 1)
      p.value.setZero();
    else
      fill_xavier(p.value, rng);
  }
  target_.create("w1", state_dim, hidden);
  target_.create("b1", 1, hidden);
  target_.create("w2", hidden, 2);
  target_.create("b2", 1, 2);
  sync_target();
  opt_.lr = learning_rate;
}

Vector<double> FeatureAgent::q_forward(const ParamStore<double>& net,
                                       const Vector<double>& state) const {
  Eigen::RowVectorXd h =
      ((state.transpose() * net.at("w1").value + net.at("b1").value).array().tanh())
          .matrix();
  return (h * net.at("w2").value + net.at("b2").value).transpose();
}

Vector<double> FeatureAgent::q_values(const Vector<double>& state) const {
  return q_forward(q_, state);
}

int FeatureAgent::act(const Vector<double>& state, std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> uniform_action(0, 1);
  const double c = coin(rng);
  const int random_action = uniform_action(rng);
  if (c < epsilon) return random_action;
  Vector<double> q = q_values(state);
  return q(1) > q(0) ? 1 : 0;
}

void FeatureAgent::remember(Transition t, int capacity) {
  buffer_.push_back(std::move(t));
  while (buffer_.size() > static_cast<std::size_t>(capacity)) buffer_.pop_front();
}

std::optional<double> FeatureAgent::dqn_update(const CollectorConfig& cfg,
                                               std::mt19937_64& rng) {
  const int m = cfg.minibatch;
  if (buffer_.size() < static_cast<std::size_t>(m)) return std::nullopt;

  std::uniform_int_distribution<std::size_t> pick(0, buffer_.size() - 1);
  const Index dim = buffer_.front().state.size();
  Matrix<double> states(m, dim);
  std::vector<int> actions(static_cast<std::size_t>(m));
  Matrix<double> targets(m, 1);
  for (int i = 0; i < m; ++i) {
    const Transition& t = buffer_[pick(rng)];
    states.row(i) = t.state.transpose();
    actions[static_cast<std::size_t>(i)] = t.action;
    Vector<double> q_next = q_forward(target_, t.next_state);
    targets(i, 0) = t.reward + cfg.discount * q_next.maxCoeff();
  }

  ad::Tape<double> tape;
  ad::VarId x = tape.leaf(states);
  ad::VarId h = ad::tanh_of(
      tape, ad::add_row(tape, ad::matmul(tape, x, tape.leaf(q_.at("w1"))),
                        tape.leaf(q_.at("b1"))));
  ad::VarId q = ad::add_row(tape, ad::matmul(tape, h, tape.leaf(q_.at("w2"))),
                            tape.leaf(q_.at("b2")));
  ad::VarId picked = ad::select_per_row(tape, q, actions);
  ad::VarId loss = ad::mse(tape, picked, targets);
  const double before = tape.val(loss)(0, 0);
  tape.backward(loss);
  opt_.step(q_);
  return before;
}

void FeatureAgent::sync_target() {
  auto src = q_.begin();
  for (auto dst = target_.begin(); dst != target_.end(); ++dst, ++src)
    dst->value = src->value;
}

namespace {

double score_subset(const Dataset& train, const Dataset& val,
                    const std::vector<int>& subset, const ModelKind& model,
                    std::uint64_t seed) {
  return fit_predict_score(train, val, subset, model, seed).clamped01();
}

}  // namespace

std::vector<CorpusRecord> collect(const Dataset& a, int epochs,
                                  const ModelKind& model, std::uint64_t seed,
                                  const CollectorConfig& cfg) {
  cfg.validate();
  if (epochs < 1) throw ConfigError("collect: epochs must be >= 1");
  validate(a);

  const int n = static_cast<int>(a.n_features());
  const FeatureTokenVocab vocab{n};
  auto [train, val] = internal_split(a, derive_seed(seed, "internal"));
  const std::uint64_t score_seed = derive_seed(seed, "score");

  std::vector<FeatureAgent> agents;
  agents.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    agents.emplace_back(25 + 1, cfg.q_hidden, cfg.learning_rate,
                        derive_seed(seed, "agent" + std::to_string(i)));
    agents.back().epsilon = cfg.eps_start;
  }

  std::mt19937_64 rng(derive_seed(seed, "collect"));
  std::bernoulli_distribution participates(cfg.p_participate);
  std::uniform_int_distribution<int> any_feature(0, n - 1);

  std::vector<char> bits(static_cast<std::size_t>(n), 0);
  std::vector<int> selected;
  std::vector<CorpusRecord> records;
  records.reserve(static_cast<std::size_t>(epochs));

  Vector<double> state = state_repr(a, selected);
  for (int step = 0; step < epochs; ++step) {
    std::vector<int> participating;
    do {
      participating.clear();
      for (int i = 0; i < n; ++i)
        if (participates(rng)) participating.push_back(i);
    } while (participating.empty());

    for (int i : participating)
      bits[static_cast<std::size_t>(i)] =
          static_cast<char>(agents[static_cast<std::size_t>(i)].act(state, rng));

    selected.clear();
    for (int i = 0; i < n; ++i)
      if (bits[static_cast<std::size_t>(i)]) selected.push_back(i);
    if (selected.empty()) {
      const int forced = any_feature(rng);
      bits[static_cast<std::size_t>(forced)] = 1;
      selected.push_back(forced);
    }

    const double utility = score_subset(train, val, selected, model, score_seed);
    records.push_back({subset_to_sequence(vocab, selected), utility,
                       RecordOrigin::RL});

    const std::vector<double> rewards = assign_rewards(utility, participating, n);
    Vector<double> next_state = state_repr(a, selected);
    for (int i = 0; i < n; ++i) {
      // Non-participants log the action matching their unchanged membership.
      const int action = bits[static_cast<std::size_t>(i)] ? 1 : 0;
      agents[static_cast<std::size_t>(i)].remember(
          {state, action, rewards[static_cast<std::size_t>(i)], next_state},
          cfg.buffer_capacity);
    }
    for (int i : participating)
      agents[static_cast<std::size_t>(i)].dqn_update(cfg, rng);

    if ((step + 1) % cfg.target_sync == 0)
      for (auto& agent : agents) agent.sync_target();
    for (auto& agent : agents)
      agent.epsilon = std::max(cfg.eps_min, agent.epsilon * cfg.eps_decay);

    state = std::move(next_state);
  }
  return records;
}

std::vector<CorpusRecord> random_collect(const Dataset& a, int n,
                                         const ModelKind& model,
                                         std::uint64_t seed) {
  if (n < 1) throw ConfigError("random_collect: n must be >= 1");
  validate(a);

  const int f = static_cast<int>(a.n_features());
  const FeatureTokenVocab vocab{f};
  auto [train, val] = internal_split(a, derive_seed(seed, "internal"));
  const std::uint64_t score_seed = derive_seed(seed, "score");

  std::mt19937_64 rng(derive_seed(seed, "random-collect"));
  std::bernoulli_distribution keep(0.5);

  std::vector<CorpusRecord> records;
  records.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    std::vector<int> subset;
    do {
      subset.clear();
      for (int i = 0; i < f; ++i)
        if (keep(rng)) subset.push_back(i);
    } while (subset.empty());
    const double utility = score_subset(train, val, subset, model, score_seed);
    records.push_back({subset_to_sequence(vocab, subset), utility,
                       RecordOrigin::Random});
  }
  return records;
}

}  // namespace fsgen
