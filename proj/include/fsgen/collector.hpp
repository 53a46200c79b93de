#pragma once

#include "fsgen/corpus.hpp"
#include "fsgen/nn.hpp"
#include "fsgen/trees.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <vector>

namespace fsgen {

/// Exploration constants for the multi-agent collector. The learning rate
/// feeds the per-agent Adam optimizer.
struct CollectorConfig {
  int buffer_capacity = 2000;
  int minibatch = 32;
  double discount = 0.9;
  int target_sync = 20;
  double eps_start = 0.9;
  double eps_min = 0.05;
  double eps_decay = 0.99;
  double p_participate = 0.5;
  Index q_hidden = 64;
  double learning_rate = 1e-3;

  void validate() const;
};

/// Fixed-length description of the currently selected submatrix: the five
/// descriptors {mean, std, min, max, median} per selected column, the same
/// five descriptors across columns of that 5-row summary (25 values), plus
/// the selected fraction. Empty selection maps to the zero vector.
Vector<double> state_repr(const Dataset& a, const std::vector<int>& selected);

/// Equal split of `total` over the participating agents; everyone else gets
/// exactly zero. Throws DataError on an empty participant set or an id
/// outside [0, all_agents).
std::vector<double> assign_rewards(double total, const std::vector<int>& participating,
                                   int all_agents);

struct Transition {
  Vector<double> state;
  int action = 0;  // 0 = deselect, 1 = select
  double reward = 0.0;
  Vector<double> next_state;
};

/// One DQN agent owning a single feature's select/deselect decision.
/// Q-network: state -> tanh hidden -> 2 action values, with a periodically
/// synchronized target copy and a bounded replay buffer.
class FeatureAgent {
 public:
  FeatureAgent(Index state_dim, Index hidden, double learning_rate,
               std::uint64_t seed);

  /// Epsilon-greedy action; exploration consumes exactly two rng draws so
  /// the stream stays aligned across configurations.
  int act(const Vector<double>& state, std::mt19937_64& rng) const;

  Vector<double> q_values(const Vector<double>& state) const;

  void remember(Transition t, int capacity);

  /// One minibatch step on squared TD error against the target network.
  /// Returns the pre-step loss, or nullopt when the buffer is still short.
  std::optional<double> dqn_update(const CollectorConfig& cfg, std::mt19937_64& rng);

  void sync_target();

  std::size_t buffer_size() const { return buffer_.size(); }
  ParamStore<double>& q_net() { return q_; }
  const ParamStore<double>& q_net() const { return q_; }

  double epsilon = 1.0;

 private:
  Vector<double> q_forward(const ParamStore<double>& net,
                           const Vector<double>& state) const;

  ParamStore<double> q_;
  ParamStore<double> target_;
  Adam<double> opt_;
  std::deque<Transition> buffer_;
};

/// Multi-agent exploration over `epochs` environment steps; one record per
/// step, subsets scored on the fixed internal split of `a`. An all-deselected
/// step is repaired by force-selecting one uniformly random feature.
/// Bit-reproducible given the seed.
std::vector<CorpusRecord> collect(const Dataset& a, int epochs,
                                  const ModelKind& model, std::uint64_t seed,
                                  const CollectorConfig& cfg);

/// Control corpus: n uniformly random non-empty subsets (each feature kept
/// with probability 0.5, empty draws resampled), scored exactly as collect.
std::vector<CorpusRecord> random_collect(const Dataset& a, int n,
                                         const ModelKind& model, std::uint64_t seed);

}  // namespace fsgen
