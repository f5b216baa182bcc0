#pragma once

// Double-DQN learner: replay buffer, epsilon-greedy actor, online-argmax /
// target-evaluate TD targets, periodic target sync and checkpoints.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mmx/core.hpp"
#include "mmx/neural.hpp"

namespace mmx {

struct DqnConfig {
  double gamma = 0.995;
  double epsilon = 0.01;
  std::size_t replay_capacity = 100000;
  std::size_t batch_size = 64;
  std::int64_t target_sync_period = 1000;
  std::size_t learn_start = 1000;
  double learning_rate = 1e-3;
  Loss loss = Loss::MeanSquared;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(Errc::ConfigInvalid, "gamma outside [0, 1]");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
      throw Error(Errc::ConfigInvalid, "epsilon outside [0, 1]");
    }
    if (batch_size < 1 || batch_size > replay_capacity) {
      throw Error(Errc::ConfigInvalid, "batch_size must be in [1, replay_capacity]");
    }
    if (target_sync_period < 1) throw Error(Errc::ConfigInvalid, "target_sync_period < 1");
    if (!(learning_rate > 0.0)) throw Error(Errc::ConfigInvalid, "learning_rate must be > 0");
  }
};

/// FIFO ring of immutable transitions. Appends and samples are serialised
/// by an internal lock, so rollout threads may push while the learner samples.
class ReplayBuffer {
 public:
  using Item = std::shared_ptr<const Transition>;

  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw Error(Errc::ConfigInvalid, "replay capacity must be positive");
    ring_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
  }

  void push(Transition t) {
    auto item = std::make_shared<const Transition>(std::move(t));
    std::lock_guard lock(mutex_);
    if (ring_.size() < capacity_) {
      ring_.push_back(std::move(item));
    } else {
      ring_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// Uniform draws with replacement.
  std::vector<Item> sample(std::size_t n, Rng& rng) const {
    std::lock_guard lock(mutex_);
    if (ring_.empty()) throw Error(Errc::BufferTooSmall, "sampling an empty buffer");
    std::uniform_int_distribution<std::size_t> pick(0, ring_.size() - 1);
    std::vector<Item> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(ring_[pick(rng)]);
    return out;
  }

  /// Oldest first.
  std::vector<Item> contents() const {
    std::lock_guard lock(mutex_);
    std::vector<Item> out;
    for (std::size_t i = 0; i < ring_.size(); ++i) out.push_back(ring_[(head_ + i) % ring_.size()]);
    return out;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return ring_.size();
  }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Item> ring_;
  mutable std::mutex mutex_;
};

/// Index of the largest value among legal entries; ties go to the lowest index.
inline int masked_argmax(std::span<const double> values, const ActionMask& mask) {
  int best = -1;
  for (std::size_t a = 0; a < values.size(); ++a) {
    if (a < mask.size() && mask[a] && (best < 0 || values[a] > values[best])) {
      best = static_cast<int>(a);
    }
  }
  if (best < 0) throw Error(Errc::NoLegalAction, "action mask has no legal entry");
  return best;
}

class Agent {
 public:
  Agent(const MlpSpec& spec, const DqnConfig& config, Rng& init_rng)
      : config_(config), online_(init_parameters(spec, init_rng)), target_(online_) {
    config_.validate();
    adam_ = AdamState::for_parameters(online_, config_.learning_rate);
  }

  Agent(ParameterSet online, ParameterSet target, const DqnConfig& config)
      : config_(config), online_(std::move(online)), target_(std::move(target)) {
    config_.validate();
    if (!(online_.spec == target_.spec)) {
      throw Error(Errc::DimensionMismatch, "online and target layouts differ");
    }
    adam_ = AdamState::for_parameters(online_, config_.learning_rate);
  }

  const DqnConfig& config() const { return config_; }
  /// Changing the TD discount is how the gamma-zero overlay is applied.
  void set_gamma(double gamma) {
    config_.gamma = gamma;
    config_.validate();
  }
  const ParameterSet& online() const { return online_; }
  const ParameterSet& target() const { return target_; }
  const MlpSpec& spec() const { return online_.spec; }
  std::int64_t steps() const { return steps_; }
  bool frozen() const { return frozen_; }

  /// Smallest greedy value seen during this agent's own training; used to
  /// shift shaped rewards when no reward bound is known.
  double min_value() const { return min_value_; }
  void track_value(double v) { min_value_ = std::min(min_value_, v); }

  std::vector<double> q_values(std::span<const double> obs) const { return forward(online_, obs); }

  double max_q(std::span<const double> obs, const ActionMask& mask) const {
    const auto q = q_values(obs);
    return q[masked_argmax(q, mask)];
  }

  int greedy_action(std::span<const double> obs, const ActionMask& mask) const {
    return masked_argmax(q_values(obs), mask);
  }

  /// Epsilon-greedy over legal actions. `greedy_value`, when given, receives
  /// the masked max-Q of the state.
  int select_action(std::span<const double> obs, const ActionMask& mask, Rng& rng,
                    double* greedy_value = nullptr) const {
    std::vector<int> legal;
    for (std::size_t a = 0; a < mask.size(); ++a) {
      if (mask[a]) legal.push_back(static_cast<int>(a));
    }
    if (legal.empty()) throw Error(Errc::NoLegalAction, "no legal action to select");
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u < config_.epsilon) {
      std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
      const int a = legal[pick(rng)];
      if (greedy_value) *greedy_value = max_q(obs, mask);
      return a;
    }
    const auto q = q_values(obs);
    const int a = masked_argmax(q, mask);
    if (greedy_value) *greedy_value = q[a];
    return a;
  }

  /// y = r + gamma * (1 - d) * Q_target(s', argmax_legal Q_online(s', .)).
  std::vector<double> td_targets(std::span<const ReplayBuffer::Item> batch) const {
    const int n = static_cast<int>(batch.size());
    const int dim = online_.spec.input_dim;
    Eigen::MatrixXd next(dim, n);
    for (int j = 0; j < n; ++j) {
      const auto& s = batch[j]->next_state;
      if (s.size() != static_cast<std::size_t>(dim)) {
        throw Error(Errc::DimensionMismatch, "next_state length");
      }
      next.col(j) = Eigen::Map<const Eigen::VectorXd>(s.data(), dim);
    }
    const bool bootstrap = config_.gamma > 0.0;
    Eigen::MatrixXd q_online;
    Eigen::MatrixXd q_target;
    if (bootstrap) {
      q_online = forward_batch(online_, next);
      q_target = forward_batch(target_, std::move(next));
    }
    std::vector<double> y(n);
    for (int j = 0; j < n; ++j) {
      const Transition& t = *batch[j];
      y[j] = t.reward;
      if (!bootstrap || t.done || !any_legal(t.next_legal)) continue;
      const int a = masked_argmax(
          std::span<const double>(q_online.col(j).data(), q_online.rows()), t.next_legal);
      y[j] += config_.gamma * q_target(a, j);
    }
    return y;
  }

  /// One optimizer step on a uniform batch; returns the batch loss.
  double learn_step(const ReplayBuffer& buffer, Rng& rng) {
    if (frozen_) throw Error(Errc::FrozenModel, "frozen checkpoints cannot learn");
    const std::size_t needed = std::max<std::size_t>(config_.learn_start, 1);
    if (buffer.size() < needed) {
      throw Error(Errc::BufferTooSmall, std::to_string(buffer.size()) + " < " +
                                            std::to_string(needed) + " transitions");
    }
    const auto batch = buffer.sample(config_.batch_size, rng);
    const auto targets = td_targets(batch);
    std::vector<TdSample> samples;
    samples.reserve(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j) {
      samples.push_back({batch[j]->state, batch[j]->action, targets[j]});
    }
    const auto g = backward(online_, samples, config_.loss);
    adam_step(online_, g.gradient, adam_);
    ++steps_;
    if (steps_ % config_.target_sync_period == 0) target_ = online_;
    return g.loss;
  }

  /// Forward-only frozen copy.
  Agent checkpoint() const {
    Agent copy = *this;
    copy.frozen_ = true;
    copy.adam_ = {};
    return copy;
  }

  // Checkpoint file: a human-readable key=value header closed by "end",
  // followed by the online and target networks in the binary parameter
  // format.
  static constexpr int kFormatVersion = 1;

  void save(std::ostream& out) const {
    std::ostringstream h;
    h << std::setprecision(17);
    h << "MMXAGENT " << kFormatVersion << '\n';
    h << "gamma=" << config_.gamma << '\n';
    h << "epsilon=" << config_.epsilon << '\n';
    h << "replay_capacity=" << config_.replay_capacity << '\n';
    h << "batch_size=" << config_.batch_size << '\n';
    h << "target_sync_period=" << config_.target_sync_period << '\n';
    h << "learn_start=" << config_.learn_start << '\n';
    h << "learning_rate=" << config_.learning_rate << '\n';
    h << "loss=" << (config_.loss == Loss::Huber ? "huber" : "mse") << '\n';
    h << "steps=" << steps_ << '\n';
    h << "min_value=" << min_value_ << '\n';
    h << "frozen=" << (frozen_ ? 1 : 0) << '\n';
    h << "end\n";
    out << h.str();
    write_parameters(out, online_);
    write_parameters(out, target_);
  }

  static Agent restore(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "MMXAGENT " + std::to_string(kFormatVersion)) {
      throw Error(Errc::FormatVersionMismatch, "not an agent checkpoint of version " +
                                                   std::to_string(kFormatVersion));
    }
    std::map<std::string, std::string> kv;
    bool closed = false;
    while (std::getline(in, line)) {
      if (line == "end") {
        closed = true;
        break;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Error(Errc::FormatVersionMismatch, "bad header line");
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (!closed) throw Error(Errc::FormatVersionMismatch, "truncated checkpoint header");
    auto get = [&](const std::string& k) {
      auto it = kv.find(k);
      if (it == kv.end()) throw Error(Errc::FormatVersionMismatch, "missing header key " + k);
      return it->second;
    };
    DqnConfig c;
    try {
      c.gamma = std::stod(get("gamma"));
      c.epsilon = std::stod(get("epsilon"));
      c.replay_capacity = std::stoull(get("replay_capacity"));
      c.batch_size = std::stoull(get("batch_size"));
      c.target_sync_period = std::stoll(get("target_sync_period"));
      c.learn_start = std::stoull(get("learn_start"));
      c.learning_rate = std::stod(get("learning_rate"));
      c.loss = get("loss") == "huber" ? Loss::Huber : Loss::MeanSquared;
    } catch (const std::logic_error&) {
      throw Error(Errc::FormatVersionMismatch, "unparseable header value");
    }
    auto online = read_parameters(in);
    auto target = read_parameters(in);
    Agent a(std::move(online), std::move(target), c);
    a.steps_ = std::stoll(get("steps"));
    a.min_value_ = std::stod(get("min_value"));
    a.frozen_ = get("frozen") == "1";
    return a;
  }

 private:
  DqnConfig config_;
  ParameterSet online_;
  ParameterSet target_;
  AdamState adam_;
  std::int64_t steps_ = 0;
  double min_value_ = std::numeric_limits<double>::infinity();
  bool frozen_ = false;
};

}  // namespace mmx
