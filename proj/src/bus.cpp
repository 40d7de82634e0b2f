#include "dip/bus.hpp"

#include <algorithm>
#include <vector>

namespace dip {

const char* comm_phase_name(CommPhase phase) {
  switch (phase) {
    case CommPhase::SchurExchange:
      return "schur";
    case CommPhase::Cg:
      return "cg";
    case CommPhase::Reduction:
      return "reduction";
  }
  return "?";
}

MessageBus::MessageBus(int agent_count) : agents_(agent_count) {
  if (agent_count < 1) throw InstanceError("message bus needs at least one agent");
}

void MessageBus::log_round(std::span<const int> payload_floats, CommPhase phase) {
  ++round_;
  std::int64_t total = 0;
  for (int i = 0; i < agents_; ++i) {
    total += payload_floats[i];
    if (sink_) sink_({round_, i, -1, payload_floats[i], phase});
  }
  report_.messages += agents_;
  report_.rounds += 1;
  switch (phase) {
    case CommPhase::SchurExchange:
      report_.schur_floats += total;
      break;
    case CommPhase::Cg:
      report_.cg_floats += total;
      break;
    case CommPhase::Reduction:
      report_.reduction_floats += total;
      break;
  }
}

Vector MessageBus::global_sum(std::span<const Vector> per_agent, CommPhase phase) {
  if (static_cast<int>(per_agent.size()) != agents_) {
    throw InstanceError("global_sum: expected one vector per agent");
  }
  const Eigen::Index n = per_agent[0].size();
  Vector acc = Vector::Zero(n);
  std::vector<int> payloads(agents_);
  for (int i = 0; i < agents_; ++i) {
    if (per_agent[i].size() != n) throw InstanceError("global_sum: vector length mismatch");
    acc += per_agent[i];
    payloads[i] = static_cast<int>(n);
  }
  log_round(payloads, phase);
  return acc;
}

double MessageBus::global_sum(std::span<const double> per_agent, CommPhase phase) {
  if (static_cast<int>(per_agent.size()) != agents_) {
    throw InstanceError("global_sum: expected one scalar per agent");
  }
  double acc = 0.0;
  std::vector<int> payloads(agents_, 1);
  for (int i = 0; i < agents_; ++i) acc += per_agent[i];
  log_round(payloads, phase);
  return acc;
}

double MessageBus::global_min(std::span<const double> per_agent, CommPhase phase) {
  if (per_agent.empty() || static_cast<int>(per_agent.size()) != agents_) {
    throw InstanceError("global_min: expected one scalar per agent");
  }
  std::vector<int> payloads(agents_, 1);
  log_round(payloads, phase);
  return *std::min_element(per_agent.begin(), per_agent.end());
}

double MessageBus::global_max(std::span<const double> per_agent, CommPhase phase) {
  if (per_agent.empty() || static_cast<int>(per_agent.size()) != agents_) {
    throw InstanceError("global_max: expected one scalar per agent");
  }
  std::vector<int> payloads(agents_, 1);
  log_round(payloads, phase);
  return *std::max_element(per_agent.begin(), per_agent.end());
}

void MessageBus::set_transcript_sink(std::function<void(const MessageRecord&)> sink) {
  sink_ = std::move(sink);
}

}  // namespace dip
