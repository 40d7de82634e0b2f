#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "dip/common.hpp"

namespace dip {

enum class CommPhase { SchurExchange, Cg, Reduction };

const char* comm_phase_name(CommPhase phase);

/// One logged message: agent `sender` contributed `floats` values in round
/// `round`. Receiver -1 means the round's reduction target (broadcast result).
struct MessageRecord {
  std::int64_t round = 0;
  int sender = 0;
  int receiver = -1;
  int floats = 0;
  CommPhase phase = CommPhase::Reduction;
};

/// Communication totals per phase. Only the up-leg of each reduction is
/// counted: one payload per agent per round.
struct CommReport {
  std::int64_t schur_floats = 0;
  std::int64_t cg_floats = 0;
  std::int64_t reduction_floats = 0;
  std::int64_t messages = 0;
  std::int64_t rounds = 0;

  std::int64_t total_floats() const { return schur_floats + cg_floats + reduction_floats; }
};

/// Synchronous-round communication fabric for the simulated agents. Every
/// global operation is one round: all agents contribute, the reduction runs
/// in fixed agent order, and the result is visible to everyone at the round
/// boundary. Fixed order makes transcripts bit-identical across runs.
class MessageBus {
 public:
  explicit MessageBus(int agent_count);

  int agent_count() const { return agents_; }
  std::int64_t round() const { return round_; }
  const CommReport& report() const { return report_; }

  /// Fixed-order elementwise sum of equally sized per-agent vectors.
  Vector global_sum(std::span<const Vector> per_agent, CommPhase phase);

  /// Fixed-order sum of per-agent scalars.
  double global_sum(std::span<const double> per_agent, CommPhase phase);

  double global_min(std::span<const double> per_agent, CommPhase phase = CommPhase::Reduction);
  double global_max(std::span<const double> per_agent, CommPhase phase = CommPhase::Reduction);

  /// Installs a transcript sink; every message is reported to it.
  void set_transcript_sink(std::function<void(const MessageRecord&)> sink);

 private:
  void log_round(std::span<const int> payload_floats, CommPhase phase);

  int agents_ = 0;
  std::int64_t round_ = 0;
  CommReport report_;
  std::function<void(const MessageRecord&)> sink_;
};

}  // namespace dip
