#pragma once

#include "dsqp/linalg.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dsqp {

/// Synchronous in-process message bus. One mailbox slot per directed edge and
/// round; agents may send concurrently as long as each writes only its own
/// outgoing slots. end_round() is the barrier between rounds.
class MessageBus {
 public:
  MessageBus(int num_agents, const std::vector<std::pair<int, int>>& directed_edges);

  void send(int from, int to, Vec payload);
  /// Throws MissingMessage if nothing was delivered on (from -> to) this round.
  const Vec& receive(int to, int from) const;
  void end_round();

  /// Fault injection: the next message on (from -> to) is lost.
  void drop_next(int from, int to);

  int round() const { return round_; }
  long messages() const { return messages_; }
  long scalars() const { return scalars_; }
  long bytes() const { return 8 * scalars_; }
  void reset_counters();

  void record_transcript(bool on) { record_ = on; }
  /// JSON lines: {"round":r,"from":i,"to":j,"size":n,"hash":"..."}
  const std::vector<std::string>& transcript() const { return transcript_; }
  void write_transcript(const std::string& path) const;

 private:
  int slot(int from, int to) const;

  int num_agents_;
  std::map<std::pair<int, int>, int> index_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<Vec> payload_;
  std::vector<char> filled_;
  std::vector<char> drop_;
  int round_ = 0;
  long messages_ = 0;
  long scalars_ = 0;
  bool record_ = false;
  std::vector<std::string> transcript_;
};

}  // namespace dsqp
