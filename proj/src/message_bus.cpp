#include "dsqp/message_bus.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

namespace dsqp {

MessageBus::MessageBus(int num_agents, const std::vector<std::pair<int, int>>& directed_edges)
    : num_agents_(num_agents) {
  for (const auto& e : directed_edges) {
    require(e.first >= 0 && e.first < num_agents && e.second >= 0 && e.second < num_agents &&
                e.first != e.second,
            ErrorCode::InvalidInput, "bad bus edge");
    if (index_.count(e)) continue;
    index_[e] = static_cast<int>(edges_.size());
    edges_.push_back(e);
  }
  payload_.resize(edges_.size());
  filled_.assign(edges_.size(), 0);
  drop_.assign(edges_.size(), 0);
}

int MessageBus::slot(int from, int to) const {
  auto it = index_.find({from, to});
  if (it == index_.end()) {
    throw Error(ErrorCode::InvalidInput,
                "no link " + std::to_string(from) + " -> " + std::to_string(to));
  }
  return it->second;
}

void MessageBus::send(int from, int to, Vec payload) {
  const int s = slot(from, to);
  if (drop_[s]) {
    drop_[s] = 0;
    return;
  }
  require(!filled_[s], ErrorCode::InvalidInput, "slot already used this round");
  payload_[s] = std::move(payload);
  filled_[s] = 1;
}

const Vec& MessageBus::receive(int to, int from) const {
  const int s = slot(from, to);
  if (!filled_[s]) {
    throw Error(ErrorCode::MissingMessage, "agent " + std::to_string(to) +
                                               " got nothing from " + std::to_string(from) +
                                               " in round " + std::to_string(round_));
  }
  return payload_[s];
}

void MessageBus::end_round() {
  for (std::size_t s = 0; s < edges_.size(); ++s) {
    if (!filled_[s]) continue;
    ++messages_;
    scalars_ += payload_[s].size();
    if (record_) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "{\"round\":%d,\"from\":%d,\"to\":%d,\"size\":%ld,\"hash\":\"%016" PRIx64 "\"}",
                    round_, edges_[s].first, edges_[s].second,
                    static_cast<long>(payload_[s].size()), hash_values(payload_[s]));
      transcript_.emplace_back(buf);
    }
    filled_[s] = 0;
  }
  ++round_;
}

void MessageBus::drop_next(int from, int to) { drop_[slot(from, to)] = 1; }

void MessageBus::reset_counters() {
  messages_ = 0;
  scalars_ = 0;
}

void MessageBus::write_transcript(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  for (const auto& line : transcript_) out << line << '\n';
}

}  // namespace dsqp
