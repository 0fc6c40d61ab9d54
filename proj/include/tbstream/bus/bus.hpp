#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tbstream/bus/clock.hpp"

namespace tbstream::bus {

struct TopicSpec {
  std::string name;
  int partitions = 1;
  int replication_factor = 1;
};

struct EventEnvelope {
  std::string topic;
  int partition = 0;
  std::uint64_t offset = 0;
  std::optional<std::string> key;
  std::string payload;
  Instant ingest_time{};

  bool operator==(const EventEnvelope&) const = default;
};

enum class BrokerStatus { Up, Down };

struct BrokerState {
  int broker_id = 0;
  BrokerStatus status = BrokerStatus::Up;
  std::set<std::pair<std::string, int>> hosted_replicas;
};

struct PartitionInfo {
  int partition = 0;
  std::vector<int> replicas;  // placement order; the first Up one leads
  std::optional<int> leader;
  std::uint64_t end_offset = 0;
};

class BusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownTopicError : public BusError {
 public:
  explicit UnknownTopicError(const std::string& topic) : BusError("unknown topic: " + topic) {}
};

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes);

struct BusOptions {
  int brokers = 3;
  std::shared_ptr<const Clock> clock;  // defaults to SystemClock
};

/// In-process partitioned, replicated log. Replicas of a partition hold
/// prefixes of one shared log: a replica that misses appends while Down is
/// caught up from the leader when it recovers.
class Bus {
 public:
  explicit Bus(BusOptions options = {});

  std::vector<int> broker_ids() const;
  BrokerState broker(int id) const;

  /// Round-robin placement: partition p goes to brokers p, p+1, ... (mod live count).
  void create_topic(const TopicSpec& spec);
  bool has_topic(const std::string& name) const;
  std::vector<TopicSpec> topics() const;
  std::vector<PartitionInfo> partitions(const std::string& topic) const;

  /// Keyed records go to fnv1a64(key) % partitions, others round-robin.
  /// Returns (partition, offset) once every Up replica holds the record.
  std::pair<int, std::uint64_t> publish(const std::string& topic, std::optional<std::string> key,
                                        std::string payload);

  /// Up to `max` records past the group's committed offsets, merged across
  /// partitions by ingest time. Offsets move only on commit().
  std::vector<EventEnvelope> consume(const std::string& topic, const std::string& group, std::size_t max) const;
  void commit(const std::string& group, const std::vector<EventEnvelope>& consumed);
  std::uint64_t committed(const std::string& topic, const std::string& group, int partition) const;

  void fail_broker(int id);
  void recover_broker(int id);

  /// Records held by one broker's replica of a partition (empty if not hosted).
  std::vector<EventEnvelope> replica_log(const std::string& topic, int partition, int broker) const;

  /// Writes meta.json plus one length-prefixed payload log and one index
  /// file per (topic, partition) under `dir`.
  void save(const std::filesystem::path& dir) const;
  static Bus load(const std::filesystem::path& dir, BusOptions options = {});

  Bus(Bus&&) noexcept;
  Bus& operator=(Bus&&) noexcept;
  ~Bus();

 private:
  struct Partition;
  struct Topic;

  Topic& topic_ref(const std::string& name) const;
  void elect(Partition& p);

  BusOptions options_;
  mutable std::shared_mutex meta_mu_;
  std::vector<BrokerStatus> brokers_;
  std::map<std::string, std::unique_ptr<Topic>> topics_;
  mutable std::mutex offsets_mu_;
  std::map<std::tuple<std::string, std::string, int>, std::uint64_t> offsets_;
};

struct MicroBatch {
  Instant start{};
  Instant end{};  // half-open [start, end)
  std::vector<EventEnvelope> events;
};

/// Splits events into consecutive [k*interval, (k+1)*interval) batches by
/// ingest time, from the batch holding `from` (or the earliest event) through
/// the batch holding `until` (or the latest event). Gaps yield empty batches.
std::vector<MicroBatch> micro_batches(std::vector<EventEnvelope> events, Millis interval,
                                      std::optional<Instant> from = std::nullopt,
                                      std::optional<Instant> until = std::nullopt);

/// Pulls from a bus consumer group and hands out closed micro-batches.
class MicroBatcher {
 public:
  MicroBatcher(Bus& bus, std::string topic, std::string group, Millis interval);

  /// Consumes and commits everything available, then returns every batch
  /// whose end is at or before `now`. Records stamped before an already
  /// emitted batch closed join the next batch.
  std::vector<MicroBatch> poll(Instant now);
  /// Everything still buffered, as batches up to the one holding `now`.
  std::vector<MicroBatch> flush(Instant now);

 private:
  void pull();
  std::vector<MicroBatch> emit(Instant until, bool include_open);

  Bus& bus_;
  std::string topic_, group_;
  Millis interval_;
  std::optional<Instant> next_start_;
  std::vector<EventEnvelope> buffer_;
};

}  // namespace tbstream::bus
