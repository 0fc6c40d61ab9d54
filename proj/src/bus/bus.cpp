#include "tbstream/bus/bus.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>

#include "json.hpp"

namespace tbstream::bus {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct Bus::Partition {
  int index = 0;
  std::vector<int> replicas;
  std::optional<int> leader;
  std::vector<EventEnvelope> log;
  std::map<int, std::size_t> replica_end;
  mutable std::mutex mu;
};

struct Bus::Topic {
  TopicSpec spec;
  std::vector<std::unique_ptr<Partition>> parts;
  std::atomic<std::uint64_t> round_robin{0};
};

Bus::Bus(BusOptions options) : options_(std::move(options)) {
  if (options_.brokers < 1) throw BusError("a bus needs at least one broker");
  if (!options_.clock) options_.clock = std::make_shared<SystemClock>();
  brokers_.assign(static_cast<std::size_t>(options_.brokers), BrokerStatus::Up);
}

Bus::Bus(Bus&& other) noexcept
    : options_(std::move(other.options_)),
      brokers_(std::move(other.brokers_)),
      topics_(std::move(other.topics_)),
      offsets_(std::move(other.offsets_)) {}

Bus& Bus::operator=(Bus&& other) noexcept {
  options_ = std::move(other.options_);
  brokers_ = std::move(other.brokers_);
  topics_ = std::move(other.topics_);
  offsets_ = std::move(other.offsets_);
  return *this;
}

Bus::~Bus() = default;

std::vector<int> Bus::broker_ids() const {
  std::shared_lock lock(meta_mu_);
  std::vector<int> ids(brokers_.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  return ids;
}

BrokerState Bus::broker(int id) const {
  std::shared_lock lock(meta_mu_);
  if (id < 0 || id >= static_cast<int>(brokers_.size())) throw BusError("unknown broker " + std::to_string(id));
  BrokerState s;
  s.broker_id = id;
  s.status = brokers_[id];
  for (const auto& [name, t] : topics_) {
    for (const auto& p : t->parts) {
      if (std::find(p->replicas.begin(), p->replicas.end(), id) != p->replicas.end()) {
        s.hosted_replicas.emplace(name, p->index);
      }
    }
  }
  return s;
}

namespace {

void check_topic_name(const std::string& name) {
  bool ok = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
  });
  if (!ok) throw BusError("invalid topic name '" + name + "'");
}

}  // namespace

void Bus::create_topic(const TopicSpec& spec) {
  check_topic_name(spec.name);
  if (spec.partitions < 1) throw BusError("partitions must be positive");
  if (spec.replication_factor < 1) throw BusError("replication factor must be positive");
  std::unique_lock lock(meta_mu_);
  if (topics_.count(spec.name)) throw BusError("topic already exists: " + spec.name);
  std::vector<int> live;
  for (std::size_t i = 0; i < brokers_.size(); ++i) {
    if (brokers_[i] == BrokerStatus::Up) live.push_back(static_cast<int>(i));
  }
  if (spec.replication_factor > static_cast<int>(live.size())) {
    throw BusError("replication factor " + std::to_string(spec.replication_factor) + " exceeds " +
                   std::to_string(live.size()) + " live brokers");
  }
  auto t = std::make_unique<Topic>();
  t->spec = spec;
  for (int p = 0; p < spec.partitions; ++p) {
    auto part = std::make_unique<Partition>();
    part->index = p;
    for (int r = 0; r < spec.replication_factor; ++r) {
      int b = live[(p + r) % live.size()];
      part->replicas.push_back(b);
      part->replica_end[b] = 0;
    }
    part->leader = part->replicas.front();
    t->parts.push_back(std::move(part));
  }
  topics_.emplace(spec.name, std::move(t));
}

bool Bus::has_topic(const std::string& name) const {
  std::shared_lock lock(meta_mu_);
  return topics_.count(name) > 0;
}

std::vector<TopicSpec> Bus::topics() const {
  std::shared_lock lock(meta_mu_);
  std::vector<TopicSpec> out;
  for (const auto& [name, t] : topics_) out.push_back(t->spec);
  return out;
}

Bus::Topic& Bus::topic_ref(const std::string& name) const {
  auto it = topics_.find(name);
  if (it == topics_.end()) throw UnknownTopicError(name);
  return *it->second;
}

std::vector<PartitionInfo> Bus::partitions(const std::string& topic) const {
  std::shared_lock lock(meta_mu_);
  std::vector<PartitionInfo> out;
  for (const auto& p : topic_ref(topic).parts) {
    std::lock_guard plock(p->mu);
    out.push_back({p->index, p->replicas, p->leader, p->log.size()});
  }
  return out;
}

std::pair<int, std::uint64_t> Bus::publish(const std::string& topic, std::optional<std::string> key,
                                           std::string payload) {
  std::shared_lock lock(meta_mu_);
  Topic& t = topic_ref(topic);
  const auto n = static_cast<std::uint64_t>(t.parts.size());
  int index = static_cast<int>(key ? fnv1a64(*key) % n : t.round_robin.fetch_add(1) % n);
  Partition& p = *t.parts[index];
  std::lock_guard plock(p.mu);
  if (!p.leader) throw BusError("partition " + topic + "/" + std::to_string(index) + " has no live replica");
  EventEnvelope e;
  e.topic = topic;
  e.partition = index;
  e.offset = p.log.size();
  e.key = std::move(key);
  e.payload = std::move(payload);
  e.ingest_time = options_.clock->now();
  p.log.push_back(std::move(e));
  for (int r : p.replicas) {
    if (brokers_[r] == BrokerStatus::Up) p.replica_end[r] = p.log.size();
  }
  return {index, p.log.size() - 1};
}

std::vector<EventEnvelope> Bus::consume(const std::string& topic, const std::string& group, std::size_t max) const {
  std::shared_lock lock(meta_mu_);
  Topic& t = topic_ref(topic);
  std::vector<std::vector<EventEnvelope>> pending(t.parts.size());
  for (const auto& p : t.parts) {
    std::uint64_t from = committed(topic, group, p->index);
    std::lock_guard plock(p->mu);
    if (!p->leader) continue;  // no live replica can serve reads
    std::size_t end = p->replica_end.at(*p->leader);
    for (std::size_t o = from; o < end && pending[p->index].size() < max; ++o) {
      pending[p->index].push_back(p->log[o]);
    }
  }
  std::vector<EventEnvelope> out;
  std::vector<std::size_t> head(pending.size(), 0);
  while (out.size() < max) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      if (head[i] >= pending[i].size()) continue;
      if (!best || pending[i][head[i]].ingest_time < pending[*best][head[*best]].ingest_time) best = i;
    }
    if (!best) break;
    out.push_back(pending[*best][head[*best]++]);
  }
  return out;
}

void Bus::commit(const std::string& group, const std::vector<EventEnvelope>& consumed) {
  std::lock_guard lock(offsets_mu_);
  for (const auto& e : consumed) {
    auto& off = offsets_[{e.topic, group, e.partition}];
    off = std::max(off, e.offset + 1);
  }
}

std::uint64_t Bus::committed(const std::string& topic, const std::string& group, int partition) const {
  std::lock_guard lock(offsets_mu_);
  auto it = offsets_.find({topic, group, partition});
  return it == offsets_.end() ? 0 : it->second;
}

void Bus::elect(Partition& p) {
  p.leader.reset();
  for (int r : p.replicas) {
    if (brokers_[r] == BrokerStatus::Up) {
      p.leader = r;
      return;
    }
  }
}

void Bus::fail_broker(int id) {
  std::unique_lock lock(meta_mu_);
  if (id < 0 || id >= static_cast<int>(brokers_.size())) throw BusError("unknown broker " + std::to_string(id));
  if (brokers_[id] == BrokerStatus::Down) return;
  brokers_[id] = BrokerStatus::Down;
  for (auto& [name, t] : topics_) {
    for (auto& p : t->parts) {
      std::lock_guard plock(p->mu);
      if (p->leader == id) elect(*p);
    }
  }
}

void Bus::recover_broker(int id) {
  std::unique_lock lock(meta_mu_);
  if (id < 0 || id >= static_cast<int>(brokers_.size())) throw BusError("unknown broker " + std::to_string(id));
  if (brokers_[id] == BrokerStatus::Up) return;
  brokers_[id] = BrokerStatus::Up;
  for (auto& [name, t] : topics_) {
    for (auto& p : t->parts) {
      std::lock_guard plock(p->mu);
      auto it = p->replica_end.find(id);
      if (it == p->replica_end.end()) continue;
      if (p->leader) {
        it->second = p->log.size();  // catch up from the leader
        continue;
      }
      // Every replica was down: this one leads with whatever it holds and
      // records past its end are gone.
      p->leader = id;
      p->log.resize(it->second);
      for (auto& [r, end] : p->replica_end) end = std::min(end, it->second);
    }
  }
}

std::vector<EventEnvelope> Bus::replica_log(const std::string& topic, int partition, int broker) const {
  std::shared_lock lock(meta_mu_);
  Topic& t = topic_ref(topic);
  if (partition < 0 || partition >= static_cast<int>(t.parts.size())) throw BusError("unknown partition");
  const Partition& p = *t.parts[partition];
  std::lock_guard plock(p.mu);
  auto it = p.replica_end.find(broker);
  if (it == p.replica_end.end()) return {};
  return {p.log.begin(), p.log.begin() + static_cast<std::ptrdiff_t>(it->second)};
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
  put_u32(out, static_cast<std::uint32_t>(v));
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw BusError("truncated log file");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t hi = get_u32(in);
  return (hi << 32) | get_u32(in);
}

std::string get_bytes(std::istream& in, std::uint32_t n) {
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw BusError("truncated log file");
  return s;
}

constexpr std::uint32_t kNoKey = 0xFFFFFFFFu;

std::string stem(const std::string& topic, int partition) { return topic + "-" + std::to_string(partition); }

}  // namespace

void Bus::save(const std::filesystem::path& dir) const {
  std::shared_lock lock(meta_mu_);
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["brokers"] = nlohmann::json::array();
  for (auto s : brokers_) meta["brokers"].push_back(s == BrokerStatus::Up ? "up" : "down");
  meta["topics"] = nlohmann::json::array();
  for (const auto& [name, t] : topics_) {
    nlohmann::json jt{{"name", name},
                      {"partitions", t->spec.partitions},
                      {"replication_factor", t->spec.replication_factor},
                      {"round_robin", t->round_robin.load()}};
    for (const auto& p : t->parts) {
      std::lock_guard plock(p->mu);
      nlohmann::json jp{{"replicas", p->replicas}};
      jp["leader"] = p->leader ? nlohmann::json(*p->leader) : nlohmann::json();
      for (const auto& [r, end] : p->replica_end) jp["replica_end"][std::to_string(r)] = end;
      jt["parts"].push_back(jp);

      std::ofstream log(dir / (stem(name, p->index) + ".log"), std::ios::binary | std::ios::trunc);
      std::ofstream idx(dir / (stem(name, p->index) + ".idx"), std::ios::binary | std::ios::trunc);
      for (const auto& e : p->log) {
        put_u32(log, static_cast<std::uint32_t>(e.payload.size()));
        log.write(e.payload.data(), static_cast<std::streamsize>(e.payload.size()));
        put_u64(idx, static_cast<std::uint64_t>(e.ingest_time.time_since_epoch().count()));
        put_u32(idx, e.key ? static_cast<std::uint32_t>(e.key->size()) : kNoKey);
        if (e.key) idx.write(e.key->data(), static_cast<std::streamsize>(e.key->size()));
      }
      if (!log || !idx) throw BusError("cannot write log files under " + dir.string());
    }
    meta["topics"].push_back(jt);
  }
  {
    std::lock_guard olock(offsets_mu_);
    meta["offsets"] = nlohmann::json::array();
    for (const auto& [k, v] : offsets_) {
      meta["offsets"].push_back({{"topic", std::get<0>(k)}, {"group", std::get<1>(k)}, {"partition", std::get<2>(k)}, {"offset", v}});
    }
  }
  std::ofstream out(dir / "meta.json", std::ios::trunc);
  out << meta.dump(2) << '\n';
  if (!out) throw BusError("cannot write " + (dir / "meta.json").string());
}

Bus Bus::load(const std::filesystem::path& dir, BusOptions options) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw BusError("no bus state in " + dir.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
    options.brokers = static_cast<int>(meta.at("brokers").size());
    Bus bus(std::move(options));
    for (std::size_t i = 0; i < meta["brokers"].size(); ++i) {
      bus.brokers_[i] = meta["brokers"][i] == "up" ? BrokerStatus::Up : BrokerStatus::Down;
    }
    for (const auto& jt : meta.at("topics")) {
      auto t = std::make_unique<Topic>();
      t->spec = {jt.at("name"), jt.at("partitions"), jt.at("replication_factor")};
      t->round_robin = jt.at("round_robin").get<std::uint64_t>();
      int index = 0;
      for (const auto& jp : jt.at("parts")) {
        auto p = std::make_unique<Partition>();
        p->index = index++;
        p->replicas = jp.at("replicas").get<std::vector<int>>();
        if (!jp.at("leader").is_null()) p->leader = jp["leader"].get<int>();
        for (const auto& [r, end] : jp.at("replica_end").items()) p->replica_end[std::stoi(r)] = end.get<std::size_t>();
        std::ifstream log(dir / (stem(t->spec.name, p->index) + ".log"), std::ios::binary);
        std::ifstream idx(dir / (stem(t->spec.name, p->index) + ".idx"), std::ios::binary);
        while (log.peek() != std::char_traits<char>::eof()) {
          EventEnvelope e;
          e.topic = t->spec.name;
          e.partition = p->index;
          e.offset = p->log.size();
          e.payload = get_bytes(log, get_u32(log));
          e.ingest_time = Instant{Millis{static_cast<long long>(get_u64(idx))}};
          std::uint32_t klen = get_u32(idx);
          if (klen != kNoKey) e.key = get_bytes(idx, klen);
          p->log.push_back(std::move(e));
        }
        for (const auto& [r, end] : p->replica_end) {
          if (end > p->log.size()) throw BusError("replica end past log end for " + t->spec.name);
        }
        t->parts.push_back(std::move(p));
      }
      std::string name = t->spec.name;
      bus.topics_.emplace(name, std::move(t));
    }
    for (const auto& jo : meta.at("offsets")) {
      bus.offsets_[{jo.at("topic"), jo.at("group"), jo.at("partition")}] = jo.at("offset").get<std::uint64_t>();
    }
    return bus;
  } catch (const nlohmann::json::exception& e) {
    throw BusError("corrupt bus metadata: " + std::string(e.what()));
  }
}

namespace {

Instant floor_to(Instant t, Millis interval) {
  auto c = t.time_since_epoch().count();
  auto i = interval.count();
  auto q = c / i;
  if (c % i < 0) --q;
  return Instant{Millis{q * i}};
}

bool by_time(const EventEnvelope& a, const EventEnvelope& b) {
  return std::tie(a.ingest_time, a.partition, a.offset) < std::tie(b.ingest_time, b.partition, b.offset);
}

}  // namespace

std::vector<MicroBatch> micro_batches(std::vector<EventEnvelope> events, Millis interval, std::optional<Instant> from,
                                      std::optional<Instant> until) {
  if (interval.count() <= 0) throw BusError("batch interval must be positive");
  std::sort(events.begin(), events.end(), by_time);
  if (!from) {
    if (events.empty()) return {};
    from = events.front().ingest_time;
  }
  if (!until) until = events.empty() ? *from : std::max(*from, events.back().ingest_time);
  std::vector<MicroBatch> out;
  std::size_t i = 0;
  for (Instant s = floor_to(*from, interval); s <= *until; s += interval) {
    MicroBatch b{s, s + interval, {}};
    while (i < events.size() && events[i].ingest_time < b.end) {
      if (events[i].ingest_time >= s) b.events.push_back(events[i]);
      ++i;  // events before `from` fall outside every batch
    }
    out.push_back(std::move(b));
  }
  return out;
}

MicroBatcher::MicroBatcher(Bus& bus, std::string topic, std::string group, Millis interval)
    : bus_(bus), topic_(std::move(topic)), group_(std::move(group)), interval_(interval) {
  if (interval.count() <= 0) throw BusError("batch interval must be positive");
}

void MicroBatcher::pull() {
  for (;;) {
    auto got = bus_.consume(topic_, group_, 4096);
    if (got.empty()) break;
    bus_.commit(group_, got);
    for (auto& e : got) buffer_.push_back(std::move(e));
  }
  std::stable_sort(buffer_.begin(), buffer_.end(), by_time);
}

std::vector<MicroBatch> MicroBatcher::emit(Instant until, bool include_open) {
  std::vector<MicroBatch> out;
  if (!next_start_) {
    Instant first = buffer_.empty() ? until : std::min(until, buffer_.front().ingest_time);
    next_start_ = floor_to(first, interval_);
  }
  auto more = [&] {
    Instant end = *next_start_ + interval_;
    if (end <= until) return true;
    return include_open && (*next_start_ <= until || !buffer_.empty());
  };
  while (more()) {
    MicroBatch b{*next_start_, *next_start_ + interval_, {}};
    auto split = std::partition_point(buffer_.begin(), buffer_.end(),
                                      [&](const EventEnvelope& e) { return e.ingest_time < b.end; });
    b.events.assign(std::make_move_iterator(buffer_.begin()), std::make_move_iterator(split));
    buffer_.erase(buffer_.begin(), split);
    next_start_ = b.end;
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<MicroBatch> MicroBatcher::poll(Instant now) {
  pull();
  return emit(now, false);
}

std::vector<MicroBatch> MicroBatcher::flush(Instant now) {
  pull();
  return emit(now, true);
}

}  // namespace tbstream::bus
