#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "travex/geometry.hpp"
#include "travex/graph.hpp"

namespace travex {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

enum class ProtocolErrorKind : std::uint8_t { Malformed = 0, UnsupportedVersion = 1, InvalidMessage = 2 };

inline const char* to_string(ProtocolErrorKind k) {
  switch (k) {
    case ProtocolErrorKind::Malformed: return "malformed";
    case ProtocolErrorKind::UnsupportedVersion: return "unsupported-version";
    case ProtocolErrorKind::InvalidMessage: return "invalid-message";
  }
  return "?";
}

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ProtocolErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ProtocolErrorKind kind() const { return kind_; }

 private:
  ProtocolErrorKind kind_;
};

struct ScanMetadata {
  std::uint32_t point_count{0};
  std::uint64_t checksum{0};
  friend bool operator==(const ScanMetadata&, const ScanMetadata&) = default;
};

/// FNV-1a over the little-endian f64 coordinates of every point.
inline std::uint64_t scan_checksum(std::span<const Point3> scan) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    for (int b = 0; b < 8; ++b) {
      h ^= (u >> (8 * b)) & 0xffu;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : scan) {
    mix(p.x);
    mix(p.y);
    mix(p.z);
  }
  return h;
}

inline ScanMetadata scan_metadata(std::span<const Point3> scan) {
  return {static_cast<std::uint32_t>(scan.size()), scan_checksum(scan)};
}

/// Everything the aerial agent receives at hand-off. Carries graph structure
/// only; there is no field for voxel or grid data.
struct UnifiedGraphMessage {
  std::uint16_t version{kProtocolVersion};
  std::string mission_id;
  RigidTransform static_transform;  // aerial frame -> ground global frame
  ScanMetadata scan;
  ExplorationGraph graph{GraphLevel::Unified};
  Path candidate_path;
  std::vector<NodeId> frontier_ids;  // sorted
};

inline bool operator==(const UnifiedGraphMessage& a, const UnifiedGraphMessage& b) {
  return a.version == b.version && a.mission_id == b.mission_id && a.static_transform == b.static_transform &&
         a.scan == b.scan && a.graph.level() == b.graph.level() && a.graph.nodes() == b.graph.nodes() &&
         a.graph.edges() == b.graph.edges() && a.candidate_path == b.candidate_path && a.frontier_ids == b.frontier_ids;
}

/// Throws InvalidMessage when the message breaks a structural invariant.
inline void validate_message(const UnifiedGraphMessage& m) {
  auto fail = [](const std::string& w) { throw ProtocolError(ProtocolErrorKind::InvalidMessage, w); };
  if (m.graph.level() != GraphLevel::Unified) fail("graph level must be unified");
  if (!m.static_transform.is_valid()) fail("static transform is not a rigid transform");
  const auto& p = m.candidate_path.ids;
  if (p.empty()) fail("candidate path is empty");
  for (NodeId id : p)
    if (!m.graph.has_node(id)) fail("candidate path references missing node " + std::to_string(id));
  for (std::size_t i = 1; i < p.size(); ++i)
    if (!m.graph.has_edge(p[i - 1], p[i])) fail("candidate path uses a missing edge");
  if (!m.graph.node(p.back()).is_frontier) fail("candidate path does not end at a frontier");
  const double len = path_length(m.graph, p);
  if (std::abs(len - m.candidate_path.length) > 1e-9 * std::max(1.0, len)) fail("candidate path length mismatch");
  for (std::size_t i = 0; i < m.frontier_ids.size(); ++i) {
    const NodeId id = m.frontier_ids[i];
    if (i > 0 && m.frontier_ids[i - 1] >= id) fail("frontier ids not strictly increasing");
    if (!m.graph.has_node(id) || !m.graph.node(id).is_frontier) fail("listed frontier is not a frontier node");
  }
}

/// Candidate graph plus the registry's open frontiers as isolated nodes, with
/// contiguous ids. Included registry entries become shared.
inline UnifiedGraphMessage build_unified_graph(const ExplorationGraph& candidate, const Path& target,
                                               FrontierRegistry& registry, const RigidTransform& tf,
                                               std::string mission_id = {}, ScanMetadata scan = {}) {
  if (target.ids.empty() || !candidate.has_node(target.terminal()) || !candidate.node(target.terminal()).is_frontier)
    throw std::invalid_argument("build_unified_graph: target path must end at a frontier of the candidate graph");
  UnifiedGraphMessage m;
  m.mission_id = std::move(mission_id);
  m.static_transform = tf;
  m.scan = scan;
  std::map<NodeId, NodeId> remap;
  NodeId next = 0;
  for (const auto& [id, n] : candidate.nodes()) {
    GraphNode copy = n;
    copy.id = next;
    remap[id] = next++;
    m.graph.add_node(copy);
  }
  for (const auto& e : candidate.edges()) m.graph.add_edge(remap.at(e.a), remap.at(e.b));
  for (auto& e : registry.entries()) {
    if (e.status != FrontierStatus::Open) continue;
    bool present = false;
    for (const auto& [_, n] : candidate.nodes())
      if (n.pose.position() == e.pose.position()) present = true;
    if (!present) m.graph.add_node({next++, e.pose, e.gain, true, std::nullopt});
    e.status = FrontierStatus::Shared;
  }
  for (NodeId id : target.ids) m.candidate_path.ids.push_back(remap.at(id));
  m.candidate_path.length = path_length(m.graph, m.candidate_path.ids);
  m.candidate_path.confidence = target.confidence;
  m.frontier_ids = m.graph.frontier_ids();
  validate_message(m);
  return m;
}

/// Maps a pose in the aerial frame into the ground global frame.
inline RobotState apply_static_transform(const RigidTransform& tf, const RobotState& pose_aerial) {
  const Point3 p = transform_point(pose_aerial.position(), tf);
  return {p.x, p.y, p.z, pose_aerial.psi + tf.yaw()};
}

inline RobotState apply_static_transform(const UnifiedGraphMessage& m, const RobotState& pose_aerial) {
  return apply_static_transform(m.static_transform, pose_aerial);
}

// ---------------------------------------------------------------------------
// Codec

enum class MessageKind : std::uint8_t { Request = 0, Accepted = 1, Feedback = 2, Result = 3, Reject = 4 };

inline constexpr std::uint8_t kFeedbackDeployAck = 0;
inline constexpr std::uint8_t kResultExplorationStarted = 0;
inline constexpr std::uint8_t kResultFirstFrontierReached = 1;
inline constexpr std::uint8_t kResultClientAck = 255;  // client -> server, closes the exchange

enum class RejectCode : std::uint8_t {
  Malformed = 0,
  UnsupportedVersion = 1,
  InvalidMessage = 2,
  Timeout = 3,
  Declined = 4,
  ProtocolViolation = 5,
};

struct Envelope {
  MessageKind kind{MessageKind::Request};
  std::optional<UnifiedGraphMessage> request;  // Request only
  std::uint8_t code{0};                        // Feedback, Result, Reject
  std::string reason;                          // Reject only
};

namespace wire {

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    le(u, 8);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  Bytes out;

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() {
    const std::uint64_t u = le(8);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_), in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  void need(std::size_t n) const {
    if (remaining() < n) throw ProtocolError(ProtocolErrorKind::Malformed, "truncated payload");
  }

 private:
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_{0};
};

inline void write_message(Writer& w, const UnifiedGraphMessage& m) {
  w.str(m.mission_id);
  for (const auto& row : m.static_transform.rotation)
    for (double v : row) w.f64(v);
  w.f64(m.static_transform.translation.x);
  w.f64(m.static_transform.translation.y);
  w.f64(m.static_transform.translation.z);
  w.u32(m.scan.point_count);
  w.u64(m.scan.checksum);
  w.u32(static_cast<std::uint32_t>(m.graph.node_count()));
  for (const auto& [id, n] : m.graph.nodes()) {
    w.u32(id);
    w.f64(n.pose.x);
    w.f64(n.pose.y);
    w.f64(n.pose.z);
    w.f64(n.pose.psi);
    w.f64(n.gain);
    w.u8(static_cast<std::uint8_t>((n.is_frontier ? 1 : 0) | (n.confidence ? 2 : 0)));
    if (n.confidence) w.f64(*n.confidence);
  }
  const auto edges = m.graph.edges();
  w.u32(static_cast<std::uint32_t>(edges.size()));
  for (const auto& e : edges) {
    w.u32(e.a);
    w.u32(e.b);
  }
  w.u32(static_cast<std::uint32_t>(m.candidate_path.ids.size()));
  for (NodeId id : m.candidate_path.ids) w.u32(id);
  w.f64(m.candidate_path.length);
  w.u8(m.candidate_path.confidence ? 1 : 0);
  if (m.candidate_path.confidence) w.f64(*m.candidate_path.confidence);
  w.u32(static_cast<std::uint32_t>(m.frontier_ids.size()));
  for (NodeId id : m.frontier_ids) w.u32(id);
}

inline UnifiedGraphMessage read_message(Reader& r, std::uint16_t version) {
  auto malformed = [](const std::string& w) { throw ProtocolError(ProtocolErrorKind::Malformed, w); };
  UnifiedGraphMessage m;
  m.version = version;
  m.mission_id = r.str();
  for (auto& row : m.static_transform.rotation)
    for (double& v : row) v = r.f64();
  m.static_transform.translation.x = r.f64();
  m.static_transform.translation.y = r.f64();
  m.static_transform.translation.z = r.f64();
  m.scan.point_count = r.u32();
  m.scan.checksum = r.u64();
  const std::uint32_t n_nodes = r.u32();
  r.need(static_cast<std::size_t>(n_nodes) * 45);
  std::optional<NodeId> prev;
  for (std::uint32_t i = 0; i < n_nodes; ++i) {
    GraphNode n;
    n.id = r.u32();
    if (prev && *prev >= n.id) malformed("node ids not strictly increasing");
    prev = n.id;
    const double x = r.f64(), y = r.f64(), z = r.f64(), psi = r.f64();
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) || !std::isfinite(psi) || psi != normalize_angle(psi))
      throw ProtocolError(ProtocolErrorKind::InvalidMessage, "node pose not finite or heading not normalized");
    n.pose = RobotState(x, y, z, psi);
    n.gain = r.f64();
    const std::uint8_t flags = r.u8();
    if (flags & ~3u) malformed("unknown node flags");
    n.is_frontier = (flags & 1u) != 0;
    if (flags & 2u) n.confidence = r.f64();
    m.graph.add_node(n);
  }
  const std::uint32_t n_edges = r.u32();
  r.need(static_cast<std::size_t>(n_edges) * 8);
  std::optional<std::pair<NodeId, NodeId>> prev_edge;
  for (std::uint32_t i = 0; i < n_edges; ++i) {
    const NodeId a = r.u32();
    const NodeId b = r.u32();
    if (a >= b || (prev_edge && *prev_edge >= std::make_pair(a, b))) malformed("edges not canonical");
    prev_edge = std::make_pair(a, b);
    if (!m.graph.has_node(a) || !m.graph.has_node(b))
      throw ProtocolError(ProtocolErrorKind::InvalidMessage, "edge references missing node");
    m.graph.add_edge(a, b);
  }
  const std::uint32_t n_path = r.u32();
  r.need(static_cast<std::size_t>(n_path) * 4);
  for (std::uint32_t i = 0; i < n_path; ++i) m.candidate_path.ids.push_back(r.u32());
  m.candidate_path.length = r.f64();
  const std::uint8_t has_conf = r.u8();
  if (has_conf > 1) malformed("bad path confidence flag");
  if (has_conf) m.candidate_path.confidence = r.f64();
  const std::uint32_t n_front = r.u32();
  r.need(static_cast<std::size_t>(n_front) * 4);
  for (std::uint32_t i = 0; i < n_front; ++i) m.frontier_ids.push_back(r.u32());
  return m;
}

}  // namespace wire

/// Payload bytes (version, kind, body) without the length prefix.
inline Bytes encode_payload(const Envelope& env) {
  wire::Writer w;
  w.u16(kProtocolVersion);
  w.u8(static_cast<std::uint8_t>(env.kind));
  switch (env.kind) {
    case MessageKind::Request:
      if (!env.request) throw std::invalid_argument("encode: request envelope without message");
      wire::write_message(w, *env.request);
      break;
    case MessageKind::Accepted: break;
    case MessageKind::Feedback:
    case MessageKind::Result: w.u8(env.code); break;
    case MessageKind::Reject:
      w.u8(env.code);
      w.str(env.reason);
      break;
  }
  return std::move(w.out);
}

inline Envelope decode_payload(std::span<const std::uint8_t> payload) {
  wire::Reader r(payload);
  const std::uint16_t version = r.u16();
  if (version != kProtocolVersion)
    throw ProtocolError(ProtocolErrorKind::UnsupportedVersion, "version " + std::to_string(version));
  const std::uint8_t kind = r.u8();
  if (kind > 4) throw ProtocolError(ProtocolErrorKind::Malformed, "unknown message kind");
  Envelope env;
  env.kind = static_cast<MessageKind>(kind);
  switch (env.kind) {
    case MessageKind::Request:
      env.request = wire::read_message(r, version);
      break;
    case MessageKind::Accepted: break;
    case MessageKind::Feedback:
    case MessageKind::Result: env.code = r.u8(); break;
    case MessageKind::Reject:
      env.code = r.u8();
      env.reason = r.str();
      break;
  }
  if (r.remaining() != 0) throw ProtocolError(ProtocolErrorKind::Malformed, "trailing bytes");
  if (env.request) validate_message(*env.request);
  return env;
}

/// Length-prefixed frame: u32 little-endian payload size, then payload.
inline Bytes frame(const Bytes& payload) {
  Bytes out;
  out.reserve(payload.size() + 4);
  const auto n = static_cast<std::uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline std::span<const std::uint8_t> unframe(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw ProtocolError(ProtocolErrorKind::Malformed, "frame shorter than length prefix");
  const std::uint32_t n = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
                          (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
  if (n > kMaxFrameBytes || bytes.size() - 4 != n)
    throw ProtocolError(ProtocolErrorKind::Malformed, "length prefix does not match frame size");
  return bytes.subspan(4);
}

inline Bytes encode(const UnifiedGraphMessage& m) {
  Envelope env;
  env.kind = MessageKind::Request;
  env.request = m;
  return frame(encode_payload(env));
}

inline UnifiedGraphMessage decode(std::span<const std::uint8_t> bytes) {
  Envelope env = decode_payload(unframe(bytes));
  if (env.kind != MessageKind::Request) throw ProtocolError(ProtocolErrorKind::InvalidMessage, "not a request frame");
  return std::move(*env.request);
}

// ---------------------------------------------------------------------------
// Action exchange

enum class ExchangeState : std::uint8_t { Idle, RequestSent, Accepted, FeedbackDeployAck, ExploringResult, Done, Rejected };

inline const char* to_string(ExchangeState s) {
  switch (s) {
    case ExchangeState::Idle: return "Idle";
    case ExchangeState::RequestSent: return "RequestSent";
    case ExchangeState::Accepted: return "Accepted";
    case ExchangeState::FeedbackDeployAck: return "FeedbackDeployAck";
    case ExchangeState::ExploringResult: return "ExploringResult";
    case ExchangeState::Done: return "Done";
    case ExchangeState::Rejected: return "Rejected";
  }
  return "?";
}

class ActionExchange {
 public:
  ExchangeState state() const { return state_; }
  bool terminal() const { return state_ == ExchangeState::Done || state_ == ExchangeState::Rejected; }
  const std::vector<std::pair<ExchangeState, double>>& history() const { return history_; }

  /// Advances along the chain or to Rejected; anything else throws.
  void advance(ExchangeState to, double t) {
    const bool next = static_cast<int>(to) == static_cast<int>(state_) + 1 && to != ExchangeState::Rejected;
    const bool reject = to == ExchangeState::Rejected && !terminal();
    if (!next && !reject)
      throw std::logic_error(std::string("illegal transition ") + to_string(state_) + " -> " + to_string(to));
    state_ = to;
    history_.emplace_back(to, t);
  }

 private:
  ExchangeState state_{ExchangeState::Idle};
  std::vector<std::pair<ExchangeState, double>> history_;
};

inline Envelope make_reject(RejectCode code, std::string reason) {
  Envelope e;
  e.kind = MessageKind::Reject;
  e.code = static_cast<std::uint8_t>(code);
  e.reason = std::move(reason);
  return e;
}

inline Envelope make_simple(MessageKind k, std::uint8_t code = 0) {
  Envelope e;
  e.kind = k;
  e.code = code;
  return e;
}

/// Ground side. Event-driven: feed it frames and clock ticks, send what it returns.
class ActionClient {
 public:
  ActionClient(UnifiedGraphMessage msg, double timeout_s = 5.0) : msg_(std::move(msg)), timeout_(timeout_s) {}

  const ActionExchange& exchange() const { return ex_; }
  double deadline() const { return deadline_; }
  std::optional<std::uint8_t> result_code() const { return result_; }

  std::vector<Bytes> start(double now) {
    Envelope e;
    e.kind = MessageKind::Request;
    e.request = msg_;
    ex_.advance(ExchangeState::RequestSent, now);
    deadline_ = now + timeout_;
    return {encode_payload(e)};
  }

  std::vector<Bytes> on_payload(std::span<const std::uint8_t> payload, double now) {
    if (ex_.terminal()) return {};
    Envelope env;
    try {
      env = decode_payload(payload);
    } catch (const ProtocolError& err) {
      return reject(now, RejectCode::Malformed, err.what());
    }
    const auto s = ex_.state();
    if (env.kind == MessageKind::Reject) {
      ex_.advance(ExchangeState::Rejected, now);
      return {};
    }
    if (s == ExchangeState::RequestSent && env.kind == MessageKind::Accepted) {
      ex_.advance(ExchangeState::Accepted, now);
    } else if (s == ExchangeState::Accepted && env.kind == MessageKind::Feedback && env.code == kFeedbackDeployAck) {
      ex_.advance(ExchangeState::FeedbackDeployAck, now);
    } else if (s == ExchangeState::FeedbackDeployAck && env.kind == MessageKind::Result &&
               env.code != kResultClientAck) {
      result_ = env.code;
      ex_.advance(ExchangeState::ExploringResult, now);
      ex_.advance(ExchangeState::Done, now);
      return {encode_payload(make_simple(MessageKind::Result, kResultClientAck))};
    } else {
      return reject(now, RejectCode::ProtocolViolation, "unexpected message");
    }
    deadline_ = now + timeout_;
    return {};
  }

  std::vector<Bytes> poll(double now) {
    if (ex_.terminal() || ex_.state() == ExchangeState::Idle || now < deadline_) return {};
    return reject(now, RejectCode::Timeout, std::string("timeout in ") + to_string(ex_.state()));
  }

 private:
  std::vector<Bytes> reject(double now, RejectCode code, const std::string& why) {
    ex_.advance(ExchangeState::Rejected, now);
    return {encode_payload(make_reject(code, why))};
  }

  UnifiedGraphMessage msg_;
  double timeout_;
  double deadline_{0.0};
  ActionExchange ex_;
  std::optional<std::uint8_t> result_;
};

/// Aerial side. The handler consumes the validated graph and returns a result
/// code, or nothing to decline.
class ActionServer {
 public:
  using Handler = std::function<std::optional<std::uint8_t>(const UnifiedGraphMessage&)>;

  // `close_timeout_s` bounds the wait for the client's closing word after Result.
  ActionServer(Handler handler, double timeout_s = 5.0, double close_timeout_s = 20.0)
      : handler_(std::move(handler)), timeout_(timeout_s), close_timeout_(close_timeout_s) {}

  const ActionExchange& exchange() const { return ex_; }
  double deadline() const { return deadline_; }
  const std::optional<UnifiedGraphMessage>& message() const { return msg_; }

  void start(double now) { deadline_ = now + timeout_; }

  std::vector<Bytes> on_payload(std::span<const std::uint8_t> payload, double now) {
    if (ex_.terminal()) return {};
    const auto s = ex_.state();
    Envelope env;
    try {
      env = decode_payload(payload);
    } catch (const ProtocolError& err) {
      if (s == ExchangeState::Idle) ex_.advance(ExchangeState::RequestSent, now);
      const RejectCode code = err.kind() == ProtocolErrorKind::UnsupportedVersion ? RejectCode::UnsupportedVersion
                              : err.kind() == ProtocolErrorKind::InvalidMessage  ? RejectCode::InvalidMessage
                                                                                 : RejectCode::Malformed;
      return reject(now, code, err.what());
    }
    if (env.kind == MessageKind::Reject) {
      ex_.advance(ExchangeState::Rejected, now);
      return {};
    }
    if (s == ExchangeState::Idle && env.kind == MessageKind::Request) {
      ex_.advance(ExchangeState::RequestSent, now);
      msg_ = std::move(env.request);
      std::vector<Bytes> out;
      ex_.advance(ExchangeState::Accepted, now);
      out.push_back(encode_payload(make_simple(MessageKind::Accepted)));
      ex_.advance(ExchangeState::FeedbackDeployAck, now);
      out.push_back(encode_payload(make_simple(MessageKind::Feedback, kFeedbackDeployAck)));
      const auto code = handler_ ? handler_(*msg_) : std::optional<std::uint8_t>(kResultExplorationStarted);
      if (!code) {
        auto r = reject(now, RejectCode::Declined, "handler declined the graph");
        out.insert(out.end(), r.begin(), r.end());
        return out;
      }
      ex_.advance(ExchangeState::ExploringResult, now);
      out.push_back(encode_payload(make_simple(MessageKind::Result, *code)));
      deadline_ = now + close_timeout_;
      return out;
    }
    if (s == ExchangeState::ExploringResult && env.kind == MessageKind::Result && env.code == kResultClientAck) {
      ex_.advance(ExchangeState::Done, now);
      return {};
    }
    if (s == ExchangeState::Idle) ex_.advance(ExchangeState::RequestSent, now);
    return reject(now, RejectCode::ProtocolViolation, "unexpected message");
  }

  std::vector<Bytes> poll(double now) {
    if (ex_.terminal() || now < deadline_) return {};
    if (ex_.state() == ExchangeState::Idle) ex_.advance(ExchangeState::RequestSent, now);
    return reject(now, RejectCode::Timeout, "timeout");
  }

 private:
  std::vector<Bytes> reject(double now, RejectCode code, const std::string& why) {
    ex_.advance(ExchangeState::Rejected, now);
    return {encode_payload(make_reject(code, why))};
  }

  Handler handler_;
  double timeout_;
  double close_timeout_;
  double deadline_{0.0};
  ActionExchange ex_;
  std::optional<UnifiedGraphMessage> msg_;
};

// ---------------------------------------------------------------------------
// Transports

/// Ordered, reliable channel of payloads.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const Bytes& payload) = 0;
  /// Next payload, or nothing if none arrived within `timeout` or the peer is gone.
  virtual std::optional<Bytes> receive(std::chrono::milliseconds timeout) = 0;
  virtual bool closed() const { return false; }
};

class InProcessTransport : public Transport {
 public:
  struct Queue {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Bytes> items;
  };

  InProcessTransport(std::shared_ptr<Queue> in, std::shared_ptr<Queue> out) : in_(std::move(in)), out_(std::move(out)) {}

  void send(const Bytes& payload) override {
    {
      std::lock_guard lock(out_->mu);
      out_->items.push_back(payload);
    }
    out_->cv.notify_all();
  }

  std::optional<Bytes> receive(std::chrono::milliseconds timeout) override {
    std::unique_lock lock(in_->mu);
    if (!in_->cv.wait_for(lock, timeout, [&] { return !in_->items.empty(); })) return std::nullopt;
    Bytes b = std::move(in_->items.front());
    in_->items.pop_front();
    return b;
  }

 private:
  std::shared_ptr<Queue> in_;
  std::shared_ptr<Queue> out_;
};

inline std::pair<std::unique_ptr<InProcessTransport>, std::unique_ptr<InProcessTransport>> make_in_process_pair() {
  auto a = std::make_shared<InProcessTransport::Queue>();
  auto b = std::make_shared<InProcessTransport::Queue>();
  return {std::make_unique<InProcessTransport>(a, b), std::make_unique<InProcessTransport>(b, a)};
}

/// Length-prefixed frames over a connected TCP socket.
class TcpTransport : public Transport {
 public:
  explicit TcpTransport(int fd) : fd_(fd) {
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  static std::unique_ptr<TcpTransport> connect(const std::string& host, std::uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd);
      throw std::invalid_argument("bad IPv4 address: " + host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(fd);
      throw std::runtime_error("connect() failed");
    }
    return std::make_unique<TcpTransport>(fd);
  }

  void send(const Bytes& payload) override {
    const Bytes f = frame(payload);
    std::size_t off = 0;
    while (off < f.size()) {
      const ssize_t n = ::send(fd_, f.data() + off, f.size() - off, MSG_NOSIGNAL);
      if (n <= 0) throw std::runtime_error("tcp send failed");
      off += static_cast<std::size_t>(n);
    }
  }

  bool closed() const override { return closed_; }

  std::optional<Bytes> receive(std::chrono::milliseconds timeout) override {
    const auto until = std::chrono::steady_clock::now() + timeout;
    std::uint8_t hdr[4];
    if (!read_exact(hdr, 4, until)) return std::nullopt;
    const std::uint32_t n = static_cast<std::uint32_t>(hdr[0]) | (static_cast<std::uint32_t>(hdr[1]) << 8) |
                            (static_cast<std::uint32_t>(hdr[2]) << 16) | (static_cast<std::uint32_t>(hdr[3]) << 24);
    if (n > kMaxFrameBytes) throw ProtocolError(ProtocolErrorKind::Malformed, "frame too large");
    Bytes payload(n);
    if (n > 0 && !read_exact(payload.data(), n, until)) return std::nullopt;
    return payload;
  }

 private:
  bool read_exact(std::uint8_t* dst, std::size_t len, std::chrono::steady_clock::time_point until) {
    std::size_t got = 0;
    while (got < len) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(until - std::chrono::steady_clock::now());
      pollfd p{fd_, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(std::max<std::int64_t>(0, left.count())));
      if (r <= 0) return false;
      const ssize_t n = ::recv(fd_, dst + got, len - got, 0);
      if (n <= 0) {
        closed_ = true;
        return false;
      }
      got += static_cast<std::size_t>(n);
    }
    return true;
  }

  int fd_;
  bool closed_{false};
};

/// Listening socket on 127.0.0.1; port 0 picks an ephemeral port.
class TcpListener {
 public:
  explicit TcpListener(std::uint16_t port = 0) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw std::runtime_error("socket() failed");
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 1) != 0) {
      ::close(fd_);
      throw std::runtime_error("bind/listen failed");
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }
  ~TcpListener() { ::close(fd_); }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }

  std::unique_ptr<TcpTransport> accept(std::chrono::milliseconds timeout) {
    pollfd p{fd_, POLLIN, 0};
    if (::poll(&p, 1, static_cast<int>(timeout.count())) <= 0) return nullptr;
    const int c = ::accept(fd_, nullptr, nullptr);
    if (c < 0) return nullptr;
    return std::make_unique<TcpTransport>(c);
  }

 private:
  int fd_{-1};
  std::uint16_t port_{0};
};

namespace detail {

inline double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

template <typename Endpoint>
void pump(Transport& t, Endpoint& ep) {
  while (!ep.exchange().terminal()) {
    const double wait = std::max(0.0, ep.deadline() - now_s());
    const auto ms = std::chrono::milliseconds(static_cast<std::int64_t>(std::ceil(wait * 1000.0)));
    std::vector<Bytes> out;
    if (auto in = t.receive(ms)) {
      out = ep.on_payload(*in, now_s());
    } else {
      // A closed peer can never answer; expire the current deadline at once.
      out = ep.poll(t.closed() ? std::max(now_s(), ep.deadline()) : now_s());
    }
    for (const auto& b : out) t.send(b);
  }
}

}  // namespace detail

/// Blocking client loop over a live transport.
inline ActionExchange run_action_client(Transport& t, const UnifiedGraphMessage& msg, double timeout_s = 5.0) {
  ActionClient client(msg, timeout_s);
  for (const auto& b : client.start(detail::now_s())) t.send(b);
  detail::pump(t, client);
  return client.exchange();
}

/// Blocking server loop over a live transport.
inline ActionExchange run_action_server(Transport& t, ActionServer::Handler handler, double timeout_s = 5.0,
                                        double close_timeout_s = 20.0,
                                        std::optional<UnifiedGraphMessage>* received = nullptr) {
  ActionServer server(std::move(handler), timeout_s, close_timeout_s);
  server.start(detail::now_s());
  detail::pump(t, server);
  if (received != nullptr) *received = server.message();
  return server.exchange();
}

}  // namespace travex
