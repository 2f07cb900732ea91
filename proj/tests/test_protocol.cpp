#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <random>
#include <thread>

#include "support/exchange.hpp"
#include "support/golden.hpp"
#include "travex/protocol.hpp"

using namespace travex;
using travex::testing::golden_message;
using travex::testing::random_message;
using travex::testing::simulate_exchange;

namespace {

Bytes read_fixture(const std::string& name) {
  std::ifstream in(std::string(TRAVEX_FIXTURE_DIR) + "/" + name, std::ios::binary);
  EXPECT_TRUE(in) << name;
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ProtocolErrorKind decode_error(std::span<const std::uint8_t> bytes) {
  try {
    decode(bytes);
  } catch (const ProtocolError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode accepted bad bytes";
  return ProtocolErrorKind::Malformed;
}

}  // namespace

TEST(Codec, GoldenBytesMatchFixture) {
  const Bytes golden = read_fixture("golden_request.frame");
  ASSERT_EQ(golden.size(), 398u);
  EXPECT_EQ(encode(golden_message()), golden);
  EXPECT_EQ(decode(golden), golden_message());
}

TEST(Codec, TruncatedFixtureIsMalformed) {
  EXPECT_EQ(decode_error(read_fixture("truncated_request.frame")), ProtocolErrorKind::Malformed);
}

TEST(Codec, RandomRoundTripsAreCanonical) {
  std::mt19937_64 rng(109);
  for (int n = 0; n < 300; ++n) {
    const auto m = random_message(rng);
    const Bytes a = encode(m);
    EXPECT_EQ(a, encode(m));
    const auto back = decode(a);
    EXPECT_EQ(back, m);
    EXPECT_EQ(encode(back), a);
  }
}

TEST(Codec, CorruptionKinds) {
  Bytes b = encode(golden_message());
  Bytes bad_len = b;
  bad_len[0] ^= 0x01;
  EXPECT_EQ(decode_error(bad_len), ProtocolErrorKind::Malformed);
  Bytes version = b;
  version[4] = 2;
  EXPECT_EQ(decode_error(version), ProtocolErrorKind::UnsupportedVersion);
  Bytes kind = b;
  kind[6] = 9;
  EXPECT_EQ(decode_error(kind), ProtocolErrorKind::Malformed);
  Bytes trailing = b;
  trailing.push_back(0);
  trailing[0] = static_cast<std::uint8_t>(trailing[0] + 1);
  EXPECT_EQ(decode_error(trailing), ProtocolErrorKind::Malformed);
  EXPECT_EQ(decode_error(Bytes{1, 0}), ProtocolErrorKind::Malformed);
  // Every proper prefix fails cleanly.
  for (std::size_t n = 0; n < b.size(); ++n) {
    Bytes cut(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(n));
    EXPECT_THROW(decode(cut), ProtocolError);
  }
}

TEST(Codec, InvalidMessages) {
  auto m = golden_message();
  m.candidate_path.ids = {0, 1, 9};
  EXPECT_EQ(decode_error(frame(encode_payload({MessageKind::Request, m, 0, {}}))), ProtocolErrorKind::InvalidMessage);
  m = golden_message();
  m.static_transform.rotation[0][0] = 2.0;
  EXPECT_EQ(decode_error(frame(encode_payload({MessageKind::Request, m, 0, {}}))), ProtocolErrorKind::InvalidMessage);
  m = golden_message();
  m.candidate_path.ids = {0, 1};
  m.candidate_path.length = 1.0;
  EXPECT_EQ(decode_error(frame(encode_payload({MessageKind::Request, m, 0, {}}))), ProtocolErrorKind::InvalidMessage);
  m = golden_message();
  m.frontier_ids = {3, 2};
  EXPECT_EQ(decode_error(frame(encode_payload({MessageKind::Request, m, 0, {}}))), ProtocolErrorKind::InvalidMessage);
  m = golden_message();
  m.candidate_path.length += 0.5;
  EXPECT_EQ(decode_error(frame(encode_payload({MessageKind::Request, m, 0, {}}))), ProtocolErrorKind::InvalidMessage);
}

TEST(UnifiedGraph, AddsOpenRegistryFrontiersAndReindexes) {
  ExplorationGraph cand(GraphLevel::Candidate);
  for (NodeId id : {10u, 12u, 15u, 17u, 20u})
    cand.add_node({id, RobotState(id * 0.5, 0, 0.3, 0), 0.0, id == 20u, std::nullopt});
  cand.add_edge(10, 12);
  cand.add_edge(12, 15);
  cand.add_edge(15, 20);
  cand.add_edge(12, 17);
  Path target;
  target.ids = {10, 12, 15, 20};
  target.length = path_length(cand, target.ids);
  FrontierRegistry reg;
  reg.add(RobotState(30, 30, 0.3, 0), 1.0);
  reg.add(RobotState(40, 30, 0.3, 0), 1.0, FrontierStatus::Consumed);
  const auto m = build_unified_graph(cand, target, reg, RigidTransform::identity(), "x");
  EXPECT_EQ(m.graph.node_count(), 6u);
  EXPECT_EQ(reg.entries()[0].status, FrontierStatus::Shared);
  EXPECT_EQ(reg.entries()[1].status, FrontierStatus::Consumed);
  EXPECT_EQ(m.candidate_path.ids, (std::vector<NodeId>{0, 1, 2, 4}));
  EXPECT_EQ(m.frontier_ids, (std::vector<NodeId>{4, 5}));
  FrontierRegistry empty;
  EXPECT_EQ(build_unified_graph(cand, target, empty, RigidTransform::identity()).graph.node_count(), 5u);
  Path bad;
  bad.ids = {10, 12};
  EXPECT_THROW(build_unified_graph(cand, bad, empty, RigidTransform::identity()), std::invalid_argument);
}

TEST(UnifiedGraph, ReindexingIsAnIsomorphism) {
  std::mt19937_64 rng(113);
  for (int n = 0; n < 100; ++n) {
    auto base = random_message(rng).graph;
    // Spread the ids out, keeping order.
    ExplorationGraph cand(GraphLevel::Candidate);
    for (const auto& [id, node] : base.nodes()) {
      GraphNode c = node;
      c.id = id * 3 + 7;
      cand.add_node(c);
    }
    for (const auto& e : base.edges()) cand.add_edge(e.a * 3 + 7, e.b * 3 + 7);
    const NodeId term = base.frontier_ids().front() * 3 + 7;
    const auto sp = [&] {
      ExplorationGraph g = cand;
      for (auto& [id, _] : g.nodes()) g.node(id).is_frontier = id == term;
      return shortest_paths(g, 7);
    }();
    if (sp.count(term) == 0) continue;
    FrontierRegistry reg;
    const auto m = build_unified_graph(cand, sp.at(term), reg, RigidTransform::identity());
    ASSERT_EQ(m.graph.node_count(), cand.node_count());
    ASSERT_EQ(m.graph.edge_count(), cand.edge_count());
    for (const auto& e : cand.edges()) EXPECT_TRUE(m.graph.has_edge((e.a - 7) / 3, (e.b - 7) / 3));
    for (const auto& [id, node] : cand.nodes()) EXPECT_EQ(m.graph.node((id - 7) / 3).pose, node.pose);
  }
}

TEST(StaticTransform, Examples) {
  const RobotState p(1.0, 2.0, 3.0, 0.5);
  EXPECT_EQ(apply_static_transform(RigidTransform::identity(), p), p);
  RigidTransform t;
  t.translation = {1, 0, 0};
  EXPECT_DOUBLE_EQ(apply_static_transform(t, p).x, 2.0);
  const auto tf = RigidTransform::from_ypr(0.7, 0.0, 0.0, {3, -1, 2});
  const auto back = apply_static_transform(tf.inverse(), apply_static_transform(tf, p));
  EXPECT_NEAR(back.x, p.x, 1e-9);
  EXPECT_NEAR(back.y, p.y, 1e-9);
  EXPECT_NEAR(back.z, p.z, 1e-9);
  EXPECT_NEAR(back.psi, p.psi, 1e-9);
}

TEST(Exchange, IllegalTransitionsThrow) {
  ActionExchange ex;
  EXPECT_THROW(ex.advance(ExchangeState::Accepted, 0), std::logic_error);
  ex.advance(ExchangeState::RequestSent, 0);
  ex.advance(ExchangeState::Rejected, 1);
  EXPECT_THROW(ex.advance(ExchangeState::Rejected, 2), std::logic_error);
}

TEST(Exchange, HappyPathAndDeclineInVirtualTime) {
  std::mt19937_64 rng(127);
  const auto ok = simulate_exchange(golden_message(), rng, 5.0, 0.1);
  EXPECT_EQ(ok.client, ExchangeState::Done);
  EXPECT_EQ(ok.server, ExchangeState::Done);
  const auto no = simulate_exchange(golden_message(), rng, 5.0, 0.1, true);
  EXPECT_EQ(no.client, ExchangeState::Rejected);
  EXPECT_EQ(no.server, ExchangeState::Rejected);
}

TEST(Exchange, SilentServerTimesOutClient) {
  ActionClient c(golden_message(), 5.0);
  c.start(0.0);
  EXPECT_TRUE(c.poll(4.9).empty());
  const auto out = c.poll(5.0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(c.exchange().state(), ExchangeState::Rejected);
  const auto env = decode_payload(out.front());
  EXPECT_EQ(env.kind, MessageKind::Reject);
  EXPECT_EQ(env.code, static_cast<std::uint8_t>(RejectCode::Timeout));
}

TEST(Exchange, RandomInterleavingsAgreeOnTerminalState) {
  std::mt19937_64 rng(131);
  int done = 0, rejected = 0;
  for (int n = 0; n < 200; ++n) {
    // Delays up to 1.5x the timeout so some transitions expire.
    const double max_delay = (n % 4 == 0) ? 7.5 : 2.0;
    const auto r = simulate_exchange(random_message(rng), rng, 5.0, max_delay, n % 17 == 0);
    EXPECT_EQ(r.client, r.server) << n;
    EXPECT_TRUE(r.client == ExchangeState::Done || r.client == ExchangeState::Rejected);
    (r.client == ExchangeState::Done ? done : rejected)++;
  }
  EXPECT_GT(done, 100);
  EXPECT_GT(rejected, 5);
}

TEST(Transport, InProcessThreads) {
  auto [a, b] = make_in_process_pair();
  std::optional<UnifiedGraphMessage> got;
  ActionExchange server_ex;
  std::thread srv([&, t = b.get()] {
    server_ex = run_action_server(*t, [](const UnifiedGraphMessage&) { return std::optional<std::uint8_t>(1); }, 2.0,
                                  8.0, &got);
  });
  const auto client_ex = run_action_client(*a, golden_message(), 2.0);
  srv.join();
  EXPECT_EQ(client_ex.state(), ExchangeState::Done);
  EXPECT_EQ(server_ex.state(), ExchangeState::Done);
  ASSERT_TRUE(got);
  EXPECT_EQ(*got, golden_message());
}

TEST(Transport, TcpLoopbackHappyAndInvalid) {
  for (bool valid : {true, false}) {
    TcpListener listener(0);
    ActionExchange server_ex;
    std::thread srv([&] {
      auto conn = listener.accept(std::chrono::milliseconds(5000));
      ASSERT_NE(conn, nullptr);
      server_ex = run_action_server(*conn, nullptr, 2.0, 8.0);
    });
    auto client = TcpTransport::connect("127.0.0.1", listener.port());
    auto msg = golden_message();
    if (!valid) msg.candidate_path.ids = {0, 1, 7};
    const auto client_ex = run_action_client(*client, msg, 2.0);
    srv.join();
    const auto want = valid ? ExchangeState::Done : ExchangeState::Rejected;
    EXPECT_EQ(client_ex.state(), want);
    EXPECT_EQ(server_ex.state(), want);
  }
}
