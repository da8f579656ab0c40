#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace aseer;

namespace {

struct Net {
  ParameterSet ps;
  Rng rng;
  TimeEncoding te;
  Agdn agdn;
  Net(std::size_t sensors, int width, std::uint64_t seed = 1, double scale = 1.0)
      : rng(seed), te(ps, sensors, TimeEncodingConfig{4, scale, false}, rng), agdn(ps, te.width(), width, rng) {}
};

TrafficMessage msg(std::size_t src, Seconds t, double a, double b, double dist = 0.3, bool reach = true) {
  return TrafficMessage{src, 0, Eigen::RowVector2d(a, b), t, EdgeFeature{dist, reach}};
}

double max_abs(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Agdn, SingleMessageGetsFullWeight) {
  Net net(2, 6);
  Tape t;
  std::vector<TrafficMessage> buf{msg(1, 5, 0.2, -0.4)};
  Var rows = net.agdn.message_rows(t, net.te, 0, 9, buf);
  Var alpha = net.agdn.attention_weights(t, t.constant(Matrix::Ones(1, 2)), rows);
  ASSERT_EQ(alpha.rows(), 1);
  EXPECT_DOUBLE_EQ(alpha.value()(0, 0), 1.0);
}

TEST(Agdn, WeightsSumToOne) {
  Net net(2, 6);
  std::mt19937_64 rng(4);
  oracle::randomize(net.ps, rng);
  Tape t;
  std::vector<TrafficMessage> buf{msg(1, 1, 0.2, -0.4), msg(1, 3, 1.0, 0.1), msg(1, 7, -2.0, 0.5, 0.9, false)};
  Var rows = net.agdn.message_rows(t, net.te, 0, 9, buf);
  Var alpha = net.agdn.attention_weights(t, t.constant(Matrix::Ones(1, 2)), rows);
  EXPECT_NEAR(alpha.value().sum(), 1.0, 1e-12);
  EXPECT_GE(alpha.value().minCoeff(), 0.0);
}

TEST(Agdn, MessageRowLayout) {
  Net net(2, 6);
  Tape t;
  std::vector<TrafficMessage> buf{msg(1, 5, 0.2, -0.4, 0.7, false)};
  Var rows = net.agdn.message_rows(t, net.te, 0, 65, buf);
  ASSERT_EQ(rows.cols(), net.agdn.message_width());
  EXPECT_EQ(rows.cols(), 2 + 5 + 2);
  EXPECT_EQ(rows.value()(0, 0), 0.2);
  EXPECT_EQ(rows.value()(0, 1), -0.4);
  EXPECT_EQ(rows.value()(0, 2), 60.0);  // phi element 0 is now - emit_time
  EXPECT_EQ(rows.value()(0, 7), 0.7);
  EXPECT_EQ(rows.value()(0, 8), 0.0);
}

TEST(Agdn, EmptyBufferGivesZeros) {
  Net net(2, 6);
  Tape t;
  Var h = net.agdn.convolve(t, net.te, 0, t.constant(Matrix::Ones(1, 2)), 10, {});
  EXPECT_EQ(h.value(), Matrix::Zero(1, 6));
}

TEST(Agdn, AggregateRejectsMismatchedWeights) {
  Net net(2, 6);
  Tape t;
  Var rows = t.constant(Matrix::Ones(3, net.agdn.message_width()));
  EXPECT_THROW(net.agdn.aggregate(t, t.constant(Matrix::Ones(2, 1)), rows), std::invalid_argument);
}

TEST(Agdn, MessageOrderDoesNotMatter) {
  Net net(3, 5);
  std::mt19937_64 rng(8);
  oracle::randomize(net.ps, rng);
  std::vector<TrafficMessage> buf{msg(1, 1, 0.2, -0.4), msg(2, 3, 1.0, 0.1), msg(1, 7, -2.0, 0.5, 0.9, false)};
  std::vector<TrafficMessage> rev(buf.rbegin(), buf.rend());
  Tape t;
  Var q = t.constant(Matrix::Ones(1, 2));
  Var a = net.agdn.convolve(t, net.te, 0, q, 9, buf);
  Var b = net.agdn.convolve(t, net.te, 0, q, 9, rev);
  EXPECT_LT(max_abs(a.value(), b.value()), 1e-12);

  MessageBuffer x, y;
  for (const auto& m : buf) x.store(m);
  for (const auto& m : rev) y.store(m);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(x.messages()[k].emit_time, y.messages()[k].emit_time);
}

TEST(Agdn, DuplicatingEveryMessageLeavesOutputUnchanged) {
  Net net(3, 5);
  std::mt19937_64 rng(9);
  oracle::randomize(net.ps, rng);
  std::vector<TrafficMessage> buf{msg(1, 1, 0.2, -0.4), msg(2, 3, 1.0, 0.1)};
  std::vector<TrafficMessage> twice = buf;
  twice.insert(twice.end(), buf.begin(), buf.end());
  Tape t;
  Var q = t.constant(Matrix::Ones(1, 2));
  EXPECT_LT(max_abs(net.agdn.convolve(t, net.te, 0, q, 9, buf).value(),
                    net.agdn.convolve(t, net.te, 0, q, 9, twice).value()),
            1e-12);
}

TEST(Agdn, ReplayMatchesRescanOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 150; ++trial) {
    auto c = oracle::random_graph_case(rng, 5, 6);
    const double scale = trial % 2 == 0 ? 1.0 : 1.0 / 3600.0;
    ParameterSet ps;
    Rng init(trial);
    TimeEncoding te(ps, c.timelines.size(), TimeEncodingConfig{4, scale, trial % 5 == 0}, init);
    Agdn agdn(ps, te.width(), 4, init);
    oracle::randomize(ps, rng);
    Tape t;
    auto out = agdn.process_timeline(t, te, c.graph, c.timelines);
    auto ref = oracle::agdn_rescan(ps, c.graph, c.timelines, 4, scale, trial % 5 == 0);
    for (std::size_t i = 0; i < c.timelines.size(); ++i) {
      if (c.timelines[i].empty()) {
        EXPECT_FALSE(out.spatial[i].valid());
        EXPECT_FALSE(out.tail[i].valid());
        continue;
      }
      ASSERT_EQ(out.spatial[i].rows(), static_cast<Eigen::Index>(c.timelines[i].size()));
      EXPECT_LT(max_abs(out.spatial[i].value(), ref.spatial[i]), 1e-10) << trial << " sensor " << i;
      EXPECT_LT(max_abs(out.tail[i].value(), ref.tail[i]), 1e-10) << trial << " sensor " << i;
    }
  }
}

TEST(Agdn, EveryMessageStoredOnceAndConsumedAtMostOnce) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = oracle::random_graph_case(rng, 6, 8);
    Net net(c.timelines.size(), 3, static_cast<std::uint64_t>(trial));
    Tape t;
    auto out = net.agdn.process_timeline(t, net.te, c.graph, c.timelines);
    std::size_t expected = 0, convs = 0, dropped = 0;
    for (const auto& e : c.graph.edges) {
      expected += c.timelines[e.src].size();
      if (c.timelines[e.dst].empty()) dropped += c.timelines[e.src].size();
    }
    for (const auto& tl : c.timelines) convs += tl.empty() ? 0 : tl.size() + 1;
    EXPECT_EQ(out.stats.stored, expected);
    EXPECT_EQ(out.stats.consumed + out.stats.dropped, out.stats.stored);
    EXPECT_EQ(out.stats.dropped, dropped);
    EXPECT_EQ(out.stats.convolutions, convs);
  }
}

TEST(Agdn, SensorWithoutInEdgesSeesOnlyZeros) {
  DiffusionGraph g;
  g.nodes = {{"a", 0, 0}, {"b", 0, 0}};
  g.edges = {{0, 1, {0.5, true}}};
  g.outgoing = {{0}, {}};
  std::vector<SensorTimeline> tl(2);
  tl[0].times = {10, 20};
  tl[0].values = {Eigen::RowVector2d(1, 2), Eigen::RowVector2d(3, 4)};
  tl[1].times = {15};
  tl[1].values = {Eigen::RowVector2d(0.5, 0.5)};
  Net net(2, 4);
  std::mt19937_64 rng(2);
  oracle::randomize(net.ps, rng);
  Tape t;
  auto out = net.agdn.process_timeline(t, net.te, g, tl);
  EXPECT_EQ(out.spatial[0].value(), Matrix::Zero(2, 4));
  EXPECT_EQ(out.tail[0].value(), Matrix::Zero(1, 4));
  // b's convolution at 15 sees the message from 10; the one from 20 reaches its tail
  EXPECT_NE(out.spatial[1].value(), Matrix::Zero(1, 4));
  EXPECT_NE(out.tail[1].value(), Matrix::Zero(1, 4));
  EXPECT_EQ(out.stats.empty_convolutions, 3u);
}

TEST(Agdn, SharedTimestampStoresBeforeConvolving) {
  DiffusionGraph g;
  g.nodes = {{"a", 0, 0}, {"b", 0, 0}};
  g.edges = {{1, 0, {0.5, true}}};
  g.outgoing = {{}, {0}};
  std::vector<SensorTimeline> tl(2);
  tl[0].times = {10};
  tl[0].values = {Eigen::RowVector2d(1, 2)};
  tl[1].times = {10};
  tl[1].values = {Eigen::RowVector2d(3, 4)};
  Net net(2, 4);
  Tape t;
  auto out = net.agdn.process_timeline(t, net.te, g, tl);
  EXPECT_EQ(out.stats.empty_convolutions, 3u);  // a's tail, b's row and b's tail
  EXPECT_EQ(out.stats.consumed, 1u);
}

TEST(Agdn, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(31);
  auto c = oracle::random_graph_case(rng, 3, 3, false);
  Net net(c.timelines.size(), 3, 5, 1.0 / 60.0);
  oracle::randomize(net.ps, rng, 0.3);
  std::vector<Parameter*> params;
  for (auto& p : net.ps) params.push_back(&p);
  const double err = oracle::max_grad_error(params, [&](Tape& t) {
    auto out = net.agdn.process_timeline(t, net.te, c.graph, c.timelines);
    std::vector<Var> parts;
    for (std::size_t i = 0; i < out.spatial.size(); ++i) {
      parts.push_back(out.spatial[i]);
      parts.push_back(out.tail[i]);
    }
    return oracle::project(t, ad::vcat(parts));
  });
  EXPECT_LT(err, 1e-5);
}
