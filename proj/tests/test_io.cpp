#include "aseer/io.hpp"
#include "aseer/synthgen.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace aseer;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("aseer_io_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Io, ThreeRoundTripsAreByteIdentical) {
  synth::ScenarioConfig c;
  c.grid_rows = 1;
  c.grid_cols = 2;
  c.lanes_per_intersection = 2;
  c.days = 1;
  auto g = synth::generate(c);
  io::DataBundle b{g.dataset, g.locations, g.reachability};
  auto d1 = scratch("rt1"), d2 = scratch("rt2"), d3 = scratch("rt3");
  io::export_bundle(b, d1);
  auto b1 = io::load_bundle(d1);
  EXPECT_TRUE(b1 == b);
  io::export_bundle(b1, d2);
  auto b2 = io::load_bundle(d2);
  io::export_bundle(b2, d3);
  for (const char* f : {"dataset.csv", "nodes.csv", "reach.csv"}) {
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
    EXPECT_EQ(slurp(d2 / f), slurp(d3 / f)) << f;
  }
}

TEST(Io, RealsSurviveExactly) {
  Dataset ds;
  ds.series.push_back(SensorSeries{"s", {{0, 7, 0.1 + 0.2, true}, {7, 3, 1.0 / 3.0, false}}});
  auto dir = scratch("reals");
  fs::create_directories(dir);
  io::write_dataset(ds, dir / "d.csv");
  EXPECT_EQ(io::read_dataset(dir / "d.csv"), ds);
}

TEST(Io, MalformedInputsRejected) {
  auto dir = scratch("bad");
  fs::create_directories(dir);
  auto write = [&](const std::string& body) {
    std::ofstream(dir / "d.csv") << body;
    return dir / "d.csv";
  };
  EXPECT_THROW(io::read_dataset(write("wrong,header\n")), DataError);
  EXPECT_THROW(io::read_dataset(write("sensor_id,begin,length,flow,observed\na,0,5\n")), DataError);
  EXPECT_THROW(io::read_dataset(write("sensor_id,begin,length,flow,observed\na,0,x,1,1\n")), DataError);
  EXPECT_THROW(io::read_dataset(write("sensor_id,begin,length,flow,observed\na,0,5,1,2\n")), DataError);
  // overlapping cycles fail validation on load
  EXPECT_THROW(io::read_dataset(write("sensor_id,begin,length,flow,observed\na,0,5,1,1\na,4,5,1,1\n")),
               DataError);
  EXPECT_THROW(io::read_dataset(dir / "missing.csv"), DataError);
  EXPECT_THROW(io::load_bundle(dir / "nope"), DataError);
}

TEST(Io, NormStatsJson) {
  NormStats s{61.5, 12.25, 8.0, 3.5, 0.1, 0.02};
  auto back = io::norm_from_json(io::norm_to_json(s));
  EXPECT_EQ(back.p_mean, s.p_mean);
  EXPECT_EQ(back.p_std, s.p_std);
  EXPECT_EQ(back.f_mean, s.f_mean);
  EXPECT_EQ(back.f_std, s.f_std);
  EXPECT_EQ(back.u_mean, s.u_mean);
  EXPECT_EQ(back.u_std, s.u_std);
}
