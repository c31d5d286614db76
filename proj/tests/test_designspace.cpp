#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "surrotune/designspace.hpp"
#include "surrotune/error.hpp"

using namespace surrotune;

namespace {

bool throws_kind(ErrorKind kind, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() == kind;
  }
  return false;
}

double scaled_distance(ContinuousPoint p, Config c, const Lattice& lat) {
  const double db = (p.b - c.b) / lat.b_step, dh = (p.h - c.h) / lat.h_step;
  return db * db + dh * dh;
}

}  // namespace

TEST_CASE("derive_metrics reference values") {
  auto m = derive_metrics(178.63, 7.21);
  CHECK(std::abs(m.energy_mj - 1287.92) / 1287.92 <= 0.005);
  CHECK(std::abs(m.fps - 5.60) / 5.60 <= 0.01);
  CHECK(std::abs(m.fps_per_watt - 0.78) / 0.78 <= 0.01);

  m = derive_metrics(178.27, 7.19);
  CHECK(std::abs(m.energy_mj - 1281.76) / 1281.76 <= 0.005);

  m = derive_metrics(1000.0, 1.0);
  CHECK(m.energy_mj == 1000.0);
  CHECK(m.fps == 1.0);
  CHECK(m.fps_per_watt == 1.0);
}

TEST_CASE("derive_metrics invariants and errors") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const double lat = testing::uniform(rng, 1, 500), pw = testing::uniform(rng, 0.5, 20);
    const auto m = derive_metrics(lat, pw);
    CHECK(std::abs(m.energy_mj - lat * pw) <= 1e-12 * lat * pw);
    CHECK(m.fps == 1000.0 / lat);
    CHECK(m.fps_per_watt == m.fps / pw);
  }
  CHECK(throws_kind(ErrorKind::domain, [] { derive_metrics(0.0, 1.0); }));
  CHECK(throws_kind(ErrorKind::domain, [] { derive_metrics(10.0, -1.0); }));
  CHECK(throws_kind(ErrorKind::domain,
                    [] { derive_metrics(std::numeric_limits<double>::infinity(), 1.0); }));
  CHECK(throws_kind(ErrorKind::domain,
                    [] { derive_metrics(std::numeric_limits<double>::quiet_NaN(), 1.0); }));
}

TEST_CASE("make_config and make_sample validate") {
  CHECK(make_config(32, 8) == Config{32, 8});
  CHECK(throws_kind(ErrorKind::domain, [] { make_config(0, 8); }));
  CHECK(throws_kind(ErrorKind::domain, [] { make_config(8, -1); }));
  CHECK(make_sample({32, 8}, 47.5, 110.0, 5.7).latency_ms == 110.0);
  CHECK(throws_kind(ErrorKind::domain, [] { make_sample({32, 8}, 101.0, 110.0, 5.7); }));
  CHECK(throws_kind(ErrorKind::domain, [] { make_sample({32, 8}, -0.1, 110.0, 5.7); }));
  CHECK(throws_kind(ErrorKind::domain, [] { make_sample({32, 8}, 50.0, 0.0, 5.7); }));
  CHECK(throws_kind(ErrorKind::domain, [] { make_sample({32, 8}, 50.0, 1.0, 0.0); }));
}

TEST_CASE("lattice validation and enumeration") {
  Lattice lat;
  lat.validate();
  const auto pts = lat.points();
  CHECK(pts.size() == 7 * 8);
  for (Config c : pts) CHECK(lat.contains(c));
  CHECK(lat.contains({40, 4}));
  CHECK(lat.contains({32, 8}));
  CHECK_FALSE(lat.contains({36, 8}));
  CHECK_FALSE(lat.contains({72, 8}));

  Lattice bad;
  bad.b_step = 5;  // does not divide 48
  CHECK(throws_kind(ErrorKind::domain, [&] { bad.validate(); }));
  Lattice inverted;
  inverted.h_lo = 40;
  CHECK(throws_kind(ErrorKind::domain, [&] { inverted.validate(); }));
}

TEST_CASE("aggregate_repeats examples") {
  std::vector<Sample> two{{{32, 8}, 47.0, 100.0, 5.0}, {{32, 8}, 48.0, 120.0, 6.0}};
  auto agg = aggregate_repeats(two);
  REQUIRE(agg.size() == 1);
  CHECK(agg.samples()[0].latency_ms == 110.0);
  CHECK(agg.samples()[0].miou == 47.5);
  CHECK(agg.samples()[0].power_w == 5.5);

  std::vector<Sample> one{{{16, 4}, 43.0, 73.5, 5.2}};
  CHECK(aggregate_repeats(one).samples() == one);

  std::vector<Sample> three{{{48, 16}, 40.0, 1.0, 1.0},
                            {{48, 16}, 50.0, 1.0, 1.0},
                            {{48, 16}, 60.0, 1.0, 1.0}};
  CHECK(aggregate_repeats(three).samples()[0].miou == 50.0);

  CHECK(throws_kind(ErrorKind::domain, [] { aggregate_repeats(std::vector<Sample>{}); }));
}

TEST_CASE("aggregate_repeats is idempotent and sorted") {
  std::mt19937_64 rng(3);
  std::vector<Sample> raw;
  for (int r = 0; r < 5; ++r) {
    for (Config c : testing::grid16()) {
      raw.push_back({c, testing::uniform(rng, 40, 50), testing::uniform(rng, 70, 180),
                     testing::uniform(rng, 5, 7)});
    }
  }
  const auto once = aggregate_repeats(raw);
  CHECK(once.size() == 16);
  CHECK(once.distinct_configs());
  const auto twice = aggregate_repeats(once.samples());
  CHECK(twice == once);
  for (std::size_t i = 1; i < once.size(); ++i) {
    CHECK(once.samples()[i - 1].config < once.samples()[i].config);
  }
}

TEST_CASE("snap_to_lattice examples") {
  const Lattice lat;
  CHECK(snap_to_lattice({33.2, 7.1}, lat) == Config{32, 8});
  CHECK(snap_to_lattice({40.0, 4.0}, lat) == Config{40, 4});
  CHECK(snap_to_lattice({36.0, 6.0}, lat) == Config{32, 4});
}

TEST_CASE("snap_to_lattice tie-break by scorer") {
  const Lattice lat;
  // (36, 6) is equidistant from (32,4), (32,8), (40,4), (40,8).
  const ConfigScorer prefer_40_8 = [](Config c) { return c == Config{40, 8} ? -1.0 : 0.0; };
  CHECK(snap_to_lattice({36.0, 6.0}, lat, prefer_40_8) == Config{40, 8});
  // Equal scores fall back to lower b then lower h.
  const ConfigScorer flat = [](Config) { return 3.0; };
  CHECK(snap_to_lattice({36.0, 6.0}, lat, flat) == Config{32, 4});
  // The scorer only matters for exact ties.
  CHECK(snap_to_lattice({36.1, 5.9}, lat, prefer_40_8) == Config{40, 4});
  // A tie on one axis only is still decided by the scorer along that axis.
  CHECK(snap_to_lattice({36.1, 6.0}, lat, prefer_40_8) == Config{40, 8});
}

TEST_CASE("snap_to_lattice matches exhaustive search") {
  std::mt19937_64 rng(5);
  const Lattice lat;
  const auto pts = lat.points();
  for (int i = 0; i < 2000; ++i) {
    const ContinuousPoint p{testing::uniform(rng, 16, 64), testing::uniform(rng, 4, 32)};
    const Config got = snap_to_lattice(p, lat);
    Config best = pts.front();
    for (Config c : pts) {
      const double d = scaled_distance(p, c, lat), bd = scaled_distance(p, best, lat);
      if (d < bd || (d == bd && c < best)) best = c;
    }
    CHECK(got == best);
    CHECK(lat.contains(got));
    CHECK(snap_to_lattice(to_point(got), lat) == got);
  }
}

TEST_CASE("snap_to_lattice on a coarse non-default lattice") {
  const Lattice lat{16, 16, 64, 8, 8, 32};
  CHECK(snap_to_lattice({16.0, 4.0 + 4.0}, lat) == Config{16, 8});
  CHECK(snap_to_lattice({55.9, 19.9}, lat) == Config{48, 16});
  CHECK(snap_to_lattice({56.1, 20.1}, lat) == Config{64, 24});
}

TEST_CASE("snap_to_lattice rejects points outside the box") {
  const Lattice lat;
  CHECK(throws_kind(ErrorKind::domain, [&] { snap_to_lattice({15.9, 8.0}, lat); }));
  CHECK(throws_kind(ErrorKind::domain, [&] { snap_to_lattice({32.0, 32.5}, lat); }));
  CHECK(throws_kind(ErrorKind::domain,
                    [&] { snap_to_lattice({std::nan(""), 8.0}, lat); }));
  CHECK(snap_to_lattice({64.0, 32.0}, lat) == Config{64, 32});
}

TEST_CASE("box clamp and contains") {
  const Box box;
  CHECK(box.contains({16, 4}));
  CHECK_FALSE(box.contains({15.999, 4}));
  CHECK(box.contains({15.999, 4}, 0.01));
  const auto c = box.clamp({100, -3});
  CHECK(c.b == 64.0);
  CHECK(c.h == 4.0);
  Box flat{16, 16, 4, 32};
  CHECK(throws_kind(ErrorKind::domain, [&] { flat.validate(); }));
}
