#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "emnet/model.hpp"

using namespace emn;

namespace {

// Dense reference: every output cell sums the inputs whose (wrapped, for
// periodic) offset lies in the 3x3 window, one full pass per output cell.
TrailField dense_diffuse(const TrailField& in, double damp, Boundary b) {
  const int w = in.width(), h = in.height();
  TrailField out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
          int dx = sx - x, dy = sy - y;
          if (b == Boundary::periodic) {
            if (dx > w / 2) dx -= w;
            if (dx < -(w - 1) / 2) dx += w;
            if (dy > h / 2) dy -= h;
            if (dy < -(h - 1) / 2) dy += h;
          }
          if (std::abs(dx) <= 1 && std::abs(dy) <= 1) s += in(sx, sy);
        }
      }
      out(x, y) = (1.0 - damp) * s / 9.0;
    }
  }
  return out;
}

TrailField random_field(std::mt19937_64& g, int w, int h) {
  std::uniform_real_distribution<double> u(0.0, 50.0);
  TrailField f(w, h, 0.0);
  for (auto& v : f.values()) v = u(g);
  return f;
}

double total(const TrailField& f) {
  long double s = 0;
  for (double v : f.values()) s += v;
  return static_cast<double>(s);
}

SimulationState empty_state(SimulationParams p) {
  SimulationState s = init_population(p, InitMode::uniform_random, {}, Rng(1));
  for (std::size_t i = 0; i < s.agents.size(); ++i) remove_agent(s, i);
  compact_agents(s);
  return s;
}

}  // namespace

TEST_CASE("rng derived draws stay in range and replay") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform01());
    const auto k = a.below(7);
    CHECK(k < 7);
    CHECK(k == b.below(7));
  }
  Rng c(9);
  c.next();
  Rng d;
  d.deserialize(c.serialize());
  CHECK(c == d);
  CHECK(c.next() == d.next());
}

TEST_CASE("init_population uniform fills 5% of a 200x200 lattice") {
  const SimulationParams p;
  const SimulationState s = init_population(p, InitMode::uniform_random, {}, Rng(3));
  CHECK(s.agents.size() == 2000);
  std::set<std::pair<int, int>> cells;
  for (const auto& a : s.agents) {
    cells.insert({a.cell_x(), a.cell_y()});
    CHECK(a.heading_deg >= 0.0);
    CHECK(a.heading_deg < 360.0);
  }
  CHECK(cells.size() == 2000);
  CHECK(s.occupancy_consistent());
  for (double v : s.trail.values()) CHECK(v == 0.0);
}

TEST_CASE("init_population rejects impossible populations") {
  SimulationParams p;
  p.population_pct = 0;
  CHECK_THROWS_AS(init_population(p, InitMode::uniform_random, {}, Rng(1)), ConfigError);
  p.population_pct = 10;
  CHECK_THROWS_AS(init_population(p, InitMode::full_coverage, {}, Rng(1)), ConfigError);
}

TEST_CASE("node_restricted places at most the disc and queues the rest") {
  // Rasterised disc count by direct enumeration of the lattice.
  int disc = 0;
  for (int y = 0; y < 200; ++y) {
    for (int x = 0; x < 200; ++x) disc += (x - 100) * (x - 100) + (y - 100) * (y - 100) <= 4;
  }
  CHECK(disc == 13);
  NodeSource n;
  n.cx = n.cy = 100;
  n.radius = 2;
  const SimulationState s = init_population(SimulationParams{}, InitMode::node_restricted, {n}, Rng(5));
  CHECK(s.agents.size() == static_cast<std::size_t>(disc));
  CHECK(s.spawn_queue == 2000u - disc);
  for (const auto& a : s.agents) {
    const int dx = a.cell_x() - 100, dy = a.cell_y() - 100;
    CHECK(dx * dx + dy * dy <= 4);
  }
}

TEST_CASE("rule table") {
  Rng rng(1);
  const double ra = 45;
  SUBCASE("forward maximum keeps heading") {
    CHECK(decide_heading(30, {0, 5, 0, false}, ra, rng) == 30);
  }
  SUBCASE("right turn subtracts RA") {
    CHECK(decide_heading(90, {0, 0, 7, false}, ra, rng) == 45);
  }
  SUBCASE("left turn adds RA") {
    CHECK(decide_heading(90, {7, 0, 0, false}, ra, rng) == 135);
  }
  SUBCASE("all equal keeps heading") {
    CHECK(decide_heading(10, {3, 3, 3, false}, ra, rng) == 10);
  }
  SUBCASE("both laterals higher uses one coin draw") {
    Rng probe = rng;
    const bool left = probe.coin();
    const double h = decide_heading(100, {5, 0, 5, false}, ra, rng);
    CHECK(h == (left ? 145 : 55));
    CHECK(rng == probe);
  }
  SUBCASE("no draw outside the symmetric case") {
    Rng before = rng;
    decide_heading(0, {1, 2, 3, false}, ra, rng);
    decide_heading(0, {3, 2, 1, false}, ra, rng);
    CHECK(rng == before);
  }
}

TEST_CASE("rule table ignores a constant offset on all readings") {
  std::mt19937_64 g(11);
  std::uniform_int_distribution<int> v(0, 4);
  std::uniform_real_distribution<double> k(-100, 100), hd(0, 360);
  for (int i = 0; i < 1000; ++i) {
    const SensorReadings r{double(v(g)), double(v(g)), double(v(g)), false};
    const double off = std::round(k(g));
    const SensorReadings r2{r.left + off, r.front + off, r.right + off, false};
    const double h = hd(g);
    Rng a(i), b(i);
    CHECK(decide_heading(h, r, 45, a) == decide_heading(h, r2, 45, b));
    CHECK(a == b);
  }
}

TEST_CASE("sensors sample the cells at offset SO") {
  SimulationParams p;
  TrailField t(200, 200, 0.0);
  const Agent a{100.5, 100.5, 0.0, true};
  const double sa = 15.0 * M_PI / 180.0;
  const int lx = int(std::floor(100.5 + 15 * std::cos(sa))), ly = int(std::floor(100.5 + 15 * std::sin(sa)));
  const int rx = int(std::floor(100.5 + 15 * std::cos(-sa))), ry = int(std::floor(100.5 + 15 * std::sin(-sa)));
  t(115, 100) = 5;
  t(lx, ly) = 2;
  t(rx, ry) = 3;
  const SensorReadings r = read_sensors(a, t, p);
  CHECK(r.front == 5);
  CHECK(r.left == 2);
  CHECK(r.right == 3);
  CHECK_FALSE(r.any_outside);

  p.sensor_width = 3;
  const SensorReadings r3 = read_sensors(a, t, p);
  CHECK(r3.front == doctest::Approx(5.0 / 9.0));
}

TEST_CASE("corner rule turns right when a sensor leaves a fixed lattice") {
  SimulationParams p;
  p.boundary = Boundary::fixed;
  p.corner_rule = true;
  const TrailField t(200, 200, 0.0);
  Rng rng(1);
  const Rng before = rng;
  const Agent a{1.5, 1.5, 225.0, true};
  CHECK(sense(a, t, p, rng) == 180.0);
  CHECK(rng == before);
}

TEST_CASE("attempt_move") {
  SimulationParams p;
  SimulationState s = empty_state(p);
  SUBCASE("free cell: move and deposit at the new cell") {
    REQUIRE(place_agent(s, 10.0, 10.0, 0.0));
    CHECK(attempt_move(s.agents[0], s));
    CHECK(s.agents[0].x == 11.0);
    CHECK(s.agents[0].y == 10.0);
    CHECK(s.trail(11, 10) == 5.0);
    CHECK(s.trail(10, 10) == 0.0);
    CHECK(s.occupancy(11, 10) == 1);
    CHECK(s.occupancy(10, 10) == 0);
  }
  SUBCASE("occupied target: stay, no deposit, one heading draw") {
    REQUIRE(place_agent(s, 10.0, 10.0, 0.0));
    REQUIRE(place_agent(s, 11.5, 10.5, 0.0));
    Rng probe = s.rng;
    const double expect = probe.heading();
    CHECK_FALSE(attempt_move(s.agents[0], s));
    CHECK(s.agents[0].x == 10.0);
    CHECK(s.agents[0].heading_deg == expect);
    CHECK(s.trail(11, 10) == 0.0);
  }
  SUBCASE("fixed boundary blocks leaving the lattice") {
    s.params.boundary = Boundary::fixed;
    REQUIRE(place_agent(s, 0.5, 5.0, 180.0));
    CHECK_FALSE(attempt_move(s.agents[0], s));
    CHECK(s.agents[0].x == 0.5);
  }
  SUBCASE("periodic boundary wraps") {
    REQUIRE(place_agent(s, 0.5, 5.0, 180.0));
    CHECK(attempt_move(s.agents[0], s));
    CHECK(s.agents[0].x == doctest::Approx(199.5));
    CHECK(s.trail(199, 5) == 5.0);
  }
}

TEST_CASE("diffusion matches the dense convolution oracle") {
  std::mt19937_64 g(2);
  for (Boundary b : {Boundary::periodic, Boundary::fixed}) {
    for (auto [w, h] : {std::pair{3, 3}, std::pair{7, 5}, std::pair{4, 9}, std::pair{12, 12}}) {
      const TrailField f = random_field(g, w, h);
      const TrailField got = diffuse(f, 0.1, b);
      const TrailField want = dense_diffuse(f, 0.1, b);
      for (std::size_t i = 0; i < f.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("diffusion examples") {
  TrailField z(10, 10, 0.0);
  const auto r1 = diffuse(z, 0.1, Boundary::periodic);
  for (double v : r1.values()) CHECK(v == 0.0);
  TrailField u(10, 10, 4.0);
  const auto r2 = diffuse(u, 0.1, Boundary::periodic);
  for (double v : r2.values()) CHECK(v == doctest::Approx(3.6));
  TrailField one(10, 10, 0.0);
  one(0, 0) = 9.0;
  const TrailField d = diffuse(one, 0.1, Boundary::periodic);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      const bool near = (x <= 1 || x == 9) && (y <= 1 || y == 9);
      CHECK(d(x, y) == doctest::Approx(near ? 0.9 : 0.0));
    }
  }
}

TEST_CASE("diffusion mass, linearity and positivity on 1000 random fields") {
  std::mt19937_64 g(77);
  std::uniform_int_distribution<int> dim(3, 40);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  double worst_mass = 0.0, worst_lin = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const int w = dim(g), h = dim(g);
    const TrailField f = random_field(g, w, h);
    const TrailField gg = random_field(g, w, h);
    const TrailField df = diffuse(f, 0.1, Boundary::periodic);
    worst_mass = std::max(worst_mass, std::abs(total(df) - 0.9 * total(f)) / (0.9 * total(f)));
    for (double v : df.values()) REQUIRE(v >= 0.0);

    const double a = coef(g), b = coef(g);
    TrailField mix(w, h, 0.0);
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * f[i] + b * gg[i];
    const TrailField dmix = diffuse(mix, 0.1, Boundary::periodic);
    const TrailField dg = diffuse(gg, 0.1, Boundary::periodic);
    for (std::size_t i = 0; i < mix.size(); ++i) {
      const double want = a * df[i] + b * dg[i];
      const double scale = std::abs(a) * df[i] + std::abs(b) * dg[i] + 1e-300;
      worst_lin = std::max(worst_lin, std::abs(dmix[i] - want) / scale);
    }
  }
  CHECK(worst_mass <= 1e-12);
  CHECK(worst_lin <= 1e-12);
}

TEST_CASE("node injection") {
  SimulationParams p;
  NodeSource n;
  n.cx = n.cy = 50;
  n.radius = 2;
  n.weight = 0.05;
  TrailField t(200, 200, 0.0);
  inject_nodes(t, std::span<const NodeSource>(&n, 1), p);
  int touched = 0;
  for (int y = 0; y < 200; ++y) {
    for (int x = 0; x < 200; ++x) {
      const bool in = (x - 50) * (x - 50) + (y - 50) * (y - 50) <= 4;
      CHECK(t(x, y) == (in ? 5.0 : 0.0));
      touched += in;
    }
  }
  CHECK(touched == 13);
  n.enabled = false;
  TrailField t2(200, 200, 0.0);
  inject_nodes(t2, std::span<const NodeSource>(&n, 1), p);
  for (double v : t2.values()) CHECK(v == 0.0);
  inject_nodes(t2, {}, p);
  for (double v : t2.values()) CHECK(v == 0.0);
}

TEST_CASE("system_step with no agents only injects and diffuses") {
  SimulationParams p;
  SimulationState s = empty_state(p);
  NodeSource n;
  n.cx = n.cy = 20;
  s.nodes = {n};
  TrailField expect(200, 200, 0.0);
  inject_nodes(expect, s.nodes, p);
  expect = diffuse(expect, p.damp, p.boundary);
  system_step(s);
  CHECK(s.step == 1);
  CHECK(s.trail == expect);
}

TEST_CASE("a lone agent on a blank field drifts straight") {
  SimulationParams p;
  SimulationState s = empty_state(p);
  REQUIRE(place_agent(s, 50.5, 50.5, 0.0));
  for (int i = 0; i < 50; ++i) system_step(s);
  CHECK(s.agents[0].heading_deg == 0.0);
  CHECK(s.agents[0].x == doctest::Approx(100.5));
  CHECK(s.agents[0].y == doctest::Approx(50.5));
}

TEST_CASE("a jammed population deposits nothing") {
  SimulationParams p;
  p.width = p.height = 20;
  p.population_pct = 100;
  SimulationState s = init_population(p, InitMode::full_coverage, {}, Rng(2));
  for (int i = 0; i < 5; ++i) system_step(s);
  for (double v : s.trail.values()) CHECK(v == 0.0);
  CHECK(s.occupancy_consistent());
}

TEST_CASE("occupancy stays exclusive and runs are bit-identical") {
  const SimulationParams p;
  SimulationState a = init_population(p, InitMode::uniform_random, {}, Rng(123));
  SimulationState b = init_population(p, InitMode::uniform_random, {}, Rng(123));
  for (int step = 1; step <= 1000; ++step) {
    system_step(a);
    system_step(b);
    if (step == 10 || step == 100 || step == 1000) {
      CHECK(trail_checksum(a.trail) == trail_checksum(b.trail));
      CHECK(a.occupancy_consistent());
      std::set<std::pair<int, int>> cells;
      for (const auto& ag : a.agents) cells.insert({ag.cell_x(), ag.cell_y()});
      CHECK(cells.size() == a.agents.size());
    }
  }
  SimulationState c = init_population(p, InitMode::uniform_random, {}, Rng(124));
  for (int i = 0; i < 10; ++i) system_step(c);
  CHECK(trail_checksum(c.trail) != trail_checksum(b.trail));
}

TEST_CASE("source_trail is the node share of the trail") {
  SimulationParams p;
  NodeSource n;
  n.cx = n.cy = 60;
  n.weight = 0.5;
  SimulationState s = init_population(p, InitMode::uniform_random, {n}, Rng(8));
  SimulationState bare = empty_state(p);
  bare.nodes = {n};
  for (int i = 0; i < 30; ++i) {
    system_step(s);
    system_step(bare);
  }
  for (std::size_t i = 0; i < s.trail.size(); ++i) {
    CHECK(s.source_trail[i] == doctest::Approx(bare.trail[i]).epsilon(1e-12));
  }
}
