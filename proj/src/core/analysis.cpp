#include "emnet/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace emn {

namespace {

constexpr std::array<std::array<int, 2>, 8> kNeighbours8 = {
    {{1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}}};

inline int at(const BinaryMask& m, int x, int y) {
  return m.contains(x, y) && m(x, y) ? 1 : 0;
}

int neighbour_count(const BinaryMask& m, int x, int y) {
  int n = 0;
  for (auto [dx, dy] : kNeighbours8) n += at(m, x + dx, y + dy);
  return n;
}

}  // namespace

BinaryMask threshold_mask(const TrailField& trail, double theta_rel) {
  const auto values = trail.values();
  const double peak = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  return threshold_mask(trail, theta_rel, peak);
}

BinaryMask threshold_mask(const TrailField& trail, double theta_rel, double peak) {
  if (!(theta_rel > 0.0 && theta_rel < 1.0)) {
    throw std::invalid_argument("threshold must be in (0, 1)");
  }
  BinaryMask mask(trail.width(), trail.height(), 0);
  if (!(peak > 0.0)) return mask;
  const auto values = trail.values();
  const double cut = theta_rel * peak;
  for (std::size_t i = 0; i < values.size(); ++i) mask[i] = values[i] >= cut ? 1 : 0;
  return mask;
}

double network_peak(const TrailField& trail, const TrailField& source_trail) {
  double peak = 0.0;
  double overall = 0.0;
  const bool split = source_trail.size() == trail.size();
  for (std::size_t i = 0; i < trail.size(); ++i) {
    overall = std::max(overall, trail[i]);
    if (split) peak = std::max(peak, trail[i] - source_trail[i]);
  }
  return peak > 0.0 ? peak : overall;
}

Grid<int> label_components(const BinaryMask& mask, int* count) {
  Grid<int> labels(mask.width(), mask.height(), 0);
  int next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y) || labels(x, y)) continue;
      ++next;
      labels(x, y) = next;
      stack.emplace_back(x, y);
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        for (auto [dx, dy] : kNeighbours8) {
          const int nx = cx + dx;
          const int ny = cy + dy;
          if (mask.contains(nx, ny) && mask(nx, ny) && !labels(nx, ny)) {
            labels(nx, ny) = next;
            stack.emplace_back(nx, ny);
          }
        }
      }
    }
  }
  if (count) *count = next;
  return labels;
}

int euler_characteristic(const BinaryMask& mask) {
  // Gray's bit-quads over the zero-padded image: chi_8 = (Q1 - Q3 - 2 QD) / 4.
  long long q1 = 0;
  long long q3 = 0;
  long long qd = 0;
  for (int y = -1; y < mask.height(); ++y) {
    for (int x = -1; x < mask.width(); ++x) {
      const int a = at(mask, x, y);
      const int b = at(mask, x + 1, y);
      const int c = at(mask, x, y + 1);
      const int d = at(mask, x + 1, y + 1);
      const int sum = a + b + c + d;
      if (sum == 1) ++q1;
      else if (sum == 3) ++q3;
      else if (sum == 2 && a == d) ++qd;
    }
  }
  return static_cast<int>((q1 - q3 - 2 * qd) / 4);
}

TopologyCounts components_and_cycles(const BinaryMask& mask) {
  TopologyCounts t;
  label_components(mask, &t.components);
  t.cycles = t.components - euler_characteristic(mask);
  return t;
}

bool is_simple_point(const BinaryMask& mask, int x, int y) {
  // Yokoi connectivity number for 8-connectivity; simple iff it equals 1.
  std::array<int, 9> v{};
  for (int k = 0; k < 8; ++k) {
    v[k] = 1 - at(mask, x + kNeighbours8[k][0], y + kNeighbours8[k][1]);
  }
  v[8] = v[0];
  int n = 0;
  for (int k = 0; k < 8; k += 2) n += v[k] - v[k] * v[k + 1] * v[(k + 2) % 8];
  return n == 1;
}

Skeleton make_skeleton(BinaryMask cells) {
  Skeleton s;
  for (int y = 0; y < cells.height(); ++y) {
    for (int x = 0; x < cells.width(); ++x) {
      if (!cells(x, y)) continue;
      const int n = neighbour_count(cells, x, y);
      if (n >= 3) s.junctions.emplace_back(x, y);
      else if (n == 1) s.endpoints.emplace_back(x, y);
    }
  }
  s.cells = std::move(cells);
  return s;
}

Skeleton skeletonize(const BinaryMask& mask, int spur_length) {
  BinaryMask m = mask;
  constexpr std::array<std::array<int, 2>, 4> kBorders = {{{0, -1}, {0, 1}, {1, 0}, {-1, 0}}};
  std::vector<std::pair<int, int>> candidates;
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto [bx, by] : kBorders) {
      candidates.clear();
      for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
          if (m(x, y) && !at(m, x + bx, y + by) && neighbour_count(m, x, y) >= 2 &&
              is_simple_point(m, x, y)) {
            candidates.emplace_back(x, y);
          }
        }
      }
      // Sequential re-check keeps every single deletion topology-preserving.
      for (auto [x, y] : candidates) {
        if (neighbour_count(m, x, y) >= 2 && is_simple_point(m, x, y)) {
          m(x, y) = 0;
          changed = true;
        }
      }
    }
  }
  if (spur_length > 0) prune_spurs(m, spur_length);
  return make_skeleton(std::move(m));
}

void prune_spurs(BinaryMask& skeleton, int max_length) {
  BinaryMask& m = skeleton;
  std::vector<std::pair<int, int>> ends;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m(x, y) && neighbour_count(m, x, y) == 1) ends.emplace_back(x, y);
    }
  }
  std::vector<std::pair<int, int>> path;
  for (auto [ex, ey] : ends) {
    if (!m(ex, ey) || neighbour_count(m, ex, ey) != 1) continue;
    path.assign(1, {ex, ey});
    int px = ex;
    int py = ey;
    int prevx = -1;
    int prevy = -1;
    bool reached_junction = false;
    while (static_cast<int>(path.size()) <= max_length) {
      int nx = 0;
      int ny = 0;
      int forward = 0;
      for (auto [dx, dy] : kNeighbours8) {
        const int qx = px + dx;
        const int qy = py + dy;
        if (!at(m, qx, qy) || (qx == prevx && qy == prevy)) continue;
        bool on_path = false;
        for (auto [sx, sy] : path) on_path = on_path || (sx == qx && sy == qy);
        if (on_path) continue;
        ++forward;
        nx = qx;
        ny = qy;
      }
      if (forward != 1) {
        reached_junction = forward > 1 && path.size() > 1;
        break;
      }
      if (neighbour_count(m, nx, ny) >= 3) {
        reached_junction = true;
        break;
      }
      prevx = px;
      prevy = py;
      px = nx;
      py = ny;
      path.emplace_back(px, py);
    }
    if (reached_junction && static_cast<int>(path.size()) <= max_length) {
      // A branch pixel whose removal would split the junction is kept.
      for (auto [x, y] : path) {
        if (is_simple_point(m, x, y)) m(x, y) = 0;
      }
    }
  }
}

double skeleton_length(const BinaryMask& m) {
  double len = 0.0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y)) continue;
      if (at(m, x + 1, y)) len += 1.0;
      if (at(m, x, y + 1)) len += 1.0;
      if (at(m, x + 1, y + 1) && !at(m, x + 1, y) && !at(m, x, y + 1)) len += std::numbers::sqrt2;
      if (at(m, x - 1, y + 1) && !at(m, x - 1, y) && !at(m, x, y + 1)) len += std::numbers::sqrt2;
    }
  }
  return len;
}

double skeleton_length(const Skeleton& skeleton) { return skeleton_length(skeleton.cells); }

std::vector<std::vector<double>> junction_angle_sets(const Skeleton& skeleton, int window_radius) {
  if (window_radius < 3) throw std::invalid_argument("window_radius must be >= 3");
  const BinaryMask& m = skeleton.cells;
  const int w = m.width();
  const int h = m.height();

  BinaryMask is_junction(w, h, 0);
  for (auto [x, y] : skeleton.junctions) is_junction(x, y) = 1;
  int clusters = 0;
  const Grid<int> cluster_of = label_components(is_junction, &clusters);

  std::vector<std::vector<std::pair<int, int>>> members(clusters + 1);
  for (auto [x, y] : skeleton.junctions) members[cluster_of(x, y)].emplace_back(x, y);

  std::vector<std::vector<double>> out;
  Grid<int> dist(w, h, -1);
  Grid<int> seed_group(w, h, 0);
  std::vector<std::pair<int, int>> touched;

  for (int c = 1; c <= clusters; ++c) {
    const auto& cells = members[c];
    double cxs = 0.0;
    double cys = 0.0;
    for (auto [x, y] : cells) {
      cxs += x;
      cys += y;
    }
    cxs /= static_cast<double>(cells.size());
    cys /= static_cast<double>(cells.size());

    // Seeds: non-junction skeleton cells touching the cluster.
    std::vector<std::pair<int, int>> seeds;
    for (auto [x, y] : cells) {
      for (auto [dx, dy] : kNeighbours8) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (at(m, nx, ny) && !is_junction(nx, ny) && seed_group(nx, ny) == 0) {
          seed_group(nx, ny) = -1;
          seeds.emplace_back(nx, ny);
          touched.emplace_back(nx, ny);
        }
      }
    }
    // Mutually adjacent seeds belong to the same branch.
    int groups = 0;
    for (auto [sx, sy] : seeds) {
      if (seed_group(sx, sy) != -1) continue;
      ++groups;
      std::vector<std::pair<int, int>> stack{{sx, sy}};
      seed_group(sx, sy) = groups;
      while (!stack.empty()) {
        auto [x, y] = stack.back();
        stack.pop_back();
        for (auto [dx, dy] : kNeighbours8) {
          const int nx = x + dx;
          const int ny = y + dy;
          if (m.contains(nx, ny) && seed_group(nx, ny) == -1) {
            seed_group(nx, ny) = groups;
            stack.emplace_back(nx, ny);
          }
        }
      }
    }
    if (groups < 3) {
      for (auto [x, y] : touched) seed_group(x, y) = 0;
      touched.clear();
      continue;
    }

    std::vector<double> directions;
    for (int g = 1; g <= groups; ++g) {
      std::queue<std::pair<int, int>> q;
      std::vector<std::pair<int, int>> visited;
      for (auto [sx, sy] : seeds) {
        if (seed_group(sx, sy) == g) {
          dist(sx, sy) = 1;
          q.emplace(sx, sy);
          visited.emplace_back(sx, sy);
        }
      }
      std::pair<int, int> far = q.front();
      int far_d = 1;
      while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop();
        const int d = dist(x, y);
        if (d > far_d) {
          far_d = d;
          far = {x, y};
        }
        if (d >= window_radius) continue;
        for (auto [dx, dy] : kNeighbours8) {
          const int nx = x + dx;
          const int ny = y + dy;
          if (!at(m, nx, ny) || is_junction(nx, ny) || dist(nx, ny) >= 0) continue;
          // Cells seeding another branch of this junction are not crossed.
          if (seed_group(nx, ny) > 0 && seed_group(nx, ny) != g) continue;
          dist(nx, ny) = d + 1;
          q.emplace(nx, ny);
          visited.emplace_back(nx, ny);
        }
      }
      for (auto [x, y] : visited) dist(x, y) = -1;
      directions.push_back(std::atan2(far.second - cys, far.first - cxs));
    }
    for (auto [x, y] : touched) seed_group(x, y) = 0;
    touched.clear();

    std::sort(directions.begin(), directions.end());
    std::vector<double> angles;
    for (std::size_t i = 0; i < directions.size(); ++i) {
      const double a = directions[i];
      const double b = i + 1 < directions.size() ? directions[i + 1]
                                                 : directions[0] + 2.0 * std::numbers::pi;
      angles.push_back((b - a) * 180.0 / std::numbers::pi);
    }
    out.push_back(std::move(angles));
  }
  return out;
}

std::vector<double> junction_angles(const Skeleton& skeleton, int window_radius) {
  std::vector<double> out;
  for (const auto& set : junction_angle_sets(skeleton, window_radius)) {
    out.insert(out.end(), set.begin(), set.end());
  }
  return out;
}

bool nodes_connected(const BinaryMask& mask, std::span<const NodeSource> nodes) {
  int count = 0;
  const Grid<int> labels = label_components(mask, &count);
  int label = -1;
  for (const NodeSource& n : nodes) {
    if (!n.enabled) continue;
    if (!labels.contains(n.cx, n.cy)) return false;
    const int l = labels(n.cx, n.cy);
    if (l == 0) return false;
    if (label < 0) label = l;
    else if (label != l) return false;
  }
  return true;
}

double mst_length(std::span<const Point> points) {
  const std::size_t n = points.size();
  if (n < 2) return 0.0;
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<bool> in_tree(n, false);
  best[0] = 0.0;
  double total = 0.0;
  for (std::size_t it = 0; it < n; ++it) {
    std::size_t u = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_tree[i] && (u == n || best[i] < best[u])) u = i;
    }
    in_tree[u] = true;
    total += best[u];
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_tree[i]) {
        best[i] = std::min(best[i], std::hypot(points[i].x - points[u].x, points[i].y - points[u].y));
      }
    }
  }
  return total;
}

namespace {

double dist(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double fermat_length(const Point& a, const Point& b, const Point& c) {
  const double ab = dist(a, b);
  const double bc = dist(b, c);
  const double ca = dist(c, a);
  const std::array<Point, 3> pts{a, b, c};
  if (ab == 0.0 || bc == 0.0 || ca == 0.0) return mst_length(pts);
  // An angle of 120 degrees or more puts the Fermat point on that vertex.
  const double cos_a = (ab * ab + ca * ca - bc * bc) / (2.0 * ab * ca);
  const double cos_b = (ab * ab + bc * bc - ca * ca) / (2.0 * ab * bc);
  const double cos_c = (bc * bc + ca * ca - ab * ab) / (2.0 * bc * ca);
  if (cos_a <= -0.5) return ab + ca;
  if (cos_b <= -0.5) return ab + bc;
  if (cos_c <= -0.5) return bc + ca;
  const double area = 0.5 * std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
  return std::sqrt((ab * ab + bc * bc + ca * ca) / 2.0 + 2.0 * std::sqrt(3.0) * area);
}

using Edge = std::pair<int, int>;

void enumerate_full_topologies(int next_terminal, int n, int next_steiner,
                               std::vector<Edge>& edges, std::vector<std::vector<Edge>>& out) {
  if (next_terminal == n) {
    out.push_back(edges);
    return;
  }
  const std::size_t count = edges.size();
  for (std::size_t i = 0; i < count; ++i) {
    const Edge e = edges[i];
    edges[i] = {e.first, next_steiner};
    edges.emplace_back(e.second, next_steiner);
    edges.emplace_back(next_terminal, next_steiner);
    enumerate_full_topologies(next_terminal + 1, n, next_steiner + 1, edges, out);
    edges.pop_back();
    edges.pop_back();
    edges[i] = e;
  }
}

double tree_length(const std::vector<Edge>& edges, const std::vector<Point>& pos) {
  double total = 0.0;
  for (auto [u, v] : edges) total += dist(pos[u], pos[v]);
  return total;
}

// Minimises total edge length over Steiner positions: smoothed Weiszfeld
// (majorise-minimise) iterations followed by a shrinking compass search.
double optimise_topology(const std::vector<Edge>& edges, std::span<const Point> terminals,
                         double scale) {
  const int n = static_cast<int>(terminals.size());
  const int steiner = n - 2;
  std::vector<Point> pos(terminals.begin(), terminals.end());
  Point centroid;
  for (const auto& p : terminals) {
    centroid.x += p.x / n;
    centroid.y += p.y / n;
  }
  for (int j = 0; j < steiner; ++j) {
    const double a = 2.0 * std::numbers::pi * j / steiner;
    pos.push_back({centroid.x + 1e-2 * scale * std::cos(a), centroid.y + 1e-2 * scale * std::sin(a)});
  }
  std::vector<std::vector<int>> adj(n + steiner);
  for (auto [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  const double eps = 1e-10 * scale;
  for (int it = 0; it < 200000; ++it) {
    double max_move = 0.0;
    for (int s = n; s < n + steiner; ++s) {
      double wx = 0.0;
      double wy = 0.0;
      double ws = 0.0;
      for (int v : adj[s]) {
        const double d = std::sqrt(std::pow(pos[v].x - pos[s].x, 2) + std::pow(pos[v].y - pos[s].y, 2) + eps * eps);
        wx += pos[v].x / d;
        wy += pos[v].y / d;
        ws += 1.0 / d;
      }
      const Point next{wx / ws, wy / ws};
      max_move = std::max(max_move, dist(next, pos[s]));
      pos[s] = next;
    }
    if (max_move < 1e-13 * scale) break;
  }
  double best = tree_length(edges, pos);
  for (double step = 1e-2 * scale; step > 1e-7 * scale; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (int s = n; s < n + steiner; ++s) {
        for (auto [dx, dy] : kNeighbours8) {
          const Point keep = pos[s];
          pos[s] = {keep.x + dx * step, keep.y + dy * step};
          const double len = tree_length(edges, pos);
          if (len < best - 1e-15 * scale) {
            best = len;
            improved = true;
          } else {
            pos[s] = keep;
          }
        }
      }
    }
  }
  return best;
}

}  // namespace

SteinerResult steiner_length_oracle(std::span<const Point> points) {
  const std::size_t n = points.size();
  if (n < 2) return {0.0, true};
  if (n == 2) return {dist(points[0], points[1]), true};
  if (n == 3) return {fermat_length(points[0], points[1], points[2]), true};
  if (n > 5) return {mst_length(points), false};

  double min_x = points[0].x, max_x = points[0].x, min_y = points[0].y, max_y = points[0].y;
  for (const auto& p : points) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double scale = std::max({max_x - min_x, max_y - min_y, 1e-12});

  std::vector<std::vector<Edge>> topologies;
  std::vector<Edge> edges{{0, static_cast<int>(n)}, {1, static_cast<int>(n)}, {2, static_cast<int>(n)}};
  enumerate_full_topologies(3, static_cast<int>(n), static_cast<int>(n) + 1, edges, topologies);

  double best = mst_length(points);
  for (const auto& topo : topologies) best = std::min(best, optimise_topology(topo, points, scale));
  return {best, true};
}

double top_decile_mass_share(const TrailField& trail) {
  std::vector<double> v(trail.values().begin(), trail.values().end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  const std::size_t k = (n + 9) / 10;
  double total = 0.0;
  for (double x : v) total += x;
  if (!(total > 0.0)) return static_cast<double>(k) / static_cast<double>(n);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end(),
                   std::greater<>());
  double top = 0.0;
  for (std::size_t i = 0; i < k; ++i) top += v[i];
  return std::min(1.0, top / total);
}

BlobShape blob_circularity(const BinaryMask& occupancy) {
  double sx = 0.0;
  double sy = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < occupancy.height(); ++y) {
    for (int x = 0; x < occupancy.width(); ++x) {
      if (!occupancy(x, y)) continue;
      sx += x + 0.5;
      sy += y + 0.5;
      ++count;
    }
  }
  if (count == 0) throw std::domain_error("circularity of an empty occupancy lattice");
  const double cx = sx / static_cast<double>(count);
  const double cy = sy / static_cast<double>(count);
  double max_d = 0.0;
  for (int y = 0; y < occupancy.height(); ++y) {
    for (int x = 0; x < occupancy.width(); ++x) {
      if (occupancy(x, y)) max_d = std::max(max_d, std::hypot(x + 0.5 - cx, y + 0.5 - cy));
    }
  }
  int components = 0;
  label_components(occupancy, &components);
  return {components == 1, max_d / std::sqrt(static_cast<double>(count) / std::numbers::pi)};
}

NetworkMetrics compute_field_metrics(const TrailField& trail, std::span<const NodeSource> nodes,
                                     const AnalysisOptions& options, double peak) {
  NetworkMetrics out;
  const BinaryMask mask = threshold_mask(trail, options.threshold_rel, peak);
  std::size_t fg = 0;
  for (auto v : mask.values()) fg += v;
  out.coverage = mask.size() ? static_cast<double>(fg) / static_cast<double>(mask.size()) : 0.0;
  const TopologyCounts topo = components_and_cycles(mask);
  out.component_count = topo.components;
  out.cycle_count = topo.cycles;
  const Skeleton skel = skeletonize(mask, options.spur_length);
  out.skeleton_length = skeleton_length(skel);
  const auto sets = junction_angle_sets(skel, options.junction_window);
  std::vector<double> angles;
  for (const auto& set : sets) angles.insert(angles.end(), set.begin(), set.end());
  if (!angles.empty()) {
    const double mean = std::accumulate(angles.begin(), angles.end(), 0.0) / angles.size();
    double var = 0.0;
    for (double a : angles) var += (a - mean) * (a - mean);
    out.junction_angle_mean = mean;
    out.junction_angle_stddev = std::sqrt(var / angles.size());
  }
  out.junction_count = static_cast<int>(sets.size());
  out.nodes_connected = nodes_connected(mask, nodes);
  out.top_decile_mass_share = top_decile_mass_share(trail);
  return out;
}

NetworkMetrics compute_field_metrics(const TrailField& trail, std::span<const NodeSource> nodes,
                                     const AnalysisOptions& options) {
  const auto values = trail.values();
  const double peak = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  return compute_field_metrics(trail, nodes, options, peak);
}

NetworkMetrics compute_metrics(const SimulationState& state, const AnalysisOptions& options) {
  // A field holding node deposits only has no agent network to measure.
  bool agent_trail = state.source_trail.size() != state.trail.size();
  bool any_trail = false;
  for (std::size_t i = 0; !agent_trail && i < state.trail.size(); ++i) {
    agent_trail = state.trail[i] > state.source_trail[i];
    any_trail = any_trail || state.trail[i] > 0.0;
  }
  NetworkMetrics m;
  if (agent_trail || !any_trail) {
    m = compute_field_metrics(state.trail, state.nodes, options, network_peak(state.trail, state.source_trail));
  }
  m.step = state.step;
  m.population = state.living();
  return m;
}

}  // namespace emn
