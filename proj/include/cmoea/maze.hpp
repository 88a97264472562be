#ifndef CMOEA_MAZE_HPP
#define CMOEA_MAZE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "neuro.hpp"
#include "rng.hpp"

namespace cmoea::maze {

inline constexpr int grid_cells = 20;
inline constexpr double cell_size = 20.0;
inline constexpr double extent = 400.0;
inline constexpr double half_thickness = 1.0;   // walls are 2 units thick
inline constexpr int division_count = 5;
inline constexpr double robot_radius = 4.0;
inline constexpr double sensor_range = 100.0;
inline constexpr double axle = 8.0;             // robot diameter
inline constexpr int sim_max_steps = 2500;
inline constexpr int start_cell_col = grid_cells / 2;
inline constexpr int start_cell_row = grid_cells / 2;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Vec2& a, const Vec2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

struct Rect {
    double x0, y0, x1, y1;
};

struct DivisionWall {
    bool vertical;      // wall lies on a vertical grid line
    int line_index;     // absolute grid line, 1..19
    int span_lo;        // cell range [span_lo, span_hi) along the wall
    int span_hi;
    int gap_index;      // absolute cell index of the one-cell gap
};

struct MazeGrid {
    int goal_col = 0;
    int goal_row = 0;
    std::vector<DivisionWall> walls;
};

struct Maze {
    std::vector<Rect> walls;
    Vec2 goal;
    Vec2 start{extent / 2.0, extent / 2.0};
    double max_dist = 0.0;   // goal to farthest maze corner
};

struct RobotState {
    Vec2 position;
    double heading = 0.0;    // radians, 0 = north = +y, counterclockwise
};

struct SimulationOutcome {
    Vec2 final_position;
    bool solved = false;
    int steps_used = 0;
};

// Heading 0 points north (+y); positive angles turn counterclockwise.
inline Vec2 heading_vector(double heading) {
    return {-std::sin(heading), std::cos(heading)};
}

inline double point_rect_distance(const Vec2& p, const Rect& r) {
    double dx = std::max({r.x0 - p.x, 0.0, p.x - r.x1});
    double dy = std::max({r.y0 - p.y, 0.0, p.y - r.y1});
    return std::hypot(dx, dy);
}

inline bool collides(const Maze& m, const Vec2& center) {
    for (const Rect& r : m.walls)
        if (point_rect_distance(center, r) < robot_radius) return true;
    return false;
}

// First intersection of the ray origin + t*dir with a rectangle (slab test);
// +inf when the ray misses or the rectangle lies behind the origin.
inline double ray_rect(const Vec2& o, const Vec2& dir, const Rect& r) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    double tmin = -inf, tmax = inf;
    if (dir.x == 0.0) {
        if (o.x < r.x0 || o.x > r.x1) return inf;
    } else {
        double t1 = (r.x0 - o.x) / dir.x;
        double t2 = (r.x1 - o.x) / dir.x;
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
    }
    if (dir.y == 0.0) {
        if (o.y < r.y0 || o.y > r.y1) return inf;
    } else {
        double t1 = (r.y0 - o.y) / dir.y;
        double t2 = (r.y1 - o.y) / dir.y;
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
    }
    if (tmax < std::max(tmin, 0.0)) return inf;
    return tmin >= 0.0 ? tmin : tmax;
}

inline double ray_distance(const Maze& m, const Vec2& o, const Vec2& dir) {
    double best = std::numeric_limits<double>::infinity();
    for (const Rect& r : m.walls) best = std::min(best, ray_rect(o, dir, r));
    return best;
}

// Liang-Barsky segment clipping: true when segment a-b passes through r.
inline bool segment_hits_rect(const Vec2& a, const Vec2& b, const Rect& r) {
    double dx = b.x - a.x, dy = b.y - a.y;
    double t0 = 0.0, t1 = 1.0;
    auto clip = [&](double p, double q) {
        if (p == 0.0) return q >= 0.0;
        double t = q / p;
        if (p < 0.0) {
            if (t > t1) return false;
            if (t > t0) t0 = t;
        } else {
            if (t < t0) return false;
            if (t < t1) t1 = t;
        }
        return true;
    };
    return clip(-dx, a.x - r.x0) && clip(dx, r.x1 - a.x) &&
           clip(-dy, a.y - r.y0) && clip(dy, r.y1 - a.y) && t0 <= t1;
}

inline bool line_of_sight(const Maze& m, const Vec2& a, const Vec2& b) {
    for (const Rect& r : m.walls)
        if (segment_hits_rect(a, b, r)) return false;
    return true;
}

// Ten sensor values: 0-5 rangefinders at {0, +45, -45, +90, -90, 180}
// degrees relative to the heading, normalized as min(d, R)/R with R = 100;
// 6-9 binary goal-quadrant sensors for bearings [-45,45), [45,135),
// [135,225), [225,315). Goal sensors do not work through walls.
inline void sense(const Maze& m, const RobotState& r,
                  std::array<double, 10>& out) {
    constexpr double pi = 3.14159265358979323846;
    static constexpr std::array<double, 6> offsets = {
        0.0, pi / 4.0, -pi / 4.0, pi / 2.0, -pi / 2.0, pi};
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        Vec2 dir = heading_vector(r.heading + offsets[i]);
        double d = ray_distance(m, r.position, dir);
        out[i] = std::min(d, sensor_range) / sensor_range;
    }
    out[6] = out[7] = out[8] = out[9] = 0.0;
    Vec2 to_goal{m.goal.x - r.position.x, m.goal.y - r.position.y};
    double goal_angle = std::atan2(-to_goal.x, to_goal.y);
    double bearing = std::remainder(goal_angle - r.heading, 2.0 * pi);
    if (bearing < -pi / 4.0) bearing += 2.0 * pi;
    int q = static_cast<int>(std::floor((bearing + pi / 4.0) / (pi / 2.0)));
    q = std::clamp(q, 0, 3);
    if (line_of_sight(m, r.position, m.goal)) out[6 + q] = 1.0;
}

inline std::vector<double> sense(const Maze& m, const RobotState& r) {
    std::array<double, 10> buf;
    sense(m, r, buf);
    return std::vector<double>(buf.begin(), buf.end());
}

// Differential drive: wheel speeds in [-3, 3], heading updated first, then
// the robot translates along the new heading. A colliding move is cancelled
// (rotation is kept).
inline RobotState step(const Maze& m, const RobotState& r, double out_left,
                       double out_right) {
    double vl = 6.0 * out_left - 3.0;
    double vr = 6.0 * out_right - 3.0;
    RobotState next = r;
    next.heading += (vr - vl) / axle;
    double speed = (vl + vr) / 2.0;
    Vec2 dir = heading_vector(next.heading);
    Vec2 cand{r.position.x + speed * dir.x, r.position.y + speed * dir.y};
    if (!collides(m, cand)) next.position = cand;
    return next;
}

struct NullObserver {
    void operator()(int, const RobotState&) const {}
};

template <typename Observer = NullObserver>
SimulationOutcome simulate(const Maze& m, const neuro::CompiledNetwork& net,
                           Observer&& observe = Observer{}) {
    cmoea::detail::require(net.num_inputs() == 10 && net.output_slots().size() == 2,
                           "simulate: network must have 10 inputs and 2 outputs");
    RobotState r;
    r.position = m.start;
    std::vector<double> prev(net.state_size(), 0.0);
    std::vector<double> next(net.state_size(), 0.0);
    std::array<double, 10> inputs;
    observe(0, r);
    int steps = 0;
    while (steps < sim_max_steps &&
           distance(r.position, m.goal) >= robot_radius) {
        sense(m, r, inputs);
        net.step(inputs.data(), prev, next);
        std::swap(prev, next);
        r = step(m, r, prev[net.output_slots()[0]], prev[net.output_slots()[1]]);
        ++steps;
        observe(steps, r);
    }
    SimulationOutcome o;
    o.final_position = r.position;
    o.steps_used = steps;
    o.solved = distance(r.position, m.goal) < robot_radius;
    return o;
}

inline SimulationOutcome simulate(const Maze& m, const neuro::NetworkGenome& g) {
    return simulate(m, neuro::CompiledNetwork(g));
}

inline double performance(const Maze& m, const SimulationOutcome& o) {
    if (o.solved) return 1.0;
    return 1.0 - distance(o.final_position, m.goal) / m.max_dist;
}

// Final (x, y) coordinates concatenated over all training mazes.
inline BehaviorDescriptor behavior_descriptor(
    const std::vector<SimulationOutcome>& outcomes, std::size_t maze_count) {
    cmoea::detail::require(outcomes.size() == maze_count,
                           "behavior_descriptor: outcome count mismatch");
    BehaviorDescriptor d;
    d.reserve(outcomes.size() * 2);
    for (const SimulationOutcome& o : outcomes) {
        d.push_back(o.final_position.x);
        d.push_back(o.final_position.y);
    }
    return d;
}

inline double descriptor_distance(const BehaviorDescriptor& a,
                                  const BehaviorDescriptor& b) {
    return manhattan_distance(a, b);
}

// ---- geometry realization ----

inline void add_division_rects(std::vector<Rect>& rects, const DivisionWall& w) {
    auto emit = [&](int lo, int hi, bool outer_lo, bool outer_hi) {
        if (lo >= hi) return;
        double a = lo * cell_size - (outer_lo ? half_thickness : 0.0);
        double b = hi * cell_size + (outer_hi ? half_thickness : 0.0);
        double line = w.line_index * cell_size;
        if (w.vertical)
            rects.push_back({line - half_thickness, a, line + half_thickness, b});
        else
            rects.push_back({a, line - half_thickness, b, line + half_thickness});
    };
    // Two segments around the gap; ends at region edges are extended by the
    // half thickness so corners seal against the perpendicular walls, while
    // the gap opening stays exactly one cell wide.
    emit(w.span_lo, w.gap_index, true, false);
    emit(w.gap_index + 1, w.span_hi, false, true);
}

inline Maze build_maze(const MazeGrid& g) {
    Maze m;
    double e = extent, t = half_thickness;
    m.walls.push_back({-t, -t, t, e + t});
    m.walls.push_back({e - t, -t, e + t, e + t});
    m.walls.push_back({-t, -t, e + t, t});
    m.walls.push_back({-t, e - t, e + t, e + t});
    for (const DivisionWall& w : g.walls) add_division_rects(m.walls, w);
    m.goal = {g.goal_col * cell_size + cell_size / 2.0,
              g.goal_row * cell_size + cell_size / 2.0};
    m.max_dist = 0.0;
    for (double cx : {0.0, extent})
        for (double cy : {0.0, extent})
            m.max_dist = std::max(m.max_dist, distance(m.goal, Vec2{cx, cy}));
    return m;
}

// Grid-level connectivity: flood fill from the center cell with moves
// blocked by boundary and division walls (gaps are passable).
inline bool all_cells_reachable(const MazeGrid& g) {
    auto blocked_v = [&](int line, int row) {
        for (const DivisionWall& w : g.walls)
            if (w.vertical && w.line_index == line && row >= w.span_lo &&
                row < w.span_hi && row != w.gap_index)
                return true;
        return false;
    };
    auto blocked_h = [&](int line, int col) {
        for (const DivisionWall& w : g.walls)
            if (!w.vertical && w.line_index == line && col >= w.span_lo &&
                col < w.span_hi && col != w.gap_index)
                return true;
        return false;
    };
    std::vector<bool> seen(grid_cells * grid_cells, false);
    std::vector<std::pair<int, int>> stack{{start_cell_col, start_cell_row}};
    seen[start_cell_row * grid_cells + start_cell_col] = true;
    int count = 0;
    while (!stack.empty()) {
        auto [c, r] = stack.back();
        stack.pop_back();
        ++count;
        auto visit = [&](int nc, int nr) {
            if (nc < 0 || nr < 0 || nc >= grid_cells || nr >= grid_cells) return;
            if (seen[nr * grid_cells + nc]) return;
            seen[nr * grid_cells + nc] = true;
            stack.push_back({nc, nr});
        };
        if (!blocked_v(c, r)) visit(c - 1, r);
        if (!blocked_v(c + 1, r)) visit(c + 1, r);
        if (!blocked_h(r, c)) visit(c, r - 1);
        if (!blocked_h(r + 1, c)) visit(c, r + 1);
    }
    return count == grid_cells * grid_cells;
}

inline bool maze_invariants_hold(const MazeGrid& g, const Maze& m) {
    if (!all_cells_reachable(g)) return false;
    for (const Rect& r : m.walls)
        if (point_rect_distance(m.goal, r) < robot_radius) return false;
    if (collides(m, m.start)) return false;
    return true;
}

namespace detail {

struct Region {
    int c0, r0, w, h;
    int area() const { return w * h; }
    bool divisible() const { return w >= 2 && h >= 2; }
};

} // namespace detail

// Recursive division: five times, pick the largest divisible region, split
// it along its longer dimension at a random interior grid line, and punch a
// one-cell gap at a random position along the new wall.
inline std::pair<MazeGrid, Maze> generate_maze(Rng& rng) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        MazeGrid g;
        std::vector<detail::Region> regions{{0, 0, grid_cells, grid_cells}};
        for (int d = 0; d < division_count; ++d) {
            int best_area = 0;
            for (const auto& r : regions)
                if (r.divisible()) best_area = std::max(best_area, r.area());
            std::vector<std::size_t> ties;
            for (std::size_t i = 0; i < regions.size(); ++i)
                if (regions[i].divisible() && regions[i].area() == best_area)
                    ties.push_back(i);
            std::size_t pick = ties[rng.uniform_index(ties.size())];
            detail::Region reg = regions[pick];
            bool vertical;
            if (reg.w > reg.h)
                vertical = true;
            else if (reg.h > reg.w)
                vertical = false;
            else
                vertical = rng.bernoulli(0.5);
            DivisionWall w;
            w.vertical = vertical;
            if (vertical) {
                w.line_index = reg.c0 + 1 +
                    static_cast<int>(rng.uniform_index(reg.w - 1));
                w.span_lo = reg.r0;
                w.span_hi = reg.r0 + reg.h;
                w.gap_index = reg.r0 + static_cast<int>(rng.uniform_index(reg.h));
                regions[pick] = {reg.c0, reg.r0, w.line_index - reg.c0, reg.h};
                regions.push_back({w.line_index, reg.r0,
                                   reg.c0 + reg.w - w.line_index, reg.h});
            } else {
                w.line_index = reg.r0 + 1 +
                    static_cast<int>(rng.uniform_index(reg.h - 1));
                w.span_lo = reg.c0;
                w.span_hi = reg.c0 + reg.w;
                w.gap_index = reg.c0 + static_cast<int>(rng.uniform_index(reg.w));
                regions[pick] = {reg.c0, reg.r0, reg.w, w.line_index - reg.r0};
                regions.push_back({reg.c0, w.line_index, reg.w,
                                   reg.r0 + reg.h - w.line_index});
            }
            g.walls.push_back(w);
        }
        std::size_t k = rng.uniform_index(grid_cells * grid_cells - 1);
        std::size_t start_idx = start_cell_row * grid_cells + start_cell_col;
        if (k >= start_idx) ++k;
        g.goal_col = static_cast<int>(k % grid_cells);
        g.goal_row = static_cast<int>(k / grid_cells);
        Maze m = build_maze(g);
        if (maze_invariants_hold(g, m)) return {g, m};
    }
    throw std::runtime_error(
        "generate_maze: no valid maze after 1000 attempts");
}

// ---- file format ----

inline constexpr int maze_format_version = 1;

inline nlohmann::json grid_to_json(const MazeGrid& g) {
    nlohmann::json walls = nlohmann::json::array();
    for (const DivisionWall& w : g.walls)
        walls.push_back({{"orientation", w.vertical ? "vertical" : "horizontal"},
                         {"line_index", w.line_index},
                         {"span", {w.span_lo, w.span_hi}},
                         {"gap_index", w.gap_index}});
    return {{"goal_cell", {g.goal_col, g.goal_row}},
            {"division_walls", walls}};
}

inline MazeGrid grid_from_json(const nlohmann::json& j) {
    MazeGrid g;
    g.goal_col = j.at("goal_cell").at(0).get<int>();
    g.goal_row = j.at("goal_cell").at(1).get<int>();
    for (const auto& wj : j.at("division_walls")) {
        DivisionWall w;
        std::string o = wj.at("orientation").get<std::string>();
        if (o != "vertical" && o != "horizontal")
            throw std::runtime_error("maze file: bad orientation '" + o + "'");
        w.vertical = o == "vertical";
        w.line_index = wj.at("line_index").get<int>();
        w.span_lo = wj.at("span").at(0).get<int>();
        w.span_hi = wj.at("span").at(1).get<int>();
        w.gap_index = wj.at("gap_index").get<int>();
        g.walls.push_back(w);
    }
    return g;
}

// Schema plus geometry validation used by the loader and --check-mazes.
inline void validate_grid(const MazeGrid& g) {
    auto fail = [](const std::string& msg) {
        throw std::runtime_error("maze file: " + msg);
    };
    if (static_cast<int>(g.walls.size()) != division_count)
        fail("expected exactly 5 division walls");
    for (const DivisionWall& w : g.walls) {
        if (w.line_index < 1 || w.line_index >= grid_cells)
            fail("line_index out of range");
        if (w.span_lo < 0 || w.span_hi > grid_cells || w.span_lo >= w.span_hi)
            fail("bad wall span");
        if (w.gap_index < w.span_lo || w.gap_index >= w.span_hi)
            fail("gap outside wall span");
    }
    if (g.goal_col < 0 || g.goal_col >= grid_cells || g.goal_row < 0 ||
        g.goal_row >= grid_cells)
        fail("goal cell out of range");
    if (g.goal_col == start_cell_col && g.goal_row == start_cell_row)
        fail("goal cell equals start cell");
    if (!all_cells_reachable(g)) fail("grid is not fully connected");
    Maze m = build_maze(g);
    if (!maze_invariants_hold(g, m)) fail("geometry invariants violated");
}

struct MazeSet {
    std::uint64_t seed = 0;
    std::vector<MazeGrid> grids;
};

inline nlohmann::json maze_set_to_json(const MazeSet& s) {
    nlohmann::json mazes = nlohmann::json::array();
    for (const MazeGrid& g : s.grids) mazes.push_back(grid_to_json(g));
    return {{"format_version", maze_format_version},
            {"generator_seed", s.seed},
            {"mazes", mazes}};
}

inline MazeSet maze_set_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != maze_format_version)
            throw std::runtime_error("maze file: unsupported format_version");
        MazeSet s;
        s.seed = j.at("generator_seed").get<std::uint64_t>();
        for (const auto& mj : j.at("mazes")) {
            MazeGrid g = grid_from_json(mj);
            validate_grid(g);
            s.grids.push_back(std::move(g));
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("maze file: ") + e.what());
    }
}

inline MazeSet generate_maze_set(std::uint64_t seed, int count) {
    MazeSet s;
    s.seed = seed;
    for (int i = 0; i < count; ++i) {
        Rng rng = stream(seed, "maze", static_cast<std::uint64_t>(i));
        s.grids.push_back(generate_maze(rng).first);
    }
    return s;
}

inline std::vector<Maze> build_mazes(const MazeSet& s) {
    std::vector<Maze> out;
    out.reserve(s.grids.size());
    for (const MazeGrid& g : s.grids) out.push_back(build_maze(g));
    return out;
}

} // namespace cmoea::maze

#endif
