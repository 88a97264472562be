#include <catch2/catch_amalgamated.hpp>

#include <cmoea/maze.hpp>
#include <cmoea/neuro.hpp>
#include <cmoea/rng.hpp>

#include <cmath>
#include <vector>

using namespace cmoea;
using namespace cmoea::maze;

namespace {

constexpr double pi = 3.14159265358979323846;

std::vector<Rect> boundary_walls() {
    return {{-1.0, -1.0, 1.0, 401.0},
            {399.0, -1.0, 401.0, 401.0},
            {-1.0, -1.0, 401.0, 1.0},
            {-1.0, 399.0, 401.0, 401.0}};
}

Maze hand_maze(Vec2 goal) {
    Maze m;
    m.walls = boundary_walls();
    m.walls.push_back({149.0, 99.0, 151.0, 301.0});
    m.walls.push_back({49.0, 219.0, 251.0, 221.0});
    m.goal = goal;
    m.max_dist = 600.0;
    return m;
}

// Plane-crossing oracle: test every face crossing with a point-in-rect
// check instead of slab intervals.
double ray_rect_oracle(const Vec2& o, const Vec2& d, const Rect& r) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    constexpr double eps = 1e-9;
    std::vector<double> cand;
    if (d.x != 0.0) {
        cand.push_back((r.x0 - o.x) / d.x);
        cand.push_back((r.x1 - o.x) / d.x);
    }
    if (d.y != 0.0) {
        cand.push_back((r.y0 - o.y) / d.y);
        cand.push_back((r.y1 - o.y) / d.y);
    }
    double best = inf;
    for (double t : cand) {
        if (t < 0.0) continue;
        double px = o.x + t * d.x, py = o.y + t * d.y;
        if (px >= r.x0 - eps && px <= r.x1 + eps && py >= r.y0 - eps &&
            py <= r.y1 + eps)
            best = std::min(best, t);
    }
    return best;
}

neuro::NetworkGenome output_bias_genome(double bias_left, double bias_right) {
    neuro::NetworkGenome g;
    for (std::uint32_t i = 0; i < 10; ++i)
        g.nodes.push_back({i, neuro::NodeRole::input, 0.0});
    g.nodes.push_back({10, neuro::NodeRole::output, bias_left});
    g.nodes.push_back({11, neuro::NodeRole::output, bias_right});
    g.next_node_id = 12;
    return g;
}

} // namespace

TEST_CASE("heading zero points along +y and turns counterclockwise") {
    Vec2 n = heading_vector(0.0);
    CHECK(n.x == Catch::Approx(0.0).margin(1e-15));
    CHECK(n.y == 1.0);
    Vec2 w = heading_vector(pi / 2.0);
    CHECK(w.x == Catch::Approx(-1.0));
    CHECK(w.y == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("ray_rect against the plane-crossing oracle") {
    Rect r{149.0, 99.0, 151.0, 301.0};
    SECTION("frozen cases") {
        CHECK(ray_rect({200.0, 150.0}, {-1.0, 0.0}, r) == Catch::Approx(49.0));
        CHECK(ray_rect({200.0, 150.0}, {1.0, 0.0}, r) ==
              std::numeric_limits<double>::infinity());
        CHECK(ray_rect({200.0, 150.0}, {0.0, 1.0}, r) ==
              std::numeric_limits<double>::infinity());
        // starting inside reports the exit distance
        CHECK(ray_rect({150.0, 200.0}, {0.0, 1.0}, r) == Catch::Approx(101.0));
    }
    SECTION("randomized agreement") {
        Rng rng(2024);
        std::vector<Rect> rects = boundary_walls();
        rects.push_back(r);
        rects.push_back({49.0, 219.0, 251.0, 221.0});
        for (int i = 0; i < 2000; ++i) {
            Vec2 o{rng.uniform(-50.0, 450.0), rng.uniform(-50.0, 450.0)};
            double a = rng.uniform(0.0, 2.0 * pi);
            Vec2 d{-std::sin(a), std::cos(a)};
            const Rect& rect = rects[rng.uniform_index(rects.size())];
            double got = ray_rect(o, d, rect);
            double want = ray_rect_oracle(o, d, rect);
            if (std::isinf(want))
                CHECK(std::isinf(got));
            else
                CHECK(got == Catch::Approx(want).margin(1e-9));
        }
    }
}

TEST_CASE("segment_hits_rect") {
    Rect r{4.0, 4.0, 6.0, 6.0};
    CHECK(segment_hits_rect({0.0, 0.0}, {10.0, 10.0}, r));
    CHECK(segment_hits_rect({5.0, 5.0}, {5.2, 5.2}, r));   // fully inside
    CHECK_FALSE(segment_hits_rect({0.0, 0.0}, {3.0, 3.0}, r));
    CHECK_FALSE(segment_hits_rect({0.0, 7.0}, {10.0, 7.0}, r));
    CHECK_FALSE(segment_hits_rect({7.0, 0.0}, {7.0, 10.0}, r));
}

TEST_CASE("rangefinders match frozen closed-form readings") {
    Maze m = hand_maze({260.0, 150.0});
    RobotState r;
    r.position = {200.0, 150.0};
    r.heading = pi / 2.0;
    std::vector<double> s = sense(m, r);
    REQUIRE(s.size() == 10);
    CHECK(s[0] == Catch::Approx(0.49).epsilon(1e-12));
    CHECK(s[1] == Catch::Approx(0.6929646455628165).epsilon(1e-12));
    CHECK(s[2] == Catch::Approx(0.6929646455628165).epsilon(1e-12));
    CHECK(s[3] == 1.0);
    CHECK(s[4] == Catch::Approx(0.69).epsilon(1e-12));
    CHECK(s[5] == 1.0);
}

TEST_CASE("chamber pose readings") {
    Maze m;
    m.walls = boundary_walls();
    m.goal = {200.0, 300.0};
    m.max_dist = 600.0;
    RobotState r;
    r.position = {200.0, 390.0};
    r.heading = 0.0;
    std::vector<double> s = sense(m, r);
    CHECK(s[0] == Catch::Approx(0.09).epsilon(1e-12));
    CHECK(s[1] == Catch::Approx(0.12727922061357855).epsilon(1e-12));
    CHECK(s[2] == Catch::Approx(0.12727922061357855).epsilon(1e-12));
    CHECK(s[3] == 1.0);
    CHECK(s[4] == 1.0);
    CHECK(s[5] == 1.0);
    // goal is straight behind
    CHECK(s[6] == 0.0);
    CHECK(s[7] == 0.0);
    CHECK(s[8] == 1.0);
    CHECK(s[9] == 0.0);
}

TEST_CASE("goal quadrant sensors respect line of sight") {
    SECTION("visible goal behind the robot") {
        Maze m = hand_maze({260.0, 150.0});
        RobotState r{{200.0, 150.0}, pi / 2.0};
        std::vector<double> s = sense(m, r);
        CHECK(s[6] == 0.0);
        CHECK(s[7] == 0.0);
        CHECK(s[8] == 1.0);
        CHECK(s[9] == 0.0);
    }
    SECTION("goal ahead but behind a wall") {
        Maze m = hand_maze({100.0, 150.0});
        RobotState r{{200.0, 150.0}, pi / 2.0};
        std::vector<double> s = sense(m, r);
        CHECK(s[6] == 0.0);
        CHECK(s[7] == 0.0);
        CHECK(s[8] == 0.0);
        CHECK(s[9] == 0.0);
    }
    SECTION("quadrant boundaries") {
        Maze m;
        m.walls = boundary_walls();
        m.max_dist = 600.0;
        RobotState r{{200.0, 200.0}, 0.0};
        m.goal = {150.0, 250.0};   // bearing +45 -> left quadrant
        CHECK(sense(m, r)[7] == 1.0);
        m.goal = {250.0, 250.0};   // bearing -45 -> front quadrant
        CHECK(sense(m, r)[6] == 1.0);
    }
}

TEST_CASE("differential drive rotates before translating") {
    Maze m = hand_maze({260.0, 150.0});
    RobotState r{{200.0, 150.0}, pi / 2.0};

    SECTION("opposite wheels spin in place") {
        RobotState n = step(m, r, 0.75, 0.25);
        CHECK(n.heading == Catch::Approx(pi / 2.0 - 0.375));
        CHECK(n.position.x == r.position.x);
        CHECK(n.position.y == r.position.y);
    }
    SECTION("translation follows the updated heading") {
        RobotState n = step(m, r, 0.75, 1.0);
        double vl = 1.5, vr = 3.0;
        double h = pi / 2.0 + (vr - vl) / 8.0;
        CHECK(n.heading == Catch::Approx(h));
        CHECK(n.position.x ==
              Catch::Approx(200.0 + 2.25 * -std::sin(h)));
        CHECK(n.position.y == Catch::Approx(150.0 + 2.25 * std::cos(h)));
    }
    SECTION("blocked translation keeps the rotation") {
        RobotState near{{155.5, 150.0}, pi / 2.0};
        RobotState n = step(m, near, 1.0, 1.0);
        // candidate x would be 152.5, within radius 4 of the wall at x=151
        CHECK(n.position.x == near.position.x);
        CHECK(n.position.y == near.position.y);
        RobotState spin = step(m, near, 1.0, 0.0);
        CHECK(spin.heading == Catch::Approx(pi / 2.0 - 6.0 / 8.0));
    }
}

TEST_CASE("simulation endpoints") {
    SECTION("stationary network times out at the start") {
        Maze m;
        m.walls = boundary_walls();
        m.goal = {50.0, 150.0};
        m.max_dist = 430.11626335213134;
        neuro::NetworkGenome g = output_bias_genome(0.0, 0.0);
        SimulationOutcome o = simulate(m, g);
        CHECK_FALSE(o.solved);
        CHECK(o.steps_used == sim_max_steps);
        CHECK(o.final_position.x == 200.0);
        CHECK(o.final_position.y == 200.0);
        CHECK(performance(m, o) ==
              Catch::Approx(0.6323926889530961).epsilon(1e-12));
    }
    SECTION("forward driver reaches a goal straight ahead") {
        Maze m;
        m.walls = boundary_walls();
        m.goal = {200.0, 280.0};
        m.max_dist = 600.0;
        neuro::NetworkGenome g = output_bias_genome(1.0, 1.0);
        SimulationOutcome o = simulate(m, g);
        CHECK(o.solved);
        CHECK(o.steps_used < 100);
        CHECK(performance(m, o) == 1.0);
    }
}

TEST_CASE("behavior descriptor concatenates final positions") {
    std::vector<SimulationOutcome> outs(2);
    outs[0].final_position = {10.0, 20.0};
    outs[1].final_position = {30.0, 40.0};
    BehaviorDescriptor d = behavior_descriptor(outs, 2);
    CHECK(d == BehaviorDescriptor{10.0, 20.0, 30.0, 40.0});
    CHECK(descriptor_distance(d, {10.0, 20.0, 30.0, 44.0}) == 4.0);
    CHECK_THROWS_AS(behavior_descriptor(outs, 3), std::invalid_argument);
}

TEST_CASE("division wall rectangles: thickness 2, gap exactly one cell") {
    DivisionWall w{true, 7, 3, 12, 5};
    std::vector<Rect> rects;
    add_division_rects(rects, w);
    REQUIRE(rects.size() == 2);
    CHECK(rects[0].x0 == 139.0);
    CHECK(rects[0].x1 == 141.0);
    CHECK(rects[0].y0 == 59.0);    // region edge end extended
    CHECK(rects[0].y1 == 100.0);   // flush at the gap
    CHECK(rects[1].y0 == 120.0);
    CHECK(rects[1].y1 == 241.0);
    CHECK(rects[1].y0 - rects[0].y1 == 20.0);

    DivisionWall at_start{false, 4, 2, 9, 2};
    rects.clear();
    add_division_rects(rects, at_start);
    REQUIRE(rects.size() == 1);
    CHECK(rects[0].x0 == 60.0);
    CHECK(rects[0].x1 == 181.0);
    CHECK(rects[0].y1 - rects[0].y0 == 2.0);
}

TEST_CASE("generated mazes satisfy the structural invariants") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng = stream(17, "maze", seed);
        auto [grid, m] = generate_maze(rng);
        REQUIRE(grid.walls.size() == 5);
        CHECK_NOTHROW(validate_grid(grid));
        CHECK(all_cells_reachable(grid));
        CHECK_FALSE((grid.goal_col == 10 && grid.goal_row == 10));
        for (const Rect& r : m.walls) {
            CHECK(point_rect_distance(m.goal, r) >= robot_radius);
            bool vertical = (r.x1 - r.x0) == 2.0;
            bool horizontal = (r.y1 - r.y0) == 2.0;
            CHECK((vertical || horizontal));
        }
        CHECK_FALSE(collides(m, m.start));
        CHECK(m.start.x == 200.0);
        CHECK(m.start.y == 200.0);
    }
}

TEST_CASE("maze sets are deterministic and per-maze seeded") {
    MazeSet a = generate_maze_set(7, 5);
    MazeSet b = generate_maze_set(7, 5);
    CHECK(maze_set_to_json(a) == maze_set_to_json(b));
    MazeSet shorter = generate_maze_set(7, 3);
    for (int i = 0; i < 3; ++i)
        CHECK(grid_to_json(a.grids[i]) == grid_to_json(shorter.grids[i]));
    MazeSet other = generate_maze_set(8, 3);
    bool all_equal = true;
    for (int i = 0; i < 3; ++i)
        if (grid_to_json(other.grids[i]) != grid_to_json(a.grids[i]))
            all_equal = false;
    CHECK_FALSE(all_equal);
}
