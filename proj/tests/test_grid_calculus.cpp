#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "homog/calculus.hpp"
#include "homog/grid.hpp"

using namespace homog;

namespace {

GridFunction sample_scalar(const SpaceTimeTorusGrid& g, auto&& fn) {
    GridFunction f = GridFunction::zeros(g);
    for (std::size_t node = 0; node < g.n_nodes(); ++node) {
        int sp[2];
        int it;
        g.decompose(node, sp, &it);
        double y1 = sp[0] * g.h_space;
        double y2 = g.d == 2 ? sp[1] * g.h_space : 0.0;
        double s = it * g.h_time;
        f.values[node] = fn(y1, y2, s);
    }
    return f;
}

} // namespace

TEST_CASE("build_grid validates and fills spacings") {
    auto g = build_grid(1, 64, 64);
    CHECK(g.n_nodes() == 64u * 64u);
    CHECK(g.h_space == doctest::Approx(1.0 / 64).epsilon(1e-15));

    auto g2 = build_grid(2, 16, 16);
    CHECK(g2.n_nodes() == 16u * 16u * 16u);

    CHECK_THROWS_WITH_AS(build_grid(3, 16, 16), doctest::Contains("unsupported dimension"), Error);
    CHECK_THROWS_AS(build_grid(1, 3, 16), Error);
    CHECK_THROWS_AS(build_grid(1, 16, 2), Error);
}

TEST_CASE("node ordering is time-major then lexicographic space") {
    auto g = build_grid(2, 4, 5);
    int sp[2] = {1, 2};
    std::size_t node = g.compose(sp, 3);
    CHECK(node == (3u * 4u + 1u) * 4u + 2u);
    int sp2[2];
    int it;
    g.decompose(node, sp2, &it);
    CHECK(sp2[0] == 1);
    CHECK(sp2[1] == 2);
    CHECK(it == 3);
    CHECK(g.shift(node, 0, 3) == g.compose(std::array<int, 2>{0, 2}.data(), 3));
    CHECK(g.shift(node, 2, -4) == g.compose(sp, 4));
}

TEST_CASE("gradient of single Fourier mode") {
    auto g = build_grid(1, 64, 64);
    auto f = sample_scalar(g, [](double y, double, double) { return std::sin(two_pi * y); });

    for (Scheme scheme : {Scheme::spectral, Scheme::finite_difference}) {
        auto df = gradient(f, GradientAxes::spatial_only, scheme);
        REQUIRE(df.shape == std::vector<std::size_t>{1});
        // value at y=0, any s
        const double tol = scheme == Scheme::spectral ? 1e-12 : sqr(1.0 / 64) * 50;
        CHECK(df.values[0] == doctest::Approx(two_pi).epsilon(tol));
    }
}

TEST_CASE("gradient of constant is exactly zero and gradient is linear") {
    auto g = build_grid(1, 16, 8);
    auto c = sample_scalar(g, [](double, double, double) { return 4.25; });
    for (Scheme scheme : {Scheme::spectral, Scheme::finite_difference}) {
        auto dc = gradient(c, GradientAxes::space_time, scheme);
        CHECK(max_abs(dc.values) <= 1e-13);
    }

    auto f1 = sample_scalar(g, [](double y, double, double s) { return std::sin(two_pi * y) * std::cos(two_pi * s); });
    auto f2 = sample_scalar(g, [](double y, double, double s) { return std::cos(two_pi * (y + 2 * s)); });
    GridFunction combo = f1;
    for (std::size_t i = 0; i < combo.values.size(); ++i)
        combo.values[i] = 2.0 * f1.values[i] - 3.0 * f2.values[i];
    auto d_combo = gradient(combo, GradientAxes::space_time);
    auto d1 = gradient(f1, GradientAxes::space_time);
    auto d2 = gradient(f2, GradientAxes::space_time);
    double worst = 0.0;
    for (std::size_t i = 0; i < d_combo.values.size(); ++i)
        worst = std::max(worst, std::abs(d_combo.values[i] - (2.0 * d1.values[i] - 3.0 * d2.values[i])));
    CHECK(worst <= 1e-12);
}

TEST_CASE("time derivative at a critical point is O(h^2) or better") {
    auto g = build_grid(1, 8, 64);
    auto f = sample_scalar(g, [](double, double, double s) { return std::cos(two_pi * s); });
    for (Scheme scheme : {Scheme::spectral, Scheme::finite_difference}) {
        auto df = derivative(f, 1, scheme);  // axis d = 1 is time for d=1
        CHECK(std::abs(df.values[0]) <= sqr(1.0 / 64) * 10);
    }
}

TEST_CASE("cell_mean: constant, mean-zero mode, half-energy identity") {
    auto g = build_grid(1, 32, 16);
    auto c = sample_scalar(g, [](double, double, double) { return 3.0; });
    CHECK(cell_mean(c)[0] == doctest::Approx(3.0).epsilon(1e-15));

    auto f = sample_scalar(g, [](double y, double, double) { return std::sin(two_pi * y); });
    CHECK(std::abs(cell_mean(f)[0]) <= 1e-15);

    auto f2 = sample_scalar(g, [](double y, double, double) { return sqr(std::sin(two_pi * y)); });
    CHECK(cell_mean(f2)[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("cell_mean of gradient vanishes for arbitrary fields") {
    auto g = build_grid(2, 8, 8);
    // deterministic pseudo-random field
    auto f = sample_scalar(g, [](double y1, double y2, double s) {
        return std::sin(two_pi * (y1 + 0.3)) * std::cos(two_pi * 2 * y2) + 0.7 * std::cos(two_pi * (s - y1)) +
               0.1 * std::sin(two_pi * (3 * y1 - 2 * y2 + s));
    });
    for (Scheme scheme : {Scheme::spectral, Scheme::finite_difference}) {
        auto df = gradient(f, GradientAxes::space_time, scheme);
        for (double m : cell_mean(df)) CHECK(std::abs(m) <= 1e-14);
    }
}

TEST_CASE("poisson_invert_d1 single modes") {
    auto g = build_grid(1, 32, 32);
    auto b = sample_scalar(g, [](double y, double, double) { return std::sin(two_pi * y); });
    auto f = poisson_invert_d1(b);
    double worst = 0.0;
    for (std::size_t node = 0; node < g.n_nodes(); ++node) {
        double y = g.node_coord(node, 0);
        worst = std::max(worst, std::abs(f.values[node] + std::sin(two_pi * y) / (4 * pi * pi)));
    }
    CHECK(worst <= 1e-14);

    auto zero = GridFunction::zeros(g);
    auto fz = poisson_invert_d1(zero);
    CHECK(max_abs(fz.values) == 0.0);

    auto b2 = sample_scalar(g, [](double y, double, double s) { return std::cos(two_pi * y) * std::cos(two_pi * s); });
    auto f2 = poisson_invert_d1(b2);
    worst = 0.0;
    for (std::size_t node = 0; node < g.n_nodes(); ++node)
        worst = std::max(worst, std::abs(f2.values[node] + b2.values[node] / (8 * pi * pi)));
    CHECK(worst <= 1e-14);
}

TEST_CASE("poisson_invert_d1 rejects non-mean-zero input") {
    auto g = build_grid(1, 16, 16);
    auto b = sample_scalar(g, [](double y, double, double) { return std::sin(two_pi * y) + 0.01; });
    CHECK_THROWS_AS(poisson_invert_d1(b), Error);
}

TEST_CASE("laplacian inverts poisson_invert_d1 for arbitrary mean-zero data") {
    auto g = build_grid(1, 24, 20);
    auto b = sample_scalar(g, [](double y, double, double s) {
        return std::sin(two_pi * y) * std::cos(two_pi * 2 * s) + 0.4 * std::cos(two_pi * (y + s)) +
               0.05 * std::sin(two_pi * (5 * y - 3 * s));
    });
    remove_mean(b);
    for (Scheme scheme : {Scheme::spectral, Scheme::finite_difference}) {
        auto f = poisson_invert_d1(b, scheme);
        for (double m : cell_mean(f)) CHECK(std::abs(m) <= 1e-14);
        auto lf = laplacian_d1(f, scheme);
        double err = 0.0;
        for (std::size_t i = 0; i < lf.values.size(); ++i) err += sqr(lf.values[i] - b.values[i]);
        double rel = std::sqrt(err) / norm2(b.values);
        CHECK(rel <= 1e-10);
    }
}

TEST_CASE("spectral gradient reproduces the exact symbol 2 pi k") {
    auto g = build_grid(1, 32, 8);
    for (int k : {1, 2, 5, 7}) {
        auto f = sample_scalar(g, [k](double y, double, double) { return std::cos(two_pi * k * y); });
        auto df = derivative(f, 0, Scheme::spectral);
        // peak of derivative is 2 pi k at sin's extremum
        CHECK(max_abs(df.values) == doctest::Approx(two_pi * k).epsilon(1e-12));
    }
}
