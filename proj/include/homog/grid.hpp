#pragma once

#include <array>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "homog/common.hpp"

namespace homog {

/// Uniform periodic grid on the unit space-time cell Y = [0,1)^{d+1}.
/// Node ordering is time-major, then lexicographic in space:
///   d=1: index = it*n_space + i1
///   d=2: index = (it*n_space + i1)*n_space + i2
struct SpaceTimeTorusGrid {
    int d = 1;
    int n_space = 0;
    int n_time = 0;
    double h_space = 0.0;
    double h_time = 0.0;

    std::size_t n_space_nodes() const {
        std::size_t n = static_cast<std::size_t>(n_space);
        return d == 1 ? n : n * n;
    }
    std::size_t n_nodes() const { return n_space_nodes() * static_cast<std::size_t>(n_time); }

    /// Row-major dims with time slowest, matching the node ordering.
    std::vector<int> dims() const {
        std::vector<int> v{n_time, n_space};
        if (d == 2) v.push_back(n_space);
        return v;
    }

    /// Axis convention: 0..d-1 spatial, d = time.
    int axis_size(int axis) const { return axis == d ? n_time : n_space; }
    double axis_h(int axis) const { return axis == d ? h_time : h_space; }

    /// `spatial` must have room for 2 entries regardless of d.
    void decompose(std::size_t node, int* spatial, int* time_index) const {
        if (d == 1) {
            *time_index = static_cast<int>(node / n_space);
            spatial[0] = static_cast<int>(node % n_space);
            spatial[1] = 0;
        } else {
            spatial[1] = static_cast<int>(node % n_space);
            std::size_t rest = node / n_space;
            spatial[0] = static_cast<int>(rest % n_space);
            *time_index = static_cast<int>(rest / n_space);
        }
    }

    std::size_t compose(const int* spatial, int time_index) const {
        if (d == 1)
            return static_cast<std::size_t>(time_index) * n_space + spatial[0];
        return (static_cast<std::size_t>(time_index) * n_space + spatial[0]) * n_space + spatial[1];
    }

    /// Neighbor of `node` shifted by `step` along `axis` with periodic wrap.
    std::size_t shift(std::size_t node, int axis, int step) const {
        int sp[2];
        int it;
        decompose(node, sp, &it);
        int n = axis_size(axis);
        int wrapped = ((axis == d ? it : sp[axis]) + step) % n;
        if (wrapped < 0) wrapped += n;
        if (axis == d) it = wrapped; else sp[axis] = wrapped;
        return compose(sp, it);
    }

    double node_coord(std::size_t node, int axis) const {
        int sp[2];
        int it;
        decompose(node, sp, &it);
        return axis == d ? it * h_time : sp[axis] * h_space;
    }

    bool operator==(const SpaceTimeTorusGrid& o) const {
        return d == o.d && n_space == o.n_space && n_time == o.n_time;
    }
};

inline SpaceTimeTorusGrid build_grid(int d, int n_space, int n_time) {
    if (d != 1 && d != 2) throw Error("unsupported dimension: d must be 1 or 2");
    if (n_space < 4 || n_time < 4) throw Error("grid too small: n_space and n_time must be >= 4");
    SpaceTimeTorusGrid g;
    g.d = d;
    g.n_space = n_space;
    g.n_time = n_time;
    g.h_space = 1.0 / n_space;
    g.h_time = 1.0 / n_time;
    return g;
}

/// Real samples at grid nodes for a tensor-valued quantity.
/// Storage is component-major: values[c*n_nodes + node]; the component
/// index flattens `shape` row-major. Values are treated as immutable
/// once a solver hands the function out.
struct GridFunction {
    SpaceTimeTorusGrid grid;
    std::vector<std::size_t> shape;   // empty = scalar
    std::vector<double> values;

    static GridFunction zeros(const SpaceTimeTorusGrid& g, std::vector<std::size_t> shape = {}) {
        GridFunction f;
        f.grid = g;
        f.shape = std::move(shape);
        f.values.assign(f.n_comp() * g.n_nodes(), 0.0);
        return f;
    }

    std::size_t n_comp() const {
        std::size_t c = 1;
        for (std::size_t s : shape) c *= s;
        return c;
    }

    std::size_t comp_index(std::initializer_list<std::size_t> idx) const {
        std::size_t flat = 0;
        std::size_t k = 0;
        for (std::size_t i : idx) flat = flat * shape[k++] + i;
        return flat;
    }

    std::span<double> comp(std::size_t c) {
        return {values.data() + c * grid.n_nodes(), grid.n_nodes()};
    }
    std::span<const double> comp(std::size_t c) const {
        return {values.data() + c * grid.n_nodes(), grid.n_nodes()};
    }

    double& at(std::size_t c, std::size_t node) { return values[c * grid.n_nodes() + node]; }
    double at(std::size_t c, std::size_t node) const { return values[c * grid.n_nodes() + node]; }

    bool finite() const { return all_finite(values.data(), values.size()); }
};

} // namespace homog
