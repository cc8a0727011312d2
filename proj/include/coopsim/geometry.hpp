#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace coopsim {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double dist(const Vec2& a, const Vec2& b) {
    return std::hypot(b.x - a.x, b.y - a.y);
}

// wrap an angle to (-pi, pi]
inline double wrap_angle(double a) {
    constexpr double kPi = 3.14159265358979323846;
    while (a > kPi) a -= 2.0 * kPi;
    while (a <= -kPi) a += 2.0 * kPi;
    return a;
}

/// Arc-length parameterized polyline with O(log n) point/heading lookup.
class Polyline {
public:
    Polyline() = default;
    explicit Polyline(std::vector<Vec2> pts);

    double length() const { return cum_.empty() ? 0.0 : cum_.back(); }
    std::size_t size() const { return pts_.size(); }
    const std::vector<Vec2>& points() const { return pts_; }

    Vec2 point_at(double s) const;
    // heading of the segment containing s, radians
    double heading_at(double s) const;

    /// Arc length of the closest point on the polyline to p.
    double project(const Vec2& p) const;

private:
    std::size_t segment_index(double s) const;

    std::vector<Vec2> pts_;
    std::vector<double> cum_;       // cumulative arc length per point
    std::vector<double> heading_;   // per segment
};

}  // namespace coopsim
