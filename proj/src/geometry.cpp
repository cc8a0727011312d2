#include "coopsim/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace coopsim {

Polyline::Polyline(std::vector<Vec2> pts) : pts_(std::move(pts)) {
    cum_.reserve(pts_.size());
    cum_.push_back(0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) {
        cum_.push_back(cum_.back() + dist(pts_[i - 1], pts_[i]));
        heading_.push_back(std::atan2(pts_[i].y - pts_[i - 1].y, pts_[i].x - pts_[i - 1].x));
    }
}

std::size_t Polyline::segment_index(double s) const {
    if (pts_.size() < 2) return 0;
    auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    std::size_t idx = static_cast<std::size_t>(it - cum_.begin());
    if (idx == 0) return 0;
    if (idx >= cum_.size()) return cum_.size() - 2;
    return idx - 1;
}

Vec2 Polyline::point_at(double s) const {
    if (pts_.empty()) return {};
    if (pts_.size() == 1) return pts_[0];
    s = std::clamp(s, 0.0, length());
    std::size_t i = segment_index(s);
    double seg = cum_[i + 1] - cum_[i];
    double t = seg > 0.0 ? (s - cum_[i]) / seg : 0.0;
    return {pts_[i].x + t * (pts_[i + 1].x - pts_[i].x),
            pts_[i].y + t * (pts_[i + 1].y - pts_[i].y)};
}

double Polyline::heading_at(double s) const {
    if (heading_.empty()) return 0.0;
    s = std::clamp(s, 0.0, length());
    return heading_[std::min(segment_index(s), heading_.size() - 1)];
}

double Polyline::project(const Vec2& p) const {
    double best_d2 = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
        const Vec2& a = pts_[i];
        const Vec2& b = pts_[i + 1];
        double abx = b.x - a.x, aby = b.y - a.y;
        double ll = abx * abx + aby * aby;
        double t = ll > 0.0 ? ((p.x - a.x) * abx + (p.y - a.y) * aby) / ll : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        double qx = a.x + t * abx - p.x;
        double qy = a.y + t * aby - p.y;
        double d2 = qx * qx + qy * qy;
        if (d2 < best_d2) {
            best_d2 = d2;
            best_s = cum_[i] + t * std::sqrt(ll);
        }
    }
    return best_s;
}

}  // namespace coopsim
