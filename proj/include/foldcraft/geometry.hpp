#pragma once

#include <cmath>

namespace foldcraft {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::sqrt(x * x + y * y); }

    bool operator==(const Vec2&) const = default;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    Vec2 xy() const { return {x, y}; }

    bool operator==(const Vec3&) const = default;
};

// 2D affine map p' = M p + t. Rotation angles follow the image convention:
// x right, y down, positive angle turns +x toward +y.
struct Affine {
    double m00 = 1.0, m01 = 0.0;
    double m10 = 0.0, m11 = 1.0;
    double tx = 0.0, ty = 0.0;

    Vec2 apply(const Vec2& p) const {
        return {m00 * p.x + m01 * p.y + tx, m10 * p.x + m11 * p.y + ty};
    }

    Affine inverse() const {
        const double det = m00 * m11 - m01 * m10;
        const double i00 = m11 / det, i01 = -m01 / det;
        const double i10 = -m10 / det, i11 = m00 / det;
        return {i00, i01, i10, i11, -(i00 * tx + i01 * ty), -(i10 * tx + i11 * ty)};
    }

    // Composition: first this, then next.
    Affine then(const Affine& n) const {
        return {n.m00 * m00 + n.m01 * m10, n.m00 * m01 + n.m01 * m11,
                n.m10 * m00 + n.m11 * m10, n.m10 * m01 + n.m11 * m11,
                n.m00 * tx + n.m01 * ty + n.tx, n.m10 * tx + n.m11 * ty + n.ty};
    }

    static Affine identity() { return {}; }

    static Affine translation(double dx, double dy) { return {1, 0, 0, 1, dx, dy}; }

    // Rotate by theta about c, then scale by s about c.
    static Affine rotate_scale_about(const Vec2& c, double theta, double s) {
        const double co = std::cos(theta) * s;
        const double si = std::sin(theta) * s;
        return {co, -si, si, co, c.x - (co * c.x - si * c.y), c.y - (si * c.x + co * c.y)};
    }
};

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    return a;
}

}  // namespace foldcraft
