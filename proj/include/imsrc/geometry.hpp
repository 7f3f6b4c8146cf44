#ifndef IMSRC_GEOMETRY_HPP
#define IMSRC_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace imsrc {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 identity_rotation();
Mat3 rotation_from_quaternion(double w, double x, double y, double z);
Vec3 apply_rotation(const Mat3& r, const Vec3& v);
bool is_orthogonal(const Mat3& r, double tol = 1e-10);

/// Cuboid room. Wall absorption order: x=0, x=Lx, y=0, y=Ly, z=0, z=Lz.
struct Room {
    Vec3 dims;
    std::array<double, 6> absorption{};

    bool contains_strictly(const Vec3& p) const {
        return p.x > 0 && p.x < dims.x && p.y > 0 && p.y < dims.y && p.z > 0 && p.z < dims.z;
    }
    /// Pressure reflection coefficient of wall w (energy convention).
    double reflection_coefficient(int w) const { return std::sqrt(1.0 - absorption[w]); }
};

void validate_room(const Room& room);

struct MicArray {
    std::vector<Vec3> positions;
    std::string label;

    Vec3 center() const;
};

void validate_array(const MicArray& array);

/// One virtual source: mirror index q, sign pattern eps, and the derived
/// position eps .* src + 2 q .* dims, with the product of the reflection
/// coefficients of every wall hit (with multiplicity) as amplitude.
struct ImageSource {
    std::array<int, 3> q{};
    std::array<int, 3> eps{1, 1, 1};
    Vec3 position;
    double amplitude = 1.0;
    int order = 0;
};

struct ImageSourceSet {
    std::vector<ImageSource> sources;
    Room room;
    Vec3 src;
    int max_order = 0;
};

struct Scenario {
    Room room;
    Vec3 src;
    MicArray array;
    std::uint64_t rng_seed = 0;
    double c = 343.0;
};

void validate_scenario(const Scenario& s);

/// All image sources of reflection order <= max_order, sorted by
/// (order, q, eps). Throws InvalidInput if src is on or outside a wall.
ImageSourceSet enumerate_image_sources(const Room& room, const Vec3& src, int max_order);

/// Keeps sources within c*t_max of every microphone and farther than
/// eps_excl from all of them (the observable set).
ImageSourceSet observable_subset(const ImageSourceSet& iss, const MicArray& array, double t_max,
                                 double c, double eps_excl);

constexpr double kEm32Radius = 0.042;

/// Spherical 32-capsule array with the em32 layout, rotated then translated.
MicArray make_em32_array(const Vec3& center, double radius = kEm32Radius,
                         const Mat3& rotation = identity_rotation());

/// Fallback layout: 32 points of a Fibonacci sphere.
MicArray make_fibonacci_array(const Vec3& center, double radius = kEm32Radius,
                              const Mat3& rotation = identity_rotation(), int count = 32);

} // namespace imsrc

#endif
