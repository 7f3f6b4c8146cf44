#include "imsrc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "imsrc/errors.hpp"

namespace imsrc {

Mat3 identity_rotation() {
    return {{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
}

Mat3 rotation_from_quaternion(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (n < 1e-12) throw InvalidInput("rotation_from_quaternion: zero quaternion");
    w /= n;
    x /= n;
    y /= n;
    z /= n;
    Mat3 r;
    r[0] = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)};
    r[1] = {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)};
    r[2] = {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
    return r;
}

Vec3 apply_rotation(const Mat3& r, const Vec3& v) {
    return {r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z};
}

bool is_orthogonal(const Mat3& r, double tol) {
    // max |R^T R - I|
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += r[k][i] * r[k][j];
            if (std::abs(s - (i == j ? 1.0 : 0.0)) > tol) return false;
        }
    }
    return true;
}

void validate_room(const Room& room) {
    if (!(room.dims.x > 0 && room.dims.y > 0 && room.dims.z > 0) || !room.dims.finite())
        throw InvalidInput("room dimensions must be positive and finite");
    for (double a : room.absorption)
        if (!(a >= 0.0 && a < 1.0)) throw InvalidInput("wall absorption must lie in [0,1)");
}

Vec3 MicArray::center() const {
    Vec3 c;
    for (const Vec3& p : positions) c += p;
    return positions.empty() ? c : c / static_cast<double>(positions.size());
}

void validate_array(const MicArray& array) {
    if (array.positions.empty()) throw InvalidInput("microphone array is empty");
    for (std::size_t i = 0; i < array.positions.size(); ++i) {
        if (!array.positions[i].finite()) throw InvalidInput("non-finite microphone position");
        for (std::size_t j = i + 1; j < array.positions.size(); ++j)
            if (distance(array.positions[i], array.positions[j]) == 0.0)
                throw InvalidInput("duplicate microphone positions");
    }
}

void validate_scenario(const Scenario& s) {
    validate_room(s.room);
    validate_array(s.array);
    if (!s.room.contains_strictly(s.src)) throw InvalidInput("source must be strictly inside the room");
    const Vec3 c = s.array.center();
    const double clearance =
        std::min({c.x, s.room.dims.x - c.x, c.y, s.room.dims.y - c.y, c.z, s.room.dims.z - c.z});
    if (clearance < 0.25) throw InvalidInput("array center must be at least 0.25 m from every wall");
    if (distance(s.src, c) < 1.0)
        throw InvalidInput("source must be at least 1 m from the array center");
    if (!(s.c > 0.0)) throw InvalidInput("speed of sound must be positive");
}

namespace {

// 1-D mirror image along one axis: position eps*s + 2*q*L lies in cell
// j = 2q (eps=+1) or 2q-1 (eps=-1); |j| is the number of reflections and the
// walls hit alternate starting from the wall the unfolded path crosses first.
struct AxisImage {
    int q;
    int eps;
    int order;
    int hits_lo; // wall at coordinate 0
    int hits_hi; // wall at coordinate L
};

void axis_images_of_order(int n, std::vector<AxisImage>& out) {
    out.clear();
    if (n == 0) {
        out.push_back({0, 1, 0, 0, 0});
        return;
    }
    const auto make = [&](int q, int eps) {
        const int cell = (eps == 1) ? 2 * q : 2 * q - 1;
        AxisImage im{q, eps, std::abs(cell), 0, 0};
        if (cell > 0) {
            im.hits_hi = (cell + 1) / 2;
            im.hits_lo = cell / 2;
        } else {
            im.hits_lo = (-cell + 1) / 2;
            im.hits_hi = -cell / 2;
        }
        out.push_back(im);
    };
    if (n % 2 == 0) { // eps = +1, |2q| = n
        make(n / 2, 1);
        make(-n / 2, 1);
    } else { // eps = -1, |2q-1| = n
        make((1 + n) / 2, -1);
        make((1 - n) / 2, -1);
    }
}

} // namespace

ImageSourceSet enumerate_image_sources(const Room& room, const Vec3& src, int max_order) {
    validate_room(room);
    if (max_order < 0) throw InvalidInput("max_order must be nonnegative");
    if (!room.contains_strictly(src))
        throw InvalidInput("source must be strictly inside the room");

    const std::array<double, 3> refl_lo = {room.reflection_coefficient(0),
                                           room.reflection_coefficient(2),
                                           room.reflection_coefficient(4)};
    const std::array<double, 3> refl_hi = {room.reflection_coefficient(1),
                                           room.reflection_coefficient(3),
                                           room.reflection_coefficient(5)};

    // Per-axis images grouped by 1-D order, then combined with
    // n_x + n_y + n_z <= max_order.
    std::array<std::vector<std::vector<AxisImage>>, 3> per_axis;
    for (int axis = 0; axis < 3; ++axis) {
        per_axis[axis].resize(max_order + 1);
        for (int n = 0; n <= max_order; ++n) axis_images_of_order(n, per_axis[axis][n]);
    }

    ImageSourceSet set;
    set.room = room;
    set.src = src;
    set.max_order = max_order;
    for (int nx = 0; nx <= max_order; ++nx) {
        for (int ny = 0; ny + nx <= max_order; ++ny) {
            for (int nz = 0; nz + ny + nx <= max_order; ++nz) {
                for (const AxisImage& ix : per_axis[0][nx]) {
                    for (const AxisImage& iy : per_axis[1][ny]) {
                        for (const AxisImage& iz : per_axis[2][nz]) {
                            ImageSource s;
                            s.q = {ix.q, iy.q, iz.q};
                            s.eps = {ix.eps, iy.eps, iz.eps};
                            s.order = nx + ny + nz;
                            s.position = {ix.eps * src.x + 2.0 * ix.q * room.dims.x,
                                          iy.eps * src.y + 2.0 * iy.q * room.dims.y,
                                          iz.eps * src.z + 2.0 * iz.q * room.dims.z};
                            double a = 1.0;
                            const std::array<const AxisImage*, 3> ims = {&ix, &iy, &iz};
                            for (int axis = 0; axis < 3; ++axis) {
                                for (int h = 0; h < ims[axis]->hits_lo; ++h) a *= refl_lo[axis];
                                for (int h = 0; h < ims[axis]->hits_hi; ++h) a *= refl_hi[axis];
                            }
                            s.amplitude = a;
                            set.sources.push_back(s);
                        }
                    }
                }
            }
        }
    }
    std::sort(set.sources.begin(), set.sources.end(),
              [](const ImageSource& a, const ImageSource& b) {
                  return std::tie(a.order, a.q, a.eps) < std::tie(b.order, b.q, b.eps);
              });
    return set;
}

ImageSourceSet observable_subset(const ImageSourceSet& iss, const MicArray& array, double t_max,
                                 double c, double eps_excl) {
    if (!(t_max > 0.0)) {
        ImageSourceSet empty;
        empty.room = iss.room;
        empty.src = iss.src;
        empty.max_order = iss.max_order;
        return empty;
    }
    if (eps_excl < 0.0) throw InvalidInput("eps_excl must be nonnegative");
    ImageSourceSet out;
    out.room = iss.room;
    out.src = iss.src;
    out.max_order = iss.max_order;
    const double reach = c * t_max;
    for (const ImageSource& s : iss.sources) {
        bool keep = true;
        for (const Vec3& mic : array.positions) {
            const double d = distance(s.position, mic);
            if (d > reach || d <= eps_excl) {
                keep = false;
                break;
            }
        }
        if (keep) out.sources.push_back(s);
    }
    return out;
}

namespace {

// mh acoustics em32 Eigenmike capsule angles (colatitude, azimuth) in degrees,
// from the vendor's published layout.
constexpr std::array<std::array<double, 2>, 32> kEm32Angles = {{
    {69.0, 0.0},    {90.0, 32.0},   {111.0, 0.0},   {90.0, 328.0},  {32.0, 0.0},
    {55.0, 45.0},   {90.0, 69.0},   {125.0, 45.0},  {148.0, 0.0},   {125.0, 315.0},
    {90.0, 291.0},  {55.0, 315.0},  {21.0, 91.0},   {58.0, 90.0},   {121.0, 90.0},
    {159.0, 89.0},  {69.0, 180.0},  {90.0, 212.0},  {111.0, 180.0}, {90.0, 148.0},
    {32.0, 180.0},  {55.0, 225.0},  {90.0, 249.0},  {125.0, 225.0}, {148.0, 180.0},
    {125.0, 135.0}, {90.0, 111.0},  {55.0, 135.0},  {21.0, 269.0},  {58.0, 270.0},
    {122.0, 270.0}, {159.0, 271.0},
}};

MicArray sphere_array(const Vec3& center, double radius, const Mat3& rotation,
                      const std::vector<Vec3>& dirs, const std::string& label) {
    if (!(radius > 0.0)) throw InvalidInput("array radius must be positive");
    if (!is_orthogonal(rotation)) throw InvalidInput("rotation matrix is not orthogonal");
    MicArray array;
    array.label = label;
    array.positions.reserve(dirs.size());
    for (const Vec3& d : dirs) array.positions.push_back(center + apply_rotation(rotation, d * radius));
    return array;
}

} // namespace

MicArray make_em32_array(const Vec3& center, double radius, const Mat3& rotation) {
    constexpr double deg = 3.14159265358979323846 / 180.0;
    std::vector<Vec3> dirs;
    dirs.reserve(kEm32Angles.size());
    for (const auto& a : kEm32Angles) {
        const double th = a[0] * deg;
        const double ph = a[1] * deg;
        dirs.push_back({std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)});
    }
    return sphere_array(center, radius, rotation, dirs, "em32");
}

MicArray make_fibonacci_array(const Vec3& center, double radius, const Mat3& rotation, int count) {
    if (count < 1) throw InvalidInput("array needs at least one microphone");
    constexpr double golden = 2.39996322972865332;
    std::vector<Vec3> dirs;
    dirs.reserve(count);
    for (int i = 0; i < count; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double ph = golden * i;
        dirs.push_back({r * std::cos(ph), r * std::sin(ph), z});
    }
    return sphere_array(center, radius, rotation, dirs, "fib" + std::to_string(count));
}

} // namespace imsrc
