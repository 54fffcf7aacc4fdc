#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "tryon/dataset.hpp"

namespace tryon {
namespace {

using Rgb = std::array<float, 3>;

/// splitmix64; the generator only needs reproducible streams, not quality.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::uint64_t state_;
};

struct Vec2 {
    double x, y;
};

struct Capsule {
    Vec2 a, b;
    double radius;
    // Returns (distance, t along the segment, signed side).
    std::array<double, 3> query(Vec2 p) const {
        const double dx = b.x - a.x, dy = b.y - a.y;
        const double len2 = dx * dx + dy * dy;
        double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
        t = std::clamp(t, 0.0, 1.0);
        const double qx = a.x + t * dx - p.x, qy = a.y + t * dy - p.y;
        const double side = (dx * (p.y - a.y) - dy * (p.x - a.x)) / std::sqrt(len2);
        return {std::sqrt(qx * qx + qy * qy), t, side};
    }
};

struct Arm {
    Capsule upper, fore;
    int label;
    float pose_code;
};

/// Garment outline in canonical coordinates (u, v) in [0, 1]^2: a trapezoid that
/// narrows toward the waist with a round neckline at the top centre.
bool inside_garment(double u, double v) {
    if (v < 0 || v > 1) return false;
    const double half = 0.5 - 0.12 * v;
    if (std::abs(u - 0.5) > half) return false;
    const double nu = (u - 0.5) / 0.17, nv = v / 0.2;
    return nu * nu + nv * nv > 1.0;
}

struct Garment {
    Rgb base, stripe;
    double period;  // canonical u units
    double phase;
    Rgb texture(double u, double /*v*/) const {
        const double s = std::fmod(u / period + phase, 1.0);
        return s < 0.5 ? stripe : base;
    }
};

/// Placement of the canonical garment into an image: x = left + (u + shear * v) * width.
struct Placement {
    double left, top, width, height, shear;
    Vec2 to_canonical(Vec2 p) const {
        const double v = (p.y - top) / height;
        const double u = (p.x - left) / width - shear * v;
        return {u, v};
    }
    Vec2 to_image(double u, double v) const { return {left + (u + shear * v) * width, top + v * height}; }
};

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
    return {static_cast<float>(a[0] + (b[0] - a[0]) * t), static_cast<float>(a[1] + (b[1] - a[1]) * t),
            static_cast<float>(a[2] + (b[2] - a[2]) * t)};
}

Rgb random_color(Stream& rng, double lo, double hi) {
    return {static_cast<float>(rng.uniform(lo, hi)), static_cast<float>(rng.uniform(lo, hi)),
            static_cast<float>(rng.uniform(lo, hi))};
}

struct Labels {
    int background, face, clothes, bottom, left_arm, right_arm;
};

struct PixelSample {
    Rgb color;
    int label;
    std::array<float, 3> pose;
};

struct Scene {
    Labels labels;
    Rgb background, skin, hair, bottom_color;
    Garment garment;
    Placement torso;
    Vec2 head_center;
    double head_rx, head_ry;
    double neck_half_width, neck_top, neck_bottom;
    double bottom_top, bottom_span, bottom_half_width_top, bottom_half_width_bottom, bottom_center;
    std::vector<Arm> arms;  // painted in order, later ones on top

    PixelSample sample(Vec2 p) const {
        PixelSample s{background, labels.background, {-1.0f, -1.0f, -1.0f}};
        // bottom garment (trousers)
        if (p.y >= bottom_top) {
            const double t = std::clamp((p.y - bottom_top) / bottom_span, 0.0, 1.0);
            const double half = bottom_half_width_top + (bottom_half_width_bottom - bottom_half_width_top) * t;
            if (std::abs(p.x - bottom_center) <= half) {
                s = {bottom_color, labels.bottom,
                     {-0.5f, static_cast<float>((p.x - bottom_center) / half), static_cast<float>(2 * t - 1)}};
            }
        }
        if (std::abs(p.x - head_center.x) <= neck_half_width && p.y >= neck_top && p.y <= neck_bottom) {
            s = {skin, labels.face, {0.5f, static_cast<float>((p.x - head_center.x) / neck_half_width), 1.0f}};
        }
        const Vec2 g = torso.to_canonical(p);
        if (inside_garment(g.x, g.y)) {
            s = {garment.texture(g.x, g.y), labels.clothes,
                 {0.0f, static_cast<float>(2 * g.x - 1), static_cast<float>(2 * g.y - 1)}};
        }
        const double hx = (p.x - head_center.x) / head_rx, hy = (p.y - head_center.y) / head_ry;
        if (hx * hx + hy * hy <= 1.0) {
            s = {hy < -0.25 ? hair : skin, labels.face, {0.5f, static_cast<float>(hx), static_cast<float>(hy)}};
        }
        for (const auto& arm : arms) {
            const Capsule* parts[2] = {&arm.upper, &arm.fore};
            for (int k = 0; k < 2; ++k) {
                const auto q = parts[k]->query(p);
                if (q[0] <= parts[k]->radius) {
                    const double along = 0.5 * (k + q[1]);
                    s = {skin, arm.label,
                         {arm.pose_code, static_cast<float>(2 * along - 1),
                          static_cast<float>(std::clamp(q[2] / parts[k]->radius, -1.0, 1.0))}};
                }
            }
        }
        return s;
    }
};

Arm make_arm(Vec2 shoulder, double upper_angle, double fore_angle, double upper_len, double fore_len,
             double radius, int label, float code) {
    // Angles are measured from straight down; positive turns toward +x.
    const Vec2 elbow{shoulder.x + std::sin(upper_angle) * upper_len, shoulder.y + std::cos(upper_angle) * upper_len};
    const Vec2 hand{elbow.x + std::sin(fore_angle) * fore_len, elbow.y + std::cos(fore_angle) * fore_len};
    return {{shoulder, elbow, radius}, {elbow, hand, radius}, label, code};
}

constexpr double deg(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

SynthDataset generate_synthetic_dataset(std::uint64_t seed, int n, Resolution res, const LabelPalette& palette,
                                        const SynthOptions& options) {
    require(n >= 0, "generate_synthetic_dataset: n must be non-negative");
    require(res.height >= 8 && res.width >= 8, "generate_synthetic_dataset: resolution too small");
    const Labels labels{palette.id_of("background"), palette.id_of("face-hair"), palette.clothing_channel(),
                        palette.id_of("bottom"),     palette.id_of("left-arm"),  palette.id_of("right-arm")};
    const double H = res.height, W = res.width;
    const double unit = H / 64.0;  // geometry is authored at 64 px height
    constexpr int kSuper = 3;

    SynthDataset out;
    out.records.reserve(static_cast<std::size_t>(n));
    for (int index = 0; index < n; ++index) {
        Stream rng(Stream(Stream(seed).next() ^ static_cast<std::uint64_t>(index)).next());

        Scene scene;
        scene.labels = labels;
        scene.background = random_color(rng, 0.55, 0.9);
        scene.skin = lerp({0.75f, 0.35f, 0.1f}, {0.2f, -0.2f, -0.45f}, rng.uniform());
        scene.hair = random_color(rng, -0.95, -0.6);
        scene.bottom_color = random_color(rng, -0.8, -0.3);

        // Garment: dark base with light stripes so luminance alternates strongly.
        const Rgb base = random_color(rng, -0.8, -0.2);
        const Rgb stripe = {std::min(1.0f, base[0] + 1.1f), std::min(1.0f, base[1] + 1.1f),
                            std::min(1.0f, base[2] + 1.1f)};
        const double product_width = 0.74 * W, product_height = 0.62 * H;
        const double product_period_px =
            rng.uniform(options.min_stripe_period, options.max_stripe_period) * unit;
        scene.garment = {base, stripe, product_period_px / product_width, rng.uniform()};

        const double sx = rng.uniform(0.72, 0.92), sy = rng.uniform(0.8, 0.98);
        const double torso_w = product_width * sx, torso_h = product_height * sy;
        const double torso_left = (W - torso_w) / 2 + rng.uniform(-0.06, 0.06) * W;
        const double torso_top = 0.24 * H + rng.uniform(-0.04, 0.04) * H;
        scene.torso = {torso_left, torso_top, torso_w, torso_h, rng.uniform(-0.08, 0.08)};

        const Vec2 top_mid = scene.torso.to_image(0.5, 0.0);
        scene.head_center = {top_mid.x, torso_top - 0.1 * H};
        scene.head_rx = 0.13 * W;
        scene.head_ry = 0.1 * H;
        scene.neck_half_width = 0.06 * W;
        scene.neck_top = scene.head_center.y;
        scene.neck_bottom = torso_top + 0.12 * torso_h;
        const Vec2 waist_l = scene.torso.to_image(0.12, 1.0), waist_r = scene.torso.to_image(0.88, 1.0);
        scene.bottom_top = waist_l.y - 1.0 * unit;
        scene.bottom_span = std::max(1.0, H - scene.bottom_top);
        scene.bottom_center = 0.5 * (waist_l.x + waist_r.x);
        scene.bottom_half_width_top = 0.5 * (waist_r.x - waist_l.x) + 0.5 * unit;
        scene.bottom_half_width_bottom = scene.bottom_half_width_top + 2.0 * unit;

        const bool occluded = rng.uniform() < options.occlusion_probability;
        const int occluding = occluded ? (rng.uniform() < 0.5 ? 0 : 1) : -1;
        const double radius = 2.3 * unit;
        const double upper_len = 0.22 * H, fore_len = 0.2 * H;
        SynthMeta meta;
        meta.product_stripe_period = product_period_px;
        meta.person_stripe_period = product_period_px * sx;
        meta.occluded = occluded;

        std::vector<Arm> front;
        for (int side = 0; side < 2; ++side) {
            const double dir = side == 0 ? -1.0 : 1.0;  // outward along x
            const Vec2 shoulder = scene.torso.to_image(side == 0 ? 0.04 : 0.96, 0.05);
            const int label = side == 0 ? labels.left_arm : labels.right_arm;
            const float code = side == 0 ? 0.75f : 1.0f;
            if (side == occluding) {
                // Arm hangs inward in front of the torso side.
                const double ua = deg(rng.uniform(6, 14));
                const double fa = ua + deg(rng.uniform(4, 12));
                const Vec2 s{shoulder.x - dir * 1.5 * radius, shoulder.y};
                front.push_back(make_arm(s, -dir * ua, -dir * fa, upper_len, fore_len, radius, label, code));
                meta.occluding_arm = label;
            } else {
                const double ua = deg(rng.uniform(14, 32));
                const double fa = ua + deg(rng.uniform(-10, 15));
                scene.arms.push_back(make_arm(shoulder, dir * ua, dir * fa, upper_len, fore_len, radius, label, code));
            }
        }
        for (auto& a : front) scene.arms.push_back(a);

        // Render person (supersampled colour, centre-sample labels and pose).
        auto person = torch::empty({3, res.height, res.width});
        auto pose = torch::empty({3, res.height, res.width});
        auto labels_img = torch::empty({1, res.height, res.width}, torch::kLong);
        auto pa = person.accessor<float, 3>();
        auto qa = pose.accessor<float, 3>();
        auto la = labels_img.accessor<int64_t, 3>();
        for (int i = 0; i < res.height; ++i) {
            for (int j = 0; j < res.width; ++j) {
                const auto centre = scene.sample({j + 0.5, i + 0.5});
                la[0][i][j] = centre.label;
                for (int c = 0; c < 3; ++c) qa[c][i][j] = centre.pose[static_cast<std::size_t>(c)];
                std::array<double, 3> acc{};
                for (int sy_ = 0; sy_ < kSuper; ++sy_) {
                    for (int sx_ = 0; sx_ < kSuper; ++sx_) {
                        const auto s = scene.sample({j + (sx_ + 0.5) / kSuper, i + (sy_ + 0.5) / kSuper});
                        for (int c = 0; c < 3; ++c) acc[static_cast<std::size_t>(c)] += s.color[static_cast<std::size_t>(c)];
                    }
                }
                for (int c = 0; c < 3; ++c) pa[c][i][j] = static_cast<float>(acc[static_cast<std::size_t>(c)] / (kSuper * kSuper));
            }
        }

        // Product view: garment centred on a white backdrop.
        const Placement product{(W - product_width) / 2, (H - product_height) / 2, product_width, product_height, 0.0};
        auto clothes = torch::ones({3, res.height, res.width});
        auto mask = torch::zeros({1, res.height, res.width});
        auto ca = clothes.accessor<float, 3>();
        auto ma = mask.accessor<float, 3>();
        for (int i = 0; i < res.height; ++i) {
            for (int j = 0; j < res.width; ++j) {
                const Vec2 g0 = product.to_canonical({j + 0.5, i + 0.5});
                ma[0][i][j] = inside_garment(g0.x, g0.y) ? 1.0f : 0.0f;
                std::array<double, 3> acc{};
                for (int sy_ = 0; sy_ < kSuper; ++sy_) {
                    for (int sx_ = 0; sx_ < kSuper; ++sx_) {
                        const Vec2 g = product.to_canonical({j + (sx_ + 0.5) / kSuper, i + (sy_ + 0.5) / kSuper});
                        const Rgb col = inside_garment(g.x, g.y) ? scene.garment.texture(g.x, g.y) : Rgb{1, 1, 1};
                        for (int c = 0; c < 3; ++c) acc[static_cast<std::size_t>(c)] += col[static_cast<std::size_t>(c)];
                    }
                }
                for (int c = 0; c < 3; ++c) ca[c][i][j] = static_cast<float>(acc[static_cast<std::size_t>(c)] / (kSuper * kSuper));
            }
        }

        SampleRecord r;
        r.pair_id = "synth-" + std::to_string(seed) + "-" + std::to_string(index);
        r.person = person;
        r.pose = pose;
        r.clothes = clothes;
        r.clothes_mask = mask;
        r.parse = labels_to_onehot(labels_img, palette.num_channels()).squeeze(0);
        std::tie(r.agnostic_image, r.agnostic_parse) = make_agnostic(r.person, r.parse, palette);
        out.records.push_back(std::move(r));
        out.meta.push_back(meta);
    }
    return out;
}

}  // namespace tryon
