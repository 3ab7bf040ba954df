#include "vfr/data/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>

#include "vfr/error.hpp"

namespace vfr {

namespace {

using Rng = std::mt19937_64;

struct Rgb {
    double r = 0, g = 0, b = 0;
};

struct Pt {
    double x = 0, y = 0;
};

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
bool chance(Rng& rng, double p) { return uniform(rng, 0.0, 1.0) < p; }
int pick(Rng& rng, int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

Rgb scaled(Rgb c, double f) { return {c.r * f, c.g * f, c.b * f}; }
Rgb jittered(Rng& rng, Rgb c, double amount) {
    return {c.r + uniform(rng, -amount, amount), c.g + uniform(rng, -amount, amount),
            c.b + uniform(rng, -amount, amount)};
}

// Segment parameter of the closest point and distance to it.
struct SegmentHit {
    double t = 0, dist = 0, side = 0;
};

SegmentHit project(Pt p, Pt a, Pt b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double cx = a.x + t * dx - p.x, cy = a.y + t * dy - p.y;
    const double cross = dx * (p.y - a.y) - dy * (p.x - a.x);
    return {t, std::sqrt(cx * cx + cy * cy), cross};
}

struct Capsule {
    Pt a, b;
    double r = 1;
    bool contains(Pt p) const { return project(p, a, b).dist <= r; }
};

struct Ellipse {
    Pt c;
    double rx = 1, ry = 1;
    bool contains(Pt p) const {
        const double dx = (p.x - c.x) / rx, dy = (p.y - c.y) / ry;
        return dx * dx + dy * dy <= 1.0;
    }
};

// Vertical trapezoid: top edge [xl0, xr0] at y0, bottom edge [xl1, xr1] at y1.
struct Trapezoid {
    double y0 = 0, y1 = 1, xl0 = 0, xr0 = 1, xl1 = 0, xr1 = 1;

    // Local garment coordinates (s across, t down), both in [0, 1] inside.
    std::optional<std::pair<double, double>> local(Pt p) const {
        if (p.y < y0 || p.y > y1) return std::nullopt;
        const double t = (p.y - y0) / (y1 - y0);
        const double xl = xl0 + t * (xl1 - xl0), xr = xr0 + t * (xr1 - xr0);
        if (p.x < xl || p.x > xr) return std::nullopt;
        return std::make_pair((p.x - xl) / (xr - xl), t);
    }
    bool contains(Pt p) const { return local(p).has_value(); }
};

// A top garment: texture is a function of garment-local (s, t), so the flat
// product shot and the worn version show the same pattern.
struct Garment {
    std::uint8_t kind = label(BodyPart::upper_clothes);
    Rgb base, accent;
    int pattern = 0;  // 0 solid, 1 horizontal stripes, 2 vertical stripes, 3 checks, 4 two-tone yoke
    double frequency = 4;
    double neck_width = 0.3;  // fraction of the top edge
    double neck_depth = 0.1;  // fraction of the height
    double length = 0;        // extension below the hips, in body units
    double flare = 0;
    bool sleeves = false;

    bool in_neckline(double s, double t) const {
        const double dx = (s - 0.5) / (neck_width / 2), dy = t / neck_depth;
        return dx * dx + dy * dy < 1.0;
    }

    Rgb color(double s, double t) const {
        switch (pattern) {
            case 1: return (static_cast<int>(std::floor(t * frequency * 2)) % 2) ? accent : base;
            case 2: return (static_cast<int>(std::floor(s * frequency)) % 2) ? accent : base;
            case 3:
                return ((static_cast<int>(std::floor(s * frequency)) + static_cast<int>(std::floor(t * frequency))) % 2)
                           ? accent
                           : base;
            case 4: return t < 0.3 ? accent : base;
            default: return base;
        }
    }
};

struct Canvas {
    RasterImage image;
    ParseMap parse;
    DenseposeMap dense;

    Canvas(int w, int h, Rgb background) : image(w, h, 3), parse(w, h), dense(w, h) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) set_color(x, y, background);
    }

    void set_color(int x, int y, Rgb c) {
        image.at(x, y, 0) = static_cast<float>(to_byte(c.r));
        image.at(x, y, 1) = static_cast<float>(to_byte(c.g));
        image.at(x, y, 2) = static_cast<float>(to_byte(c.b));
    }

    // Paints every pixel whose centre passes `inside`. A null dense part keeps
    // the IUV underneath (clothing over skin); part 0 clears it.
    void paint(const std::function<bool(Pt)>& inside, std::uint8_t cls, const std::function<Rgb(Pt)>& color,
               std::optional<std::uint8_t> dense_part = std::nullopt,
               const std::function<std::pair<double, double>(Pt)>& uv = {}) {
        for (int y = 0; y < image.height(); ++y) {
            for (int x = 0; x < image.width(); ++x) {
                const Pt p{x + 0.5, y + 0.5};
                if (!inside(p)) continue;
                set_color(x, y, color(p));
                parse.at(x, y) = cls;
                if (!dense_part) continue;
                dense.part(x, y) = *dense_part;
                if (*dense_part == 0 || !uv) {
                    dense.u(x, y) = dense.v(x, y) = 0.0f;
                } else {
                    const auto [u, v] = uv(p);
                    dense.u(x, y) = static_cast<float>(std::round(std::clamp(u, 0.0, 1.0) * 255.0) / 255.0);
                    dense.v(x, y) = static_cast<float>(std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0);
                }
            }
        }
    }
};

std::function<Rgb(Pt)> flat(Rgb c) {
    return [c](Pt) { return c; };
}

std::function<std::pair<double, double>(Pt)> capsule_uv(const Capsule& c) {
    return [c](Pt p) {
        const SegmentHit h = project(p, c.a, c.b);
        const double across = 0.5 + 0.5 * std::clamp(h.side / (c.r * std::hypot(c.b.x - c.a.x, c.b.y - c.a.y) + 1e-9),
                                                      -1.0, 1.0);
        return std::make_pair(across, h.t);
    };
}

struct Arm {
    Capsule upper, fore;
    Pt shoulder, elbow, wrist;
    bool occluded = false;
};

// All geometry of one doll, sampled once and shared by the worn and
// re-dressed renders.
struct Doll {
    double S = 1, X = 1, cx = 0;  // vertical and horizontal body units
    Rgb skin, hair, background;
    bool female = false;
    bool long_hair = false;
    double shoulder_y = 0, shoulder_w = 0, hip_y = 0, hip_w = 0;
    Ellipse head, hair_cap;
    Trapezoid long_hair_block;
    Capsule neck;
    Trapezoid torso;
    std::array<Arm, 2> arms;  // 0: subject's right (image left), 1: subject's left
    std::array<Capsule, 2> thighs, shins;
    std::array<Ellipse, 2> shoes;
    Rgb shoe_color, bottom_color;
    int bottom = 0;  // 0 pants, 1 shorts, 2 skirt
    Garment top;
    // Decorations.
    bool hat = false, sunglasses = false, scarf = false, gloves = false, beard = false, tattoo = false,
         birth_mark = false, socks = false;
    Rgb hat_color, scarf_color, glove_color, sock_color;
    Pt tattoo_at, birth_mark_at;
    int tattoo_arm = 0;
};

Rgb skin_tone(Rng& rng) {
    static const std::array<Rgb, 5> tones = {
        {{236, 200, 170}, {214, 170, 130}, {180, 130, 95}, {140, 95, 65}, {95, 62, 42}}};
    return jittered(rng, tones[pick(rng, 5)], 8);
}

Rgb hair_tone(Rng& rng) {
    static const std::array<Rgb, 5> tones = {{{30, 22, 18}, {70, 45, 25}, {120, 80, 40}, {190, 160, 95}, {140, 140, 140}}};
    return jittered(rng, tones[pick(rng, 5)], 6);
}

Rgb saturated(Rng& rng) {
    return {uniform(rng, 20, 235), uniform(rng, 20, 235), uniform(rng, 20, 235)};
}

Garment sample_garment(Rng& rng, bool white, std::uint8_t kind) {
    Garment g;
    g.kind = kind;
    if (white) {
        const double w = uniform(rng, 244, 252);
        g.base = {w, w, w};
        g.accent = g.base;
        g.pattern = 0;
    } else {
        g.base = saturated(rng);
        g.accent = saturated(rng);
        g.pattern = pick(rng, 5);
        g.frequency = uniform(rng, 3, 6);
    }
    g.neck_width = uniform(rng, 0.25, 0.45);
    g.neck_depth = uniform(rng, 0.05, 0.18);
    return g;
}

Arm make_arm(Pt shoulder, int side, double S, Rng& rng, bool occluded, const Trapezoid& torso, double hip_y,
             double cx) {
    Arm arm;
    arm.occluded = occluded;
    arm.shoulder = shoulder;
    const double upper_len = uniform(rng, 10.0, 11.5) * S;
    const double a1 = uniform(rng, 5.0, 30.0) * std::numbers::pi / 180.0;
    arm.elbow = {shoulder.x + side * upper_len * std::sin(a1), shoulder.y + upper_len * std::cos(a1)};
    if (occluded) {
        // The forearm folds inward so the hand rests behind the torso.
        arm.wrist = {cx + side * uniform(rng, 0.5, 3.0) * S, hip_y - uniform(rng, 4.0, 7.0) * S};
        if (!torso.contains(arm.wrist)) arm.wrist = {cx, (torso.y0 + torso.y1) / 2};
    } else {
        const double fore_len = uniform(rng, 8.5, 9.5) * S;
        const double a2 = std::clamp(a1 + uniform(rng, -20.0, 15.0) * std::numbers::pi / 180.0, -0.1, 0.7);
        arm.wrist = {arm.elbow.x + side * fore_len * std::sin(a2), arm.elbow.y + fore_len * std::cos(a2)};
    }
    arm.upper = {shoulder, arm.elbow, 2.1 * S};
    arm.fore = {arm.elbow, arm.wrist, 1.7 * S};
    return arm;
}

Doll sample_doll(Rng& rng, int w, int h, const SynthOptions& options) {
    Doll d;
    d.S = h / 64.0;
    const double S = d.S;
    // Horizontal body units follow the width so the doll fits any aspect.
    d.X = w / 48.0;
    const double X = d.X;
    d.cx = w / 2.0 + uniform(rng, -1.5, 1.5) * X;
    d.female = chance(rng, options.female_ratio);
    d.skin = skin_tone(rng);
    d.hair = hair_tone(rng);
    d.background = {uniform(rng, 150, 235), uniform(rng, 150, 235), uniform(rng, 150, 235)};
    d.long_hair = d.female ? chance(rng, 0.8) : chance(rng, 0.1);

    d.shoulder_y = 18.0 * S;
    d.shoulder_w = uniform(rng, d.female ? 14.5 : 16.0, d.female ? 17.0 : 19.0) * X;
    d.hip_y = uniform(rng, 37.0, 39.0) * S;
    d.hip_w = uniform(rng, d.female ? 13.0 : 11.5, d.female ? 15.0 : 13.5) * X;

    d.head = {{d.cx, 9.5 * S}, 4.6 * X, 5.8 * S};
    d.hair_cap = {{d.cx, 8.2 * S}, 5.3 * X, 6.0 * S};
    d.long_hair_block = {7.0 * S, uniform(rng, 21.0, 25.0) * S, d.cx - 5.6 * X, d.cx + 5.6 * X, d.cx - 6.2 * X,
                         d.cx + 6.2 * X};
    d.neck = {{d.cx, 13.5 * S}, {d.cx, 18.5 * S}, 2.2 * X};
    d.torso = {d.shoulder_y - 1.0 * S, d.hip_y + 1.0 * S, d.cx - d.shoulder_w / 2, d.cx + d.shoulder_w / 2,
               d.cx - d.hip_w / 2, d.cx + d.hip_w / 2};

    const bool occlude = options.force_occluded_arm || chance(rng, options.occluded_arm_prob);
    const int occluded_side = pick(rng, 2);
    for (int i = 0; i < 2; ++i) {
        const int side = i == 0 ? -1 : 1;
        const Pt shoulder{d.cx + side * (d.shoulder_w / 2 - 1.3 * X), d.shoulder_y + 0.5 * S};
        d.arms[i] = make_arm(shoulder, side, S, rng, occlude && occluded_side == i, d.torso, d.hip_y, d.cx);
    }

    for (int i = 0; i < 2; ++i) {
        const int side = i == 0 ? -1 : 1;
        const double spread = uniform(rng, 0.0, 3.0) * X;
        const Pt hip{d.cx + side * d.hip_w / 4, d.hip_y};
        const Pt knee{hip.x + side * spread * 0.5, 50.0 * S};
        const Pt ankle{hip.x + side * spread, 58.5 * S};
        d.thighs[i] = {hip, knee, 2.9 * X};
        d.shins[i] = {knee, ankle, 2.2 * X};
        d.shoes[i] = {{ankle.x + side * 0.6 * X, ankle.y + 2.0 * S}, 2.8 * X, 1.7 * S};
    }
    d.shoe_color = scaled(saturated(rng), 0.5);
    d.bottom_color = scaled(saturated(rng), 0.7);
    d.bottom = d.female ? pick(rng, 3) : (chance(rng, 0.8) ? 0 : 1);

    const double kind_roll = uniform(rng, 0, 1);
    std::uint8_t kind = label(BodyPart::upper_clothes);
    if (d.female && kind_roll < 0.2) {
        kind = label(BodyPart::dress);
    } else if (kind_roll > 0.8) {
        kind = label(BodyPart::coat);
    }
    d.top = sample_garment(rng, false, kind);
    if (kind == label(BodyPart::dress)) {
        d.top.length = uniform(rng, 8.0, 11.0);
        d.top.flare = uniform(rng, 2.0, 4.0);
    } else if (kind == label(BodyPart::coat)) {
        d.top.length = uniform(rng, 2.0, 4.0);
        d.top.sleeves = true;
    }

    const double p = options.decoration_prob;
    d.hat = chance(rng, p);
    d.sunglasses = chance(rng, p);
    d.scarf = chance(rng, p);
    d.gloves = chance(rng, p);
    d.beard = !d.female && chance(rng, p * 2);
    d.tattoo = chance(rng, p);
    d.birth_mark = chance(rng, p);
    d.socks = d.bottom != 0 && chance(rng, 0.5);
    d.hat_color = saturated(rng);
    d.scarf_color = saturated(rng);
    d.glove_color = scaled(saturated(rng), 0.6);
    d.sock_color = saturated(rng);
    d.tattoo_arm = pick(rng, 2);
    {
        const Arm& arm = d.arms[d.tattoo_arm];
        const double t = uniform(rng, 0.3, 0.7);
        d.tattoo_at = {arm.shoulder.x + t * (arm.elbow.x - arm.shoulder.x),
                       arm.shoulder.y + t * (arm.elbow.y - arm.shoulder.y)};
    }
    d.birth_mark_at = {d.cx + uniform(rng, -2.5, 2.5) * X, uniform(rng, 9.5, 12.0) * S};
    return d;
}

// Worn placement of a garment over the torso; the flat shot uses a canonical
// placement centred in the frame.
Trapezoid worn_quad(const Doll& d, const Garment& g) {
    const double X = d.X;
    return {d.shoulder_y - 1.0 * d.S,
            d.hip_y + (1.0 + g.length) * d.S,
            d.cx - d.shoulder_w / 2 - 0.4 * X,
            d.cx + d.shoulder_w / 2 + 0.4 * X,
            d.cx - d.hip_w / 2 - (0.4 + g.flare) * X,
            d.cx + d.hip_w / 2 + (0.4 + g.flare) * X};
}

// Garment pixels (minus the neckline) with a darker one-pixel outline.
struct GarmentShape {
    Trapezoid quad;
    const Garment* garment = nullptr;

    bool inside(Pt p) const {
        const auto st = quad.local(p);
        return st && !garment->in_neckline(st->first, st->second);
    }
    Rgb color(Pt p) const {
        const auto st = quad.local(p);
        const Rgb c = garment->color(st->first, st->second);
        const bool edge = !inside({p.x - 1, p.y}) || !inside({p.x + 1, p.y}) || !inside({p.x, p.y - 1}) ||
                          !inside({p.x, p.y + 1});
        return edge ? scaled(c, 0.6) : c;
    }
};

Trapezoid flat_quad(const Doll& d, const Garment& g, int w, int h) {
    const double height = d.hip_y - d.shoulder_y + (2.0 + g.length) * d.S;
    const double scale = std::min(1.0, (h - 4.0) / height);
    const double top = (h - height * scale) / 2.0;
    const double half_top = 9.5 * d.X, half_bottom = (7.5 + g.flare) * d.X;
    const double mid = w / 2.0;
    return {top, top + height * scale, mid - half_top, mid + half_top, mid - half_bottom, mid + half_bottom};
}

std::uint8_t side_label(int i, BodyPart subject_right, BodyPart subject_left) {
    return label(i == 0 ? subject_right : subject_left);
}

void draw_arm(Canvas& c, const Doll& d, int i, const Garment* sleeve) {
    const Arm& arm = d.arms[i];
    const std::uint8_t cls = side_label(i, BodyPart::right_arm, BodyPart::left_arm);
    const std::uint8_t upper_part = i == 0 ? dense_part::right_upper_arm : dense_part::left_upper_arm;
    const std::uint8_t lower_part = i == 0 ? dense_part::right_lower_arm : dense_part::left_lower_arm;
    const std::uint8_t hand_part = i == 0 ? dense_part::right_hand : dense_part::left_hand;
    const Capsule upper = arm.upper, fore = arm.fore;
    c.paint([&](Pt p) { return upper.contains(p); }, cls, flat(d.skin), upper_part, capsule_uv(upper));
    c.paint([&](Pt p) { return fore.contains(p); }, cls, flat(d.skin), lower_part, capsule_uv(fore));
    if (sleeve) {
        const Capsule su{upper.a, upper.b, upper.r + 0.3 * d.X};
        const Capsule sf{fore.a, {fore.a.x + 0.8 * (fore.b.x - fore.a.x), fore.a.y + 0.8 * (fore.b.y - fore.a.y)},
                         fore.r + 0.3 * d.X};
        const Rgb col = scaled(sleeve->base, 0.9);
        c.paint([&](Pt p) { return su.contains(p) || sf.contains(p); }, sleeve->kind, flat(col));
    }
    const Ellipse hand{arm.wrist, 1.6 * d.X, 1.6 * d.S};
    if (!arm.occluded) {
        c.paint([&](Pt p) { return hand.contains(p); }, cls, flat(d.skin), hand_part, [hand](Pt p) {
            return std::make_pair(0.5 + (p.x - hand.c.x) / (2 * hand.rx), 0.5 + (p.y - hand.c.y) / (2 * hand.ry));
        });
    }
    if (d.tattoo && d.tattoo_arm == i && !sleeve) {
        const Ellipse ink{d.tattoo_at, 0.9 * d.X, 1.1 * d.S};
        c.paint([&](Pt p) { return ink.contains(p); }, cls, flat({40, 45, 70}));
    }
    if (d.gloves && !arm.occluded) {
        c.paint([&](Pt p) { return hand.contains(p); }, label(BodyPart::gloves), flat(d.glove_color));
    }
}

// Renders the doll wearing `top`; `background` fills everything else.
void render(Canvas& c, const Doll& d, const Garment& top) {
    const double S = d.S, X = d.X;
    if (d.long_hair) {
        const Trapezoid block = d.long_hair_block;
        c.paint([&](Pt p) { return block.contains(p); }, label(BodyPart::hair), flat(d.hair), dense_part::none);
    }
    for (int i = 0; i < 2; ++i) {
        if (d.arms[i].occluded) draw_arm(c, d, i, top.sleeves ? &top : nullptr);
    }
    for (int i = 0; i < 2; ++i) {
        const std::uint8_t leg = side_label(i, BodyPart::right_leg, BodyPart::left_leg);
        const Capsule thigh = d.thighs[i], shin = d.shins[i];
        c.paint([&](Pt p) { return thigh.contains(p); }, leg, flat(d.skin),
                i == 0 ? dense_part::right_upper_leg : dense_part::left_upper_leg, capsule_uv(thigh));
        c.paint([&](Pt p) { return shin.contains(p); }, leg, flat(d.skin),
                i == 0 ? dense_part::right_lower_leg : dense_part::left_lower_leg, capsule_uv(shin));
        if (d.socks) {
            const Capsule sock{{shin.b.x + 0.4 * (shin.a.x - shin.b.x), shin.b.y + 0.4 * (shin.a.y - shin.b.y)},
                               shin.b, shin.r + 0.2 * X};
            c.paint([&](Pt p) { return sock.contains(p); }, label(BodyPart::socks), flat(d.sock_color));
        }
        const Ellipse shoe = d.shoes[i];
        c.paint([&](Pt p) { return shoe.contains(p); }, side_label(i, BodyPart::right_shoe, BodyPart::left_shoe),
                flat(d.shoe_color), i == 0 ? dense_part::right_foot : dense_part::left_foot, [shoe](Pt p) {
                    return std::make_pair(0.5 + (p.x - shoe.c.x) / (2 * shoe.rx),
                                          0.5 + (p.y - shoe.c.y) / (2 * shoe.ry));
                });
    }

    // Lower garment.
    const Trapezoid hips{d.hip_y - 1.0 * S, d.hip_y + 4.0 * S, d.cx - d.hip_w / 2 - 0.4 * X,
                         d.cx + d.hip_w / 2 + 0.4 * X, d.cx - d.hip_w / 2 - 0.6 * X, d.cx + d.hip_w / 2 + 0.6 * X};
    if (d.bottom == 2) {
        const Trapezoid skirt{d.hip_y - 1.0 * S, 49.0 * S, hips.xl0, hips.xr0, hips.xl0 - 3.0 * X, hips.xr0 + 3.0 * X};
        c.paint([&](Pt p) { return skirt.contains(p); }, label(BodyPart::skirt), flat(d.bottom_color));
    } else {
        const double reach = d.bottom == 0 ? 0.92 : 0.45;
        std::array<Capsule, 2> legs;
        for (int i = 0; i < 2; ++i) {
            const Capsule& t = d.thighs[i];
            const Capsule& s = d.shins[i];
            if (d.bottom == 0) {
                legs[i] = {t.a, {s.a.x + reach * (s.b.x - s.a.x), s.a.y + reach * (s.b.y - s.a.y)}, t.r + 0.3 * X};
            } else {
                legs[i] = {t.a, {t.a.x + 0.6 * (t.b.x - t.a.x), t.a.y + 0.6 * (t.b.y - t.a.y)}, t.r + 0.4 * X};
            }
        }
        c.paint([&](Pt p) { return hips.contains(p) || legs[0].contains(p) || legs[1].contains(p); },
                label(BodyPart::pants), flat(d.bottom_color));
    }

    // Torso skin and neck.
    const Trapezoid torso = d.torso;
    const Capsule neck = d.neck;
    c.paint([&](Pt p) { return neck.contains(p); }, label(BodyPart::torso_skin), flat(d.skin), dense_part::torso,
            [&](Pt p) { return std::make_pair(0.5 + (p.x - d.cx) / (2 * d.shoulder_w), 0.0); });
    c.paint([&](Pt p) { return torso.contains(p); }, label(BodyPart::torso_skin), flat(d.skin), dense_part::torso,
            [&](Pt p) {
                const auto st = torso.local(p);
                return *st;
            });

    // Upper garment.
    const GarmentShape shape{worn_quad(d, top), &top};
    c.paint([&](Pt p) { return shape.inside(p); }, top.kind, [&](Pt p) { return shape.color(p); });

    for (int i = 0; i < 2; ++i) {
        if (!d.arms[i].occluded) draw_arm(c, d, i, top.sleeves ? &top : nullptr);
    }

    if (d.scarf) {
        const Trapezoid scarf{15.5 * S, 19.0 * S, d.cx - 3.8 * X, d.cx + 3.8 * X, d.cx - 4.2 * X, d.cx + 4.2 * X};
        c.paint([&](Pt p) { return scarf.contains(p); }, label(BodyPart::scarf), flat(d.scarf_color));
    }

    // Head.
    const Ellipse cap = d.hair_cap, head = d.head;
    c.paint([&](Pt p) { return cap.contains(p); }, label(BodyPart::hair), flat(d.hair), dense_part::none);
    c.paint([&](Pt p) { return head.contains(p); }, label(BodyPart::face), flat(d.skin), dense_part::head_right,
            [&](Pt p) {
                return std::make_pair(0.5 + (p.x - head.c.x) / (2 * head.rx), 0.5 + (p.y - head.c.y) / (2 * head.ry));
            });
    c.paint([&](Pt p) { return head.contains(p) && p.x >= head.c.x; }, label(BodyPart::face), flat(d.skin),
            dense_part::head_left, [&](Pt p) {
                return std::make_pair(0.5 + (p.x - head.c.x) / (2 * head.rx), 0.5 + (p.y - head.c.y) / (2 * head.ry));
            });
    const double fringe = head.c.y - 2.8 * S;
    c.paint([&](Pt p) { return head.contains(p) && p.y < fringe; }, label(BodyPart::hair), flat(d.hair),
            dense_part::none);
    if (d.beard) {
        c.paint([&](Pt p) { return head.contains(p) && p.y > head.c.y + 2.2 * S; }, label(BodyPart::face),
                flat(scaled(d.hair, 0.9)));
    }
    if (d.birth_mark) {
        const Ellipse mark{d.birth_mark_at, 0.5 * X, 0.5 * S};
        c.paint([&](Pt p) { return mark.contains(p); }, label(BodyPart::face), flat({70, 40, 30}));
    }
    if (d.sunglasses) {
        const Trapezoid glasses{7.6 * S, 9.8 * S, d.cx - 3.9 * X, d.cx + 3.9 * X, d.cx - 3.7 * X, d.cx + 3.7 * X};
        c.paint([&](Pt p) { return glasses.contains(p); }, label(BodyPart::sunglasses), flat({15, 15, 20}));
    }
    if (d.hat) {
        const Ellipse brim{{d.cx, 4.4 * S}, 6.2 * X, 1.4 * S};
        const Ellipse crown{{d.cx, 3.4 * S}, 4.4 * X, 3.0 * S};
        c.paint([&](Pt p) { return (brim.contains(p) || crown.contains(p)) && p.y < 5.8 * S; }, label(BodyPart::hat),
                flat(d.hat_color), dense_part::none);
    }
}

PoseKeypoints doll_pose(const Doll& d) {
    PoseKeypoints pose;
    auto put = [&](Joint j, Pt p) { pose[j] = {p.x, p.y, 1.0}; };
    put(Joint::nose, {d.cx, d.head.c.y + 1.2 * d.S});
    put(Joint::neck, {d.cx, 17.0 * d.S});
    put(Joint::right_eye, {d.cx - 1.9 * d.X, d.head.c.y - 0.8 * d.S});
    put(Joint::left_eye, {d.cx + 1.9 * d.X, d.head.c.y - 0.8 * d.S});
    put(Joint::right_ear, {d.cx - 4.1 * d.X, d.head.c.y});
    put(Joint::left_ear, {d.cx + 4.1 * d.X, d.head.c.y});
    const std::array<std::array<Joint, 3>, 2> arms = {
        {{Joint::right_shoulder, Joint::right_elbow, Joint::right_wrist},
         {Joint::left_shoulder, Joint::left_elbow, Joint::left_wrist}}};
    const std::array<std::array<Joint, 3>, 2> legs = {
        {{Joint::right_hip, Joint::right_knee, Joint::right_ankle},
         {Joint::left_hip, Joint::left_knee, Joint::left_ankle}}};
    for (int i = 0; i < 2; ++i) {
        put(arms[i][0], d.arms[i].shoulder);
        put(arms[i][1], d.arms[i].elbow);
        if (d.arms[i].occluded) {
            pose[arms[i][2]] = {};
        } else {
            put(arms[i][2], d.arms[i].wrist);
        }
        put(legs[i][0], d.thighs[i].a);
        put(legs[i][1], d.thighs[i].b);
        put(legs[i][2], d.shins[i].b);
    }
    return pose;
}

}  // namespace

TryOnSample synth_sample(std::uint64_t seed, int width, int height, const SynthOptions& options) {
    require(width >= 24 && height >= 32, ErrorCode::invalid_input, "synthetic resolution must be at least 32x24");
    Rng rng(seed);
    const Doll doll = sample_doll(rng, width, height, options);

    Garment fresh = sample_garment(rng, chance(rng, options.white_garment_prob), label(BodyPart::upper_clothes));
    // The new garment is always an upper-clothes item; over a dress it keeps
    // the dress silhouette so the lower body stays consistent.
    if (doll.top.kind == label(BodyPart::dress)) {
        fresh.length = doll.top.length;
        fresh.flare = doll.top.flare;
    }

    TryOnSample s;
    s.id = "synth_" + std::to_string(seed);

    Canvas person(width, height, doll.background);
    render(person, doll, doll.top);
    s.person = std::move(person.image);
    s.parse = std::move(person.parse);
    s.densepose = std::move(person.dense);
    s.pose = doll_pose(doll);

    Canvas dressed(width, height, {255, 255, 255});
    render(dressed, doll, fresh);
    s.dressed = std::move(dressed.image);
    s.dressed_parse = std::move(dressed.parse);

    Canvas flat_shot(width, height, {255, 255, 255});
    const GarmentShape shape{flat_quad(doll, fresh, width, height), &fresh};
    flat_shot.paint([&](Pt p) { return shape.inside(p); }, 1, [&](Pt p) { return shape.color(p); });
    s.cloth = std::move(flat_shot.image);
    s.cloth_mask = ClothMask(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) s.cloth_mask.at(x, y) = flat_shot.parse.at(x, y);
    return s;
}

std::vector<TryOnSample> synth_dataset(std::uint64_t first_seed, int count, int width, int height,
                                       const SynthOptions& options) {
    std::vector<TryOnSample> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) out.push_back(synth_sample(first_seed + i, width, height, options));
    return out;
}

}  // namespace vfr
