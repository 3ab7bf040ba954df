#include "vfr/preprocess/toy_backends.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "vfr/error.hpp"
#include "vfr/preprocess/ops.hpp"

namespace vfr {

namespace {

int color_bin(const RasterImage& img, int x, int y) {
    constexpr int B = NaiveBayesSegmenter::kBins;
    auto q = [&](int c) {
        const float v = img.at(x, y, img.channels() == 3 ? c : 0);
        return std::clamp(static_cast<int>(v * B / 256.0f), 0, B - 1);
    };
    return (q(0) * B + q(1)) * B + q(2);
}

struct Px {
    int x, y;
};

struct Region {
    std::vector<Px> px;
    int minx = std::numeric_limits<int>::max(), maxx = -1, miny = std::numeric_limits<int>::max(), maxy = -1;
    double sx = 0, sy = 0;

    void add(int x, int y) {
        px.push_back({x, y});
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
        sx += x + 0.5;
        sy += y + 0.5;
    }
    bool empty() const { return px.empty(); }
    double cx() const { return sx / px.size(); }
    double cy() const { return sy / px.size(); }
};

template <typename Pred>
Region region(const ParseMap& p, Pred pred) {
    Region r;
    for (int y = 0; y < p.height(); ++y)
        for (int x = 0; x < p.width(); ++x)
            if (pred(p.at(x, y), x, y)) r.add(x, y);
    return r;
}

bool is_upper_body(std::uint8_t l) { return l == 5 || l == 6 || l == 7 || l == 10 || l == 11; }

}  // namespace

NaiveBayesSegmenter::NaiveBayesSegmenter(int width, int height)
    : width_(width), height_(height),
      position_(static_cast<std::size_t>(kNumParseClasses) * width * height, 0.5),
      color_(static_cast<std::size_t>(kNumParseClasses) * kBins * kBins * kBins, 1.0) {
    require(width > 0 && height > 0, ErrorCode::invalid_input, "segmenter resolution must be positive");
}

void NaiveBayesSegmenter::observe(const RasterImage& img, const ParseMap& parse) {
    const std::size_t plane = static_cast<std::size_t>(width_) * height_;
    const std::size_t bins = kBins * kBins * kBins;
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            const int sx = x * img.width() / width_, sy = y * img.height() / height_;
            const std::uint8_t l = parse.at(sx, sy);
            position_[l * plane + static_cast<std::size_t>(y) * width_ + x] += 1.0;
            color_[l * bins + color_bin(img, sx, sy)] += 1.0;
        }
    }
}

void NaiveBayesSegmenter::finalize() {
    const std::size_t plane = static_cast<std::size_t>(width_) * height_;
    const std::size_t bins = kBins * kBins * kBins;
    // Position: P(class | pixel), normalized over classes at each pixel.
    for (std::size_t i = 0; i < plane; ++i) {
        double total = 0;
        for (int c = 0; c < kNumParseClasses; ++c) total += position_[c * plane + i];
        for (int c = 0; c < kNumParseClasses; ++c) position_[c * plane + i] = std::log(position_[c * plane + i] / total);
    }
    // Color: P(bin | class), normalized over bins for each class.
    for (int c = 0; c < kNumParseClasses; ++c) {
        double total = 0;
        for (std::size_t b = 0; b < bins; ++b) total += color_[c * bins + b];
        for (std::size_t b = 0; b < bins; ++b) color_[c * bins + b] = std::log(color_[c * bins + b] / total);
    }
}

void NaiveBayesSegmenter::fit(const std::vector<TryOnSample>& samples) {
    for (const TryOnSample& s : samples) {
        observe(s.person, s.parse);
        observe(remove_background(s.person, s.parse), s.parse);
    }
    finalize();
}

ParseMap NaiveBayesSegmenter::segment(const RasterImage& img) const {
    require(!img.empty(), ErrorCode::invalid_input, "empty image");
    const std::size_t plane = static_cast<std::size_t>(width_) * height_;
    const std::size_t bins = kBins * kBins * kBins;
    ParseMap out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const int mx = std::min(width_ - 1, x * width_ / img.width());
            const int my = std::min(height_ - 1, y * height_ / img.height());
            const int bin = color_bin(img, x, y);
            int best = 0;
            double best_score = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < kNumParseClasses; ++c) {
                const double s = position_[c * plane + static_cast<std::size_t>(my) * width_ + mx] + color_[c * bins + bin];
                if (s > best_score) {
                    best_score = s;
                    best = c;
                }
            }
            out.at(x, y) = static_cast<std::uint8_t>(best);
        }
    }
    return out;
}

PoseKeypoints pose_from_parse(const ParseMap& p) {
    PoseKeypoints pose;
    const int W = p.width(), H = p.height();
    constexpr double conf = 0.8;
    auto put = [&](Joint j, double x, double y) {
        pose[j] = {std::clamp(x, 0.0, W - 1e-3), std::clamp(y, 0.0, H - 1e-3), conf};
    };

    const Region face = region(p, [](auto l, int, int) { return l == 13; });
    if (!face.empty()) {
        const double fw = face.maxx - face.minx + 1, fh = face.maxy - face.miny + 1;
        put(Joint::nose, face.cx(), face.cy() + 0.15 * fh);
        put(Joint::right_eye, face.cx() - 0.2 * fw, face.cy() - 0.1 * fh);
        put(Joint::left_eye, face.cx() + 0.2 * fw, face.cy() - 0.1 * fh);
        put(Joint::right_ear, face.minx + 0.5, face.cy());
        put(Joint::left_ear, face.maxx + 0.5, face.cy());
    }

    const Region upper = region(p, [](auto l, int, int) { return is_upper_body(l); });
    std::optional<std::pair<double, double>> right_shoulder, left_shoulder;
    if (!upper.empty()) {
        const int ty = upper.miny;
        const Region top = region(p, [&](auto l, int, int y) { return is_upper_body(l) && y <= ty + 1; });
        put(Joint::neck, top.cx(), ty + 1.0);
        for (int y = ty; y <= upper.maxy; ++y) {
            const Region row = region(p, [&](auto l, int, int yy) { return is_upper_body(l) && yy == y; });
            if (row.maxx - row.minx + 1 >= 0.25 * W) {
                right_shoulder = {row.minx + 1.5, y + 0.5};
                left_shoulder = {row.maxx - 0.5, y + 0.5};
                put(Joint::right_shoulder, right_shoulder->first, right_shoulder->second);
                put(Joint::left_shoulder, left_shoulder->first, left_shoulder->second);
                break;
            }
        }
    }

    auto arm = [&](std::uint8_t cls, const std::optional<std::pair<double, double>>& shoulder, Joint elbow,
                   Joint wrist) {
        if (!shoulder) return;
        const Region a = region(p, [&](auto l, int, int) { return l == cls; });
        if (a.empty()) return;
        auto dist = [&](Px q) { return std::hypot(q.x + 0.5 - shoulder->first, q.y + 0.5 - shoulder->second); };
        double far = 0;
        for (Px q : a.px) far = std::max(far, dist(q));
        Region tip, mid;
        for (Px q : a.px) {
            if (dist(q) >= far - 1.5) tip.add(q.x, q.y);
            if (std::abs(dist(q) - far / 2) < 1.0) mid.add(q.x, q.y);
        }
        if (!mid.empty()) put(elbow, mid.cx(), mid.cy());
        put(wrist, tip.cx(), tip.cy());
    };
    arm(15, right_shoulder, Joint::right_elbow, Joint::right_wrist);
    arm(14, left_shoulder, Joint::left_elbow, Joint::left_wrist);

    const Region lower = region(p, [](auto l, int, int) { return l == 9 || l == 12 || l == 16 || l == 17; });
    if (!lower.empty()) {
        const int hy = lower.miny;
        const Region band = region(p, [&](auto l, int, int y) {
            return (l == 9 || l == 12 || l == 16 || l == 17) && y <= hy + 2;
        });
        const double cx = band.cx(), half = (band.maxx - band.minx + 1) / 2.0;
        put(Joint::right_hip, cx - half / 2, hy + 0.5);
        put(Joint::left_hip, cx + half / 2, hy + 0.5);
        auto leg = [&](bool right, Joint knee, Joint ankle) {
            const std::uint8_t skin = right ? 17 : 16, shoe = right ? 19 : 18;
            const Region l = region(p, [&](auto v, int x, int) {
                const bool side = right ? x + 0.5 < cx : x + 0.5 >= cx;
                return v == skin || (side && (v == 9 || v == 8));
            });
            if (l.empty()) return;
            const Region s = region(p, [&](auto v, int, int) { return v == shoe; });
            const double ay = s.empty() ? l.maxy + 0.5 : s.miny - 0.5;
            const Region arow = region(p, [&](auto v, int x, int y) {
                const bool side = right ? x + 0.5 < cx : x + 0.5 >= cx;
                return (v == skin || (side && (v == 9 || v == 8))) && std::abs(y + 0.5 - ay) <= 1.0;
            });
            const double ky = (hy + ay) / 2;
            const Region krow = region(p, [&](auto v, int x, int y) {
                const bool side = right ? x + 0.5 < cx : x + 0.5 >= cx;
                return (v == skin || (side && v == 9)) && std::abs(y + 0.5 - ky) <= 1.0;
            });
            put(knee, krow.empty() ? l.cx() : krow.cx(), ky);
            put(ankle, arow.empty() ? l.cx() : arow.cx(), ay);
        };
        leg(true, Joint::right_knee, Joint::right_ankle);
        leg(false, Joint::left_knee, Joint::left_ankle);
    }
    return pose;
}

DenseposeMap densepose_from_parse(const ParseMap& p) {
    namespace dp = dense_part;
    const int W = p.width(), H = p.height();
    DenseposeMap out(W, H);
    const Region body = region(p, [](auto l, int, int) { return l != 0; });
    if (body.empty()) return out;
    const Region face = region(p, [](auto l, int, int) { return l == 13; });
    const double head_cx = face.empty() ? body.cx() : face.cx();
    const Region lower = region(p, [](auto l, int, int) { return l == 9 || l == 16 || l == 17; });
    const double leg_cx = lower.empty() ? body.cx() : lower.cx();
    const double knee_y = lower.empty() ? 0 : (lower.miny + lower.maxy) / 2.0;
    const Region right_arm = region(p, [](auto l, int, int) { return l == 15; });
    const Region left_arm = region(p, [](auto l, int, int) { return l == 14; });
    auto arm_mid = [](const Region& r) { return r.empty() ? 0.0 : (r.miny + r.maxy) / 2.0; };

    std::vector<std::uint8_t> parts(static_cast<std::size_t>(W) * H, 0);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const std::uint8_t l = p.at(x, y);
            const double px = x + 0.5, py = y + 0.5;
            std::uint8_t part = dp::none;
            if (is_upper_body(l)) {
                part = dp::torso;
            } else if (l == 13) {
                part = px < head_cx ? dp::head_right : dp::head_left;
            } else if (l == 15) {
                part = py < arm_mid(right_arm) ? dp::right_upper_arm : dp::right_lower_arm;
            } else if (l == 14) {
                part = py < arm_mid(left_arm) ? dp::left_upper_arm : dp::left_lower_arm;
            } else if (l == 3) {
                part = px < body.cx() ? dp::right_hand : dp::left_hand;
            } else if (l == 9 || l == 16 || l == 17 || l == 8) {
                const bool right = l == 17 || (l != 16 && px < leg_cx);
                if (py < knee_y) {
                    part = right ? dp::right_upper_leg : dp::left_upper_leg;
                } else {
                    part = right ? dp::right_lower_leg : dp::left_lower_leg;
                }
            } else if (l == 18) {
                part = dp::left_foot;
            } else if (l == 19) {
                part = dp::right_foot;
            }
            parts[static_cast<std::size_t>(y) * W + x] = part;
        }
    }

    std::array<Region, kNumDenseParts> boxes;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (const auto part = parts[static_cast<std::size_t>(y) * W + x]) boxes[part].add(x, y);
    auto quant = [](double v) { return static_cast<float>(std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0); };
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const auto part = parts[static_cast<std::size_t>(y) * W + x];
            if (!part) continue;
            const Region& b = boxes[part];
            out.part(x, y) = part;
            out.u(x, y) = quant((x + 0.5 - b.minx) / (b.maxx - b.minx + 1));
            out.v(x, y) = quant((y + 0.5 - b.miny) / (b.maxy - b.miny + 1));
        }
    }
    return out;
}

namespace {

std::vector<float> border_color(const RasterImage& img) {
    const int C = img.channels();
    std::vector<float> out(C);
    for (int c = 0; c < C; ++c) {
        std::vector<float> v;
        for (int x = 0; x < img.width(); ++x) {
            v.push_back(img.at(x, 0, c));
            v.push_back(img.at(x, img.height() - 1, c));
        }
        for (int y = 0; y < img.height(); ++y) {
            v.push_back(img.at(0, y, c));
            v.push_back(img.at(img.width() - 1, y, c));
        }
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        out[c] = v[v.size() / 2];
    }
    return out;
}

double distance_to(const RasterImage& img, int x, int y, const std::vector<float>& ref) {
    double d = 0;
    for (int c = 0; c < img.channels(); ++c) d = std::max(d, static_cast<double>(std::abs(img.at(x, y, c) - ref[c])));
    return img.range() == PixelRange::signed_unit ? d * 127.5 : d;
}

}  // namespace

std::vector<double> ThresholdClothSegmenter::confidence(const RasterImage& img) const {
    require(!img.empty(), ErrorCode::invalid_input, "empty cloth image");
    const auto ref = border_color(img);
    std::vector<double> out(img.pixel_count());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out[static_cast<std::size_t>(y) * img.width() + x] = std::min(1.0, distance_to(img, x, y, ref) / full_scale_);
    return out;
}

std::vector<double> FloodFillClothSegmenter::confidence(const RasterImage& img) const {
    require(!img.empty(), ErrorCode::invalid_input, "empty cloth image");
    const auto ref = border_color(img);
    const int W = img.width(), H = img.height();
    std::vector<double> out(img.pixel_count(), 1.0);
    std::deque<Px> queue;
    auto visit = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= W || y >= H) return;
        double& o = out[static_cast<std::size_t>(y) * W + x];
        if (o == 0.0 || distance_to(img, x, y, ref) > tolerance_) return;
        o = 0.0;
        queue.push_back({x, y});
    };
    for (int x = 0; x < W; ++x) {
        visit(x, 0);
        visit(x, H - 1);
    }
    for (int y = 0; y < H; ++y) {
        visit(0, y);
        visit(W - 1, y);
    }
    while (!queue.empty()) {
        const Px q = queue.front();
        queue.pop_front();
        visit(q.x + 1, q.y);
        visit(q.x - 1, q.y);
        visit(q.x, q.y + 1);
        visit(q.x, q.y - 1);
    }
    return out;
}

}  // namespace vfr
