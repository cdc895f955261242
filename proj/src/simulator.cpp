#include "mmwint/simulator.hpp"

#include "mmwint/analytic.hpp"
#include "mmwint/errors.hpp"
#include "mmwint/rng.hpp"
#include "mmwint/specfun.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <deque>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>

namespace mmwint::sim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kBins = 16; // boresight strata per cell
constexpr int kIndexBits = 16;
constexpr int kBinBits = 6;
constexpr std::int64_t kCoordOffset = std::int64_t{1} << 20;
constexpr std::uint64_t kServingId = std::numeric_limits<std::uint64_t>::max();
constexpr double kPointsPerCell = 512.0;
constexpr double kMaxCellsPerAxis = 510.0;

std::uint64_t cell_key(std::int64_t ix, std::int64_t iy, int bin) {
    const auto ux = static_cast<std::uint64_t>(ix + kCoordOffset);
    const auto uy = static_cast<std::uint64_t>(iy + kCoordOffset);
    return (ux << 27) | (uy << kBinBits) | static_cast<std::uint64_t>(bin);
}

struct CellIndex {
    std::int64_t ix, iy;
    int bin;
};

CellIndex split_key(std::uint64_t key) {
    const auto mask21 = (std::uint64_t{1} << 21) - 1;
    return {static_cast<std::int64_t>((key >> 27) & mask21) - kCoordOffset,
            static_cast<std::int64_t>((key >> kBinBits) & mask21) - kCoordOffset,
            static_cast<int>(key & ((1u << kBinBits) - 1))};
}

std::int64_t floor_index(double v, double cell) { return static_cast<std::int64_t>(std::floor(v / cell)); }

double norm(Vec2 v) { return std::sqrt(v.x * v.x + v.y * v.y); }

double dist(double dx, double dy) { return std::sqrt(dx * dx + dy * dy); }

// Internal AP record: the public fields plus the boresight unit vector.
struct Node {
    ApRealization ap;
    double bx = 1.0;
    double by = 0.0;
};

Node make_node(const ApRealization& ap) {
    return Node{ap, std::cos(ap.boresight), std::sin(ap.boresight)};
}

// Direction (dx, dy) lies within half-angle of the beam with unit boresight (bx, by).
bool in_beam(double dx, double dy, double bx, double by, double cos_half) {
    const double len = dist(dx, dy);
    return dx * bx + dy * by >= len * cos_half;
}

// Calls f(iy, ix0, ix1) for every row of cells of side `cell` meeting the convex
// polygon `v`, with [ix0, ix1] the cells of that row it touches, restricted to
// the square [-clip, clip]².
template <class F>
void for_each_row(std::span<const Vec2> v, double cell, double clip, F&& f) {
    double ymin = v[0].y, ymax = v[0].y;
    for (const auto& p : v) {
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    ymin = std::max(ymin, -clip);
    ymax = std::min(ymax, clip);
    if (ymin > ymax) return;
    const std::int64_t iy0 = floor_index(ymin, cell), iy1 = floor_index(ymax, cell);
    for (std::int64_t iy = iy0; iy <= iy1; ++iy) {
        const double y0 = static_cast<double>(iy) * cell, y1 = y0 + cell;
        double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const Vec2 a = v[i], b = v[(i + 1) % v.size()];
            if (a.y >= y0 && a.y <= y1) {
                xlo = std::min(xlo, a.x);
                xhi = std::max(xhi, a.x);
            }
            for (const double yc : {y0, y1}) {
                if ((a.y - yc) * (b.y - yc) < 0.0) {
                    const double x = a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y);
                    xlo = std::min(xlo, x);
                    xhi = std::max(xhi, x);
                }
            }
        }
        xlo = std::max(xlo, -clip);
        xhi = std::min(xhi, clip);
        if (xlo > xhi) continue;
        f(iy, floor_index(xlo, cell), floor_index(xhi, cell));
    }
}

// Walks the beam sector with apex `apex`, unit axis (cx, cy) and half-angle
// tangent `t` out to `reach`, one slab of depth `cell` at a time, near to far.
// f(ix, iy) returns false to stop early. Each cell is visited once: the slabs
// walked so far form a convex region, so the cells already seen in any row are a
// single run [lo, hi] and only the part of a new slab outside it is reported.
template <class F>
void walk_sector(Vec2 apex, double cx, double cy, double t, double reach, double cell, double clip, F&& f) {
    struct Run {
        std::int64_t lo = 1, hi = 0;
    };
    thread_local std::vector<Run> rows;
    const std::int64_t span_rows = static_cast<std::int64_t>(std::ceil(reach / cell)) + 2;
    const std::int64_t base = floor_index(apex.y, cell) - span_rows;
    rows.assign(static_cast<std::size_t>(2 * span_rows + 1), Run{});
    bool stop = false;
    const int n_slabs = static_cast<int>(std::ceil(reach / cell));
    const double px = -cy, py = cx;
    for (int k = 0; k < n_slabs && !stop; ++k) {
        const double d0 = cell * k, d1 = std::min(reach, cell * (k + 1));
        const std::array<Vec2, 4> poly{
            Vec2{apex.x + d0 * cx + d0 * t * px, apex.y + d0 * cy + d0 * t * py},
            Vec2{apex.x + d1 * cx + d1 * t * px, apex.y + d1 * cy + d1 * t * py},
            Vec2{apex.x + d1 * cx - d1 * t * px, apex.y + d1 * cy - d1 * t * py},
            Vec2{apex.x + d0 * cx - d0 * t * px, apex.y + d0 * cy - d0 * t * py},
        };
        for_each_row(poly, cell, clip, [&](std::int64_t iy, std::int64_t x0, std::int64_t x1) {
            if (stop) return;
            const auto slot = iy - base;
            if (slot < 0 || slot >= static_cast<std::int64_t>(rows.size())) return;
            Run& run = rows[static_cast<std::size_t>(slot)];
            const auto visit = [&](std::int64_t a, std::int64_t b) {
                for (std::int64_t ix = a; ix <= b && !stop; ++ix)
                    if (!f(ix, iy)) stop = true;
            };
            if (run.lo > run.hi) {
                visit(x0, x1);
                run = {x0, x1};
                return;
            }
            visit(x0, std::min(x1, run.lo - 1));
            visit(std::max(x0, run.hi + 1), x1);
            run.lo = std::min(run.lo, x0);
            run.hi = std::max(run.hi, x1);
        });
    }
}

double gamma_draw(SplitMix64& g, double m) {
    std::gamma_distribution<double> gamma(m, 1.0 / m);
    const double h = gamma(g);
    // A zero draw is possible in principle for tiny m; keep fading strictly positive.
    return h > 0.0 ? h : std::numeric_limits<double>::min();
}

// Interferer-to-origin power of an aligned, unblocked link with fading h.
double link_power(const NetworkParams& net, double ell, double h) {
    return net.q_int * std::pow(ell, -net.alpha) * h / (net.phi * net.phi);
}

// Mark order with ties broken by id.
bool precedes(const ApRealization& a, const ApRealization& b) {
    return a.mark < b.mark || (a.mark == b.mark && a.id < b.id);
}

} // namespace

std::string_view to_string(BlockageMode m) { return m == BlockageMode::bernoulli ? "bernoulli" : "geometric"; }

BlockageMode blockage_mode_from_string(std::string_view s) {
    if (s == "bernoulli") return BlockageMode::bernoulli;
    if (s == "geometric") return BlockageMode::geometric;
    throw ValidationError("blockage_mode", "expected bernoulli or geometric, got '" + std::string(s) + "'");
}

double sensing_reach(const NetworkParams& net) {
    const double tail = specfun::gamma_reg_upper_inv(net.m_shape, 1e-16);
    return std::pow(net.q_int * tail / (net.sigma_sense * net.phi * net.phi), 1.0 / net.alpha);
}

double default_disc_radius(const NetworkParams& net) {
    NetworkParams inv = net;
    inv.contention_rule = ContentionRule::threshold_inversion;
    double r = 5.0 * analytic::contention_radius(inv);
    if (net.noise_pow > 0.0) {
        r = std::max(r, std::pow(net.q_int / (net.phi * net.phi * 1e-3 * net.noise_pow), 1.0 / net.alpha));
    }
    return r;
}

double density_edge_margin(const NetworkParams& net) {
    NetworkParams inv = net;
    inv.contention_rule = ContentionRule::threshold_inversion;
    return analytic::contention_radius(inv);
}

void SimParams::validate() const {
    net.validate();
    if (!(std::isfinite(disc_radius) && disc_radius >= 0.0))
        throw ValidationError("disc_radius", "must be finite and non-negative (0 selects the default)");
    if (!(window() > net.dist_srv)) throw ValidationError("disc_radius", "must exceed dist_srv");
    if (n_realizations < 1) throw ValidationError("n_realizations", "must be at least 1");
    if (workers < 1) throw ValidationError("workers", "must be at least 1");
}

double SimParams::window() const { return disc_radius > 0.0 ? disc_radius : default_disc_radius(net); }

double sensed_power(const ApRealization& tx, const ApRealization& rx, const PairDraws& draws, const NetworkParams& net) {
    const double dx = rx.position.x - tx.position.x, dy = rx.position.y - tx.position.y;
    const double ell = dist(dx, dy);
    if (ell == 0.0 || draws.blocked) return 0.0;
    const double cos_half = std::cos(0.5 * net.phi);
    if (!in_beam(dx, dy, std::cos(tx.boresight), std::sin(tx.boresight), cos_half)) return 0.0;
    if (!in_beam(-dx, -dy, std::cos(rx.boresight), std::sin(rx.boresight), cos_half)) return 0.0;
    return link_power(net, ell, draws.fading);
}

// ---------------------------------------------------------------------------
// Blockage field

struct BlockageField::Cache {
    std::unordered_map<std::uint64_t, std::vector<Vec2>> cells;
};

BlockageField::BlockageField(double rho, std::uint64_t seed, std::int64_t realization)
    : rho_(rho), seed_(seed), realization_(realization), cache_(std::make_shared<Cache>()) {
    cell_size_ = rho > 0.0 ? std::sqrt(16.0 / rho) : 1.0;
}

BlockageField::BlockageField(std::vector<Vec2> points)
    : fixed_(true), fixed_points_(std::move(points)), cache_(std::make_shared<Cache>()) {}

const std::vector<Vec2>& BlockageField::cell(std::int64_t ix, std::int64_t iy) const {
    const std::uint64_t key = cell_key(ix, iy, 0);
    auto it = cache_->cells.find(key);
    if (it != cache_->cells.end()) return it->second;
    SplitMix64 g(stream_key(seed_, static_cast<std::uint64_t>(realization_), StreamDomain::blockage_cell, key));
    std::poisson_distribution<long> pois(rho_ * cell_size_ * cell_size_);
    const long n = pois(g);
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const double x = (static_cast<double>(ix) + uniform01(g)) * cell_size_;
        const double y = (static_cast<double>(iy) + uniform01(g)) * cell_size_;
        pts.push_back({x, y});
    }
    return cache_->cells.emplace(key, std::move(pts)).first->second;
}

bool BlockageField::blocks(Vec2 ap, Vec2 rx, const NetworkParams& net) const {
    const double dx = rx.x - ap.x, dy = rx.y - ap.y;
    const double ell = dist(dx, dy);
    if (ell == 0.0) return false;
    const double ux = dx / ell, uy = dy / ell;
    const double half_base = std::min(ell * std::tan(0.5 * net.phi), 0.5 * net.len_rx);
    const auto inside = [&](Vec2 c) {
        const double vx = c.x - ap.x, vy = c.y - ap.y;
        const double along = vx * ux + vy * uy;
        if (along < 0.0 || along > ell) return false;
        const double perp = std::abs(vx * uy - vy * ux);
        return perp <= along * half_base / ell;
    };
    if (fixed_) return std::any_of(fixed_points_.begin(), fixed_points_.end(), inside);
    if (rho_ <= 0.0) return false;

    // Cover the triangle with squares centred on samples of its axis.
    const double step = 0.5 * cell_size_;
    const int n_steps = static_cast<int>(std::ceil(ell / step));
    const double pad = half_base + step;
    std::vector<std::pair<std::int64_t, std::int64_t>> cells;
    for (int i = 0; i <= n_steps; ++i) {
        const double a = std::min(ell, step * i);
        const double cx = ap.x + a * ux, cy = ap.y + a * uy;
        for (std::int64_t iy = floor_index(cy - pad, cell_size_); iy <= floor_index(cy + pad, cell_size_); ++iy)
            for (std::int64_t ix = floor_index(cx - pad, cell_size_); ix <= floor_index(cx + pad, cell_size_); ++ix)
                cells.emplace_back(ix, iy);
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    for (const auto& [ix, iy] : cells) {
        for (const Vec2& c : cell(ix, iy))
            if (inside(c)) return true;
    }
    return false;
}

bool geometric_blockage(const BlockageField& field, Vec2 ap_pos, Vec2 rx_pos, const NetworkParams& net) {
    return field.blocks(ap_pos, rx_pos, net);
}

// ---------------------------------------------------------------------------
// Lazy realization

struct Realization::Impl {
    SimParams sim;
    NetworkParams net;
    std::int64_t rid;
    double window;
    double reach;
    double cell;
    double cos_half;
    double tan_half;
    double sense_scale; // σφ²/q: fading needed at unit distance to reach the threshold
    BlockageField field;
    Node serving;
    // APs of one (cell, boresight bin). Marks of a Poisson field restricted to a
    // region form a Poisson process on [0, 1], so points are produced in mark
    // order from exponential spacings and only as far as some query needs.
    struct Group {
        SplitMix64 gen{0};
        double rate = 0.0;     // expected points per unit mark
        double next = 0.0;     // mark of the next point not yet produced; > 1 when exhausted
        std::uint64_t key = 0;
        std::uint64_t produced = 0;
        std::vector<Node> nodes; // produced points inside the window, in mark order
    };
    // Groups live in a deque (stable references) and are found through a dense
    // table over the window's cells; -1 marks a group not yet created.
    std::deque<Group> groups;
    std::vector<std::int32_t> group_slot;
    std::int64_t grid_lo = 0;
    std::int64_t grid_n = 0;
    std::unordered_map<std::uint64_t, bool> retention;

    Impl(const SimParams& s, std::int64_t id)
        : sim(s), net(s.net), rid(id), window(s.window()), reach(sensing_reach(s.net)),
          field(s.net.rho_blk, s.seed, id) {
        cos_half = std::cos(0.5 * net.phi);
        tan_half = std::tan(0.5 * net.phi);
        sense_scale = net.sigma_sense * net.phi * net.phi / net.q_int;
        cell = net.lambda_ap > 0.0 ? std::sqrt(kPointsPerCell / net.lambda_ap) : 2.0 * window;
        cell = std::max(cell, 2.0 * window / kMaxCellsPerAxis);
        grid_lo = floor_index(-window, cell);
        grid_n = floor_index(window, cell) - grid_lo + 1;
        group_slot.assign(static_cast<std::size_t>(grid_n * grid_n * kBins), -1);
        ApRealization srv;
        srv.id = kServingId;
        srv.position = {net.dist_srv, 0.0};
        srv.mark = -1.0;
        srv.boresight = kPi;
        serving = make_node(srv);
    }

    Group& group(std::int64_t ix, std::int64_t iy, int bin) {
        const std::int64_t cx = ix - grid_lo, cy = iy - grid_lo;
        if (cx < 0 || cy < 0 || cx >= grid_n || cy >= grid_n) throw NumericError("simulator: cell outside the window grid");
        std::int32_t& slot = group_slot[static_cast<std::size_t>((cy * grid_n + cx) * kBins + bin)];
        if (slot >= 0) return groups[static_cast<std::size_t>(slot)];
        slot = static_cast<std::int32_t>(groups.size());
        Group& g = groups.emplace_back();
        {
            const std::uint64_t key = cell_key(ix, iy, bin);
            g.key = key;
            g.gen = SplitMix64(stream_key(sim.seed, static_cast<std::uint64_t>(rid), StreamDomain::ap_cell, key));
            g.rate = net.lambda_ap * cell * cell / kBins;
            g.next = g.rate > 0.0 ? spacing(g) : 2.0;
        }
        return g;
    }

    static double spacing(Group& g) { return -std::log1p(-uniform01(g.gen)) / g.rate; }

    // Produces the group's points with mark <= upto. `g.nodes` may reallocate.
    void extend(Group& g, double upto) {
        const double bin_width = 2.0 * kPi / kBins;
        const auto [ix, iy, bin] = split_key(g.key);
        while (g.next <= upto && g.next <= 1.0) {
            if (g.produced >= (std::uint64_t{1} << kIndexBits)) throw NumericError("simulator: too many APs in one cell");
            ApRealization ap;
            ap.mark = g.next;
            ap.position.x = (static_cast<double>(ix) + uniform01(g.gen)) * cell;
            ap.position.y = (static_cast<double>(iy) + uniform01(g.gen)) * cell;
            ap.boresight = -kPi + (bin + uniform01(g.gen)) * bin_width;
            ap.id = (g.key << kIndexBits) | g.produced;
            ++g.produced;
            if (norm(ap.position) <= window) {
                if (g.nodes.empty()) g.nodes.reserve(static_cast<std::size_t>(g.rate + 3.0 * std::sqrt(g.rate) + 2.0));
                g.nodes.push_back(make_node(ap));
            }
            g.next += spacing(g);
        }
    }

    bool cell_in_window(std::int64_t ix, std::int64_t iy, double radius) const {
        const double cx = (static_cast<double>(ix) + 0.5) * cell, cy = (static_cast<double>(iy) + 0.5) * cell;
        return dist(cx, cy) - cell * std::numbers::sqrt2 / 2.0 <= radius;
    }

    // Calls f(bin) for each boresight bin that could contain an AP of cell
    // (ix, iy) whose beam covers `target`.
    template <class F>
    void bins_toward(std::int64_t ix, std::int64_t iy, Vec2 target, F&& f) const {
        const double cx = (static_cast<double>(ix) + 0.5) * cell, cy = (static_cast<double>(iy) + 0.5) * cell;
        const double range = dist(target.x - cx, target.y - cy);
        const double half_diag = cell * std::numbers::sqrt2 / 2.0;
        if (range <= half_diag * 1.000001) {
            for (int b = 0; b < kBins; ++b) f(b);
            return;
        }
        const double spread = 0.5 * net.phi + std::asin(half_diag / range) + 1e-9;
        if (spread >= kPi) {
            for (int b = 0; b < kBins; ++b) f(b);
            return;
        }
        const double bearing = std::atan2(target.y - cy, target.x - cx);
        const double width = 2.0 * kPi / kBins;
        const auto lo = static_cast<int>(std::floor((bearing - spread + kPi) / width));
        const auto hi = static_cast<int>(std::floor((bearing + spread + kPi) / width));
        for (int b = lo; b <= hi && b < lo + kBins; ++b) f(((b % kBins) + kBins) % kBins);
    }

    PairDraws pair_draws(const ApRealization& tx, const ApRealization& rx) const {
        SplitMix64 g(stream_key(sim.seed, static_cast<std::uint64_t>(rid), StreamDomain::ap_pair, tx.id, rx.id));
        PairDraws d;
        d.fading = gamma_draw(g, net.m_shape);
        const double u = uniform01(g);
        if (sim.blockage_mode == BlockageMode::bernoulli) {
            const double ell = dist(rx.position.x - tx.position.x, rx.position.y - tx.position.y);
            d.blocked = u >= analytic::not_blocked_prob(net, ell);
        } else {
            d.blocked = field.blocks(tx.position, rx.position, net);
        }
        return d;
    }

    PairDraws rx_draws(const ApRealization& ap) const {
        SplitMix64 g(stream_key(sim.seed, static_cast<std::uint64_t>(rid), StreamDomain::rx_link, ap.id));
        PairDraws d;
        d.fading = gamma_draw(g, net.m_shape);
        const double u = uniform01(g);
        if (sim.blockage_mode == BlockageMode::bernoulli) {
            d.blocked = u >= analytic::not_blocked_prob(net, norm(ap.position));
        } else {
            d.blocked = field.blocks(ap.position, {0.0, 0.0}, net);
        }
        return d;
    }

    bool senses(const Node& tx, const Node& rx) const {
        const double dx = rx.ap.position.x - tx.ap.position.x, dy = rx.ap.position.y - tx.ap.position.y;
        const double d2 = dx * dx + dy * dy;
        if (d2 == 0.0 || d2 > reach * reach) return false;
        if (!in_beam(dx, dy, tx.bx, tx.by, cos_half)) return false;
        if (!in_beam(-dx, -dy, rx.bx, rx.by, cos_half)) return false;
        const PairDraws d = pair_draws(tx.ap, rx.ap);
        if (d.blocked) return false;
        // q ℓ^{-α} h / φ² > σ  ⇔  h > (σφ²/q) ℓ^α
        return d.fading > sense_scale * std::pow(d2, 0.5 * net.alpha);
    }

    bool retained(const Node& j) {
        auto it = retention.find(j.ap.id);
        if (it != retention.end()) return it->second;
        bool keep = true;
        const double radius = std::min(reach, window + norm(j.ap.position));
        walk_sector(j.ap.position, j.bx, j.by, tan_half, radius, cell, window, [&](std::int64_t ix, std::int64_t iy) {
            if (!cell_in_window(ix, iy, window)) return true;
            bins_toward(ix, iy, j.ap.position, [&](int bin) {
                if (!keep) return;
                Group& g = group(ix, iy, bin);
                extend(g, j.ap.mark);
                for (const Node& k : g.nodes) {
                    if (k.ap.mark > j.ap.mark) break;
                    if (k.ap.id == j.ap.id || !precedes(k.ap, j.ap)) continue;
                    if (senses(k, j)) {
                        keep = false;
                        return;
                    }
                }
            });
            return keep;
        });
        retention.emplace(j.ap.id, keep);
        return keep;
    }

    struct Contribution {
        std::uint64_t id;
        double power;
        bool blocked;
    };

    // Interference contribution of AP k, if its beam and the receiver's both align.
    bool contribution(const Node& k, Contribution& out) const {
        const double x = k.ap.position.x, y = k.ap.position.y;
        if (!in_beam(x, y, 1.0, 0.0, cos_half)) return false; // receiver beam points at the serving AP
        if (!in_beam(-x, -y, k.bx, k.by, cos_half)) return false;
        if (sim.serving_suppression && senses(serving, k)) return false;
        const PairDraws d = rx_draws(k.ap);
        out = {k.ap.id, d.blocked ? 0.0 : link_power(net, norm(k.ap.position), d.fading), d.blocked};
        return true;
    }

    static InterferenceSample total(std::int64_t rid, std::vector<Contribution>& parts) {
        std::sort(parts.begin(), parts.end(), [](const Contribution& a, const Contribution& b) { return a.id < b.id; });
        InterferenceSample s;
        s.realization_id = rid;
        for (const auto& c : parts) {
            s.i_agg += c.power;
            ++s.n_active;
            if (!c.blocked) ++s.n_aligned;
        }
        return s;
    }

    InterferenceSample interference() {
        std::vector<Contribution> parts;
        const Vec2 origin{0.0, 0.0};
        walk_sector(origin, 1.0, 0.0, tan_half, window, cell, window, [&](std::int64_t ix, std::int64_t iy) {
            if (!cell_in_window(ix, iy, window)) return true;
            bins_toward(ix, iy, origin, [&](int bin) {
                Group& g = group(ix, iy, bin);
                extend(g, 1.0);
                for (std::size_t i = 0; i < g.nodes.size(); ++i) {
                    const Node k = g.nodes[i];
                    const double x = k.ap.position.x, y = k.ap.position.y;
                    if (!in_beam(x, y, 1.0, 0.0, cos_half) || !in_beam(-x, -y, k.bx, k.by, cos_half)) continue;
                    if (!retained(k)) continue;
                    Contribution c{};
                    if (contribution(k, c)) parts.push_back(c);
                }
            });
            return true;
        });
        return total(rid, parts);
    }

    template <class F>
    void for_each_in_disc(double radius, F&& f) {
        const std::int64_t lo = floor_index(-radius, cell), hi = floor_index(radius, cell);
        for (std::int64_t iy = lo; iy <= hi; ++iy)
            for (std::int64_t ix = lo; ix <= hi; ++ix) {
                if (!cell_in_window(ix, iy, radius)) continue;
                for (int b = 0; b < kBins; ++b) {
                    Group& g = group(ix, iy, b);
                    extend(g, 1.0);
                    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
                        const Node k = g.nodes[i];
                        if (norm(k.ap.position) <= radius) f(k);
                    }
                }
            }
    }

    ApRealization with_rx_draws(const ApRealization& ap) const {
        ApRealization out = ap;
        const PairDraws d = rx_draws(ap);
        out.fading_to_rx = d.fading;
        out.blocked_to_rx = d.blocked;
        return out;
    }
};

Realization::Realization(const SimParams& sim, std::int64_t realization_id)
    : impl_(std::make_unique<Impl>(sim, realization_id)) {}
Realization::~Realization() = default;
Realization::Realization(Realization&&) noexcept = default;
Realization& Realization::operator=(Realization&&) noexcept = default;

std::int64_t Realization::id() const { return impl_->rid; }

bool Realization::retained(const ApRealization& ap) { return impl_->retained(make_node(ap)); }

std::vector<ApRealization> Realization::retained_within(double radius) {
    std::vector<ApRealization> out;
    impl_->for_each_in_disc(radius, [&](const Node& k) {
        if (impl_->retained(k)) out.push_back(impl_->with_rx_draws(k.ap));
    });
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

InterferenceSample Realization::interference() { return impl_->interference(); }

bool Realization::senses(const ApRealization& tx, const ApRealization& rx) const {
    return impl_->senses(make_node(tx), make_node(rx));
}

PairDraws Realization::pair_draws(const ApRealization& tx, const ApRealization& rx) const {
    return impl_->pair_draws(tx, rx);
}

PairDraws Realization::rx_draws(const ApRealization& ap) const { return impl_->rx_draws(ap); }

std::vector<ApRealization> Realization::all_aps() {
    std::vector<ApRealization> out;
    impl_->for_each_in_disc(impl_->window, [&](const Node& k) { out.push_back(impl_->with_rx_draws(k.ap)); });
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

const ApRealization& Realization::serving() const { return impl_->serving.ap; }

// ---------------------------------------------------------------------------
// Eager reference path

std::vector<ApRealization> sample_network(const SimParams& sim, std::int64_t realization_id) {
    sim.validate();
    Realization r(sim, realization_id);
    return r.all_aps();
}

std::vector<ApRealization> mac_thinning(std::span<const ApRealization> aps, const SimParams& sim,
                                        std::int64_t realization_id) {
    const Realization r(sim, realization_id);
    std::vector<ApRealization> out;
    for (const auto& j : aps) {
        bool keep = true;
        for (const auto& k : aps) {
            if (k.id == j.id || !precedes(k, j)) continue;
            if (r.senses(k, j)) {
                keep = false;
                break;
            }
        }
        if (keep) out.push_back(j);
    }
    return out;
}

InterferenceSample aggregate_interference(std::span<const ApRealization> retained, const SimParams& sim,
                                          std::int64_t realization_id) {
    const Realization r(sim, realization_id);
    const double cos_half = std::cos(0.5 * sim.net.phi);
    std::vector<std::pair<std::uint64_t, PairDraws>> parts;
    for (const auto& k : retained) {
        const double x = k.position.x, y = k.position.y;
        if (!in_beam(x, y, 1.0, 0.0, cos_half)) continue;
        if (!in_beam(-x, -y, std::cos(k.boresight), std::sin(k.boresight), cos_half)) continue;
        if (sim.serving_suppression && r.senses(r.serving(), k)) continue;
        parts.emplace_back(k.id, r.rx_draws(k));
    }
    std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    InterferenceSample s;
    s.realization_id = realization_id;
    for (const auto& [id, d] : parts) {
        const auto it = std::find_if(retained.begin(), retained.end(), [id](const auto& a) { return a.id == id; });
        if (!d.blocked) {
            s.i_agg += link_power(sim.net, norm(it->position), d.fading);
            ++s.n_aligned;
        }
        ++s.n_active;
    }
    return s;
}

void parallel_for(std::int64_t n, int workers, const std::function<void(std::int64_t)>& fn) {
    if (n <= 0) return;
    const auto n_threads = static_cast<int>(std::min<std::int64_t>(std::max(1, workers), n));
    if (n_threads == 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto run = [&] {
        for (std::int64_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::vector<InterferenceSample> simulate_interference(const SimParams& sim) {
    sim.validate();
    std::vector<InterferenceSample> out(static_cast<std::size_t>(sim.n_realizations));
    parallel_for(sim.n_realizations, sim.workers, [&](std::int64_t i) {
        Realization r(sim, i);
        out[static_cast<std::size_t>(i)] = r.interference();
    });
    return out;
}

DensityEstimate estimate_active_density(const SimParams& sim) {
    sim.validate();
    if (sim.n_realizations < 100) throw InsufficientSamplesError("estimate_active_density: needs at least 100 realizations");
    const double central = sim.window() - density_edge_margin(sim.net);
    if (!(central > 0.0)) {
        throw ValidationError("disc_radius", "window must exceed the contention radius to leave a counting region");
    }
    std::vector<double> counts(static_cast<std::size_t>(sim.n_realizations));
    parallel_for(sim.n_realizations, sim.workers, [&](std::int64_t i) {
        Realization r(sim, i);
        counts[static_cast<std::size_t>(i)] = static_cast<double>(r.retained_within(central).size());
    });
    double mean = 0.0;
    for (double c : counts) mean += c;
    mean /= static_cast<double>(counts.size());
    double var = 0.0;
    for (double c : counts) var += (c - mean) * (c - mean);
    var /= static_cast<double>(counts.size() - 1);
    const double area = kPi * central * central;
    return {mean / area, std::sqrt(var / static_cast<double>(counts.size())) / area, central, sim.n_realizations};
}

std::vector<LaplacePoint> empirical_laplace(std::span<const InterferenceSample> samples, std::span<const double> s_grid) {
    if (samples.size() < 1000) throw InsufficientSamplesError("empirical_laplace: needs at least 1000 samples");
    const auto n = static_cast<double>(samples.size());
    std::vector<LaplacePoint> out;
    out.reserve(s_grid.size());
    for (const double s : s_grid) {
        if (!(s >= 0.0)) throw DomainError("empirical_laplace: s must be non-negative");
        double sum = 0.0, sum_sq = 0.0;
        for (const auto& smp : samples) {
            const double v = std::exp(-s * smp.i_agg);
            sum += v;
            sum_sq += v * v;
        }
        const double mean = sum / n;
        const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
        out.push_back({s, mean, std::sqrt(var / n)});
    }
    return out;
}

namespace {

struct GaussLegendre {
    std::array<double, 64> nodes{};
    std::array<double, 64> weights{};

    GaussLegendre() {
        constexpr int n = 64;
        for (int i = 0; i < n / 2; ++i) {
            double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

const GaussLegendre& gauss_legendre() {
    static const GaussLegendre rule;
    return rule;
}

} // namespace

double conditional_ber(const NetworkParams& net, double noise_plus_interference) {
    if (!(noise_plus_interference >= 0.0)) throw DomainError("conditional_ber: power must be non-negative");
    if (noise_plus_interference == 0.0) return 0.0;
    const double snr = net.mod_c * net.serving_power() / noise_plus_interference;
    if (snr == 0.0) return 0.5;
    // Craig's form of Q averaged over Gamma(m, 1/m) fading:
    // (1/π) ∫₀^{π/2} (1 + γ/(m sin²θ))^{-m} dθ
    const auto& gl = gauss_legendre();
    const double half = 0.25 * kPi;
    double acc = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double theta = half * (gl.nodes[i] + 1.0);
        const double sn = std::sin(theta);
        acc += gl.weights[i] * std::exp(-net.m_shape * std::log1p(snr / (net.m_shape * sn * sn)));
    }
    return acc * half / kPi;
}

BerEstimate estimate_ber_from_samples(std::span<const InterferenceSample> samples, const NetworkParams& net,
                                      double snr_db) {
    if (samples.size() < 1000) throw InsufficientSamplesError("estimate_ber: needs at least 1000 samples");
    if (std::isnan(snr_db)) throw DomainError("estimate_ber: snr_db is NaN");
    BerEstimate out;
    out.n = static_cast<std::int64_t>(samples.size());
    if (snr_db == -std::numeric_limits<double>::infinity()) return out;
    const NetworkParams p = net.with_snr(snr_db);
    const auto n = static_cast<double>(samples.size());
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& smp : samples) {
        const double b = conditional_ber(p, p.noise_pow + smp.i_agg);
        sum += b;
        sum_sq += b * b;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    out.ber = mean;
    out.ci_half_width = 1.959963984540054 * std::sqrt(var / n);
    return out;
}

BerEstimate estimate_ber(const SimParams& sim, double snr_db) {
    if (sim.n_realizations < 1000) throw InsufficientSamplesError("estimate_ber: needs at least 1000 realizations");
    const auto samples = simulate_interference(sim);
    return estimate_ber_from_samples(samples, sim.net, snr_db);
}

} // namespace mmwint::sim
