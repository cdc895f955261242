#pragma once

#include "mmwint/params.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

// Monte-Carlo engine: Poisson AP field on a disc, mark-based carrier-sense
// thinning, aggregate interference at a receiver at the origin, and empirical
// estimators for the active density, the interference Laplace transform and BER.
//
// Every random quantity is keyed by (seed, realization, what it belongs to), so a
// realization is a pure function of its id. The field is generated lazily cell by
// cell; the eager helpers (sample_network, mac_thinning, aggregate_interference)
// materialize the same realization and are used as an O(n²) reference.
namespace mmwint::sim {

enum class BlockageMode { bernoulli, geometric };

std::string_view to_string(BlockageMode m);
BlockageMode blockage_mode_from_string(std::string_view s);

struct SimParams {
    NetworkParams net;
    double disc_radius = 0.0; // window radius [m]; 0 selects default_disc_radius(net)
    std::int64_t n_realizations = 20000;
    std::uint64_t seed = 1;
    BlockageMode blockage_mode = BlockageMode::bernoulli;
    bool serving_suppression = false;
    int workers = 1;

    void validate() const;
    // disc_radius, or the default when it is 0.
    double window() const;

    bool operator==(const SimParams&) const = default;
};

// max(5·r_cont, distance where an aligned interferer's mean power drops below 1e-3 of the noise).
double default_disc_radius(const NetworkParams& net);

// Largest distance at which an aligned, unblocked pair can still sense each other
// with probability above ~1e-16. Pairs farther apart are never neighbors.
double sensing_reach(const NetworkParams& net);

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct ApRealization {
    std::uint64_t id = 0;
    Vec2 position;
    double mark = 0.0;
    double boresight = 0.0;    // radians in [-π, π)
    double fading_to_rx = 1.0; // power fading on the link to the receiver
    bool blocked_to_rx = false;
};

struct InterferenceSample {
    std::int64_t realization_id = 0;
    double i_agg = 0.0; // aggregate interference power at the receiver [W]
    int n_active = 0;   // retained APs whose beam and the receiver's beam are mutually aligned
    int n_aligned = 0;  // the unblocked subset of those, i.e. nonzero contributors
};

// Fading and blockage draws for one directed sensing link k → j.
struct PairDraws {
    double fading = 1.0;
    bool blocked = false;
};

// Power AP `rx` senses from AP `tx`; 0 when either beam misses.
double sensed_power(const ApRealization& tx, const ApRealization& rx, const PairDraws& draws, const NetworkParams& net);

// Blockage centers of one realization, generated lazily per cell on the whole plane.
class BlockageField {
public:
    BlockageField(double rho, std::uint64_t seed, std::int64_t realization);
    // Field with explicit points (tests).
    explicit BlockageField(std::vector<Vec2> points);

    // True when some blockage center lies in the beam triangle from `ap` toward `rx`.
    bool blocks(Vec2 ap, Vec2 rx, const NetworkParams& net) const;

private:
    const std::vector<Vec2>& cell(std::int64_t ix, std::int64_t iy) const;

    double rho_ = 0.0;
    double cell_size_ = 1.0;
    std::uint64_t seed_ = 0;
    std::int64_t realization_ = 0;
    bool fixed_ = false;
    std::vector<Vec2> fixed_points_;
    struct Cache;
    std::shared_ptr<Cache> cache_;
};

bool geometric_blockage(const BlockageField& field, Vec2 ap_pos, Vec2 rx_pos, const NetworkParams& net);

// One lazily generated realization.
class Realization {
public:
    Realization(const SimParams& sim, std::int64_t realization_id);
    ~Realization();
    Realization(Realization&&) noexcept;
    Realization& operator=(Realization&&) noexcept;

    std::int64_t id() const;
    // Whether the AP survives carrier sensing (no neighbor with a smaller mark).
    bool retained(const ApRealization& ap);
    // Retained APs inside the disc of the given radius around the origin.
    std::vector<ApRealization> retained_within(double radius);
    InterferenceSample interference();
    // Whether `rx` senses `tx` above the carrier-sense threshold.
    bool senses(const ApRealization& tx, const ApRealization& rx) const;
    // Draws of the directed sensing link tx → rx.
    PairDraws pair_draws(const ApRealization& tx, const ApRealization& rx) const;
    // Fading and blockage of the link from `ap` to the receiver.
    PairDraws rx_draws(const ApRealization& ap) const;
    // All APs in the window, ordered by id.
    std::vector<ApRealization> all_aps();
    const ApRealization& serving() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// All APs of realization `realization_id` in the window, ordered by id.
std::vector<ApRealization> sample_network(const SimParams& sim, std::int64_t realization_id);

// O(n²) carrier-sense thinning of `aps`; uses the same per-pair draws as Realization.
std::vector<ApRealization> mac_thinning(std::span<const ApRealization> aps, const SimParams& sim,
                                        std::int64_t realization_id);

// Interference at the origin from an explicit retained set.
InterferenceSample aggregate_interference(std::span<const ApRealization> retained, const SimParams& sim,
                                          std::int64_t realization_id);

// One sample per realization, in realization order.
std::vector<InterferenceSample> simulate_interference(const SimParams& sim);

struct DensityEstimate {
    double density = 0.0;
    double std_error = 0.0;
    double central_radius = 0.0; // radius of the counting region
    std::int64_t n = 0;
};

// Retained APs per unit area, counted only in the central disc of radius
// window − sensing margin so that every counted AP sees its full neighborhood.
DensityEstimate estimate_active_density(const SimParams& sim);

// Margin kept between the counting region and the window edge.
double density_edge_margin(const NetworkParams& net);

struct LaplacePoint {
    double s = 0.0;
    double estimate = 1.0;
    double std_error = 0.0;
};

std::vector<LaplacePoint> empirical_laplace(std::span<const InterferenceSample> samples, std::span<const double> s_grid);

struct BerEstimate {
    double ber = 0.5;
    double ci_half_width = 0.0; // 95% normal approximation
    std::int64_t n = 0;
};

// Error probability given the total noise-plus-interference power, averaged
// analytically over the serving link's Nakagami fading.
double conditional_ber(const NetworkParams& net, double noise_plus_interference);

BerEstimate estimate_ber_from_samples(std::span<const InterferenceSample> samples, const NetworkParams& net,
                                      double snr_db);
BerEstimate estimate_ber(const SimParams& sim, double snr_db);

// Calls fn(i) for i in [0, n) on `workers` threads. fn must only write slot i.
void parallel_for(std::int64_t n, int workers, const std::function<void(std::int64_t)>& fn);

} // namespace mmwint::sim
