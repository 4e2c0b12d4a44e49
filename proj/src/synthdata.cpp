#include "polyvmt/synthdata.hpp"

#include "polyvmt/error.hpp"
#include "polyvmt/io.hpp"
#include "polyvmt/numeric.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace polyvmt {

namespace {

constexpr std::uint64_t kRegionStream = 11;
constexpr std::uint64_t kHouseholdStream = 23;

// Income category shares; category 1 is the reference.
constexpr std::array<double, 10> kIncomeShares{0.04, 0.13, 0.09, 0.12, 0.17, 0.15, 0.17, 0.07, 0.03, 0.03};
constexpr double kMeanVehicles = 1.85;
constexpr double kMeanExtraMembers = 1.66;
constexpr int kMaxCount = 8;
// Lognormal tract density, thousand persons per square mile.
constexpr double kDensityLogMean = 1.822;
constexpr double kDensityLogSd = 0.8;
constexpr double kLineStep = 0.25;

Point2 clamp_to(const BBox& b, Point2 p) {
    return {std::clamp(p.x, b.xmin, b.xmax), std::clamp(p.y, b.ymin, b.ymax)};
}

void sample_segment(std::vector<PointRecord>& out, const BBox& box, Point2 a, Point2 b) {
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const int steps = std::max(1, static_cast<int>(std::ceil(len / kLineStep)));
    for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        const Point2 p = clamp_to(box, {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
        out.push_back({p.x, p.y, 1.0});
    }
}

int bounded_poisson(std::mt19937_64& rng, double mean) {
    std::poisson_distribution<int> pois(mean);
    for (;;) {
        const int v = pois(rng);
        if (v <= kMaxCount)
            return v;
    }
}

double stdev(const Eigen::VectorXd& v) {
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(v.size() - 1, 1)));
}

} // namespace

void SynthConfig::validate() const {
    if (!(bbox.width() > 0.0) || !(bbox.height() > 0.0))
        throw ConfigError("synthetic region needs a bbox with positive width and height");
    if (!(cell_area > 0.0))
        throw ConfigError("cell area must be positive");
    if (cluster_count < 0)
        throw ConfigError("cluster count must be non-negative");
    if (!cluster_centers.empty() && static_cast<int>(cluster_centers.size()) != cluster_count)
        throw ConfigError("cluster_centers lists " + std::to_string(cluster_centers.size()) + " centers for " +
                          std::to_string(cluster_count) + " clusters");
    if (!cluster_jobs.empty() && static_cast<int>(cluster_jobs.size()) != cluster_count)
        throw ConfigError("cluster_jobs lists " + std::to_string(cluster_jobs.size()) + " totals for " +
                          std::to_string(cluster_count) + " clusters");
    for (double j : cluster_jobs)
        if (!(j >= 0.0))
            throw ConfigError("cluster job totals must be non-negative");
    if (!(cluster_spread > 0.0))
        throw ConfigError("cluster spread must be positive (got " + format_double(cluster_spread) + ")");
    if (!(cluster_separation >= 0.0))
        throw ConfigError("cluster separation must be non-negative");
    if (!(largest_cluster_jobs >= 0.0) || !(cluster_size_ratio > 0.0 && cluster_size_ratio <= 1.0))
        throw ConfigError("cluster size ladder needs a non-negative top size and a ratio in (0, 1]");
    if (!(cluster_truncation > 0.0))
        throw ConfigError("cluster truncation must be positive");
    if (!(background_intensity >= 0.0))
        throw ConfigError("background intensity must be non-negative");
    if (!(mean_establishment_size >= 1.0))
        throw ConfigError("mean establishment size must be at least 1");
    if (!(target_censoring > 0.0 && target_censoring < 1.0))
        throw ConfigError("target censoring share must lie in (0, 1)");
    if (!(sigma > 0.0))
        throw ConfigError("error scale sigma must be positive");
    if (households < 2)
        throw ConfigError("need at least two households");
    if (!(urban_core_share >= 0.0 && urban_core_share <= 1.0))
        throw ConfigError("urban core share must lie in [0, 1]");
}

std::vector<double> SynthConfig::resolved_cluster_jobs() const {
    if (!cluster_jobs.empty())
        return cluster_jobs;
    std::vector<double> out;
    double jobs = largest_cluster_jobs;
    for (int k = 0; k < cluster_count; ++k) {
        out.push_back(std::round(jobs));
        jobs *= cluster_size_ratio;
    }
    return out;
}

Region gen_region(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(substream_seed(cfg.seed, kRegionStream));
    const BBox& box = cfg.bbox;
    Region region;

    if (!cfg.cluster_centers.empty()) {
        region.cluster_centers = cfg.cluster_centers;
    } else {
        std::uniform_real_distribution<double> ux(box.xmin + 0.15 * box.width(), box.xmax - 0.15 * box.width());
        std::uniform_real_distribution<double> uy(box.ymin + 0.15 * box.height(), box.ymax - 0.15 * box.height());
        const double min_gap = cfg.cluster_separation * cfg.cluster_spread;
        for (int k = 0; k < cfg.cluster_count; ++k) {
            // rejection keeps clusters apart; after enough failures take the last draw
            Point2 c{};
            for (int attempt = 0; attempt < 500; ++attempt) {
                c = {ux(rng), uy(rng)};
                bool clear = true;
                for (const auto& o : region.cluster_centers)
                    clear = clear && std::hypot(c.x - o.x, c.y - o.y) >= min_gap;
                if (clear)
                    break;
            }
            region.cluster_centers.push_back(c);
        }
    }
    const auto jobs = cfg.resolved_cluster_jobs();

    std::geometric_distribution<int> extra(1.0 / cfg.mean_establishment_size);
    std::normal_distribution<double> gauss(0.0, cfg.cluster_spread);
    const double radius = cfg.cluster_truncation * cfg.cluster_spread;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        const Point2 c = region.cluster_centers[k];
        double remaining = jobs[k];
        while (remaining > 0.0) {
            const double size = std::min(remaining, 1.0 + extra(rng));
            remaining -= size;
            Point2 p = c;
            for (int attempt = 0; attempt < 1000; ++attempt) {
                const double dx = gauss(rng);
                const double dy = gauss(rng);
                const Point2 cand{c.x + dx, c.y + dy};
                if (std::hypot(dx, dy) <= radius && box.contains(cand)) {
                    p = cand;
                    break;
                }
            }
            p = clamp_to(box, p);
            region.establishments.push_back({p.x, p.y, size});
        }
    }

    const double area = box.width() * box.height();
    if (cfg.background_intensity > 0.0) {
        std::poisson_distribution<long> count(cfg.background_intensity * area / cfg.mean_establishment_size);
        std::uniform_real_distribution<double> ux(box.xmin, box.xmax);
        std::uniform_real_distribution<double> uy(box.ymin, box.ymax);
        const long n = count(rng);
        for (long e = 0; e < n; ++e) {
            const double x = ux(rng);
            const double y = uy(rng);
            region.establishments.push_back({x, y, 1.0 + extra(rng)});
        }
    }

    // Cluster order by size, largest first; the historic anchor sits beside the largest.
    std::vector<std::size_t> order(jobs.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return jobs[a] > jobs[b]; });
    const Point2 base = order.empty() ? Point2{box.xmin + 0.5 * box.width(), box.ymin + 0.5 * box.height()}
                                      : region.cluster_centers[order.front()];
    region.anchor = clamp_to(box, {base.x + cfg.anchor_offset.x, base.y + cfg.anchor_offset.y});

    std::normal_distribution<double> jitter(0.0, 0.5 * cfg.cluster_spread);
    std::uniform_real_distribution<double> ux(box.xmin, box.xmax);
    std::uniform_real_distribution<double> uy(box.ymin, box.ymax);
    for (const auto& spec : cfg.amenity_layers) {
        AmenityLayer layer;
        layer.name = spec.name;
        auto shifted = [&](std::size_t k) {
            const Point2 c = region.cluster_centers[k];
            return Point2{c.x + spec.offset.x, c.y + spec.offset.y};
        };
        switch (spec.shape) {
        case AmenityShape::Stations:
            for (std::size_t k : order) {
                const int stations = std::clamp(static_cast<int>(std::lround(jobs[k] / 25'000.0)), 1, 6);
                for (int s = 0; s < stations; ++s) {
                    const Point2 c = shifted(k);
                    const double dx = jitter(rng);
                    const double dy = jitter(rng);
                    const Point2 p = clamp_to(box, {c.x + dx, c.y + dy});
                    layer.points.push_back({p.x, p.y, 1.0});
                }
            }
            break;
        case AmenityShape::RadialLines:
            for (std::size_t k : order)
                sample_segment(layer.points, box, region.anchor, shifted(k));
            break;
        case AmenityShape::ChainLines:
            for (std::size_t i = 0; i + 1 < order.size(); ++i)
                sample_segment(layer.points, box, shifted(order[i]), shifted(order[i + 1]));
            if (order.size() == 1)
                layer.points.push_back({shifted(order[0]).x, shifted(order[0]).y, 1.0});
            break;
        }
        for (int s = 0; s < spec.noise_points; ++s) {
            const double x = ux(rng);
            const double y = uy(rng);
            layer.points.push_back({x, y, 1.0});
        }
        for (auto& p : layer.points) {
            const Point2 c = clamp_to(box, {p.x, p.y});
            p.x = c.x;
            p.y = c.y;
        }
        region.amenities.push_back(std::move(layer));
    }
    return region;
}

SynthHouseholds gen_households(const SynthConfig& cfg, const HexGrid& grid, std::span<const AccessVector> access) {
    cfg.validate();
    const std::size_t cells = grid.size();
    auto find = [&](const std::string& name) -> const AccessVector& {
        for (const auto& v : access)
            if (v.name == name) {
                if (v.values.size() != cells)
                    throw DataError("access vector '" + name + "' does not match the grid");
                return v;
            }
        throw LookupError("synthetic DGP needs access vector '" + name + "'");
    };

    SynthHouseholds out;
    auto& truth = out.truth;
    truth.sigma = cfg.sigma;
    truth.endogeneity = cfg.endogeneity;
    truth.target_censoring = cfg.target_censoring;
    truth.instruments = cfg.instruments;

    // Shared unobservable: instrument-orthogonal part of the access mix, per cell.
    const auto c_rows = static_cast<Eigen::Index>(cells);
    Eigen::VectorXd composite = Eigen::VectorXd::Zero(c_rows);
    for (const auto& [name, beta] : cfg.access_beta) {
        truth.endogenous.push_back(name);
        const Eigen::Map<const Eigen::VectorXd> v(find(name).values.data(), c_rows);
        const double sd = stdev(v);
        if (sd > 0.0)
            composite += v / sd;
    }
    Eigen::MatrixXd Z(c_rows, 1 + static_cast<Eigen::Index>(cfg.instruments.size()));
    Z.col(0).setOnes();
    for (std::size_t k = 0; k < cfg.instruments.size(); ++k)
        Z.col(static_cast<Eigen::Index>(k) + 1) =
            Eigen::Map<const Eigen::VectorXd>(find(cfg.instruments[k]).values.data(), c_rows);
    const Eigen::VectorXd coef = Z.colPivHouseholderQr().solve(composite);
    const Eigen::VectorXd resid = composite - Z * coef;
    const double resid_sd = stdev(resid);
    out.unobservable.assign(cells, 0.0);
    if (resid_sd > 0.0)
        for (std::size_t c = 0; c < cells; ++c)
            out.unobservable[c] = -resid(static_cast<Eigen::Index>(c)) / resid_sd;

    std::mt19937_64 rng(substream_seed(cfg.seed, kHouseholdStream));
    std::normal_distribution<double> log_density(kDensityLogMean, kDensityLogSd);
    std::vector<double> density(cells);
    for (auto& d : density)
        d = std::exp(log_density(rng));

    std::uniform_int_distribution<std::size_t> pick_cell(0, cells - 1);
    std::discrete_distribution<int> income(kIncomeShares.begin(), kIncomeShares.end());
    std::normal_distribution<double> noise(0.0, 1.0);

    const std::size_t n = cfg.households;
    auto& sample = out.sample;
    sample.rows.resize(n);
    std::vector<CellId> home(n);
    std::vector<double> index(n);
    const double urban_edge = grid.bbox().xmin + cfg.urban_core_share * grid.bbox().width();
    for (std::size_t i = 0; i < n; ++i) {
        auto& h = sample.rows[i];
        home[i] = pick_cell(rng);
        h.id = static_cast<long long>(i + 1);
        h.cell = grid.coord(home[i]);
        h.urban_core = grid.centroid(home[i]).x <= urban_edge;
        h.vehicles = bounded_poisson(rng, kMeanVehicles);
        h.income_cat = 1 + income(rng);
        h.hh_size = 1 + bounded_poisson(rng, kMeanExtraMembers);
        h.tract_density = density[home[i]];
        const double e = noise(rng);

        double lin = 0.0;
        for (const auto& [name, beta] : cfg.access_beta)
            lin += beta * find(name).values[home[i]];
        lin += cfg.beta_vehicles * h.vehicles + cfg.beta_income_step * (h.income_cat - 1) +
               cfg.beta_hh_size * h.hh_size + cfg.beta_tract_density * h.tract_density;
        lin += cfg.endogeneity * out.unobservable[home[i]] + cfg.sigma * e;
        index[i] = lin;
    }

    auto share_at = [&](double b) {
        std::size_t zeros = 0;
        for (double v : index)
            zeros += (b + v <= 0.0);
        return static_cast<double>(zeros) / static_cast<double>(n);
    };
    const auto [mn, mx] = std::minmax_element(index.begin(), index.end());
    double lo = -*mx - 1.0;   // everything censored
    double hi = -*mn + 1.0;   // nothing censored
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (share_at(mid) > cfg.target_censoring)
            lo = mid;
        else
            hi = mid;
    }
    const double share_lo = share_at(lo);
    const double share_hi = share_at(hi);
    double intercept =
        std::abs(share_lo - cfg.target_censoring) < std::abs(share_hi - cfg.target_censoring) ? lo : hi;
    // Recentre within the gap between the last censored and first uncensored
    // household so nobody sits on the boundary with a vanishing positive VMT.
    {
        double below = -std::numeric_limits<double>::infinity();
        double above = std::numeric_limits<double>::infinity();
        for (double v : index) {
            if (intercept + v <= 0.0)
                below = std::max(below, v);
            else
                above = std::min(above, v);
        }
        if (std::isfinite(below) && std::isfinite(above))
            intercept = -0.5 * (below + above);
    }
    truth.realized_censoring = share_at(intercept);
    if (std::abs(truth.realized_censoring - cfg.target_censoring) > 0.01)
        throw ConfigError("censoring target " + format_double(cfg.target_censoring) +
                          " is unattainable with this sample (closest share " +
                          format_double(truth.realized_censoring) + ")");
    truth.intercept = intercept;

    for (std::size_t i = 0; i < n; ++i)
        sample.rows[i].vmt = std::max(0.0, intercept + index[i]);

    truth.beta["intercept"] = intercept;
    for (const auto& [name, beta] : cfg.access_beta)
        truth.beta[name] = beta;
    truth.beta["vehicles"] = cfg.beta_vehicles;
    for (int cat = 2; cat <= kIncomeCategories; ++cat)
        truth.beta["income_" + std::to_string(cat)] = cfg.beta_income_step * (cat - 1);
    truth.beta["hh_size"] = cfg.beta_hh_size;
    truth.beta["tract_density"] = cfg.beta_tract_density;

    sample.report.rows_read = n;
    sample.report.retained = n;
    sample.report.censor_share = truth.realized_censoring;
    for (const auto& v : access) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i)
            col[i] = v.values.at(home[i]);
        sample.access[v.name] = std::move(col);
    }
    return out;
}

} // namespace polyvmt
