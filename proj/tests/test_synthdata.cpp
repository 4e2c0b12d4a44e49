#include "doctest.h"

#include "synth_fixture.hpp"

#include "polyvmt/error.hpp"
#include "polyvmt/regress.hpp"
#include "polyvmt/subcenter.hpp"

#include <cmath>

using namespace polyvmt;

namespace {

bool same_points(const std::vector<PointRecord>& a, const std::vector<PointRecord>& b) {
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].x != b[i].x || a[i].y != b[i].y || a[i].weight != b[i].weight)
            return false;
    return true;
}

double corr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd x = a.array() - a.mean();
    const Eigen::ArrayXd y = b.array() - b.mean();
    return (x * y).sum() / std::sqrt(x.square().sum() * y.square().sum());
}

Eigen::VectorXd column(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

TEST_CASE("region generation is a pure function of the seed") {
    SynthConfig cfg;
    cfg.seed = 77;
    const Region a = gen_region(cfg);
    const Region b = gen_region(cfg);
    CHECK(same_points(a.establishments, b.establishments));
    REQUIRE(a.amenities.size() == b.amenities.size());
    for (std::size_t k = 0; k < a.amenities.size(); ++k)
        CHECK(same_points(a.amenities[k].points, b.amenities[k].points));
    CHECK(a.anchor.x == b.anchor.x);
    cfg.seed = 78;
    CHECK_FALSE(same_points(a.establishments, gen_region(cfg).establishments));
}

TEST_CASE("each cluster carries exactly its job total") {
    SynthConfig cfg;
    cfg.background_intensity = 0.0;
    cfg.cluster_count = 3;
    cfg.cluster_jobs = {40'000, 12'000, 5'000};
    const Region r = gen_region(cfg);
    double total = 0.0;
    for (const auto& p : r.establishments) {
        CHECK(p.weight >= 1.0);
        total += p.weight;
    }
    CHECK(total == doctest::Approx(57'000.0).epsilon(1e-12));
    CHECK(r.cluster_centers.size() == 3);
}

TEST_CASE("one tight cluster on an empty background yields exactly one center") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SynthConfig cfg;
        cfg.seed = seed;
        cfg.background_intensity = 0.0;
        cfg.cluster_count = 1;
        cfg.cluster_jobs = {10'000};
        cfg.cluster_spread = 0.6;
        const auto grid = HexGrid::build(cfg.bbox, cfg.cell_area);
        const auto field = aggregate_points(grid, gen_region(cfg).establishments, OutOfBoundsPolicy::Drop).field;
        const auto set = identify_subcenters(grid, field, 0.95, 10'000);
        REQUIRE(set.centers.size() == 1);
        CHECK(set.centers[0].total_jobs == doctest::Approx(10'000.0));
    }
}

TEST_CASE("a uniform background with no clusters rarely produces a center") {
    int empty = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        SynthConfig cfg;
        cfg.seed = seed;
        cfg.cluster_count = 0;
        const auto grid = HexGrid::build(cfg.bbox, cfg.cell_area);
        const auto field = aggregate_points(grid, gen_region(cfg).establishments, OutOfBoundsPolicy::Drop).field;
        empty += identify_subcenters(grid, field, 0.95, 10'000).centers.empty();
    }
    CHECK(empty >= 95);
}

TEST_CASE("invalid generator settings are config errors") {
    SynthConfig cfg;
    cfg.cluster_spread = 0.0;
    CHECK_THROWS_AS(gen_region(cfg), ConfigError);
    cfg.cluster_spread = -1.0;
    CHECK_THROWS_AS(gen_region(cfg), ConfigError);
    CHECK_THROWS_AS(fixture::config(1, {{"synth.cluster_spread", "0"}}), ConfigError);
    CHECK_THROWS_AS(fixture::config(1, {{"synth.target_censoring", "1"}}), ConfigError);
}

TEST_CASE("household generation is deterministic and records its truth") {
    const auto cfg = fixture::config(11, {{"synth.households", "800"}});
    const auto w = fixture::build(cfg);
    const auto a = gen_households(cfg.synth, w.grid, w.access);
    const auto b = gen_households(cfg.synth, w.grid, w.access);
    REQUIRE(a.sample.size() == 800);
    for (std::size_t i = 0; i < a.sample.size(); ++i) {
        CHECK(a.sample.rows[i].vmt == b.sample.rows[i].vmt);
        CHECK(a.sample.rows[i].cell == b.sample.rows[i].cell);
    }
    CHECK(a.truth.sigma == cfg.synth.sigma);
    CHECK(a.truth.endogeneity == cfg.synth.endogeneity);
    for (const auto& [name, beta] : cfg.synth.access_beta)
        CHECK(a.truth.beta.at(name) == beta);
    for (const auto& h : a.sample.rows) {
        CHECK(h.vmt >= 0.0);
        CHECK(h.vehicles >= 0);
        CHECK(h.income_cat >= 1);
        CHECK(h.income_cat <= 10);
        CHECK(h.hh_size >= 1);
        CHECK(h.tract_density > 0.0);
    }
}

TEST_CASE("the shared unobservable is orthogonal to every instrument") {
    const auto cfg = fixture::config(12);
    const auto w = fixture::build(cfg);
    const auto hh = gen_households(cfg.synth, w.grid, w.access);
    const Eigen::VectorXd u = column(hh.unobservable);
    CHECK(u.mean() == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(std::sqrt((u.array() - u.mean()).square().sum() / (u.size() - 1.0)) == doctest::Approx(1.0).epsilon(1e-10));
    for (const auto& v : w.access) {
        const bool instrument =
            std::find(cfg.synth.instruments.begin(), cfg.synth.instruments.end(), v.name) != cfg.synth.instruments.end();
        if (instrument)
            CHECK(std::abs(corr(u, column(v.values))) < 1e-10);
    }
    // higher access goes with a lower error
    for (const auto& v : w.access)
        if (v.name == "acc_noncentered")
            CHECK(corr(u, column(v.values)) < 0.0);
}

TEST_CASE("censoring target is hit at n = 10000 and VMT moments are close to the reference") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto cfg = fixture::config(seed, {{"synth.households", "10000"}, {"synth.target_censoring", "0.25"}});
        const auto w = fixture::build(cfg);
        const auto hh = gen_households(cfg.synth, w.grid, w.access);
        std::size_t zeros = 0;
        for (const auto& h : hh.sample.rows)
            zeros += h.vmt == 0.0;
        const double share = zeros / 10000.0;
        CHECK(share >= 0.24);
        CHECK(share <= 0.26);
        CHECK(hh.truth.realized_censoring == share);
        double smallest = 1e300;
        for (const auto& h : hh.sample.rows)
            if (h.vmt > 0.0)
                smallest = std::min(smallest, h.vmt);
        // no household is left on the censoring boundary
        CHECK(smallest > 1e-6);
    }
    // default target 0.27; reference mean daily VMT 35.55
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto cfg = fixture::config(seed, {{"synth.households", "10000"}});
        const auto w = fixture::build(cfg);
        const auto hh = gen_households(cfg.synth, w.grid, w.access);
        const double mean = hh.sample.vmt().mean();
        CHECK(std::abs(mean - 35.55) < 0.1 * 35.55);
        CHECK(std::abs(hh.truth.realized_censoring - 0.27) <= 0.01);
    }
}

TEST_CASE("an unattainable censoring target is an error") {
    auto cfg = fixture::config(3, {{"synth.households", "2"}, {"synth.target_censoring", "0.3"}});
    const auto w = fixture::build(cfg);
    CHECK_THROWS_AS(gen_households(cfg.synth, w.grid, w.access), ConfigError);
}

TEST_CASE("without endogeneity plain Tobit recovers the structural coefficients") {
    int inside = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto cfg = fixture::config(seed, {{"synth.endogeneity", "0"}});
        const auto w = fixture::build(cfg);
        const auto hh = gen_households(cfg.synth, w.grid, w.access);
        const auto& fam = fixture::family(cfg, "split");
        const Design d = build_design(hh.sample, fam.access, cfg.controls);
        const auto fit = tobit_fit(d.X, d.y, d.names);
        const Eigen::VectorXd se = fit.se();
        for (std::size_t k = 0; k < d.names.size(); ++k) {
            const double truth = hh.truth.beta.at(d.names[k]);
            inside += std::abs(fit.beta(static_cast<Eigen::Index>(k)) - truth) <= 3.0 * se(static_cast<Eigen::Index>(k));
            ++total;
        }
        inside += std::abs(fit.sigma - cfg.synth.sigma) <= 3.0 * fit.sigma_se();
        ++total;
    }
    CHECK(inside >= 0.95 * total);
}

TEST_CASE("strong endogeneity biases Tobit and the instrumented fit removes most of it") {
    const int seeds = 30;
    const std::string target = "acc_noncentered";
    double tobit_sum = 0.0, tobit_se = 0.0, iv_sum = 0.0;
    double beta = 0.0;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        const auto cfg = fixture::config(seed, {{"synth.endogeneity", "10"}});
        const auto w = fixture::build(cfg);
        const auto hh = gen_households(cfg.synth, w.grid, w.access);
        beta = hh.truth.beta.at(target);
        const auto& fam = fixture::family(cfg, "split");
        const Design d = build_design(hh.sample, fam.access, cfg.controls);
        const auto tobit = tobit_fit(d.X, d.y, d.names);
        tobit_sum += tobit.coef(target);
        tobit_se += tobit.se()(static_cast<Eigen::Index>(tobit.index_of(target)));
        IvTobitOptions opt;
        opt.bootstrap_reps = 0;
        const auto iv = iv_tobit_two_step(fixture::iv_data(hh.sample, fam, cfg.controls), opt);
        iv_sum += iv.second_stage.coef(target);
    }
    const double tobit_bias = std::abs(tobit_sum / seeds - beta);
    const double iv_bias = std::abs(iv_sum / seeds - beta);
    MESSAGE("tobit bias " << tobit_bias << ", iv bias " << iv_bias);
    CHECK(tobit_bias > 3.0 * tobit_se / seeds);
    CHECK(iv_bias < tobit_bias / 3.0);
}

TEST_CASE("instruments are relevant under the default configuration") {
    int strong = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const auto cfg = fixture::config(seed);
        const auto w = fixture::build(cfg);
        const auto hh = gen_households(cfg.synth, w.grid, w.access);
        for (const auto& fam : cfg.families) {
            if (fam.instruments.empty())
                continue;
            for (const auto& fs : first_stage(fixture::iv_data(hh.sample, fam, cfg.controls))) {
                strong += fs.F > 10.0;
                ++total;
            }
        }
    }
    CHECK(total > 0);
    CHECK(strong >= 0.95 * total);
}
