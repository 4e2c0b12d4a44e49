#include "polyvmt/pipeline.hpp"

#include "polyvmt/access.hpp"
#include "polyvmt/error.hpp"
#include "polyvmt/household.hpp"
#include "polyvmt/iv.hpp"
#include "polyvmt/numeric.hpp"
#include "polyvmt/regress.hpp"
#include "polyvmt/stability.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace polyvmt {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const MissingArtifactError*>(&e))
        return kExitMissingArtifact;
    if (dynamic_cast<const ConfigError*>(&e))
        return kExitConfig;
    if (dynamic_cast<const DataError*>(&e))
        return kExitData;
    if (dynamic_cast<const EstimationError*>(&e))
        return kExitEstimation;
    if (dynamic_cast<const nlohmann::json::exception*>(&e))
        return kExitData;
    return kExitUnexpected;
}

namespace {

const std::vector<std::string> kStages{"synth",      "grid",        "centers",    "access", "estimate",
                                       "iv-estimate", "elasticity", "scenario",   "report"};

template <class F>
auto config_value(const KeyValues& kv, const std::string& key, F parse) {
    try {
        return parse(kv.at(key));
    } catch (const DataError&) {
        throw ConfigError("config key '" + key + "' has an invalid value '" + kv.at(key) + "'");
    }
}

double get_double(const KeyValues& kv, const std::string& key) {
    const auto v = config_value(kv, key, [](const std::string& s) { return parse_double(s); });
    if (!v || !std::isfinite(*v))
        throw ConfigError("config key '" + key + "' needs a finite number, got '" + kv.at(key) + "'");
    return *v;
}

long long get_int(const KeyValues& kv, const std::string& key) {
    const auto v = config_value(kv, key, [](const std::string& s) { return parse_int(s); });
    if (!v)
        throw ConfigError("config key '" + key + "' needs an integer, got '" + kv.at(key) + "'");
    return *v;
}

std::uint64_t get_u64(const KeyValues& kv, const std::string& key) {
    const std::string s = trim(kv.at(key));
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
        throw ConfigError("config key '" + key + "' needs an unsigned 64-bit integer, got '" + s + "'");
    return v;
}

std::vector<std::string> get_list(const KeyValues& kv, const std::string& key) {
    std::vector<std::string> out;
    for (auto& item : split_list(kv.at(key)))
        if (!item.empty())
            out.push_back(item);
    return out;
}

bool allowed_dynamic_key(const std::string& key) {
    if (key.rfind("amenity.", 0) == 0)
        return key.size() > 8;
    if (key.rfind("synth.beta.", 0) == 0)
        return key.size() > 11;
    if (key.rfind("model.", 0) == 0) {
        const auto dot = key.rfind('.');
        if (dot <= 6)
            return false;
        const std::string field = key.substr(dot + 1);
        return field == "access" || field == "instruments";
    }
    return false;
}

fs::path resolve_path(const PipelineConfig& cfg, const std::string& value, const std::string& fallback) {
    return value.empty() ? cfg.out_dir / fallback : fs::path(value);
}

void require_artifact(const fs::path& path, const std::string& producer) {
    if (!fs::exists(path))
        throw MissingArtifactError(path.string(), producer);
}

Json read_json(const fs::path& path, const std::string& producer) {
    require_artifact(path, producer);
    std::ifstream in(path);
    return Json::parse(in);
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void echo_config(const PipelineConfig& cfg) { write_text(cfg.artifact("config.resolved"), format_key_values(cfg.resolved)); }

std::string fixed(double v, int precision) {
    if (!std::isfinite(v))
        return "N/A";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
    std::string s(buf, res.ptr);
    if (s.find_first_not_of("-0.") == std::string::npos)
        s = s.front() == '-' ? s.substr(1) : s;
    return s;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

// ---- grid and employment ----------------------------------------------------

std::vector<PointRecord> read_layer_points(const PipelineConfig& cfg, const fs::path& path) {
    return read_points(path, cfg.projection);
}

EmploymentField load_employment(const PipelineConfig& cfg, const HexGrid& grid) {
    const fs::path path = cfg.artifact("employment.csv");
    require_artifact(path, "grid");
    const auto table = read_csv(path);
    const std::size_t cq = table.column("cell_q");
    const std::size_t cr = table.column("cell_r");
    const std::size_t cj = table.column("jobs");
    if (table.rows.size() != grid.size())
        throw DataError("employment.csv has " + std::to_string(table.rows.size()) + " cells but the configured grid has " +
                        std::to_string(grid.size()) + "; rerun 'grid'");
    std::vector<double> values(grid.size(), 0.0);
    for (const auto& row : table.rows) {
        const auto q = parse_int(row[cq]);
        const auto r = parse_int(row[cr]);
        const auto jobs = parse_double(row[cj]);
        if (!q || !r || !jobs)
            throw DataError("employment.csv has a malformed row");
        values[grid.id_of({static_cast<int>(*q), static_cast<int>(*r)})] = *jobs;
    }
    return EmploymentField(std::move(values));
}

void write_grid_outputs(const PipelineConfig& cfg, const HexGrid& grid, const AggregateResult& agg,
                        std::size_t points_read) {
    CsvWriter cells({"cell_q", "cell_r", "x_mi", "y_mi"});
    CsvWriter jobs({"cell_q", "cell_r", "jobs"});
    for (CellId id = 0; id < grid.size(); ++id) {
        const auto c = grid.coord(id);
        const auto p = grid.centroid(id);
        cells.row({format_int(c.q), format_int(c.r), format_double(p.x), format_double(p.y)});
        jobs.row({format_int(c.q), format_int(c.r), format_double(agg.field[id])});
    }
    cells.save(cfg.artifact("grid.csv"));
    jobs.save(cfg.artifact("employment.csv"));

    Json summary;
    summary["cells"] = grid.size();
    summary["cell_area_sq_mi"] = grid.cell_area();
    summary["side_length_mi"] = grid.side_length();
    summary["orientation"] = to_string(grid.orientation());
    summary["bbox"] = {grid.bbox().xmin, grid.bbox().ymin, grid.bbox().xmax, grid.bbox().ymax};
    summary["points_read"] = points_read;
    summary["points_dropped"] = agg.dropped;
    summary["weight_dropped"] = agg.dropped_weight;
    summary["total_jobs"] = agg.field.total();
    write_json(cfg.artifact("grid_summary.json"), summary);
}

// ---- centers ----------------------------------------------------------------

SubCenterSet load_centers(const PipelineConfig& cfg, const HexGrid& grid) {
    const fs::path path = cfg.artifact("centers.csv");
    require_artifact(path, "centers");
    const auto table = read_csv(path);
    const std::size_t cq = table.column("cell_q");
    const std::size_t cr = table.column("cell_r");
    const std::size_t crank = table.column("center_rank");
    const std::size_t ctot = table.column("center_total_jobs");
    std::map<int, SubCenter> by_rank;
    for (const auto& row : table.rows) {
        const auto q = parse_int(row[cq]);
        const auto r = parse_int(row[cr]);
        const auto rank = parse_int(row[crank]);
        const auto total = parse_double(row[ctot]);
        if (!q || !r || !rank || !total || *rank < 1)
            throw DataError("centers.csv has a malformed row");
        auto& c = by_rank[static_cast<int>(*rank)];
        c.rank = static_cast<int>(*rank);
        c.total_jobs = *total;
        c.members.push_back(grid.id_of({static_cast<int>(*q), static_cast<int>(*r)}));
    }
    SubCenterSet set;
    set.percentile = cfg.percentile;
    set.min_total_jobs = cfg.min_jobs;
    int expected = 1;
    for (auto& [rank, c] : by_rank) {
        if (rank != expected++)
            throw DataError("centers.csv ranks are not consecutive from 1");
        std::sort(c.members.begin(), c.members.end());
        set.centers.push_back(std::move(c));
    }
    return set;
}

void write_centers(const PipelineConfig& cfg, const HexGrid& grid, const EmploymentField& field,
                   const SubCenterSet& set) {
    CsvWriter out({"cell_q", "cell_r", "center_rank", "center_total_jobs"});
    std::vector<std::tuple<HexCoord, int, double>> rows;
    for (const auto& c : set.centers)
        for (CellId id : c.members)
            rows.emplace_back(grid.coord(id), c.rank, c.total_jobs);
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
    for (const auto& [c, rank, total] : rows)
        out.row({format_int(c.q), format_int(c.r), format_int(rank), format_double(total)});
    out.save(cfg.artifact("centers.csv"));

    Json summary;
    summary["percentile"] = set.percentile;
    summary["percentile_population"] =
        cfg.percentile_population == PercentilePopulation::AllCells ? "all" : "positive";
    summary["threshold_density"] = set.threshold_density;
    summary["min_total_jobs"] = set.min_total_jobs;
    summary["total_jobs_region"] = field.total();
    summary["total_jobs_in_centers"] = set.total_jobs();
    Json centers = Json::array();
    for (const auto& c : set.centers) {
        Json jc;
        jc["rank"] = c.rank;
        jc["cells"] = c.members.size();
        jc["total_jobs"] = c.total_jobs;
        jc["peak_density"] = c.peak_density;
        centers.push_back(std::move(jc));
    }
    summary["centers"] = std::move(centers);
    write_json(cfg.artifact("centers.json"), summary);
}

// ---- amenities and anchor ---------------------------------------------------

AmenityField load_amenity(const PipelineConfig& cfg, const HexGrid& grid, const std::string& layer) {
    const fs::path path = cfg.amenity_path(layer);
    require_artifact(path, "synth");
    const auto table = read_csv(path);
    if (table.find_column("indicator")) {
        const std::size_t cq = table.column("cell_q");
        const std::size_t cr = table.column("cell_r");
        const std::size_t ci = table.column("indicator");
        std::vector<double> values(grid.size(), 0.0);
        for (const auto& row : table.rows) {
            const auto q = parse_int(row[cq]);
            const auto r = parse_int(row[cr]);
            const auto v = parse_double(row[ci]);
            if (!q || !r || !v)
                throw DataError("amenity indicator file " + path.string() + " has a malformed row");
            values[grid.id_of({static_cast<int>(*q), static_cast<int>(*r)})] = *v;
        }
        return AmenityField(std::move(values));
    }
    auto points = read_layer_points(cfg, path);
    if (cfg.out_of_bbox == OutOfBoundsPolicy::Drop)
        std::erase_if(points, [&](const PointRecord& p) { return !grid.bbox().contains({p.x, p.y}); });
    return AmenityField::from_points(grid, points);
}

Point2 load_anchor(const PipelineConfig& cfg) {
    const auto parts = split_list(cfg.anchor);
    if (parts.size() == 2) {
        const auto x = parse_double(parts[0]);
        const auto y = parse_double(parts[1]);
        if (x && y)
            return {*x, *y};
    }
    const fs::path path = resolve_path(cfg, cfg.anchor, "anchor.csv");
    const auto pts = read_layer_points(cfg, [&] {
        require_artifact(path, "synth");
        return path;
    }());
    if (pts.size() != 1)
        throw DataError("anchor file " + path.string() + " must hold exactly one point");
    return {pts.front().x, pts.front().y};
}

// ---- households -------------------------------------------------------------

HouseholdSample load_sample(const PipelineConfig& cfg) {
    require_artifact(cfg.households, "synth");
    auto sample = load_households(cfg.households, cfg.outlier_cap);
    const fs::path access = cfg.artifact("access.csv");
    require_artifact(access, "access");
    attach_access(sample, read_csv(access));
    return sample;
}

RowFilter sample_filter(const std::string& name) {
    if (name == "all")
        return {};
    if (name == "urban")
        return [](const Household& h) { return h.urban_core; };
    throw ConfigError("unknown sample '" + name + "' (expected all or urban)");
}

std::string model_id(const ModelFamily& fam, const std::string& estimator, const std::string& sample) {
    return fam.name + "_" + estimator + "_" + sample;
}

Json load_report_json(const LoadReport& r) {
    Json j;
    j["rows_read"] = r.rows_read;
    j["dropped_missing"] = r.dropped_missing;
    j["dropped_outlier"] = r.dropped_outlier;
    j["retained"] = r.retained;
    j["censor_share"] = r.censor_share;
    return j;
}

Json elasticity_json(const ElasticityEstimate& e) {
    Json j;
    j["variable"] = e.variable;
    j["elasticity"] = e.value;
    j["n_used"] = e.n_used;
    j["policy"] = to_string(e.policy);
    return j;
}

Json coefficients_json(const std::vector<std::string>& names, const Eigen::VectorXd& beta, const Eigen::VectorXd& se) {
    Json arr = Json::array();
    for (std::size_t k = 0; k < names.size(); ++k) {
        Json c;
        c["name"] = names[k];
        c["estimate"] = beta(static_cast<Eigen::Index>(k));
        c["se"] = number_or_null(se(static_cast<Eigen::Index>(k)));
        arr.push_back(std::move(c));
    }
    return arr;
}

Json tobit_json(const TobitFit& fit, const Eigen::VectorXd& se, double sigma_se) {
    Json j;
    j["coefficients"] = coefficients_json(fit.names, fit.beta, se);
    j["sigma"] = fit.sigma;
    j["sigma_se"] = number_or_null(sigma_se);
    j["loglik"] = fit.loglik;
    j["n"] = fit.n;
    j["n_censored"] = fit.n_censored;
    Json conv;
    conv["iterations"] = fit.convergence.iterations;
    conv["grad_norm"] = fit.convergence.grad_norm;
    conv["converged"] = fit.convergence.converged;
    conv["step_halvings"] = fit.convergence.step_halvings;
    conv["hessian_negative_definite"] = fit.convergence.hessian_negative_definite;
    j["convergence"] = std::move(conv);
    j["warnings"] = fit.warnings;
    return j;
}

Json lr_json(const LrTest& lr) {
    Json j;
    j["statistic"] = lr.statistic;
    j["dof"] = lr.dof;
    j["p"] = lr.p_value;
    return j;
}

TobitFit fit_from_json(const Json& rec) {
    TobitFit fit;
    const auto& coefs = rec.at("coefficients");
    fit.beta.resize(static_cast<Eigen::Index>(coefs.size()));
    for (std::size_t k = 0; k < coefs.size(); ++k) {
        fit.names.push_back(coefs[k].at("name").get<std::string>());
        fit.beta(static_cast<Eigen::Index>(k)) = coefs[k].at("estimate").get<double>();
    }
    fit.sigma = rec.at("sigma").get<double>();
    return fit;
}

// Design columns reordered to match a fitted model's coefficient order.
Eigen::MatrixXd columns_in_order(const Design& d, const std::vector<std::string>& names) {
    Eigen::MatrixXd X(d.X.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k)
        X.col(static_cast<Eigen::Index>(k)) = d.X.col(static_cast<Eigen::Index>(d.index_of(names[k])));
    return X;
}

IvData iv_data_from(const Design& d, const ModelFamily& fam) {
    IvData data;
    data.y = d.y;
    std::vector<std::string> exog;
    for (const auto& name : d.names) {
        const bool endog = std::find(fam.access.begin(), fam.access.end(), name) != fam.access.end();
        const bool inst = std::find(fam.instruments.begin(), fam.instruments.end(), name) != fam.instruments.end();
        if (!endog && !inst)
            exog.push_back(name);
    }
    auto take = [&](const std::vector<std::string>& names) {
        Eigen::MatrixXd M(d.X.rows(), static_cast<Eigen::Index>(names.size()));
        for (std::size_t k = 0; k < names.size(); ++k)
            M.col(static_cast<Eigen::Index>(k)) = d.X.col(static_cast<Eigen::Index>(d.index_of(names[k])));
        return M;
    };
    data.exog = take(exog);
    data.exog_names = exog;
    data.endog = take(fam.access);
    data.endog_names = fam.access;
    data.instruments = take(fam.instruments);
    data.instrument_names = fam.instruments;
    return data;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// All fitted model records in report order: per family, Tobit models then IV models.
std::vector<Json> collect_models(const Json& estimates, const std::optional<Json>& iv) {
    std::vector<Json> out;
    for (const auto& m : estimates.at("models"))
        out.push_back(m);
    if (iv)
        for (const auto& m : iv->at("models"))
            out.push_back(m);
    return out;
}

std::optional<Json> maybe_iv_estimates(const PipelineConfig& cfg) {
    const bool any = std::any_of(cfg.families.begin(), cfg.families.end(),
                                 [](const ModelFamily& f) { return !f.instruments.empty(); });
    if (!any)
        return std::nullopt;
    return read_json(cfg.artifact("iv_estimates.json"), "iv-estimate");
}

} // namespace

// ---- configuration ------------------------------------------------------------

fs::path PipelineConfig::amenity_path(const std::string& layer) const {
    const auto it = resolved.find("amenity." + layer);
    if (it != resolved.end() && !it->second.empty())
        return it->second;
    return out_dir / ("amenity_" + layer + ".csv");
}

KeyValues default_key_values() {
    const SynthConfig synth;
    KeyValues kv{
        {"out_dir", "out"},
        {"seed", std::to_string(synth.seed)},
        {"threads", "0"},
        {"grid.xmin", format_double(synth.bbox.xmin)},
        {"grid.ymin", format_double(synth.bbox.ymin)},
        {"grid.xmax", format_double(synth.bbox.xmax)},
        {"grid.ymax", format_double(synth.bbox.ymax)},
        {"grid.cell_area", "1"},
        {"grid.orientation", "pointy"},
        {"projection", "none"},
        {"projection.lon0", "0"},
        {"projection.lat0", "0"},
        {"out_of_bbox", "drop"},
        {"establishments", ""},
        {"households", ""},
        {"amenity_layers", "rail_stations,streetcar_lines,planned_highways"},
        {"anchor", ""},
        {"percentile", "0.95"},
        {"min_jobs", "10000"},
        {"percentile_population", "all"},
        {"rank_grouping", "1,2,3+"},
        {"access_scale", "10000"},
        {"outlier_cap", "200"},
        {"controls", "vehicles,income,hh_size,tract_density"},
        {"models", "all_jobs,split,rank"},
        {"model.all_jobs.access", "acc_all"},
        {"model.all_jobs.instruments", "iv_streetcar_lines,iv_anchor"},
        {"model.split.access", "acc_centered,acc_noncentered"},
        {"model.split.instruments", "iv_rail_stations,iv_streetcar_lines,iv_planned_highways"},
        {"model.rank.access", "acc_rank_1,acc_rank_2,acc_rank_3_plus,acc_noncentered"},
        {"model.rank.instruments", ""},
        {"samples", "all,urban"},
        {"stability_models", "all_jobs,split"},
        {"elasticity_policy", "observed-positive"},
        {"bootstrap_reps", "200"},
        {"scenario.model", "split_ivtobit_all"},
        {"scenario.variable", "acc_noncentered"},
        {"scenario.pct", "100"},
        {"quintile.variable", "acc_noncentered"},
        {"quintile.k", "5"},
        {"synth.households", std::to_string(synth.households)},
        {"synth.clusters", std::to_string(synth.cluster_count)},
        {"synth.cluster_spread", format_double(synth.cluster_spread)},
        {"synth.background_intensity", format_double(synth.background_intensity)},
        {"synth.mean_establishment_size", format_double(synth.mean_establishment_size)},
        {"synth.sigma", format_double(synth.sigma)},
        {"synth.endogeneity", format_double(synth.endogeneity)},
        {"synth.target_censoring", format_double(synth.target_censoring)},
        {"synth.urban_core_share", format_double(synth.urban_core_share)},
    };
    for (const auto& [name, beta] : synth.access_beta)
        kv["synth.beta." + name] = format_double(beta);
    return kv;
}

PipelineConfig resolve_config(const std::optional<fs::path>& file, const KeyValues& overrides) {
    KeyValues kv = default_key_values();
    const KeyValues defaults = kv;
    auto apply = [&](const KeyValues& src, const std::string& origin) {
        for (const auto& [k, v] : src) {
            if (!defaults.count(k) && !allowed_dynamic_key(k))
                throw ConfigError("unknown config key '" + k + "' in " + origin);
            kv[k] = v;
        }
    };
    if (file) {
        if (!fs::exists(*file))
            throw ConfigError("config file " + file->string() + " does not exist");
        apply(read_key_values(*file), file->string());
    }
    apply(overrides, "command-line overrides");
    return resolve_config(kv);
}

PipelineConfig resolve_config(const KeyValues& input) {
    KeyValues kv = default_key_values();
    for (const auto& [k, v] : input) {
        if (!kv.count(k) && !allowed_dynamic_key(k))
            throw ConfigError("unknown config key '" + k + "'");
        kv[k] = v;
    }

    PipelineConfig cfg;
    cfg.out_dir = kv.at("out_dir");
    if (cfg.out_dir.empty())
        throw ConfigError("out_dir must not be empty");
    cfg.seed = get_u64(kv, "seed");
    const long long threads = get_int(kv, "threads");
    if (threads < 0)
        throw ConfigError("threads must be >= 0");
    cfg.threads = threads == 0 ? default_threads() : static_cast<unsigned>(threads);

    cfg.bbox = {get_double(kv, "grid.xmin"), get_double(kv, "grid.ymin"), get_double(kv, "grid.xmax"),
                get_double(kv, "grid.ymax")};
    if (!(cfg.bbox.xmax > cfg.bbox.xmin && cfg.bbox.ymax > cfg.bbox.ymin))
        throw ConfigError("grid bbox must have positive width and height");
    cfg.cell_area = get_double(kv, "grid.cell_area");
    if (!(cfg.cell_area > 0.0))
        throw ConfigError("grid.cell_area must be positive");
    cfg.orientation = parse_orientation(kv.at("grid.orientation"));
    const std::string proj = kv.at("projection");
    if (proj == "equirectangular")
        cfg.projection = Equirectangular{get_double(kv, "projection.lon0"), get_double(kv, "projection.lat0")};
    else if (proj != "none")
        throw ConfigError("projection must be none or equirectangular");
    const std::string oob = kv.at("out_of_bbox");
    if (oob == "drop")
        cfg.out_of_bbox = OutOfBoundsPolicy::Drop;
    else if (oob == "strict")
        cfg.out_of_bbox = OutOfBoundsPolicy::Strict;
    else
        throw ConfigError("out_of_bbox must be drop or strict");

    cfg.establishments = resolve_path(cfg, kv.at("establishments"), "establishments.csv");
    cfg.households = resolve_path(cfg, kv.at("households"), "households.csv");
    cfg.amenity_layers = get_list(kv, "amenity_layers");
    cfg.anchor = kv.at("anchor");

    cfg.percentile = get_double(kv, "percentile");
    if (!(cfg.percentile > 0.0 && cfg.percentile < 1.0))
        throw ConfigError("percentile must lie strictly between 0 and 1, got " + kv.at("percentile"));
    cfg.min_jobs = get_double(kv, "min_jobs");
    if (cfg.min_jobs < 0.0)
        throw ConfigError("min_jobs must be >= 0");
    const std::string pop = kv.at("percentile_population");
    if (pop == "all")
        cfg.percentile_population = PercentilePopulation::AllCells;
    else if (pop == "positive")
        cfg.percentile_population = PercentilePopulation::PositiveCells;
    else
        throw ConfigError("percentile_population must be all or positive");
    cfg.rank_grouping = parse_rank_grouping(kv.at("rank_grouping"));
    validate_grouping(cfg.rank_grouping);
    cfg.access_scale = get_double(kv, "access_scale");
    if (!(cfg.access_scale > 0.0))
        throw ConfigError("access_scale must be positive");

    cfg.outlier_cap = get_double(kv, "outlier_cap");
    if (!(cfg.outlier_cap > 0.0))
        throw ConfigError("outlier_cap must be positive");
    cfg.controls = get_list(kv, "controls");
    for (const auto& name : get_list(kv, "models")) {
        const std::string akey = "model." + name + ".access";
        const std::string ikey = "model." + name + ".instruments";
        if (!kv.count(akey))
            throw ConfigError("model family '" + name + "' has no " + akey + " key");
        ModelFamily fam{name, get_list(kv, akey), kv.count(ikey) ? get_list(kv, ikey) : std::vector<std::string>{}};
        if (fam.access.empty())
            throw ConfigError("model family '" + name + "' lists no access columns");
        if (!fam.instruments.empty() && fam.instruments.size() < fam.access.size())
            throw ConfigError("model family '" + name + "' has fewer instruments than endogenous columns");
        cfg.families.push_back(std::move(fam));
    }
    cfg.samples = get_list(kv, "samples");
    for (const auto& s : cfg.samples)
        sample_filter(s);
    cfg.stability_families = get_list(kv, "stability_models");
    cfg.elasticity_policy = parse_elasticity_policy(kv.at("elasticity_policy"));
    const long long reps = get_int(kv, "bootstrap_reps");
    if (reps < 0)
        throw ConfigError("bootstrap_reps must be >= 0");
    cfg.bootstrap_reps = static_cast<int>(reps);

    cfg.scenario_model = kv.at("scenario.model");
    cfg.scenario_variable = kv.at("scenario.variable");
    cfg.scenario_pct = get_double(kv, "scenario.pct");
    cfg.quintile_variable = kv.at("quintile.variable");
    cfg.quintile_k = static_cast<int>(get_int(kv, "quintile.k"));
    if (cfg.quintile_k < 2)
        throw ConfigError("quintile.k must be >= 2");

    SynthConfig& s = cfg.synth;
    s.seed = cfg.seed;
    s.bbox = cfg.bbox;
    s.cell_area = cfg.cell_area;
    s.orientation = cfg.orientation;
    const long long hh = get_int(kv, "synth.households");
    const long long clusters = get_int(kv, "synth.clusters");
    if (hh <= 0 || clusters < 0)
        throw ConfigError("synth.households must be positive and synth.clusters non-negative");
    s.households = static_cast<std::size_t>(hh);
    s.cluster_count = static_cast<int>(clusters);
    s.cluster_spread = get_double(kv, "synth.cluster_spread");
    s.background_intensity = get_double(kv, "synth.background_intensity");
    s.mean_establishment_size = get_double(kv, "synth.mean_establishment_size");
    s.sigma = get_double(kv, "synth.sigma");
    s.endogeneity = get_double(kv, "synth.endogeneity");
    s.target_censoring = get_double(kv, "synth.target_censoring");
    s.urban_core_share = get_double(kv, "synth.urban_core_share");
    s.access_beta.clear();
    for (const auto& [key, value] : kv)
        if (key.rfind("synth.beta.", 0) == 0)
            s.access_beta[key.substr(11)] = get_double(kv, key);
    s.validate();

    cfg.resolved = std::move(kv);
    return cfg;
}

const std::vector<std::string>& stage_names() { return kStages; }

HexGrid build_configured_grid(const PipelineConfig& cfg) {
    return HexGrid::build(cfg.bbox, cfg.cell_area, cfg.orientation);
}

std::vector<AccessVector> compute_access_vectors(const PipelineConfig& cfg, const HexGrid& grid,
                                                 const EmploymentField& field, const SubCenterSet& centers,
                                                 const std::vector<AmenityField>& amenities, CellId anchor) {
    std::vector<AccessVector> out;
    const std::vector<RankInterval> any_center{RankInterval{1, std::nullopt}};
    auto coarse = partition_access(grid, field, classify_cells(grid, centers, any_center), cfg.access_scale,
                                   cfg.threads);
    coarse[0].name = "acc_all";
    coarse[1].name = "acc_centered";
    coarse[2].name = "acc_noncentered";
    for (auto& v : coarse)
        out.push_back(std::move(v));

    auto detail = partition_access(grid, field, classify_cells(grid, centers, cfg.rank_grouping), cfg.access_scale,
                                   cfg.threads);
    for (std::size_t k = 1; k + 1 < detail.size(); ++k) {
        detail[k].name = "acc_" + detail[k].name;
        out.push_back(std::move(detail[k]));
    }

    if (amenities.size() != cfg.amenity_layers.size())
        throw DataError("expected one amenity field per configured layer");
    for (std::size_t k = 0; k < amenities.size(); ++k) {
        auto v = amenity_access(grid, amenities[k], cfg.threads);
        v.name = "iv_" + cfg.amenity_layers[k];
        out.push_back(std::move(v));
    }
    auto a = anchor_inverse_distance(grid, anchor);
    a.name = "iv_anchor";
    out.push_back(std::move(a));
    return out;
}

// ---- stages -------------------------------------------------------------------

void stage_synth(const PipelineConfig& cfg) {
    echo_config(cfg);
    SynthConfig scfg = cfg.synth;
    std::vector<AmenityLayerSpec> layers;
    for (const auto& name : cfg.amenity_layers) {
        const auto it = std::find_if(scfg.amenity_layers.begin(), scfg.amenity_layers.end(),
                                     [&](const AmenityLayerSpec& l) { return l.name == name; });
        if (it == scfg.amenity_layers.end())
            throw ConfigError("the synthetic generator has no amenity layer named '" + name + "'");
        layers.push_back(*it);
    }
    scfg.amenity_layers = layers;
    scfg.instruments.clear();
    for (const auto& name : cfg.amenity_layers)
        scfg.instruments.push_back("iv_" + name);
    scfg.instruments.push_back("iv_anchor");

    const Region region = gen_region(scfg);
    write_points(cfg.establishments, region.establishments);
    for (const auto& layer : region.amenities)
        write_points(cfg.amenity_path(layer.name), layer.points);
    const PointRecord anchor{region.anchor.x, region.anchor.y, 1.0};
    write_points(resolve_path(cfg, cfg.anchor, "anchor.csv"), std::span<const PointRecord>(&anchor, 1));

    const HexGrid grid = build_configured_grid(cfg);
    const auto agg = aggregate_points(grid, region.establishments, cfg.out_of_bbox);
    const auto centers =
        identify_subcenters(grid, agg.field, cfg.percentile, cfg.min_jobs, cfg.percentile_population);
    std::vector<AmenityField> amenities;
    for (const auto& layer : region.amenities)
        amenities.push_back(AmenityField::from_points(grid, layer.points));
    const auto vectors = compute_access_vectors(cfg, grid, agg.field, centers, amenities, grid.assign(region.anchor));
    const auto hh = gen_households(scfg, grid, vectors);
    write_households(cfg.households, hh.sample);

    Json truth;
    truth["seed"] = cfg.seed;
    truth["intercept"] = hh.truth.intercept;
    Json beta;
    for (const auto& [k, v] : hh.truth.beta)
        beta[k] = v;
    truth["beta"] = std::move(beta);
    truth["sigma"] = hh.truth.sigma;
    truth["endogeneity"] = hh.truth.endogeneity;
    truth["target_censoring"] = hh.truth.target_censoring;
    truth["realized_censoring"] = hh.truth.realized_censoring;
    truth["endogenous"] = hh.truth.endogenous;
    truth["instruments"] = hh.truth.instruments;
    truth["households"] = hh.sample.size();
    truth["establishments"] = region.establishments.size();
    truth["subcenters"] = centers.centers.size();
    Json clusters = Json::array();
    for (const auto& c : region.cluster_centers)
        clusters.push_back({c.x, c.y});
    truth["cluster_centers"] = std::move(clusters);
    truth["anchor"] = {region.anchor.x, region.anchor.y};
    write_json(cfg.artifact("truth.json"), truth);
}

void stage_grid(const PipelineConfig& cfg) {
    echo_config(cfg);
    require_artifact(cfg.establishments, "synth");
    const auto points = read_layer_points(cfg, cfg.establishments);
    const HexGrid grid = build_configured_grid(cfg);
    const auto agg = aggregate_points(grid, points, cfg.out_of_bbox);
    write_grid_outputs(cfg, grid, agg, points.size());
}

void stage_centers(const PipelineConfig& cfg) {
    echo_config(cfg);
    const HexGrid grid = build_configured_grid(cfg);
    const auto field = load_employment(cfg, grid);
    const auto set = identify_subcenters(grid, field, cfg.percentile, cfg.min_jobs, cfg.percentile_population);
    write_centers(cfg, grid, field, set);
}

void stage_access(const PipelineConfig& cfg) {
    echo_config(cfg);
    const HexGrid grid = build_configured_grid(cfg);
    const auto field = load_employment(cfg, grid);
    const auto centers = load_centers(cfg, grid);
    std::vector<AmenityField> amenities;
    for (const auto& layer : cfg.amenity_layers)
        amenities.push_back(load_amenity(cfg, grid, layer));
    const Point2 anchor = load_anchor(cfg);
    const auto vectors = compute_access_vectors(cfg, grid, field, centers, amenities, grid.assign(anchor));

    std::vector<std::string> header{"cell_q", "cell_r"};
    for (const auto& v : vectors)
        header.push_back(v.name);
    CsvWriter out(header);
    for (CellId id = 0; id < grid.size(); ++id) {
        const auto c = grid.coord(id);
        std::vector<std::string> row{format_int(c.q), format_int(c.r)};
        for (const auto& v : vectors)
            row.push_back(format_double(v.values[id]));
        out.row(std::move(row));
    }
    out.save(cfg.artifact("access.csv"));
}

void stage_estimate(const PipelineConfig& cfg) {
    echo_config(cfg);
    const auto sample = load_sample(cfg);
    Json models = Json::array();
    for (const auto& fam : cfg.families) {
        for (const auto& sname : cfg.samples) {
            const Design d = build_design(sample, fam.access, cfg.controls, sample_filter(sname));
            const TobitFit fit = tobit_fit(d.X, d.y, d.names);
            const LrTest lr = lr_test(fit, tobit_null(d.y));
            Json rec;
            rec["model"] = model_id(fam, "tobit", sname);
            rec["family"] = fam.name;
            rec["estimator"] = "tobit";
            rec["sample"] = sname;
            rec["access"] = fam.access;
            rec["controls"] = cfg.controls;
            rec["se_type"] = fit.covariance == CovarianceType::Robust ? "robust" : "classical";
            rec.update(tobit_json(fit, fit.se(), fit.sigma_se()));
            rec["lr_joint"] = lr_json(lr);
            Json el = Json::array();
            for (const auto& a : fam.access)
                el.push_back(elasticity_json(elasticity(fit, d.X, d.y, a, cfg.elasticity_policy)));
            rec["elasticities"] = std::move(el);
            models.push_back(std::move(rec));
        }
    }

    Json stability = Json::array();
    for (const auto& name : cfg.stability_families) {
        const auto it = std::find_if(cfg.families.begin(), cfg.families.end(),
                                     [&](const ModelFamily& f) { return f.name == name; });
        if (it == cfg.families.end())
            throw ConfigError("stability_models names unknown family '" + name + "'");
        const auto rep = coefficient_stability(sample, it->access, cfg.controls, {}, cfg.elasticity_policy);
        Json js;
        js["family"] = name;
        js["n"] = rep.with_controls.n;
        Json rows = Json::array();
        for (const auto& r : rep.rows) {
            Json jr;
            jr["variable"] = r.variable;
            jr["coef_with_controls"] = r.coef_with;
            jr["coef_without_controls"] = r.coef_without;
            jr["same_sign"] = r.same_sign;
            jr["elasticity_with_controls"] = r.elasticity_with;
            jr["elasticity_without_controls"] = r.elasticity_without;
            jr["movement_ratio"] = number_or_null(r.movement_ratio);
            rows.push_back(std::move(jr));
        }
        js["rows"] = std::move(rows);
        stability.push_back(std::move(js));
    }

    Json out;
    out["households"] = load_report_json(sample.report);
    out["elasticity_policy"] = to_string(cfg.elasticity_policy);
    out["models"] = std::move(models);
    out["stability"] = std::move(stability);
    write_json(cfg.artifact("estimates.json"), out);
}

void stage_iv_estimate(const PipelineConfig& cfg) {
    echo_config(cfg);
    const auto sample = load_sample(cfg);
    Json models = Json::array();
    std::uint64_t ordinal = 0;
    for (const auto& fam : cfg.families) {
        if (fam.instruments.empty())
            continue;
        for (const auto& sname : cfg.samples) {
            const Design d =
                build_design(sample, concat(fam.access, fam.instruments), cfg.controls, sample_filter(sname));
            const IvData data = iv_data_from(d, fam);
            IvTobitOptions opts;
            opts.bootstrap_reps = cfg.bootstrap_reps;
            opts.seed = substream_seed(cfg.seed, 1000 + ordinal++);
            opts.threads = cfg.threads;
            const IvFit fit = iv_tobit_two_step(data, opts);
            const TobitFit& ss = fit.second_stage;
            const LrTest lr = lr_test(ss, tobit_null(data.y));

            const Eigen::VectorXd se = fit.reported_se();
            const double sigma_se = fit.se_is_bootstrap() ? fit.bootstrap.sigma_se : ss.sigma_se();
            Json rec;
            rec["model"] = model_id(fam, "ivtobit", sname);
            rec["family"] = fam.name;
            rec["estimator"] = "ivtobit";
            rec["sample"] = sname;
            rec["access"] = fam.access;
            rec["controls"] = cfg.controls;
            rec["instruments"] = fam.instruments;
            rec["se_type"] = fit.se_is_bootstrap() ? "bootstrap" : "naive";
            rec.update(tobit_json(ss, se, sigma_se));
            rec["naive_se"] = coefficients_json(ss.names, ss.beta, fit.naive_se);
            rec["lr_joint"] = lr_json(lr);
            Json fs_arr = Json::array();
            for (const auto& f : fit.first_stages) {
                Json jf;
                jf["endog"] = f.endog;
                jf["F"] = f.F;
                jf["weak_flag"] = f.weak;
                jf["capped"] = f.capped;
                jf["p"] = f.p_value;
                jf["r2"] = f.r2;
                jf["df_num"] = f.df_num;
                jf["df_den"] = f.df_den;
                fs_arr.push_back(std::move(jf));
            }
            rec["first_stage"] = std::move(fs_arr);
            if (fit.sargan) {
                Json js;
                js["stat"] = fit.sargan->statistic;
                js["dof"] = fit.sargan->dof;
                js["p"] = fit.sargan->p_value;
                rec["sargan"] = std::move(js);
            } else {
                rec["sargan"] = nullptr;
            }
            Json boot;
            boot["reps"] = fit.bootstrap.reps;
            boot["seed"] = fit.bootstrap.seed;
            boot["redraws"] = fit.bootstrap.redraws;
            rec["bootstrap"] = std::move(boot);
            if (fit.tsls)
                rec["tsls"] = coefficients_json(fit.tsls->names, fit.tsls->beta, fit.tsls->robust_se());
            const Eigen::MatrixXd X = data.structural();
            Json el = Json::array();
            for (const auto& a : fam.access)
                el.push_back(elasticity_json(elasticity(ss, X, data.y, a, cfg.elasticity_policy)));
            rec["elasticities"] = std::move(el);
            models.push_back(std::move(rec));
        }
    }
    Json out;
    out["households"] = load_report_json(sample.report);
    out["elasticity_policy"] = to_string(cfg.elasticity_policy);
    out["models"] = std::move(models);
    write_json(cfg.artifact("iv_estimates.json"), out);
}

void stage_elasticity(const PipelineConfig& cfg) {
    echo_config(cfg);
    const Json estimates = read_json(cfg.artifact("estimates.json"), "estimate");
    const auto iv = maybe_iv_estimates(cfg);
    const auto sample = load_sample(cfg);
    CsvWriter out({"variable", "elasticity", "n_used", "policy"});
    for (const auto& rec : collect_models(estimates, iv)) {
        const TobitFit fit = fit_from_json(rec);
        const auto access = rec.at("access").get<std::vector<std::string>>();
        const auto controls = rec.at("controls").get<std::vector<std::string>>();
        const Design d = build_design(sample, access, controls, sample_filter(rec.at("sample").get<std::string>()));
        const Eigen::MatrixXd X = columns_in_order(d, fit.names);
        for (const auto& a : access) {
            const auto e = elasticity(fit, X, d.y, a, cfg.elasticity_policy);
            out.row({rec.at("model").get<std::string>() + "." + a, format_double(e.value), format_int(
                         static_cast<long long>(e.n_used)), to_string(e.policy)});
        }
    }
    out.save(cfg.artifact("elasticities.csv"));
}

void stage_scenario(const PipelineConfig& cfg) {
    echo_config(cfg);
    const fs::path path = cfg.artifact("elasticities.csv");
    require_artifact(path, "elasticity");
    const auto table = read_csv(path);
    const std::string wanted = cfg.scenario_model + "." + cfg.scenario_variable;
    const std::size_t cv = table.column("variable");
    const std::size_t ce = table.column("elasticity");
    const std::size_t cp = table.column("policy");
    for (const auto& row : table.rows) {
        if (row[cv] != wanted)
            continue;
        const auto e = parse_double(row[ce]);
        if (!e)
            throw DataError("elasticities.csv has a malformed elasticity for " + wanted);
        const auto res = scenario_vmt_change(*e, cfg.scenario_pct);
        Json j;
        j["variable"] = wanted;
        j["elasticity"] = *e;
        j["policy"] = row[cp];
        j["pct_access_change"] = res.pct_access_change;
        j["pct_vmt_change"] = res.pct_vmt_change;
        j["method"] = res.method;
        write_json(cfg.artifact("scenario.json"), j);
        return;
    }
    throw LookupError("elasticities.csv has no entry for '" + wanted + "'");
}

void stage_report(const PipelineConfig& cfg) {
    echo_config(cfg);
    const Json estimates = read_json(cfg.artifact("estimates.json"), "estimate");
    const auto iv = maybe_iv_estimates(cfg);
    const fs::path epath = cfg.artifact("elasticities.csv");
    require_artifact(epath, "elasticity");
    const auto etable = read_csv(epath);
    std::map<std::string, std::pair<double, std::string>> elasticities;
    std::string policy = to_string(cfg.elasticity_policy);
    for (const auto& row : etable.rows) {
        const auto v = parse_double(row[etable.column("elasticity")]);
        if (!v)
            throw DataError("elasticities.csv has a malformed row");
        elasticities[row[etable.column("variable")]] = {*v, row[etable.column("policy")]};
        policy = row[etable.column("policy")];
    }
    const fs::path apath = cfg.artifact("access.csv");
    require_artifact(apath, "access");
    const auto access = read_csv(apath);

    // Quintile classification of the configured access column.
    const std::size_t cq = access.column("cell_q");
    const std::size_t cr = access.column("cell_r");
    const std::size_t cv = access.column(cfg.quintile_variable);
    std::vector<double> values;
    for (const auto& row : access.rows) {
        const auto v = parse_double(row[cv]);
        if (!v)
            throw DataError("access.csv has a malformed value in " + cfg.quintile_variable);
        values.push_back(*v);
    }
    const auto classes = quantile_classes(values, cfg.quintile_k);
    CsvWriter quint({"cell_q", "cell_r", cfg.quintile_variable, "quintile", "top_quintile"});
    std::size_t top = 0;
    for (std::size_t i = 0; i < access.rows.size(); ++i) {
        const bool is_top = classes[i] == cfg.quintile_k;
        top += is_top ? 1 : 0;
        quint.row({access.rows[i][cq], access.rows[i][cr], access.rows[i][cv], format_int(classes[i]),
                   is_top ? "1" : "0"});
    }
    quint.save(cfg.artifact("quintiles.csv"));

    const auto models = collect_models(estimates, iv);
    Json tables = Json::array();
    std::ostringstream md;
    md << "# VMT and job accessibility: estimation report\n\n";
    const auto& hh = estimates.at("households");
    md << "Households read: " << hh.at("rows_read").get<std::size_t>()
       << ", dropped for missing data: " << hh.at("dropped_missing").get<std::size_t>()
       << ", dropped as outliers: " << hh.at("dropped_outlier").get<std::size_t>()
       << ", retained: " << hh.at("retained").get<std::size_t>()
       << ", zero-VMT share: " << fixed(hh.at("censor_share").get<double>(), 3) << ".\n\n";
    md << "Elasticity policy: " << policy << ". Standard errors in parentheses: robust for Tobit, "
       << "pairs bootstrap for two-step IV-Tobit.\n";

    for (const auto& fam : cfg.families) {
        std::vector<const Json*> cols;
        for (const auto& m : models)
            if (m.at("family").get<std::string>() == fam.name)
                cols.push_back(&m);
        Json table;
        table["family"] = fam.name;
        Json jcols = Json::array();
        for (const Json* m : cols) {
            Json c;
            const std::string id = m->at("model").get<std::string>();
            c["model"] = id;
            c["estimator"] = m->at("estimator");
            c["sample"] = m->at("sample");
            c["n"] = m->at("n");
            c["n_censored"] = m->at("n_censored");
            c["se_type"] = m->at("se_type");
            c["sigma"] = m->at("sigma");
            c["loglik"] = m->at("loglik");
            c["converged"] = m->at("convergence").at("converged");
            Json rows = Json::array();
            for (const auto& coef : m->at("coefficients")) {
                Json r;
                const std::string name = coef.at("name").get<std::string>();
                r["variable"] = name;
                r["coefficient"] = coef.at("estimate");
                r["robust_se"] = coef.at("se");
                const auto it = elasticities.find(id + "." + name);
                r["elasticity"] = it == elasticities.end() ? Json(nullptr) : Json(it->second.first);
                rows.push_back(std::move(r));
            }
            c["rows"] = std::move(rows);
            c["lr_p"] = m->at("lr_joint").at("p");
            c["lr_stat"] = m->at("lr_joint").at("statistic");
            c["lr_dof"] = m->at("lr_joint").at("dof");
            if (m->contains("sargan") && !m->at("sargan").is_null()) {
                c["sargan_p"] = m->at("sargan").at("p");
                c["sargan_stat"] = m->at("sargan").at("stat");
                c["sargan_dof"] = m->at("sargan").at("dof");
            } else {
                c["sargan_p"] = nullptr;
                c["sargan_stat"] = nullptr;
                c["sargan_dof"] = nullptr;
            }
            Json fs_arr = Json::array();
            if (m->contains("first_stage"))
                for (const auto& f : m->at("first_stage")) {
                    Json jf;
                    jf["endog"] = f.at("endog");
                    jf["F"] = f.at("F");
                    jf["weak_flag"] = f.at("weak_flag");
                    fs_arr.push_back(std::move(jf));
                }
            c["first_stage"] = std::move(fs_arr);
            jcols.push_back(std::move(c));
        }

        md << "\n## Model family: " << fam.name << "\n\n| |";
        for (const Json* m : cols)
            md << " " << m->at("model").get<std::string>() << " |";
        md << "\n|---|";
        for (std::size_t k = 0; k < cols.size(); ++k)
            md << "---:|";
        md << "\n";
        std::vector<std::string> names;
        for (const Json* m : cols)
            for (const auto& coef : m->at("coefficients")) {
                const auto n = coef.at("name").get<std::string>();
                if (std::find(names.begin(), names.end(), n) == names.end())
                    names.push_back(n);
            }
        auto cell = [&](const Json* m, const std::string& name) -> std::string {
            for (const auto& coef : m->at("coefficients"))
                if (coef.at("name").get<std::string>() == name) {
                    const double se = coef.at("se").is_null() ? std::nan("") : coef.at("se").get<double>();
                    return fixed(coef.at("estimate").get<double>(), 3) + " (" + fixed(se, 3) + ")";
                }
            return "";
        };
        for (const auto& name : names) {
            md << "| " << name << " |";
            for (const Json* m : cols)
                md << " " << cell(m, name) << " |";
            md << "\n";
        }
        for (const auto& a : fam.access) {
            md << "| Elasticity: " << a << " |";
            for (const Json* m : cols) {
                const auto it = elasticities.find(m->at("model").get<std::string>() + "." + a);
                md << " " << (it == elasticities.end() ? "" : fixed(it->second.first, 3)) << " |";
            }
            md << "\n";
        }
        md << "| LR p-value (joint significance) |";
        for (const Json* m : cols)
            md << " " << fixed(m->at("lr_joint").at("p").get<double>(), 4) << " |";
        md << "\n| Sargan p-value (over-identification) |";
        for (const Json* m : cols) {
            const bool has = m->contains("sargan") && !m->at("sargan").is_null();
            md << " " << (has ? fixed(m->at("sargan").at("p").get<double>(), 4) : std::string("N/A")) << " |";
        }
        md << "\n";
        for (const auto& a : fam.access) {
            md << "| First-stage F: " << a << " |";
            for (const Json* m : cols) {
                std::string v = "N/A";
                if (m->contains("first_stage"))
                    for (const auto& f : m->at("first_stage"))
                        if (f.at("endog").get<std::string>() == a)
                            v = fixed(f.at("F").get<double>(), 2) + (f.at("weak_flag").get<bool>() ? " (weak)" : "");
                md << " " << v << " |";
            }
            md << "\n";
        }
        md << "| Sample |";
        for (const Json* m : cols)
            md << " " << m->at("sample").get<std::string>() << " |";
        md << "\n| Observations |";
        for (const Json* m : cols)
            md << " " << m->at("n").get<std::size_t>() << " |";
        md << "\n";

        table["columns"] = std::move(jcols);
        tables.push_back(std::move(table));
    }

    Json report;
    report["seed"] = cfg.seed;
    report["households"] = estimates.at("households");
    report["elasticity_policy"] = policy;
    report["tables"] = std::move(tables);
    report["stability"] = estimates.at("stability");

    if (!estimates.at("stability").empty()) {
        md << "\n## Coefficient stability (with and without household controls)\n\n";
        md << "| family | variable | coef with | coef without | same sign | elasticity with | elasticity without | "
              "movement ratio |\n|---|---|---:|---:|---|---:|---:|---:|\n";
        for (const auto& s : estimates.at("stability"))
            for (const auto& r : s.at("rows")) {
                const double ratio =
                    r.at("movement_ratio").is_null() ? std::nan("") : r.at("movement_ratio").get<double>();
                md << "| " << s.at("family").get<std::string>() << " | " << r.at("variable").get<std::string>()
                   << " | " << fixed(r.at("coef_with_controls").get<double>(), 3) << " | "
                   << fixed(r.at("coef_without_controls").get<double>(), 3) << " | "
                   << (r.at("same_sign").get<bool>() ? "yes" : "no") << " | "
                   << fixed(r.at("elasticity_with_controls").get<double>(), 3) << " | "
                   << fixed(r.at("elasticity_without_controls").get<double>(), 3) << " | " << fixed(ratio, 3)
                   << " |\n";
            }
    }

    const fs::path spath = cfg.artifact("scenario.json");
    if (fs::exists(spath)) {
        const Json sc = read_json(spath, "scenario");
        report["scenario"] = sc;
        md << "\n## Scenario\n\n" << fixed(sc.at("pct_access_change").get<double>(), 1) << "% change in "
           << sc.at("variable").get<std::string>() << " gives " << fixed(sc.at("pct_vmt_change").get<double>(), 2)
           << "% change in VMT (" << sc.at("method").get<std::string>() << ").\n";
    } else {
        report["scenario"] = nullptr;
    }

    Json q;
    q["variable"] = cfg.quintile_variable;
    q["classes"] = cfg.quintile_k;
    q["file"] = "quintiles.csv";
    q["top_class_cells"] = top;
    report["quintiles"] = std::move(q);
    md << "\n## Access classes\n\n" << top << " cells fall in the top class of " << cfg.quintile_variable
       << " (" << cfg.quintile_k << " classes); see quintiles.csv.\n";

    write_json(cfg.artifact("report.json"), report);
    write_text(cfg.artifact("report.md"), md.str());
}

void run_stage(std::string_view stage, const PipelineConfig& cfg) {
    if (stage == "synth")
        stage_synth(cfg);
    else if (stage == "grid")
        stage_grid(cfg);
    else if (stage == "centers")
        stage_centers(cfg);
    else if (stage == "access")
        stage_access(cfg);
    else if (stage == "estimate")
        stage_estimate(cfg);
    else if (stage == "iv-estimate")
        stage_iv_estimate(cfg);
    else if (stage == "elasticity")
        stage_elasticity(cfg);
    else if (stage == "scenario")
        stage_scenario(cfg);
    else if (stage == "report")
        stage_report(cfg);
    else
        throw ConfigError("unknown subcommand '" + std::string(stage) + "'");
}

} // namespace polyvmt
