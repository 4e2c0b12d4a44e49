#include "doctest.h"

#include "polyvmt/error.hpp"
#include "polyvmt/household.hpp"

#include <filesystem>
#include <random>

using namespace polyvmt;

namespace {

const std::vector<std::string> kHeader{"household_id", "vmt",    "vehicles", "income_cat", "hh_size",
                                       "tract_density", "cell_q", "cell_r",   "urban_core"};

std::vector<std::string> row(long long id, const std::string& vmt, const std::string& income = "3") {
    return {std::to_string(id), vmt, "2", income, "3", "4.5", "1", "2", "1"};
}

CsvTable table_of(std::vector<std::vector<std::string>> rows) {
    CsvTable t;
    t.header = kHeader;
    t.rows = std::move(rows);
    return t;
}

} // namespace

TEST_CASE("outlier and missing-data filtering") {
    SUBCASE("single outlier") {
        const auto s = parse_households(table_of({row(1, "250"), row(2, "10"), row(3, "0")}), 200.0);
        CHECK(s.report.dropped_outlier == 1);
        CHECK(s.report.retained == 2);
        CHECK(s.report.censor_share == 0.5);
    }
    SUBCASE("1000-row fixture with counted defects") {
        std::vector<std::vector<std::string>> rows;
        for (int i = 0; i < 1000; ++i) {
            if (i % 100 == 7)
                rows.push_back(row(i, std::to_string(201 + i)));
            else if (i % 200 == 13)
                rows.push_back(row(i, "12.5", ""));
            else
                rows.push_back(row(i, std::to_string(i % 60)));
        }
        const auto s = parse_households(table_of(rows), 200.0);
        CHECK(s.report.rows_read == 1000);
        CHECK(s.report.dropped_outlier == 10);
        CHECK(s.report.dropped_missing == 5);
        CHECK(s.report.retained == 985);
        for (const auto& h : s.rows)
            CHECK((h.vmt >= 0.0 && h.vmt <= 200.0));
    }
    SUBCASE("NA markers count as missing") {
        const auto s = parse_households(table_of({row(1, "NA"), row(2, "5")}));
        CHECK(s.report.dropped_missing == 1);
    }
    CHECK_THROWS_AS(parse_households(table_of({row(1, "300")})), DataError);
    CHECK_THROWS_AS(parse_households(table_of({row(1, "-3")})), DataError);
    CHECK_THROWS_AS(parse_households(table_of({row(1, "3", "11")})), DataError);
    CsvTable missing_col = table_of({row(1, "3")});
    missing_col.header[3] = "income";
    CHECK_THROWS_WITH_AS(parse_households(missing_col), doctest::Contains("income_cat"), DataError);
}

TEST_CASE("household files round-trip") {
    const auto s = parse_households(table_of({row(1, "12.25"), row(2, "0")}));
    const auto path = std::filesystem::temp_directory_path() / "polyvmt_hh.csv";
    write_households(path, s);
    const auto back = load_households(path);
    REQUIRE(back.size() == 2);
    CHECK(back.rows[0].vmt == 12.25);
    CHECK(back.rows[1].urban_core);
    std::filesystem::remove(path);
}

TEST_CASE("design matrix layout") {
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < 12; ++i)
        rows.push_back({std::to_string(i), std::to_string(i * 2), std::to_string(i % 3), std::to_string(1 + i % 10),
                        "2", "1.5", "0", "0", i < 6 ? "1" : "0"});
    auto s = parse_households(table_of(rows));
    s.access["acc_a"] = std::vector<double>(12, 0.5);
    const Design d = build_design(s, {"acc_a"}, {"vehicles", "income", "urban_core"});
    CHECK(d.names.front() == "intercept");
    CHECK(d.names[1] == "acc_a");
    CHECK(d.names[3] == "income_2");
    CHECK(d.names.back() == "urban_core");
    CHECK(d.X.cols() == 1 + 1 + 1 + 9 + 1);
    // Row 4 has income category 5.
    CHECK(d.X(4, d.index_of("income_5")) == 1.0);
    CHECK(d.X(4, d.index_of("income_2")) == 0.0);
    CHECK(d.y(4) == 8.0);

    const Design urban = build_design(s, {"acc_a"}, {}, [](const Household& h) { return h.urban_core; });
    CHECK(urban.rows.size() == 6);
    CHECK_THROWS_AS(build_design(s, {}, {"bogus"}), ConfigError);
    CHECK_THROWS_AS(build_design(s, {"acc_missing"}, {}), LookupError);
    CHECK_THROWS_AS(build_design(s, {}, {}, [](const Household&) { return false; }), DataError);
}

TEST_CASE("access attaches by residence cell") {
    const auto g = HexGrid::rectangular(4, 4, 1.0);
    auto s = parse_households(table_of({row(1, "5"), row(2, "7")}));
    s.rows[1].cell = g.coord(9);
    s.rows[0].cell = g.coord(3);
    AccessVector v;
    v.name = "acc_x";
    v.values.resize(g.size());
    for (CellId id = 0; id < g.size(); ++id)
        v.values[id] = 10.0 * id;
    attach_access(s, g, std::span<const AccessVector>(&v, 1));
    CHECK(s.access_column("acc_x")[0] == 30.0);
    CHECK(s.access_column("acc_x")[1] == 90.0);

    CsvTable t;
    t.header = {"cell_q", "cell_r", "acc_y"};
    for (CellId id = 0; id < g.size(); ++id)
        t.rows.push_back({std::to_string(g.coord(id).q), std::to_string(g.coord(id).r), std::to_string(id)});
    attach_access(s, t);
    CHECK(s.access_column("acc_y")[1] == 9.0);
    t.rows.pop_back();
    s.rows[1].cell = g.coord(g.size() - 1);
    CHECK_THROWS_AS(attach_access(s, t), LookupError);
}
