#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "nilm/data_io.hpp"

using namespace nilm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("nilm_io_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& content) const {
        const std::string p = (path / name).string();
        std::ofstream out(p);
        out << content;
        return p;
    }
};

}  // namespace

TEST_CASE("load_channel reads a two-row file") {
    TempDir tmp;
    const auto p = tmp.file("a.csv", "0,100\n6,120\n");
    const TimeSeries s = load_channel(p, {}, 6);
    CHECK(s.start_epoch == 0);
    CHECK(s.interval == 6);
    REQUIRE(s.length() == 2);
    CHECK(s.values[0] == 100.0);
    CHECK(s.values[1] == 120.0);
    CHECK_FALSE(s.has_gaps());
}

TEST_CASE("empty file is an ingestion error") {
    TempDir tmp;
    const auto p = tmp.file("empty.csv", "");
    CHECK_THROWS_AS(load_channel(p, {}, 6), IngestionError);
}

TEST_CASE("a 60 s gap at 6 s interval inserts 9 missing markers") {
    TempDir tmp;
    const auto p = tmp.file("gap.csv", "0,100\n60,120\n");
    const TimeSeries s = load_channel(p, {}, 6);
    REQUIRE(s.length() == 11);
    int missing = 0;
    for (std::size_t i = 0; i < s.length(); ++i)
        if (s.is_missing(i)) ++missing;
    CHECK(missing == 9);
    CHECK_FALSE(s.is_missing(0));
    CHECK_FALSE(s.is_missing(10));
    CHECK(s.values[10] == 120.0);
}

TEST_CASE("unparseable rows name the line") {
    TempDir tmp;
    const auto p = tmp.file("bad.csv", "0,100\nnot,a number\n");
    CHECK_THROWS_WITH_AS(load_channel(p, {}, 6), doctest::Contains(":2:"), IngestionError);
}

TEST_CASE("non-monotone timestamps are rejected") {
    TempDir tmp;
    const auto p = tmp.file("mono.csv", "0,100\n12,110\n6,120\n");
    CHECK_THROWS_AS(load_channel(p, {}, 6), IngestionError);
}

TEST_CASE("negative readings: reject by default, clamp by flag") {
    TempDir tmp;
    const auto p = tmp.file("neg.csv", "0,100\n6,-5\n");
    CHECK_THROWS_AS(load_channel(p, {}, 6), IngestionError);
    const TimeSeries s = load_channel(p, {}, 6, NegativePolicy::clamp);
    CHECK(s.values[1] == 0.0);
}

TEST_CASE("tab-delimited value-first format") {
    TempDir tmp;
    const auto p = tmp.file("alt.tsv", "100\t0\n120\t6\n");
    const TimeSeries s = load_channel(p, {'\t', false}, 6);
    REQUIRE(s.length() == 2);
    CHECK(s.values[0] == 100.0);
}

TEST_CASE("save then load round trips") {
    TempDir tmp;
    TimeSeries s;
    s.start_epoch = 12;
    s.interval = 6;
    s.values = {1.5, 2.25, 0.0, 7.0};
    const std::string p = (tmp.path / "rt.csv").string();
    save_channel(s, p);
    const TimeSeries r = load_channel(p, {}, 6);
    CHECK(r.start_epoch == s.start_epoch);
    CHECK(r.values == s.values);
}

TEST_CASE("align_resample on identical grids is the identity over the overlap") {
    TimeSeries mains{0, 6, {1, 2, 3, 4, 5}, {}};
    TimeSeries app{0, 6, {10, 20, 30, 40, 50}, {}};
    const AlignedPair pair = align_resample(mains, app, 6);
    CHECK(pair.mains.values == mains.values);
    CHECK(pair.appliance.values == app.values);
}

TEST_CASE("1 s mains downsamples to 6 s by grid-point reads (12-sample hand check)") {
    TimeSeries mains{0, 1, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}, {}};
    TimeSeries app{0, 6, {100, 200}, {}};
    const AlignedPair pair = align_resample(mains, app, 6);
    REQUIRE(pair.length() == 2);
    CHECK(pair.mains.values[0] == 0.0);
    CHECK(pair.mains.values[1] == 6.0);
    CHECK(pair.appliance.values == std::vector<double>{100, 200});
}

TEST_CASE("disjoint ranges raise an alignment error") {
    TimeSeries a{0, 6, {1, 2, 3}, {}};
    TimeSeries b{1000, 6, {1, 2, 3}, {}};
    CHECK_THROWS_AS(align_resample(a, b, 6), AlignmentError);
}

TEST_CASE("appliance long gaps become zero; mains long gaps stay marked") {
    TimeSeries mains{0, 6, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1}, {}};
    TimeSeries app = mains;
    app.missing.assign(12, 0);
    for (std::size_t i = 3; i <= 9; ++i) {  // 42 s of missing data, limit is 30 s
        app.missing[i] = 1;
        app.values[i] = 0.0;
    }
    const AlignedPair p1 = align_resample(mains, app, 6);
    CHECK_FALSE(p1.appliance.has_gaps());
    CHECK(p1.appliance.values[7] == 1.0);  // 30 s from the last reading: still filled
    CHECK(p1.appliance.values[8] == 0.0);  // 36 s out: zeroed
    CHECK(p1.appliance.values[9] == 0.0);

    const AlignedPair p2 = align_resample(app, mains, 6);
    CHECK(p2.mains.has_gaps());
    CHECK(p2.mains.is_missing(8));
    CHECK_FALSE(p2.mains.is_missing(7));
}

TEST_CASE("short gaps forward-fill up to the limit") {
    TimeSeries mains{0, 6, {5, 5, 5, 5, 5, 5}, {0, 0, 1, 0, 0, 0}};
    mains.values[2] = 0.0;
    TimeSeries app{0, 6, {1, 1, 1, 1, 1, 1}, {}};
    const AlignedPair pair = align_resample(mains, app, 6);
    CHECK_FALSE(pair.mains.has_gaps());
    CHECK(pair.mains.values[2] == 5.0);  // filled from t=6
}

TEST_CASE("standardize matches the kettle example") {
    TimeSeries s{0, 6, {2700.0}, {}};
    const Tensor z = standardize(s, {700.0, 1000.0});
    CHECK(z[0] == 2.0);
}

TEST_CASE("standardize/destandardize round trip") {
    TimeSeries s{0, 6, {0.0, 1.0, 700.0, 2700.0, 3948.0}, {}};
    const NormStats st{700.0, 1000.0};
    const Tensor z = standardize(s, st);
    const TimeSeries back = destandardize(z, st, s.start_epoch, s.interval);
    REQUIRE(back.length() == s.length());
    for (std::size_t i = 0; i < s.length(); ++i)
        CHECK(back.values[i] == doctest::Approx(s.values[i]).epsilon(1e-12));
}

TEST_CASE("constant series equal to the mean standardizes to zeros") {
    TimeSeries s{0, 6, {700, 700, 700}, {}};
    const Tensor z = standardize(s, {700.0, 1000.0});
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);
}

TEST_CASE("compute_stats skips missing samples") {
    TimeSeries s{0, 6, {10, 0, 20}, {0, 1, 0}};
    const NormStats st = compute_stats(s);
    CHECK(st.mean == doctest::Approx(15.0));
}

TEST_CASE("default profiles carry the five standard appliances") {
    const auto profiles = default_profiles();
    REQUIRE(profiles.size() == 5);
    const ApplianceProfile kettle = find_profile(profiles, "kettle");
    CHECK(kettle.window_length == 599);
    CHECK(kettle.max_power == 3948.0);
    CHECK(kettle.on_threshold == 2000.0);
    CHECK(kettle.norm_mean == 700.0);
    CHECK(kettle.norm_std == 1000.0);
    CHECK(find_profile(profiles, "microwave").norm_std == 800.0);
    CHECK(find_profile(profiles, "fridge").norm_mean == 200.0);
    CHECK(find_profile(profiles, "dishwasher").on_threshold == 10.0);
    CHECK(find_profile(profiles, "washingmachine").max_power == 3962.0);
    CHECK_THROWS_AS(find_profile(profiles, "toaster"), ConfigError);
}

TEST_CASE("profiles round trip through JSON") {
    TempDir tmp;
    const std::string p = (tmp.path / "profiles.json").string();
    const auto profiles = default_profiles();
    save_profiles(profiles, p);
    const auto loaded = load_profiles(p);
    REQUIRE(loaded.size() == profiles.size());
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        CHECK(loaded[i].name == profiles[i].name);
        CHECK(loaded[i].window_length == profiles[i].window_length);
        CHECK(loaded[i].max_power == profiles[i].max_power);
        CHECK(loaded[i].on_threshold == profiles[i].on_threshold);
        CHECK(loaded[i].norm_mean == profiles[i].norm_mean);
        CHECK(loaded[i].norm_std == profiles[i].norm_std);
    }
}
