#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rockcluster/synth.hpp"

using namespace rockcluster;

namespace {

// Three archetypes split cleanly on the first two drilling parameters only.
GeologyScenario small_scenario() {
    GeologyScenario scenario;
    scenario.sections_per_archetype = 8;
    scenario.holes_per_section = 2;
    scenario.values_per_hole = 10;
    scenario.noise_fraction = 0.0;
    scenario.section_jitter = 0.5;
    scenario.seed = 42;
    for (int a = 0; a < 3; ++a) {
        RockArchetype archetype;
        archetype.name = "rock" + std::to_string(a);
        archetype.q_class = std::string(1, static_cast<char>('A' + a));
        for (int p = 0; p < 8; ++p) {
            ValueDistribution dist;
            dist.spread = 1.0;
            dist.skew = static_cast<double>(p % 3) - 1.0;
            if (p == 0)
                dist.mean = 10.0 * a;
            else if (p == 1)
                dist.mean = 5.0 + 10.0 * a;
            else
                dist.mean = 3.0;
            archetype.params[static_cast<ParameterId>(p)] = dist;
        }
        scenario.archetypes.push_back(archetype);
    }
    return scenario;
}

std::string long_csv_of(const std::vector<SectionSample>& sections) {
    std::ostringstream out;
    write_readings_long_csv(out, sections);
    return out.str();
}

double theoretical_skewness(double alpha) {
    const double delta = alpha / std::sqrt(1.0 + alpha * alpha);
    const double m = delta * std::sqrt(2.0 / M_PI);
    return (4.0 - M_PI) / 2.0 * std::pow(m, 3.0) / std::pow(1.0 - m * m, 1.5);
}

GeologyScenario one_shot_scenario(double mean, double spread, double skew, int n_values) {
    GeologyScenario scenario;
    scenario.sections_per_archetype = 1;
    scenario.holes_per_section = 1;
    scenario.values_per_hole = n_values;
    scenario.section_jitter = 0.0;
    scenario.seed = 7;
    RockArchetype archetype;
    archetype.name = "only";
    for (int p = 0; p < 8; ++p)
        archetype.params[static_cast<ParameterId>(p)] = {mean, spread, skew};
    scenario.archetypes.push_back(archetype);
    return scenario;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("bundled scenario generates the advertised section and reading counts") {
    const auto scenario = benchmark_scenario();
    REQUIRE(scenario.archetypes.size() == 4);
    const auto result = generate(scenario);

    CHECK(result.sections.size() == 2000);
    CHECK(result.manifest.total_sections == 2000);
    CHECK(result.manifest.parameters == 8);
    CHECK(result.manifest.values_per_section_parameter == 4800);
    CHECK(result.manifest.sections.size() == 2000);
    CHECK(result.manifest.outlier_sections.size() == 40);  // 2% of 2000

    std::set<std::string> names;
    for (const auto& archetype : scenario.archetypes) names.insert(archetype.name);
    double last_chainage = -1.0;
    for (std::size_t i = 0; i < result.sections.size(); ++i) {
        const auto& section = result.sections[i];
        REQUIRE(section.readings.size() == 8);
        for (const auto& [param, values] : section.readings)
            REQUIRE(values.size() == 4800);
        CHECK(section.chainage_m > last_chainage);
        last_chainage = section.chainage_m;
        CHECK(names.count(section.rock_type) == 1);  // outliers keep rock labels
        const auto& truth = result.manifest.sections[i];
        CHECK(truth.section_id == section.section_id);
        CHECK(truth.labeled_as == section.rock_type);
        if (truth.outlier)
            CHECK(truth.archetype == "outlier");
        else
            CHECK(truth.archetype == section.rock_type);
    }
    CHECK(result.sections.front().section_id == "S00000");
    CHECK(result.sections.back().section_id == "S01999");

    std::set<std::string> flagged;
    for (const auto& truth : result.manifest.sections)
        if (truth.outlier) flagged.insert(truth.section_id);
    CHECK(flagged == std::set<std::string>(result.manifest.outlier_sections.begin(),
                                           result.manifest.outlier_sections.end()));
}

TEST_CASE("insufficient archetype separation is rejected before generation") {
    auto scenario = small_scenario();
    // collapse the second separating parameter: rock0 vs rock1 now differ on
    // one parameter only
    scenario.archetypes[0].params[ParameterId::PenetrRMS].mean = 5.0;
    scenario.archetypes[1].params[ParameterId::PenetrRMS].mean = 5.0;
    bool threw = false;
    try {
        validate_scenario(scenario);
    } catch (const std::runtime_error& e) {
        threw = true;
        const std::string message = e.what();
        CHECK(message.find("rock0") != std::string::npos);
        CHECK(message.find("rock1") != std::string::npos);
    }
    CHECK(threw);
    CHECK_THROWS_AS(generate(scenario), std::runtime_error);
}

TEST_CASE("scenario validation rejects malformed inputs") {
    auto missing = small_scenario();
    missing.archetypes[1].params.erase(ParameterId::WaterflowRMS);
    CHECK_THROWS(validate_scenario(missing));

    auto counts = small_scenario();
    counts.holes_per_section = 0;
    CHECK_THROWS(validate_scenario(counts));

    auto noise = small_scenario();
    noise.noise_fraction = 1.0;
    CHECK_THROWS(validate_scenario(noise));

    auto duplicate = small_scenario();
    duplicate.archetypes[2].name = duplicate.archetypes[0].name;
    CHECK_THROWS(validate_scenario(duplicate));

    auto spread = small_scenario();
    spread.archetypes[0].params[ParameterId::PenetrNorm].spread = 0.0;
    CHECK_THROWS(validate_scenario(spread));
}

TEST_CASE("zero noise fraction produces no outliers") {
    const auto result = generate(small_scenario());
    CHECK(result.manifest.outlier_sections.empty());
    for (const auto& truth : result.manifest.sections) {
        CHECK(!truth.outlier);
        CHECK(truth.archetype == truth.labeled_as);
    }
}

TEST_CASE("outlier counts round from the noise fraction") {
    auto scenario = small_scenario();
    scenario.noise_fraction = 0.125;  // 3 of 24
    const auto result = generate(scenario);
    CHECK(result.manifest.outlier_sections.size() == 3);
    std::set<std::string> names;
    for (const auto& archetype : scenario.archetypes) names.insert(archetype.name);
    for (const auto& truth : result.manifest.sections)
        if (truth.outlier) CHECK(names.count(truth.labeled_as) == 1);
}

TEST_CASE("fixed seeds reproduce byte-identical output files") {
    const auto scenario = small_scenario();
    const auto first = generate(scenario);
    const auto second = generate(scenario);
    CHECK(long_csv_of(first.sections) == long_csv_of(second.sections));
    std::ostringstream attrs_a, attrs_b;
    write_section_attributes_csv(attrs_a, first.sections);
    write_section_attributes_csv(attrs_b, second.sections);
    CHECK(attrs_a.str() == attrs_b.str());
    CHECK(manifest_to_json(first.manifest) == manifest_to_json(second.manifest));

    auto reseeded = scenario;
    reseeded.seed = 43;
    CHECK(long_csv_of(generate(reseeded).sections) != long_csv_of(first.sections));
}

TEST_CASE("thread count never changes the output") {
    auto scenario = small_scenario();
    scenario.noise_fraction = 0.125;
    const auto serial = generate(scenario, 1);
    const auto threaded = generate(scenario, 3);
    CHECK(long_csv_of(serial.sections) == long_csv_of(threaded.sections));
    CHECK(manifest_to_json(serial.manifest) == manifest_to_json(threaded.manifest));
}

TEST_CASE("generated values land on the requested moments") {
    const auto check_moments = [](double mean, double spread, double skew, int n) {
        const auto result = generate(one_shot_scenario(mean, spread, skew, n));
        const auto& values = result.sections[0].readings.at(ParameterId::PenetrNorm);
        REQUIRE(values.size() == static_cast<std::size_t>(n));
        CHECK(std::fabs(stats::mean(values) - mean) < 4.0 * spread / std::sqrt(double(n)));
        CHECK(std::fabs(stats::std_dev(values) - spread) < 0.03 * spread);
        CHECK(std::fabs(stats::skewness(values) - theoretical_skewness(skew)) < 0.06);
    };
    check_moments(10.0, 2.0, 5.0, 200000);
    check_moments(-3.0, 0.5, 0.0, 100000);
    check_moments(8.0, 1.5, -4.0, 100000);
}

TEST_CASE("symmetric draws show no excess kurtosis") {
    const auto result = generate(one_shot_scenario(0.0, 1.0, 0.0, 200000));
    const auto& values = result.sections[0].readings.at(ParameterId::RotaPressNorm);
    CHECK(std::fabs(stats::kurtosis_excess(values)) < 0.1);
}

TEST_CASE("planted archetypes separate in feature space") {
    auto scenario = small_scenario();
    scenario.sections_per_archetype = 30;
    scenario.holes_per_section = 5;
    scenario.values_per_hole = 8;
    const auto result = generate(scenario);

    std::vector<FeatureVector> features;
    for (const auto& section : result.sections)
        features.push_back(extract_features(section, FeatureSetId::All));
    const auto table = to_table(features);

    const auto& schema = feature_schema(FeatureSetId::All);
    for (int p : {0, 1}) {  // the separating parameters
        int col = -1;
        for (std::size_t c = 0; c < schema.size(); ++c)
            if (schema[c].param == static_cast<ParameterId>(p) &&
                schema[c].stat == StatKind::Mean)
                col = static_cast<int>(c);
        REQUIRE(col >= 0);
        std::vector<std::vector<double>> per_archetype(3);
        for (std::size_t i = 0; i < result.sections.size(); ++i) {
            const int a = static_cast<int>(i) / scenario.sections_per_archetype;
            per_archetype[static_cast<std::size_t>(a)].push_back(
                table.values(static_cast<Eigen::Index>(i), col));
        }
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b) {
                const double centroid_gap = std::fabs(stats::mean(per_archetype[a]) -
                                                      stats::mean(per_archetype[b]));
                const double within = 0.5 * (stats::std_dev(per_archetype[a]) +
                                             stats::std_dev(per_archetype[b]));
                CHECK(centroid_gap > 3.0 * within);
            }
    }
}

TEST_CASE("rock labels never influence the features") {
    const auto result = generate(small_scenario());
    auto scrubbed = result.sections;
    for (auto& section : scrubbed) {
        section.rock_type = "X";
        section.q_class = "";
    }
    for (std::size_t i = 0; i < result.sections.size(); ++i) {
        const auto original = extract_features(result.sections[i], FeatureSetId::All);
        const auto blinded = extract_features(scrubbed[i], FeatureSetId::All);
        CHECK(original.values == blinded.values);
    }
}

TEST_CASE("outlier sections scatter beyond the archetype envelope") {
    auto scenario = small_scenario();
    scenario.noise_fraction = 0.25;  // 6 of 24
    const auto result = generate(scenario);
    REQUIRE(result.manifest.outlier_sections.size() == 6);

    // Every outlier section must leave the inlier bounding box on at least
    // one per-parameter mean feature.
    const auto& schema = feature_schema(FeatureSetId::All);
    std::vector<std::size_t> mean_cols;
    for (std::size_t c = 0; c < schema.size(); ++c)
        if (schema[c].stat == StatKind::Mean && static_cast<int>(schema[c].param) < 8)
            mean_cols.push_back(c);
    std::vector<FeatureVector> features;
    for (const auto& section : result.sections)
        features.push_back(extract_features(section, FeatureSetId::All));

    std::vector<double> lo(mean_cols.size(), 1e300), hi(mean_cols.size(), -1e300);
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (result.manifest.sections[i].outlier) continue;
        for (std::size_t c = 0; c < mean_cols.size(); ++c) {
            lo[c] = std::min(lo[c], features[i].values[mean_cols[c]]);
            hi[c] = std::max(hi[c], features[i].values[mean_cols[c]]);
        }
    }
    int escaped = 0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (!result.manifest.sections[i].outlier) continue;
        bool outside = false;
        for (std::size_t c = 0; c < mean_cols.size(); ++c) {
            const double v = features[i].values[mean_cols[c]];
            if (v < lo[c] - 1.0 || v > hi[c] + 1.0) outside = true;
        }
        if (outside) ++escaped;
    }
    CHECK(escaped == 6);
}

TEST_CASE("generated files ingest back to identical features") {
    auto scenario = small_scenario();
    scenario.noise_fraction = 0.125;
    const auto result = generate(scenario);

    std::ostringstream long_csv, attr_csv;
    write_readings_long_csv(long_csv, result.sections);
    write_section_attributes_csv(attr_csv, result.sections);
    std::istringstream long_in(long_csv.str()), attr_in(attr_csv.str());
    IngestReport report;
    const auto restored = ingest_sections(long_in, attr_in, &report);

    CHECK(report.rows_rejected_nonfinite == 0);
    CHECK(report.dropped_sections.empty());
    REQUIRE(restored.size() == result.sections.size());
    for (std::size_t i = 0; i < restored.size(); ++i) {
        CHECK(restored[i].section_id == result.sections[i].section_id);
        CHECK(restored[i].rock_type == result.sections[i].rock_type);
        CHECK(restored[i].q_class == result.sections[i].q_class);
        CHECK(restored[i].overburden_m == result.sections[i].overburden_m);
        CHECK(restored[i].tunnel_width_m == result.sections[i].tunnel_width_m);
        const auto original = extract_features(result.sections[i], FeatureSetId::All);
        const auto recovered = extract_features(restored[i], FeatureSetId::All);
        CHECK(original.values == recovered.values);
    }
}

TEST_CASE("scenario json round-trips") {
    const auto scenario = benchmark_scenario();
    const auto text = scenario_to_json(scenario);
    const auto parsed = scenario_from_json(text);
    CHECK(scenario_to_json(parsed) == text);
    CHECK(parsed.archetypes.size() == 4);
    CHECK(parsed.archetypes[2].name == "Rhomb porphyry");
    CHECK(parsed.seed == scenario.seed);
    CHECK(parsed.noise_fraction == scenario.noise_fraction);

    CHECK_THROWS(scenario_from_json("{\"version\": 2}"));
    CHECK_THROWS(scenario_from_json("not json"));
    CHECK_THROWS(scenario_from_json("{\"version\": 1, \"sections_per_archetype\": 2, "
                                    "\"holes_per_section\": 1, \"values_per_hole\": 1, "
                                    "\"archetypes\": []}"));  // missing seed
    CHECK_THROWS(scenario_from_json(
        "{\"version\": 1, \"seed\": 1, \"sections_per_archetype\": 2, "
        "\"holes_per_section\": 1, \"values_per_hole\": 1, \"archetypes\": "
        "[{\"name\": \"x\", \"params\": {\"NotAParameter\": {\"mean\": 0, \"spread\": 1}}}]}"));
}

TEST_CASE("bundled scenario passes its own validation") {
    CHECK_NOTHROW(validate_scenario(benchmark_scenario()));
}

TEST_CASE("archetype q classes propagate to sections") {
    const auto result = generate(small_scenario());
    for (std::size_t i = 0; i < result.sections.size(); ++i) {
        const int a = static_cast<int>(i) / 8;
        CHECK(result.sections[i].q_class == std::string(1, static_cast<char>('A' + a)));
    }
}

}  // TEST_SUITE
