#include "rockcluster/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "rockcluster/csv.hpp"
#include "rockcluster/rng.hpp"

namespace rockcluster {

namespace {

constexpr int kDrillingParameterCount = 8;  // Overburden/TunnelWidth are attributes
// Stream id for the outlier-slot selection, outside the per-section range.
constexpr std::uint64_t kOutlierStream = (1ULL << 32) | 1ULL;

std::vector<ParameterId> drilling_parameters() {
    std::vector<ParameterId> params;
    for (int p = 0; p < kDrillingParameterCount; ++p) params.push_back(static_cast<ParameterId>(p));
    return params;
}

// Location/scale pair placing a skew-normal of shape `skew` at the requested
// mean and standard deviation.
struct SkewNormalShape {
    double location = 0.0;
    double scale = 1.0;
};

SkewNormalShape match_moments(const ValueDistribution& dist) {
    const double delta = dist.skew / std::sqrt(1.0 + dist.skew * dist.skew);
    const double z_mean = delta * std::sqrt(2.0 / M_PI);
    const double z_sd = std::sqrt(1.0 - 2.0 * delta * delta / M_PI);
    SkewNormalShape shape;
    shape.scale = dist.spread / z_sd;
    shape.location = dist.mean - shape.scale * z_mean;
    return shape;
}

double draw_value(Rng& rng, const ValueDistribution& dist) {
    const auto shape = match_moments(dist);
    return shape.location + shape.scale * rng.skew_normal(dist.skew);
}

// Per-parameter envelope that outlier sections scatter across.
struct OutlierEnvelope {
    double lo = 0.0;
    double hi = 0.0;
    double max_spread = 1.0;
};

std::vector<OutlierEnvelope> outlier_envelopes(const GeologyScenario& scenario) {
    std::vector<OutlierEnvelope> envelopes;
    for (ParameterId param : drilling_parameters()) {
        double grand = 0.0;
        for (const auto& archetype : scenario.archetypes) grand += archetype.params.at(param).mean;
        grand /= static_cast<double>(scenario.archetypes.size());
        double reach = 0.0;
        double max_spread = 0.0;
        for (const auto& archetype : scenario.archetypes) {
            const auto& dist = archetype.params.at(param);
            reach = std::max(reach, std::fabs(dist.mean - grand) + 3.0 * dist.spread);
            max_spread = std::max(max_spread, dist.spread);
        }
        envelopes.push_back({grand - 4.0 * reach, grand + 4.0 * reach, max_spread});
    }
    return envelopes;
}

std::string section_id_of(std::size_t index) {
    std::string digits = std::to_string(index);
    return "S" + std::string(5 - digits.size(), '0') + digits;
}

SectionSample generate_section(const GeologyScenario& scenario,
                               const std::vector<OutlierEnvelope>& envelopes,
                               std::size_t global_index, std::size_t archetype_index,
                               bool outlier) {
    const auto& archetype = scenario.archetypes[archetype_index];
    Rng rng(derive_seed(scenario.seed, static_cast<std::uint64_t>(global_index)));
    const std::size_t n_values = static_cast<std::size_t>(scenario.holes_per_section) *
                                 static_cast<std::size_t>(scenario.values_per_hole);

    SectionSample section;
    section.tunnel_id = "T1";
    section.section_id = section_id_of(global_index);
    section.chainage_m = static_cast<double>(global_index);
    section.rock_type = archetype.name;
    section.q_class = archetype.q_class;

    const auto params = drilling_parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
        ValueDistribution dist;
        if (outlier) {
            const auto& env = envelopes[p];
            dist.mean = rng.uniform(env.lo, env.hi);
            dist.spread = rng.uniform(0.5, 3.0) * env.max_spread;
            dist.skew = rng.uniform(-8.0, 8.0);
        } else {
            dist = archetype.params.at(params[p]);
            dist.mean += rng.normal(0.0, scenario.section_jitter * dist.spread);
        }
        auto& values = section.readings[params[p]];
        values.reserve(n_values);
        for (std::size_t v = 0; v < n_values; ++v) values.push_back(draw_value(rng, dist));
    }
    section.overburden_m = std::max(0.0, draw_value(rng, scenario.overburden));
    section.tunnel_width_m = std::max(0.0, draw_value(rng, scenario.tunnel_width));
    return section;
}

}  // namespace

void validate_scenario(const GeologyScenario& scenario) {
    require(!scenario.archetypes.empty(), "scenario needs at least one archetype");
    require(scenario.sections_per_archetype > 0, "sections_per_archetype must be positive");
    require(scenario.holes_per_section > 0, "holes_per_section must be positive");
    require(scenario.values_per_hole > 0, "values_per_hole must be positive");
    require(scenario.section_jitter >= 0.0, "section_jitter must be non-negative");
    require(scenario.noise_fraction >= 0.0 && scenario.noise_fraction < 1.0,
            "noise_fraction must lie in [0, 1)");
    require(scenario.overburden.spread >= 0.0, "overburden spread must be non-negative");
    require(scenario.tunnel_width.spread >= 0.0, "tunnel_width spread must be non-negative");
    const std::size_t total = scenario.archetypes.size() *
                              static_cast<std::size_t>(scenario.sections_per_archetype);
    require(total <= 99999, "scenario exceeds the 5-digit section id space");

    std::vector<std::string> names;
    for (const auto& archetype : scenario.archetypes) {
        require(!archetype.name.empty(), "archetype names must be non-empty");
        names.push_back(archetype.name);
        for (ParameterId param : drilling_parameters()) {
            const auto it = archetype.params.find(param);
            if (it == archetype.params.end())
                fail("archetype " + archetype.name + " lacks a distribution for " +
                     to_string(param));
            require(it->second.spread > 0.0,
                    "archetype " + archetype.name + ": spread must be positive for " +
                        to_string(param));
        }
    }
    std::sort(names.begin(), names.end());
    require(std::adjacent_find(names.begin(), names.end()) == names.end(),
            "archetype names must be unique");

    // Every archetype pair must sit at least two pooled spreads apart on at
    // least two drilling parameters, or the planted structure is not
    // recoverable by design.
    for (std::size_t a = 0; a < scenario.archetypes.size(); ++a) {
        for (std::size_t b = a + 1; b < scenario.archetypes.size(); ++b) {
            int separating = 0;
            for (ParameterId param : drilling_parameters()) {
                const auto& da = scenario.archetypes[a].params.at(param);
                const auto& db = scenario.archetypes[b].params.at(param);
                const double pooled =
                    std::sqrt((da.spread * da.spread + db.spread * db.spread) / 2.0);
                if (std::fabs(da.mean - db.mean) >= 2.0 * pooled) ++separating;
            }
            if (separating < 2)
                fail("archetypes " + scenario.archetypes[a].name + " and " +
                     scenario.archetypes[b].name + " separate on " +
                     std::to_string(separating) +
                     " parameters; at least 2 must differ by 2 pooled spreads");
        }
    }
}

SynthResult generate(const GeologyScenario& scenario, int threads) {
    validate_scenario(scenario);
    require(threads >= 1, "threads must be positive");

    const std::size_t per_archetype = static_cast<std::size_t>(scenario.sections_per_archetype);
    const std::size_t total = scenario.archetypes.size() * per_archetype;

    // Outlier slots: an exact count drawn without replacement from all slots.
    const std::size_t n_outliers =
        static_cast<std::size_t>(std::llround(scenario.noise_fraction * static_cast<double>(total)));
    std::vector<std::size_t> slots(total);
    std::iota(slots.begin(), slots.end(), 0);
    Rng selector(derive_seed(scenario.seed, kOutlierStream));
    std::vector<bool> is_outlier(total, false);
    for (std::size_t i = 0; i < n_outliers; ++i) {
        const std::size_t j = i + selector.index(total - i);
        std::swap(slots[i], slots[j]);
        is_outlier[slots[i]] = true;
    }

    const auto envelopes = outlier_envelopes(scenario);

    SynthResult result;
    result.sections.resize(total);
    const auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t g = begin; g < end; ++g)
            result.sections[g] =
                generate_section(scenario, envelopes, g, g / per_archetype, is_outlier[g]);
    };
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(threads), total);
    if (n_threads <= 1) {
        worker(0, total);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (total + n_threads - 1) / n_threads;
        for (std::size_t t = 0; t < n_threads; ++t)
            pool.emplace_back(worker, std::min(t * chunk, total), std::min((t + 1) * chunk, total));
        for (auto& thread : pool) thread.join();
    }

    result.manifest.seed = scenario.seed;
    result.manifest.total_sections = total;
    result.manifest.parameters = kDrillingParameterCount;
    result.manifest.values_per_section_parameter =
        static_cast<std::size_t>(scenario.holes_per_section) *
        static_cast<std::size_t>(scenario.values_per_hole);
    for (std::size_t g = 0; g < total; ++g) {
        SectionTruth truth;
        truth.section_id = result.sections[g].section_id;
        truth.labeled_as = result.sections[g].rock_type;
        truth.outlier = is_outlier[g];
        truth.archetype = is_outlier[g] ? "outlier" : truth.labeled_as;
        if (is_outlier[g]) result.manifest.outlier_sections.push_back(truth.section_id);
        result.manifest.sections.push_back(std::move(truth));
    }
    return result;
}

GeologyScenario benchmark_scenario() {
    using P = ParameterId;
    GeologyScenario scenario;
    scenario.sections_per_archetype = 500;
    scenario.holes_per_section = 120;
    scenario.values_per_hole = 40;
    scenario.section_jitter = 0.5;
    scenario.noise_fraction = 0.02;
    scenario.seed = 20260819;
    scenario.overburden = {55.0, 18.0, 1.0};
    scenario.tunnel_width = {9.5, 0.6, 0.0};

    const auto archetype = [](std::string name, std::string q_class,
                              std::map<ParameterId, ValueDistribution> params) {
        RockArchetype a;
        a.name = std::move(name);
        a.q_class = std::move(q_class);
        a.params = std::move(params);
        return a;
    };
    scenario.archetypes.push_back(archetype("Gneiss", "B",
                                            {{P::PenetrNorm, {1.6, 0.25, 2.0}},
                                             {P::PenetrRMS, {0.45, 0.08, 1.0}},
                                             {P::RotaPressNorm, {62.0, 5.0, -1.0}},
                                             {P::RotaPressRMS, {5.0, 0.8, 1.0}},
                                             {P::FeedPressNorm, {78.0, 5.0, -0.5}},
                                             {P::HammerPressNorm, {165.0, 7.0, -2.0}},
                                             {P::WaterflowNorm, {17.0, 2.0, 1.5}},
                                             {P::WaterflowRMS, {2.2, 0.5, 2.0}}}));
    scenario.archetypes.push_back(archetype("Granite", "A",
                                            {{P::PenetrNorm, {1.0, 0.2, 2.5}},
                                             {P::PenetrRMS, {0.3, 0.08, 1.5}},
                                             {P::RotaPressNorm, {71.0, 5.0, -1.5}},
                                             {P::RotaPressRMS, {5.6, 0.8, 1.0}},
                                             {P::FeedPressNorm, {92.0, 5.0, -1.0}},
                                             {P::HammerPressNorm, {181.0, 7.0, -2.0}},
                                             {P::WaterflowNorm, {13.5, 2.0, 1.0}},
                                             {P::WaterflowRMS, {1.8, 0.5, 1.5}}}));
    scenario.archetypes.push_back(archetype("Rhomb porphyry", "C",
                                            {{P::PenetrNorm, {2.4, 0.3, 1.0}},
                                             {P::PenetrRMS, {0.6, 0.08, 1.0}},
                                             {P::RotaPressNorm, {53.0, 5.0, 0.0}},
                                             {P::RotaPressRMS, {4.2, 0.8, 0.5}},
                                             {P::FeedPressNorm, {65.0, 5.0, 0.0}},
                                             {P::HammerPressNorm, {149.0, 7.0, -1.0}},
                                             {P::WaterflowNorm, {21.5, 2.0, 1.0}},
                                             {P::WaterflowRMS, {2.7, 0.5, 1.0}}}));
    scenario.archetypes.push_back(archetype("Shale", "D",
                                            {{P::PenetrNorm, {3.4, 0.4, -1.0}},
                                             {P::PenetrRMS, {0.85, 0.08, 0.5}},
                                             {P::RotaPressNorm, {43.0, 5.0, 0.5}},
                                             {P::RotaPressRMS, {3.4, 0.8, 0.0}},
                                             {P::FeedPressNorm, {51.0, 5.0, 0.5}},
                                             {P::HammerPressNorm, {132.0, 7.0, 0.0}},
                                             {P::WaterflowNorm, {26.0, 2.0, 0.5}},
                                             {P::WaterflowRMS, {3.3, 0.5, 0.5}}}));
    return scenario;
}

namespace {

nlohmann::json distribution_to_json(const ValueDistribution& dist) {
    return {{"mean", dist.mean}, {"spread", dist.spread}, {"skew", dist.skew}};
}

ValueDistribution distribution_from_json(const nlohmann::json& node, const std::string& where) {
    if (!node.is_object() || !node.contains("mean") || !node.contains("spread"))
        fail("scenario: " + where + " needs mean and spread");
    ValueDistribution dist;
    dist.mean = node.at("mean").get<double>();
    dist.spread = node.at("spread").get<double>();
    dist.skew = node.value("skew", 0.0);
    return dist;
}

}  // namespace

std::string scenario_to_json(const GeologyScenario& scenario) {
    nlohmann::json doc;
    doc["version"] = 1;
    doc["seed"] = scenario.seed;
    doc["sections_per_archetype"] = scenario.sections_per_archetype;
    doc["holes_per_section"] = scenario.holes_per_section;
    doc["values_per_hole"] = scenario.values_per_hole;
    doc["section_jitter"] = scenario.section_jitter;
    doc["noise_fraction"] = scenario.noise_fraction;
    doc["overburden"] = distribution_to_json(scenario.overburden);
    doc["tunnel_width"] = distribution_to_json(scenario.tunnel_width);
    doc["archetypes"] = nlohmann::json::array();
    for (const auto& archetype : scenario.archetypes) {
        nlohmann::json node;
        node["name"] = archetype.name;
        node["q_class"] = archetype.q_class;
        node["params"] = nlohmann::json::object();
        for (const auto& [param, dist] : archetype.params)
            node["params"][to_string(param)] = distribution_to_json(dist);
        doc["archetypes"].push_back(std::move(node));
    }
    return doc.dump(2) + "\n";
}

GeologyScenario scenario_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("scenario: invalid JSON: ") + e.what());
    }
    if (doc.value("version", 0) != 1) fail("scenario: unsupported or missing version");
    for (const char* key :
         {"seed", "sections_per_archetype", "holes_per_section", "values_per_hole", "archetypes"})
        if (!doc.contains(key)) fail(std::string("scenario: missing field ") + key);

    GeologyScenario scenario;
    scenario.seed = doc.at("seed").get<std::uint64_t>();
    scenario.sections_per_archetype = doc.at("sections_per_archetype").get<int>();
    scenario.holes_per_section = doc.at("holes_per_section").get<int>();
    scenario.values_per_hole = doc.at("values_per_hole").get<int>();
    scenario.section_jitter = doc.value("section_jitter", 0.5);
    scenario.noise_fraction = doc.value("noise_fraction", 0.0);
    if (doc.contains("overburden"))
        scenario.overburden = distribution_from_json(doc.at("overburden"), "overburden");
    if (doc.contains("tunnel_width"))
        scenario.tunnel_width = distribution_from_json(doc.at("tunnel_width"), "tunnel_width");
    if (!doc.at("archetypes").is_array()) fail("scenario: archetypes must be an array");
    for (const auto& node : doc.at("archetypes")) {
        RockArchetype archetype;
        if (!node.contains("name")) fail("scenario: archetype missing name");
        archetype.name = node.at("name").get<std::string>();
        archetype.q_class = node.value("q_class", std::string());
        if (!node.contains("params") || !node.at("params").is_object())
            fail("scenario: archetype " + archetype.name + " missing params object");
        for (const auto& [key, value] : node.at("params").items())
            archetype.params[parameter_from_string(key)] =
                distribution_from_json(value, archetype.name + "." + key);
        scenario.archetypes.push_back(std::move(archetype));
    }
    return scenario;
}

void write_readings_long_csv(std::ostream& out, const std::vector<SectionSample>& sections) {
    out << "tunnel_id,section_id,chainage_m,parameter,value\n";
    std::string row;
    for (const auto& section : sections) {
        const std::string prefix = section.tunnel_id + "," + section.section_id + "," +
                                   format_double(section.chainage_m) + ",";
        for (const auto& [param, values] : section.readings) {
            const std::string param_prefix = prefix + to_string(param) + ",";
            for (double value : values) {
                row = param_prefix;
                row += format_double(value);
                row += '\n';
                out << row;
            }
        }
    }
}

void write_section_attributes_csv(std::ostream& out, const std::vector<SectionSample>& sections) {
    out << "section_id,overburden_m,tunnel_width_m,rock_type,q_class\n";
    for (const auto& section : sections) {
        std::string row;
        append_csv_field(row, section.section_id);
        row += ',';
        row += format_double(section.overburden_m);
        row += ',';
        row += format_double(section.tunnel_width_m);
        row += ',';
        append_csv_field(row, section.rock_type);
        row += ',';
        append_csv_field(row, section.q_class);
        row += '\n';
        out << row;
    }
}

std::string manifest_to_json(const GroundTruthManifest& manifest) {
    nlohmann::json doc;
    doc["version"] = 1;
    doc["seed"] = manifest.seed;
    doc["counts"] = {{"sections", manifest.total_sections},
                     {"parameters", manifest.parameters},
                     {"values_per_section_parameter", manifest.values_per_section_parameter}};
    doc["outlier_sections"] = manifest.outlier_sections;
    doc["sections"] = nlohmann::json::array();
    for (const auto& truth : manifest.sections)
        doc["sections"].push_back({{"section_id", truth.section_id},
                                   {"archetype", truth.archetype},
                                   {"labeled_as", truth.labeled_as},
                                   {"outlier", truth.outlier}});
    return doc.dump(2) + "\n";
}

}  // namespace rockcluster
