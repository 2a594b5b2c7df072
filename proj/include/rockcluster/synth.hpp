#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rockcluster/data_model.hpp"

namespace rockcluster {

// Distribution of one drilling parameter inside one rock archetype. Values
// are drawn from a skew-normal rescaled so that `mean` and `spread` are the
// distribution's true mean and standard deviation regardless of `skew`.
struct ValueDistribution {
    double mean = 0.0;
    double spread = 1.0;
    double skew = 0.0;  // skew-normal shape; 0 = symmetric
};

struct RockArchetype {
    std::string name;
    std::string q_class;  // stability label carried onto generated sections
    std::map<ParameterId, ValueDistribution> params;  // all 8 drilling parameters
};

// Recipe for a synthetic tunnel: every archetype contributes
// `sections_per_archetype` sections; each section pools
// holes_per_section * values_per_hole readings per drilling parameter.
// A `noise_fraction` share of sections is replaced by wide-scatter outliers
// that keep an ordinary rock label but are flagged in the manifest.
struct GeologyScenario {
    std::vector<RockArchetype> archetypes;
    int sections_per_archetype = 0;
    int holes_per_section = 0;
    int values_per_hole = 0;
    // Per-section drift of each parameter's location, in units of that
    // parameter's spread; keeps sections of one archetype from collapsing
    // onto a single point in feature space.
    double section_jitter = 0.5;
    ValueDistribution overburden{50.0, 15.0, 0.0};
    ValueDistribution tunnel_width{10.0, 0.5, 0.0};
    double noise_fraction = 0.0;
    std::uint64_t seed = 0;
};

struct SectionTruth {
    std::string section_id;
    std::string archetype;   // generating archetype, or "outlier"
    std::string labeled_as;  // rock_type written onto the sample
    bool outlier = false;
};

struct GroundTruthManifest {
    std::uint64_t seed = 0;
    std::size_t total_sections = 0;
    std::size_t parameters = 0;
    std::size_t values_per_section_parameter = 0;
    std::vector<SectionTruth> sections;
    std::vector<std::string> outlier_sections;
};

struct SynthResult {
    std::vector<SectionSample> sections;
    GroundTruthManifest manifest;
};

// Checks counts, distributions, and the archetype separation requirement:
// every pair of archetypes must differ by at least two pooled spreads on at
// least two drilling parameters. Throws std::runtime_error naming the first
// offending pair. Three or more archetypes are recommended but not enforced.
void validate_scenario(const GeologyScenario& scenario);

// Deterministic for a fixed seed: each section derives its own generator
// stream, so any thread count produces identical output.
SynthResult generate(const GeologyScenario& scenario, int threads = 1);

// Bundled default: four archetypes over 2,000 sections with 120 holes of 40
// values each, 2% outlier sections.
GeologyScenario benchmark_scenario();

GeologyScenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const GeologyScenario& scenario);

// Long reading file (tunnel_id,section_id,chainage_m,parameter,value).
// Streamed because full-size scenarios produce millions of rows.
void write_readings_long_csv(std::ostream& out, const std::vector<SectionSample>& sections);
// Attribute file (section_id,overburden_m,tunnel_width_m,rock_type,q_class).
void write_section_attributes_csv(std::ostream& out, const std::vector<SectionSample>& sections);
std::string manifest_to_json(const GroundTruthManifest& manifest);

}  // namespace rockcluster
