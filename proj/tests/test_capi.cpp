#include "etcon/etcon.h"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <string>

using nlohmann::json;

namespace {

std::string take(char* s) {
    std::string out = s ? s : "";
    etcon_string_free(s);
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string kWater = ETCON_SOURCE_DIR "/scenarios/water3.json";
const std::string kDesign = ETCON_FIXTURE_DIR "/design.json";

}  // namespace

TEST(CApi, VersionAndErrors) {
    EXPECT_STREQ(etcon_version(), "0.3.0");
    etcon_scenario* s = nullptr;
    EXPECT_EQ(etcon_scenario_load("/nonexistent/x.json", &s), ETCON_ERR_IO);
    EXPECT_EQ(s, nullptr);
    EXPECT_NE(std::string(etcon_last_error()), "");
    EXPECT_EQ(etcon_scenario_parse("{not json", &s), ETCON_ERR_SCHEMA);
    EXPECT_EQ(etcon_scenario_parse(nullptr, &s), ETCON_ERR_ARGUMENT);
    char* out = nullptr;
    EXPECT_EQ(etcon_scenario_to_json(nullptr, &out), ETCON_ERR_ARGUMENT);
    etcon_scenario_free(nullptr);
    etcon_design_free(nullptr);
    etcon_batch_free(nullptr);
}

TEST(CApi, ScenarioRoundTrip) {
    etcon_scenario* s = nullptr;
    ASSERT_EQ(etcon_scenario_load(kWater.c_str(), &s), ETCON_OK);
    char* txt = nullptr;
    ASSERT_EQ(etcon_scenario_to_json(s, &txt), ETCON_OK);
    const std::string norm = take(txt);
    char* h1 = nullptr;
    ASSERT_EQ(etcon_scenario_hash(s, &h1), ETCON_OK);
    const std::string hash = take(h1);

    etcon_scenario* s2 = nullptr;
    ASSERT_EQ(etcon_scenario_parse(norm.c_str(), &s2), ETCON_OK);
    char* h2 = nullptr;
    ASSERT_EQ(etcon_scenario_hash(s2, &h2), ETCON_OK);
    EXPECT_EQ(take(h2), hash);

    ASSERT_EQ(etcon_scenario_set_gamma_mode(s2, ETCON_GAMMA_ENUMERATE), ETCON_OK);
    char* h3 = nullptr;
    ASSERT_EQ(etcon_scenario_hash(s2, &h3), ETCON_OK);
    EXPECT_NE(take(h3), hash);
    EXPECT_EQ(etcon_scenario_set_gamma_mode(s2, static_cast<etcon_gamma_mode>(7)), ETCON_ERR_ARGUMENT);
    etcon_scenario_free(s2);
    etcon_scenario_free(s);
}

TEST(CApi, VerifyAndSimulate) {
    etcon_scenario* s = nullptr;
    etcon_design* d = nullptr;
    ASSERT_EQ(etcon_scenario_load(kWater.c_str(), &s), ETCON_OK);
    ASSERT_EQ(etcon_design_load(kDesign.c_str(), &d), ETCON_OK);

    char* rep = nullptr;
    int ok = 0;
    ASSERT_EQ(etcon_verify(s, d, &rep, &ok), ETCON_OK);
    EXPECT_EQ(ok, 1);
    const json report = json::parse(take(rep));
    EXPECT_FALSE(report.empty());

    etcon_sim_options o;
    etcon_sim_options_init(&o);
    o.trials = 2;
    o.trace_limit = 1;
    etcon_batch* b = nullptr;
    ASSERT_EQ(etcon_simulate(s, d, &o, &b), ETCON_OK);
    EXPECT_EQ(etcon_batch_trials(b), 2);
    char* sj = nullptr;
    ASSERT_EQ(etcon_batch_summary_json(b, &sj), ETCON_OK);
    const json summary = json::parse(take(sj));
    for (const char* key : {"convergence_time_s", "disconnect_fraction_mean", "disconnect_fraction_per_agent",
                            "n_events", "invariance_violations", "tool_version", "config_hash", "seed"})
        EXPECT_TRUE(summary.contains(key)) << key;

    char* csv = nullptr;
    ASSERT_EQ(etcon_batch_trace_csv(b, 0, &csv), ETCON_OK);
    const std::string trace = take(csv);
    EXPECT_EQ(trace.substr(0, trace.find('\n')),
              "t,V_x,V_e,connected_1,y_quad_1,bound_1,connected_2,y_quad_2,bound_2,connected_3,y_quad_3,bound_3");
    EXPECT_NE(etcon_batch_trace_csv(b, 1, &csv), ETCON_OK);  // no trace kept for trial 1
    ASSERT_EQ(etcon_batch_events_csv(b, 1, &csv), ETCON_OK);
    const std::string events = take(csv);
    EXPECT_EQ(events.substr(0, events.find('\n')), "t_bar_k,config");
    EXPECT_EQ(etcon_batch_trial_summary_json(b, 5, &csv), ETCON_ERR_ARGUMENT);
    etcon_batch_free(b);

    // same options, same numbers
    etcon_batch* b2 = nullptr;
    ASSERT_EQ(etcon_simulate(s, d, &o, &b2), ETCON_OK);
    char* sj2 = nullptr;
    ASSERT_EQ(etcon_batch_summary_json(b2, &sj2), ETCON_OK);
    EXPECT_EQ(json::parse(take(sj2)), summary);
    etcon_batch_free(b2);

    etcon_design_free(d);
    etcon_scenario_free(s);
}

TEST(CApi, DesignJsonRoundTrip) {
    etcon_design* d = nullptr;
    ASSERT_EQ(etcon_design_load(kDesign.c_str(), &d), ETCON_OK);
    const std::string path = ::testing::TempDir() + "/capi_design.json";
    ASSERT_EQ(etcon_design_save(d, path.c_str()), ETCON_OK);
    EXPECT_EQ(json::parse(read_file(path)), json::parse(read_file(kDesign)));
    char* g = nullptr;
    ASSERT_EQ(etcon_design_gamma_json(d, &g), ETCON_OK);
    const json gamma = json::parse(take(g));
    EXPECT_EQ(gamma["gamma_table"]["mode"], "worst_case");
    etcon_design_free(d);
}

TEST(CApi, RecomputeGammaEnumerate) {
    etcon_scenario* s = nullptr;
    etcon_design* d = nullptr;
    ASSERT_EQ(etcon_scenario_load(kWater.c_str(), &s), ETCON_OK);
    ASSERT_EQ(etcon_design_load(kDesign.c_str(), &d), ETCON_OK);
    ASSERT_EQ(etcon_design_recompute_gamma(s, d, ETCON_GAMMA_ENUMERATE), ETCON_OK);
    char* g = nullptr;
    ASSERT_EQ(etcon_design_gamma_json(d, &g), ETCON_OK);
    const json gamma = json::parse(take(g));
    EXPECT_EQ(gamma["gamma_table"]["mode"], "enumerate");
    EXPECT_EQ(gamma["gamma_table"]["entries"].size(), 4u);

    // the recomputed design belongs to the enumerate-mode configuration
    etcon_sim_options o;
    etcon_sim_options_init(&o);
    etcon_batch* b = nullptr;
    EXPECT_EQ(etcon_simulate(s, d, &o, &b), ETCON_ERR_DESIGN);
    ASSERT_EQ(etcon_scenario_set_gamma_mode(s, ETCON_GAMMA_ENUMERATE), ETCON_OK);
    char* rep = nullptr;
    int ok = 0;
    ASSERT_EQ(etcon_verify(s, d, &rep, &ok), ETCON_OK);
    etcon_string_free(rep);
    etcon_design_free(d);
    etcon_scenario_free(s);
}
