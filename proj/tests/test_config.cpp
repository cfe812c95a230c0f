#include <cstdlib>
#include <set>

#include <gtest/gtest.h>

#include "vitalws/config.hpp"
#include "vitalws/error.hpp"

namespace vitalws {
namespace {

using nlohmann::json;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no vitalws::Error thrown";
  return ErrorCode::kIo;
}

TEST(Config, DefaultsRoundTrip) {
  ExperimentConfig c;
  c.seed = 11;
  c.synth.kinds = {ArtifactKind::kSensorDropout};
  c.taus = {AlertType::kSpO2};
  c.dsp.rr_band = {0.1, 0.8};
  c.criteria.persistence = 0.6;
  const json j = c;
  const auto back = j.get<ExperimentConfig>();
  EXPECT_EQ(json(back), j);
  EXPECT_EQ(back.seed, 11u);
  EXPECT_EQ(back.taus, std::vector<AlertType>{AlertType::kSpO2});
  EXPECT_EQ(back.dsp.rr_band.lo_hz, 0.1);
  EXPECT_EQ(back.criteria.persistence, 0.6);
}

TEST(Config, EmptyObjectIsTheDefault) {
  const auto c = json::object().get<ExperimentConfig>();
  EXPECT_EQ(json(c), json(ExperimentConfig{}));
  EXPECT_FALSE(c.seed.has_value());
}

TEST(Config, UnknownKeysAreRejectedAtEveryLevel) {
  for (const char* text : {R"({"sede": 1})", R"({"forest": {"treez": 3}})", R"({"criteria": {"gap": 1}})",
                           R"({"dsp": {"rr_band": {"lo": 0.1}}})", R"({"synth": {"patient": 3}})",
                           R"({"lf_thresholds": {"hr": 0.1}})", R"({"label_model": {"rate": 0.1}})"}) {
    EXPECT_EQ(code_of([&] { json::parse(text).get<ExperimentConfig>(); }), ErrorCode::kConfig) << text;
  }
}

TEST(Config, BadValuesAreRejected) {
  for (const char* text : {R"({"tau": "hr"})", R"({"arms": ["WEAK_SUP/SIDEWAYS"]})", R"({"seed": -1})",
                           R"({"workers": 1.5})", R"({"synth": {"kinds": ["SPIKES"]}})",
                           R"({"dsp": {"rr_band": {"lo_hz": 2, "hi_hz": 1}}})", R"({"class_balance": "x"})"}) {
    EXPECT_EQ(code_of([&] { json::parse(text).get<ExperimentConfig>(); }), ErrorCode::kConfig) << text;
  }
}

TEST(Config, ValidateRequiresSeed) {
  ExperimentConfig c;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kConfig);
  c.seed = 0;
  EXPECT_NO_THROW(c.validate());
  c.class_balance = 1.0;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::kConfig);
}

TEST(Config, SeedFromEnvironmentOnlyWhenAbsent) {
  ::setenv("VITALWS_SEED", "42", 1);
  ExperimentConfig c;
  c.resolve_seed();
  EXPECT_EQ(c.seed, 42u);
  c.seed = 5;
  c.resolve_seed();
  EXPECT_EQ(c.seed, 5u);
  ::setenv("VITALWS_SEED", "4x", 1);
  ExperimentConfig bad;
  EXPECT_EQ(code_of([&] { bad.resolve_seed(); }), ErrorCode::kConfig);
  ::unsetenv("VITALWS_SEED");
  ExperimentConfig none;
  none.resolve_seed();
  EXPECT_FALSE(none.seed.has_value());
}

TEST(Config, ApplyOverride) {
  json j = json::object();
  apply_override(j, "forest.trees", "20");
  apply_override(j, "seed", "9");
  apply_override(j, "out_dir", "123");  // string key keeps the text
  apply_override(j, "tau", "spo2");
  apply_override(j, "synth.kinds", R"(["FLATLINE"])");
  const auto c = j.get<ExperimentConfig>();
  EXPECT_EQ(c.forest.trees, 20);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.out_dir, "123");
  EXPECT_EQ(c.taus, std::vector<AlertType>{AlertType::kSpO2});
  EXPECT_EQ(c.synth.kinds, std::vector<ArtifactKind>{ArtifactKind::kFlatline});
  EXPECT_EQ(code_of([&] { apply_override(j, "forest.treez", "1"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { apply_override(j, "forest", "1"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { apply_override(j, "forest.trees.x", "1"); }), ErrorCode::kConfig);
}

TEST(Config, KeyListingCoversEveryLeaf) {
  const auto keys = config_key_defaults();
  std::set<std::string> names;
  for (const auto& [k, v] : keys) names.insert(k);
  EXPECT_EQ(names.size(), keys.size());
  for (const char* k : {"seed", "criteria.persistence", "dsp.resp_peaks.min_distance_s", "lf_thresholds.hr_band",
                        "label_model.epochs", "forest.trees", "synth.artifact_rate", "arms", "pfi_repeats"}) {
    EXPECT_TRUE(names.contains(k)) << k;
  }
  // every listed key is overridable
  for (const auto& [k, v] : keys) {
    json j = json::object();
    EXPECT_NO_THROW(apply_override(j, k, v)) << k;
    EXPECT_NO_THROW(j.get<ExperimentConfig>()) << k;
  }
}

TEST(Config, MissingnessPolicyRoundTrip) {
  MissingnessPolicy p;
  p.features = {"a", "b"};
  p.dropped = {"c"};
  p.impute = {{"a", 0.0}, {"b", -1.0}};
  const auto back = json(p).get<MissingnessPolicy>();
  EXPECT_EQ(back.features, p.features);
  EXPECT_EQ(back.dropped, p.dropped);
  EXPECT_EQ(back.impute, p.impute);
  json broken = p;
  broken["impute"].erase("b");
  EXPECT_EQ(code_of([&] { broken.get<MissingnessPolicy>(); }), ErrorCode::kConfig);
}

TEST(Config, SynthSectionUsesMasterSeedUnlessSet) {
  SynthSection s;
  EXPECT_EQ(s.spec(17, 2).seed, 17u);
  s.seed = 4;
  EXPECT_EQ(s.spec(17, 2).seed, 4u);
  EXPECT_EQ(s.spec(17, 2).workers, 2u);
}

}  // namespace
}  // namespace vitalws
