#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "srpsbl/config.hpp"
#include "test_support.hpp"

using namespace srpsbl;

namespace {

JobConfig from_text(const std::string& text) {
  std::istringstream in(text);
  return job_config_from(KeyValueConfig::parse(in, "job.cfg"));
}

std::string error_of(const std::string& text) {
  try {
    from_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(KeyValue, ParsesCommentsAndWhitespace) {
  std::istringstream in("# comment\n\n  method =  srp_phat  \nsolver.n_peaks=4\n   # indented comment\n");
  const KeyValueConfig doc = KeyValueConfig::parse(in, "a.cfg");
  ASSERT_EQ(doc.entries().size(), 2u);
  EXPECT_EQ(doc.entries().at("method").value, "srp_phat");
  EXPECT_EQ(doc.entries().at("method").line, 3);
  EXPECT_EQ(doc.entries().at("solver.n_peaks").value, "4");
}

TEST(KeyValue, SyntaxErrorsCarryTheLine) {
  std::istringstream missing_eq("method = srp_phat\njust words\n");
  try {
    KeyValueConfig::parse(missing_eq, "a.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("a.cfg:2"), std::string::npos) << e.what();
  }
  std::istringstream dup("seed = 1\nseed = 2\n");
  EXPECT_THROW(KeyValueConfig::parse(dup), ConfigError);
  std::istringstream empty_key(" = 3\n");
  EXPECT_THROW(KeyValueConfig::parse(empty_key), ConfigError);
  EXPECT_THROW(KeyValueConfig::load("/nonexistent/job.cfg"), ConfigError);
}

TEST(JobConfigTest, EmptyDocumentGivesDefaults) {
  const JobConfig c = from_text("");
  EXPECT_EQ(c.method, Method::SrpSbl);
  EXPECT_EQ(c.coarse_elevation_step, 15.0);
  EXPECT_EQ(c.coarse_azimuth_step, 10.0);
  EXPECT_EQ(c.fine_elevation_step, 2.0);
  EXPECT_EQ(c.stft.frame_length, 1024);
  EXPECT_EQ(c.threshold, 1e-3);
  EXPECT_EQ(c.max_iterations, 200);
  EXPECT_EQ(c.min_separation_deg, 3.0);
  EXPECT_EQ(c.sample_rate, 48000.0);
  EXPECT_EQ(c.sources.size(), 3u);
}

TEST(JobConfigTest, AppliesValues) {
  const JobConfig c = from_text(
      "method = srp_s\n"
      "grid.fine.elevation_step = 4\n"
      "solver.refit_noise = yes\n"
      "scenario.sources = 10:20, -30:150\n"
      "scenario.signal = tone:440\n"
      "scenario.snr_db = none\n"
      "scenario.reverb = none\n"
      "dictionary.mode = nf\n"
      "compare.methods = srp_phat, srp_sbl\n"
      "compare.durations = 0.5, 1\n"
      "seed = 42\n");
  EXPECT_EQ(c.method, Method::SrpS);
  EXPECT_EQ(c.fine_elevation_step, 4.0);
  EXPECT_TRUE(c.refit_noise);
  ASSERT_EQ(c.sources.size(), 2u);
  EXPECT_EQ(c.sources[1].elevation_deg, -30.0);
  EXPECT_EQ(c.sources[1].azimuth_deg, 150.0);
  EXPECT_EQ(c.signal.kind, SignalKind::Tone);
  EXPECT_EQ(c.signal.tone_hz, 440.0);
  EXPECT_FALSE(c.noise);
  EXPECT_FALSE(c.reverb.enabled);
  EXPECT_EQ(c.mode, Propagation::NearField);
  EXPECT_EQ(c.compare_methods, (std::vector<Method>{Method::SrpPhat, Method::SrpSbl}));
  EXPECT_EQ(c.compare_durations, (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(c.seed, 42u);
}

TEST(JobConfigTest, DiagnosticsNameLineAndKey) {
  std::string msg = error_of("method = srp_sbl\nsolver.tolerance = 1\n");
  EXPECT_NE(msg.find("job.cfg:2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("solver.tolerance"), std::string::npos) << msg;

  msg = error_of("\n\nsolver.n_peaks = three\n");
  EXPECT_NE(msg.find("job.cfg:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("solver.n_peaks"), std::string::npos) << msg;

  msg = error_of("scenario.t60 = -1\n");
  EXPECT_NE(msg.find("scenario.t60"), std::string::npos) << msg;

  msg = error_of("input.kind = wav\n");
  EXPECT_NE(msg.find("input.wav"), std::string::npos) << msg;

  EXPECT_NE(error_of("method = music\n"), "");
  EXPECT_NE(error_of("scenario.sources = 100:20\n"), "");
  EXPECT_NE(error_of("scenario.sources = 10\n"), "");
  EXPECT_NE(error_of("solver.threshold = nan\n"), "");
  EXPECT_NE(error_of("solver.refit_noise = maybe\n"), "");
  EXPECT_NE(error_of("band.high_hz = 100\n"), "");
  EXPECT_NE(error_of("compare.trials = 0\n"), "");
  EXPECT_NE(error_of("seed = -3\n"), "");
}

TEST(JobConfigTest, KeyValueRenderingRoundTrips) {
  const JobConfig c = from_text("method = msbl_direct\nstft.overlap = 0.75\nscenario.sources = 1.5:2.25\n");
  const auto kv = to_key_values(c);
  EXPECT_EQ(kv.at("method"), "msbl_direct");
  KeyValueConfig doc;
  for (const auto& [k, v] : kv) doc.set(k, v);
  EXPECT_EQ(to_key_values(job_config_from(doc)), kv);
}

TEST(JobConfigTest, DerivedObjects) {
  JobConfig c = from_text("grid.full_sphere = true\ndictionary.materialize_mb = 3\n");
  EXPECT_EQ(coarse_grid_spec(c).azimuth_max, 350.0);
  EXPECT_EQ(fine_grid_spec(c).azimuth_max, 358.0);
  EXPECT_EQ(dictionary_options(c).materialize_limit_bytes, std::size_t{3} << 20);
  EXPECT_EQ(resolve_array(c).size(), 16);

  const auto dir = testutil::scratch_dir();
  const auto path = (dir / "pair.txt").string();
  std::ofstream(path) << "0.1 0 0\n-0.1 0 0\n";
  c = from_text("array.geometry = " + path + "\narray.sound_speed = 340\n");
  const MicArray a = resolve_array(c);
  EXPECT_EQ(a.size(), 2);
  EXPECT_EQ(a.sound_speed(), 340.0);

  const Scenario sc = scenario_from(from_text("scenario.t60 = 0.7\n"), 0.25, 9);
  EXPECT_EQ(sc.duration, 0.25);
  EXPECT_EQ(sc.seed, 9u);
  EXPECT_EQ(sc.reverb.t60, 0.7);
  EXPECT_EQ(sc.sources.size(), 3u);
}

TEST(JobConfigTest, MethodNames) {
  for (Method m : {Method::SrpPhat, Method::MsblDirect, Method::SrpS, Method::SrpSbl}) {
    EXPECT_EQ(parse_method(method_name(m)), m);
  }
  EXPECT_THROW(parse_method("srp"), ConfigError);
}
