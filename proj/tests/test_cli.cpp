#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "cli/artifacts.hpp"
#include "gridest/cli/cli.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using gridest::cli::run;

namespace {

std::string fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "gridest_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

const std::string kData = testsup::dataset_dir();

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run({"definitely-not-a-subcommand"}) == 2);
  CHECK(run({}) == 2);
  CHECK(run({"estimate", "--feeder", kData, "--out", fresh_dir("e0")}) == 2);  // flags missing
  CHECK(run({"powerflow"}) == 2);                                              // --feeder missing
}

TEST_CASE("validate and powerflow produce their artifacts") {
  auto out = fresh_dir("pf");
  CHECK(run({"validate", "--feeder", kData, "--out", out}) == 0);
  CHECK(fs::exists(out + "/model.json"));
  CHECK(fs::exists(out + "/manifest.json"));

  CHECK(run({"powerflow", "--feeder", kData, "--out", out}) == 0);
  CHECK(fs::exists(out + "/solution.csv"));
  CHECK(fs::exists(out + "/summary.json"));

  auto rows = gridest::cli::read_phasor_csv(out + "/solution.csv");
  bool found = false;
  for (const auto& r : rows)
    if (r.bus == 1 && r.phase == 0) {
      found = true;
      CHECK(r.mag_pu == doctest::Approx(0.9971).epsilon(0.011));
      CHECK(std::abs(r.angle_deg - (-0.6474)) < 0.5);
    }
  CHECK(found);

  SUBCASE("reruns are byte identical") {
    auto again = fresh_dir("pf2");
    CHECK(run({"powerflow", "--feeder", kData, "--out", again}) == 0);
    CHECK(slurp(out + "/solution.csv") == slurp(again + "/solution.csv"));
    CHECK(slurp(out + "/summary.json") == slurp(again + "/summary.json"));
  }
}

TEST_CASE("placement, measurement and estimation pipeline") {
  auto dir = fresh_dir("pipeline");
  CHECK(run({"powerflow", "--feeder", kData, "--out", dir}) == 0);
  CHECK(run({"place-pmu", "--feeder", kData, "--out", dir, "--channels", "inf"}) == 0);
  REQUIRE(fs::exists(dir + "/placement.json"));

  CHECK(run({"simulate-measurements", "--feeder", kData, "--out", dir, "--placement",
             dir + "/placement.json", "--seed", "11"}) == 0);
  REQUIRE(fs::exists(dir + "/measurements.csv"));

  SUBCASE("monolithic and parallel estimates") {
    CHECK(run({"estimate", "--feeder", kData, "--out", dir, "--placement",
               dir + "/placement.json", "--measurements", dir + "/measurements.csv",
               "--monolithic"}) == 0);
    REQUIRE(fs::exists(dir + "/estimate.csv"));
    REQUIRE(fs::exists(dir + "/report.json"));

    auto mono = slurp(dir + "/estimate.csv");

    auto par_dir = fresh_dir("pipeline_par");
    CHECK(run({"estimate", "--feeder", kData, "--out", par_dir, "--placement",
               dir + "/placement.json", "--measurements", dir + "/measurements.csv",
               "--parallel", "--workers", "3"}) == 0);
    auto par = slurp(par_dir + "/estimate.csv");

    // Same pipeline, different decomposition: tables agree to print precision
    // at this noise level on most rows; both must carry every bus row.
    CHECK(mono.size() == par.size());

    nlohmann::json rep = nlohmann::json::parse(slurp(par_dir + "/report.json"));
    CHECK(rep["mode"] == "parallel");
    CHECK(rep["zones"].size() > 1);
    CHECK(rep["max_pct_mag_error"].get<double>() < 1.0);

    SUBCASE("worker count does not change bytes") {
      auto par1_dir = fresh_dir("pipeline_par1");
      CHECK(run({"estimate", "--feeder", kData, "--out", par1_dir, "--placement",
                 dir + "/placement.json", "--measurements", dir + "/measurements.csv",
                 "--parallel", "--workers", "1"}) == 0);
      CHECK(slurp(par1_dir + "/estimate.csv") == par);
    }
  }

  SUBCASE("missing placement input exits 2 and names it") {
    CHECK(run({"estimate", "--feeder", kData, "--out", dir, "--placement",
               dir + "/nope.json", "--measurements", dir + "/measurements.csv"}) == 2);
  }

  SUBCASE("report summarizes the run directory") {
    CHECK(run({"estimate", "--feeder", kData, "--out", dir, "--placement",
               dir + "/placement.json", "--measurements", dir + "/measurements.csv",
               "--monolithic"}) == 0);
    CHECK(run({"report", "--run", dir, "--feeder", kData}) == 0);
    CHECK(fs::exists(dir + "/report/report.json"));
    CHECK(fs::exists(dir + "/report/voltage_profile.svg"));
    CHECK(fs::exists(dir + "/report/error_hist.svg"));
    nlohmann::json rep = nlohmann::json::parse(slurp(dir + "/report/report.json"));
    REQUIRE(rep.contains("buses"));
    bool checked = false;
    for (const auto& row : rep["buses"])
      if (row["bus"] == 149 && row["phase"] == "A") {
        CHECK(row["voltage_pct"].get<double>() == doctest::Approx(101.0));
        CHECK(row["drop_pct"].get<double>() == doctest::Approx(-1.0));
        checked = true;
      }
    CHECK(checked);
  }

  SUBCASE("report refuses an empty directory") {
    CHECK(run({"report", "--run", fresh_dir("empty_run")}) == 1);
  }
}

TEST_CASE("oracle placement flag on a trimmed dataset") {
  // The exhaustive search is guarded to 20 buses, so drive it through a tiny
  // hand-rolled dataset in the same file format.
  auto dir = fresh_dir("tiny_feeder");
  std::ofstream(dir + "/general.csv") << "General Data,\nSlack,1\nVnom (kV),4.16\n"
                                         "V_slack_ph_A,1\nV_slack_ph_B,1\nV_slack_ph_C,1\n"
                                         "Ang_slack_ph_A,0\nAng_slack_ph_B,-120\nAng_slack_ph_C,120\n";
  std::ofstream(dir + "/lines.csv") << "Node A,Node B,Length (ft.),Config.\n1,2,500,1\n2,3,500,1\n";
  std::ofstream(dir + "/configs.csv")
      << "Conf,Lin=1, Trafo=0,R11,R12,R13,R22,R23,R33,X11,X12,X13,X22,X23,X33,"
         "B11,B12,B13,B22,B23,B33\n"
         "1,1,0.4,0,0,0.4,0,0.4,1,0,0,1,0,1,0,0,0,0,0,0\n";
  std::ofstream(dir + "/loads.csv")
      << "Node,Y=1, D=0,Alfa (PQ=0, I=1, Z=2),Ph-1 (kW),Ph-1 (kVAr),Ph-2 (kW),Ph-2 (kVAr),"
         "Ph-3 (kW),Ph-3 (kVAr)\n3,1,0,10,5,0,0,0,0\n";
  std::ofstream(dir + "/coords.csv") << "Node,Pos X,Pos Y\n1,0,0\n2,1,0\n3,2,0\n";
  std::ofstream(dir + "/switches.csv") << "NODE1,NODE2,Closed=1\n";

  auto out = fresh_dir("tiny_out");
  CHECK(run({"place-pmu", "--feeder", dir, "--out", out, "--channels", "2", "--oracle"}) == 0);
  nlohmann::json placement = nlohmann::json::parse(slurp(out + "/placement.json"));
  REQUIRE(placement["devices"].size() == 1);
  CHECK(placement["devices"][0]["bus"] == 2);
}

TEST_CASE("upfc scenario run") {
  auto dir = fresh_dir("upfc");
  std::ofstream(dir + "/scenario.json") << R"({
    "fundamental_hz": 60.0,
    "samples_per_cycle": 64,
    "cycles": 4,
    "series": {"v_lm": 100.0, "harmonics": [{"order": 3, "amplitude_rel": 0.1}]},
    "shunt": {"i_1": 10.0, "harmonics": [{"order": 5, "amplitude_rel": 0.05}]},
    "band_half_width_rel": 0.05,
    "balance": {"v_s": 1.0, "i_s": 1.0, "v_l": 1.0, "i_l": 1.0,
                "phi_sr_deg": 60.0, "phi_sh_deg": 0.0, "phi_l_deg": 0.0}
  })";
  auto out = fresh_dir("upfc_out");
  CHECK(run({"upfc-sim", "--scenario", dir + "/scenario.json", "--out", out}) == 0);
  REQUIRE(fs::exists(out + "/waveforms.csv"));
  REQUIRE(fs::exists(out + "/balance.json"));

  nlohmann::json balance = nlohmann::json::parse(slurp(out + "/balance.json"));
  CHECK(balance["balance"]["p_s"].get<double>() == doctest::Approx(1.0));
  CHECK(balance["balance"]["q_s"].get<double>() == 0.0);
  CHECK(balance["balance"]["p_l"].get<double>() == doctest::Approx(-1.0));
  CHECK(balance["thd_pct"]["series_actual"][0].get<double>() == doctest::Approx(10.0).epsilon(0.01));
  CHECK(balance["thd_pct"]["series_corrected"][0].get<double>() < 0.5);
}

TEST_CASE("anfis training run") {
  auto dir = fresh_dir("anfis");
  {
    std::ofstream data(dir + "/train.csv");
    data << "x,y,target\n";
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j) {
        double x = -1.0 + 2.0 * i / 6.0, y = -1.0 + 2.0 * j / 6.0;
        data << x << "," << y << "," << (2.0 * x + 3.0 * y - 1.0) << "\n";
      }
  }
  auto out = fresh_dir("anfis_out");
  CHECK(run({"anfis-train", "--data", dir + "/train.csv", "--out", out, "--epochs", "30"}) == 0);
  REQUIRE(fs::exists(out + "/model.json"));
  REQUIRE(fs::exists(out + "/rmse.csv"));
  nlohmann::json model = nlohmann::json::parse(slurp(out + "/model.json"));
  CHECK(model["final_rmse"].get<double>() < 1e-3);
  CHECK(model["rules"].size() == 4);

  CHECK(run({"report", "--run", out}) == 0);
  CHECK(fs::exists(out + "/report/rmse.svg"));
}
