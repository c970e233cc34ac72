#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scratch.hpp"
#include "oscl/cli.hpp"
#include "oscl/report.hpp"

using namespace oscl;

namespace {

struct Run {
  int code = 0;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream captured;
  auto* old = std::cerr.rdbuf(captured.rdbuf());
  Run r;
  r.code = run_cli(args);
  std::cerr.rdbuf(old);
  r.err = captured.str();
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json error_record(const Run& r) {
  REQUIRE(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  return nlohmann::json::parse(r.err);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("synth then analyze finds the planted source") {
    oracle::ScratchDir dir;
    const auto csv = dir.file("ev.csv");
    REQUIRE(cli({"synth", "--out", csv, "--locations", "6", "--source", "4", "--seed", "42"}).code == kExitOk);
    CHECK(std::filesystem::exists(dir.file("ev.meta.json")));
    const auto truth = read_json_file(dir.file("ev.truth.json"));
    CHECK(truth["source_location"] == 4);

    const auto report_path = dir.file("report.json");
    REQUIRE(cli({"analyze", "--input", csv, "--window", "10:110", "--baselines", "def,qv", "--out", report_path})
                .code == kExitOk);
    const auto report = read_json_file(report_path);
    CHECK(report["participation"]["ranking"][0] == 4);
    CHECK(report["dataset_fingerprint"] == sha256_file(csv));
    CHECK(report["samples"] == 5000);
    CHECK(report["baselines"].contains("def"));
    CHECK(report["baselines"].contains("qv"));
    CHECK(std::abs(report["f_s"].get<double>() - 0.158) < 0.005);
    CHECK(report["filter_specs"].size() == 2);
    CHECK_FALSE(report.contains("timestamp"));

    SUBCASE("reports are byte-identical across runs and replays") {
      const auto again = dir.file("again.json");
      REQUIRE(cli({"analyze", "--input", csv, "--window", "10:110", "--baselines", "def,qv", "--out", again}).code ==
              kExitOk);
      CHECK(slurp(again) == slurp(report_path));
      const auto replay = dir.file("replay.json");
      REQUIRE(cli({"analyze", "--input", csv, "--params", report_path, "--out", replay}).code == kExitOk);
      CHECK(slurp(replay) == slurp(report_path));
    }

    SUBCASE("rank override is recorded") {
      const auto out = dir.file("r7.json");
      REQUIRE(cli({"analyze", "--input", csv, "--rank", "7", "--out", out}).code == kExitOk);
      const auto r = read_json_file(out);
      CHECK(r["rank_r"] == 7);
      CHECK(r["rank_overridden"] == true);
      CHECK(r["parameters"]["rank"] == 7);
    }

    SUBCASE("plot data") {
      const auto plots = dir.file("plots");
      REQUIRE(cli({"plotdata", "--report", report_path, "--input", csv, "--out-dir", plots}).code == kExitOk);
      for (const char* name : {"participation.csv", "def.csv", "qv.csv", "timeseries_1.csv", "pq_6.csv", "README.txt"})
        CHECK(std::filesystem::exists(std::filesystem::path(plots) / name));
      std::ifstream in(std::filesystem::path(plots) / "participation.csv");
      std::string line;
      std::getline(in, line);
      CHECK(line == "location,score");
      int rows = 0;
      double top = 0.0;
      while (std::getline(in, line)) {
        ++rows;
        top = std::max(top, std::stod(line.substr(line.find(',') + 1)));
      }
      CHECK(rows == 6);
      CHECK(top == doctest::Approx(1.0));

      // Peak-to-peak of the source voltage angle exceeds every other location.
      std::map<int, double> p2p;
      for (int id = 1; id <= 6; ++id) {
        std::ifstream ts(std::filesystem::path(plots) / ("timeseries_" + std::to_string(id) + ".csv"));
        std::getline(ts, line);
        double lo = 1e9, hi = -1e9;
        while (std::getline(ts, line)) {
          std::stringstream ss(line);
          std::string cell;
          for (int c = 0; c < 2; ++c) std::getline(ss, cell, ',');
          lo = std::min(lo, std::stod(cell));
          hi = std::max(hi, std::stod(cell));
        }
        p2p[id] = hi - lo;
      }
      for (const auto& [id, v] : p2p) CHECK(p2p.at(4) >= v);
    }

    SUBCASE("plot data without DEF section is an error") {
      const auto bare = dir.file("bare.json");
      REQUIRE(cli({"analyze", "--input", csv, "--out", bare}).code == kExitOk);
      const auto r = cli({"plotdata", "--report", bare, "--input", csv, "--out-dir", dir.file("p2"), "--plots", "def"});
      CHECK(r.code == kExitData);
      CHECK(error_record(r)["error"] == "data");
    }

    SUBCASE("baseline subcommands") {
      const auto def_out = dir.file("def.json");
      REQUIRE(cli({"def", "--input", csv, "--out", def_out}).code == kExitOk);
      const auto d = read_json_file(def_out);
      CHECK(d["baselines"]["def"]["ranking_injecting"][0] == 4);
      const auto qv_out = dir.file("qv.json");
      REQUIRE(cli({"qv", "--input", csv, "--fs", "0.158", "--sweep", "40:20", "--out", qv_out}).code == kExitOk);
      const auto q = read_json_file(qv_out);
      CHECK(q["f_s"] == 0.158);
      CHECK(q["window_sweep"].size() >= 4);
    }
  }

  TEST_CASE("usage errors exit 5 with one JSON line") {
    auto r = cli({"analyze", "--bogus"});
    CHECK(r.code == kExitUsage);
    CHECK(error_record(r)["exit_code"] == 5);
    r = cli({});
    CHECK(r.code == kExitUsage);
    r = cli({"analyze", "--input", "x.csv", "--out", "y.json", "--window", "abc"});
    CHECK(r.code == kExitUsage);
    CHECK(error_record(r)["error"] == "usage");
  }

  TEST_CASE("data errors exit 4") {
    oracle::ScratchDir dir;
    const auto r = cli({"analyze", "--input", dir.file("missing.csv"), "--out", dir.file("r.json")});
    CHECK(r.code == kExitData);
    const auto rec = error_record(r);
    CHECK(rec["error"] == "io");
    CHECK(rec["message"].get<std::string>().find("missing.csv") != std::string::npos);
  }

  TEST_CASE("noise-only input exits 2") {
    oracle::ScratchDir dir;
    const auto csv = dir.file("noise.csv");
    REQUIRE(cli({"synth", "--out", csv, "--amplitude", "0"}).code == kExitOk);
    const auto r = cli({"analyze", "--input", csv, "--out", dir.file("r.json")});
    CHECK(r.code == kExitNoMode);
    CHECK(error_record(r)["error"] == "no_dominant_mode");
  }

  TEST_CASE("bad scenario exits 4") {
    oracle::ScratchDir dir;
    const auto r = cli({"synth", "--out", dir.file("x.csv"), "--source", "9"});
    CHECK(r.code == kExitData);
    CHECK(error_record(r)["error"] == "scenario");
  }

  TEST_CASE("scenario file with overrides") {
    oracle::ScratchDir dir;
    {
      std::ofstream out(dir.file("sc.json"));
      out << R"({"n_locations": 3, "source_location": 2, "mode_freq_hz": 0.3, "duration_s": 60})";
    }
    REQUIRE(cli({"synth", "--scenario", dir.file("sc.json"), "--seed", "9", "--out", dir.file("s.csv")}).code ==
            kExitOk);
    const auto truth = read_json_file(dir.file("s.truth.json"));
    CHECK(truth["scenario"]["n_locations"] == 3);
    CHECK(truth["scenario"]["seed"] == 9);
    CHECK(truth["mode_freq_hz"] == 0.3);
  }
}
