/*
 * Copyright 2026 The solgp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "json.hpp"

#include "doctest.h"
#include "solgp/cli.hpp"
#include "solgp/design.hpp"
#include "solgp/error.hpp"
#include "solgp/seasonal.hpp"
#include "test_support.hpp"

using namespace solgp;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run solgp_run(std::vector<std::string> args) {
  args.insert(args.begin(), "solgp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t data_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++n;
  return n;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("solgp_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

Dataset synthetic(std::size_t sites, int days, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  testing::SeasonalTruth t;
  t.beta = [](SourceId s, double lat, double lon) {
    const double off = s == SourceId::SimA ? -12.0 : s == SourceId::SimB ? 9.0 : 0.0;
    return std::array<double, 3>{300.0 + off + 4.0 * (lat - 30.0) + 2.0 * std::sin(lon / 3.0), 30.0, -15.0};
  };
  t.noise_sd = 5.0;
  t.missing = 0.05;
  return testing::seasonal_dataset(rng, sites, days, t);
}

std::string write_dataset(const TempDir& dir, const std::string& name, const Dataset& ds,
                          CsvSchema schema = CsvSchema::Wide) {
  const std::string p = dir / name;
  std::ofstream f(p);
  write_csv(f, ds, schema);
  return p;
}

}  // namespace

TEST_CASE("aggregate is byte-stable and schema-independent") {
  TempDir dir;
  const Dataset ds = synthetic(20, 30, 1);
  const auto wide = write_dataset(dir, "wide.csv", ds, CsvSchema::Wide);
  const auto lng = write_dataset(dir, "long.csv", ds, CsvSchema::Long);
  REQUIRE(solgp_run({"--out-dir", dir / "a", "aggregate", "--input", wide}).code == 0);
  REQUIRE(solgp_run({"--out-dir", dir / "b", "aggregate", "--input", wide}).code == 0);
  REQUIRE(solgp_run({"--out-dir", dir / "c", "aggregate", "--input", lng}).code == 0);
  for (const char* f : {"aggregate_field.csv", "aggregate_simA.csv", "aggregate_simB.csv", "quality.csv"}) {
    CHECK(slurp(dir / ("a/" + std::string(f))) == slurp(dir / ("b/" + std::string(f))));
  }
  // the input path is part of the recorded config, so compare the data only
  auto body = [](const std::string& text) { return text.substr(text.find("site_id")); };
  CHECK(body(slurp(dir / "a/aggregate_field.csv")) == body(slurp(dir / "c/aggregate_field.csv")));
  CHECK(data_lines(dir / "a/aggregate_field.csv") == 21);
  const std::string head = slurp(dir / "a/aggregate_simA.csv");
  CHECK(head.starts_with("# command: aggregate\n# seed: 0\n# config_hash: "));
}

TEST_CASE("missing input exits nonzero with a message") {
  const auto r = solgp_run({"aggregate", "--input", "/nonexistent/data.csv"});
  CHECK(r.code != 0);
  CHECK(r.err.find("/nonexistent/data.csv") != std::string::npos);
  CHECK(solgp_run({"bogus"}).code != 0);
}

TEST_CASE("predict-grid shape and infeasible comparators") {
  TempDir dir;
  const auto in = write_dataset(dir, "d.csv", synthetic(20, 30, 2));
  const auto r = solgp_run({"--out-dir", dir / "g", "predict-grid", "--input", in, "--box", "31,40,-99,-90",
                            "--resolution", "1"});
  REQUIRE(r.code == 0);
  CHECK(data_lines(dir / "g/grid.csv") == 101);
  const std::string text = slurp(dir / "g/grid.csv");
  CHECK(text.find("# comparator: field-hat") != std::string::npos);
  CHECK(text.find("# local.n: 50") != std::string::npos);
  CHECK(text.find("# phase.day_origin: first-day") != std::string::npos);

  for (const char* c : {"ivw", "simA+b", "simB-nob", "daily:ivw"}) {
    const auto bad = solgp_run({"--out-dir", dir / "x", "predict-grid", "--input", in, "--comparator", c});
    CHECK(bad.code == 3);
    CHECK(bad.err.find("infeasible") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(dir / "x/grid.csv"));
}

TEST_CASE("daily grids feed top-regions") {
  TempDir dir;
  const auto in = write_dataset(dir, "d.csv", synthetic(15, 365, 3));
  REQUIRE(solgp_run({"--out-dir", dir / "g", "predict-grid", "--input", in, "--comparator", "daily:field-hat",
                     "--box", "31,34,-99,-96", "--resolution", "1", "--days", "0:364"})
              .code == 0);
  CHECK(data_lines(dir / "g/grid_day_000.csv") == 17);
  REQUIRE(solgp_run({"--out-dir", dir / "t", "top-regions", "--grid-dir", dir / "g"}).code == 0);
  CHECK(data_lines(dir / "t/top_regions.csv") == 17);
  fs::remove(dir / "g/grid_day_200.csv");
  const auto r = solgp_run({"--out-dir", dir / "t", "top-regions", "--grid-dir", dir / "g"});
  CHECK(r.code != 0);
  CHECK(r.err.find("incomplete year") != std::string::npos);
}

TEST_CASE("cv report, p-values and determinism") {
  TempDir dir;
  const auto in = write_dataset(dir, "d.csv", synthetic(20, 30, 4));
  const std::vector<std::string> base{"cv", "--input", in, "--comparators", "field-hat,simA-hat+b", "--mode", "fast"};
  auto with = [&](std::vector<std::string> pre, const std::string& out) {
    pre.push_back("--out-dir");
    pre.push_back(out);
    pre.insert(pre.end(), base.begin(), base.end());
    return solgp_run(pre);
  };
  REQUIRE(with({}, dir / "a").code == 0);
  REQUIRE(with({}, dir / "b").code == 0);
  REQUIRE(with({"--jobs", "3"}, dir / "c").code == 0);
  for (const char* f : {"report.csv", "report.txt", "report.json", "folds.csv"}) {
    const std::string a = slurp(dir / ("a/" + std::string(f)));
    CHECK(a == slurp(dir / ("b/" + std::string(f))));
    CHECK(a == slurp(dir / ("c/" + std::string(f))));
  }
  std::ifstream rep(dir / "a/report.csv");
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(rep, line))
    if (line[0] != '#') rows.push_back(line);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "target,comparator,rmse,cov95,p,ref_row");
  CHECK(rows[1].ends_with(",,"));
  CHECK(rows[2].ends_with(",1"));

  // a different seed changes the recorded hash
  REQUIRE(with({"--seed", "9"}, dir / "d").code == 0);
  const std::string a = slurp(dir / "a/report.csv"), d = slurp(dir / "d/report.csv");
  CHECK(a.substr(0, a.find("# input")) != d.substr(0, d.find("# input")));
}

TEST_CASE("cv against a baseline adds the cross-run column") {
  TempDir dir;
  const Dataset ds = synthetic(20, 30, 5);
  const auto in = write_dataset(dir, "d.csv", ds);
  const auto base = write_dataset(dir, "base.csv", synthetic(20, 30, 5));
  const auto r = solgp_run({"--out-dir", dir / "o", "cv", "--input", in, "--baseline", base, "--comparators",
                            "field-hat,simA-hat+b", "--mode", "fast"});
  REQUIRE(r.code == 0);
  const std::string text = slurp(dir / "o/report.csv");
  CHECK(text.find("target,comparator,rmse,cov95,p,ref_row,p_tab\n") != std::string::npos);
  // identical data on both sides: every paired difference is zero
  CHECK(text.find("field,field-hat,") != std::string::npos);
  CHECK(text.find(",1\n") != std::string::npos);
}

TEST_CASE("config file mirrors flags; jobs is not part of the hash") {
  TempDir dir;
  const auto in = write_dataset(dir, "d.csv", synthetic(12, 20, 6));
  {
    std::ofstream c(dir / "run.ini");
    c << "seed=3\n[aggregate]\ninput=" << in << "\n";
  }
  REQUIRE(solgp_run({"--config", dir / "run.ini", "--out-dir", dir / "a", "aggregate"}).code == 0);
  REQUIRE(solgp_run({"--seed", "3", "--jobs", "4", "--out-dir", dir / "b", "aggregate", "--input", in}).code == 0);
  CHECK(slurp(dir / "a/aggregate_field.csv") == slurp(dir / "b/aggregate_field.csv"));
  CHECK(slurp(dir / "a/aggregate_field.csv").find("# seed: 3\n") != std::string::npos);
}

TEST_CASE("config hash") {
  const cli::Settings s{{"a", "1"}, {"b", "x"}};
  CHECK(cli::fnv1a("") == 14695981039346656037ull);
  CHECK(cli::fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(cli::config_hash("cv", 0, s) == cli::config_hash("cv", 0, s));
  CHECK(cli::config_hash("cv", 0, s) != cli::config_hash("cv", 1, s));
  CHECK(cli::config_hash("cv", 0, s) != cli::config_hash("fit", 0, s));
  CHECK(cli::config_hash("cv", 0, s).size() == 16);
}

TEST_CASE("design, pairs-query, fuse, fit and calibrate commands") {
  TempDir dir;
  const auto in = write_dataset(dir, "d.csv", synthetic(20, 30, 7));
  auto r = solgp_run({"--out-dir", dir / "o", "--seed", "2", "design", "--existing", in, "--n", "25", "--rejections",
                      "5", "--layer", "92", "--start", "2016-04-14T23:00:00Z", "--end", "2016-04-15T23:00:00Z"});
  REQUIRE(r.code == 0);
  CHECK(data_lines(dir / "o/design.csv") == 26);
  const auto q = nlohmann::json::parse(slurp(dir / "o/pairs_query.json"));
  CHECK(q["metadata"]["command"] == "design");
  CHECK(q["query"]["layers"][0]["id"] == "92");
  const std::string doc = q["query"].dump();
  CHECK(parse_pairs_query(doc).coords.size() == 20);

  {
    std::ofstream p(dir / "pts.csv");
    p << "lat,lon\n37.70,-121.59\n40.1,-100.2\n";
  }
  r = solgp_run({"--out-dir", dir / "o", "pairs-query", "--layer", "92", "--start", "2016-04-14T23:00:00Z", "--end",
                 "2016-04-15T23:00:00Z", "--points", dir / "pts.csv", "--snap"});
  REQUIRE(r.code == 0);
  CHECK(parse_pairs_query(r.out.substr(r.out.find('{'))).coords.size() == 2);

  {
    std::ofstream a(dir / "p1.csv"), b(dir / "p2.csv");
    a << "lat,lon,mean,var\n30,-100,10,1\n31,-100,20,4\n";
    b << "lat,lon,mean,var\n30,-100,12,1\n31,-100,20,4\n";
  }
  REQUIRE(solgp_run({"--out-dir", dir / "o", "fuse", "--prediction", dir / "p1.csv", "--prediction", dir / "p2.csv"})
              .code == 0);
  std::ifstream f(dir / "o/fused.csv");
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(f, line))
    if (line[0] != '#') rows.push_back(line);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] == "30,-100,11,0.5");
  CHECK(rows[2] == "31,-100,20,2");

  REQUIRE(solgp_run({"--out-dir", dir / "o", "fit", "--input", in, "--source", "simB"}).code == 0);
  CHECK(data_lines(dir / "o/fitted_simB.csv") == 21);
  REQUIRE(solgp_run({"--out-dir", dir / "o", "calibrate", "--input", in, "--sim", "simA"}).code == 0);
  const auto models = nlohmann::json::parse(slurp(dir / "o/models_simA.json"));
  CHECK(GPModel::from_json(models["models"]["discrepancy"].dump()).size() == 20);
  REQUIRE(solgp_run({"--out-dir", dir / "l", "calibrate", "--input", in, "--sim", "simB", "--local", "--local-n",
                     "8"})
              .code == 0);
  CHECK(data_lines(dir / "l/calibrate_simB.csv") == 21);
}

TEST_CASE("quantiles are type 7") {
  CHECK(cli::quantile({1.0, 2.0, 3.0, 4.0}, 0.25) == doctest::Approx(1.75));
  CHECK(cli::quantile({5.0}, 0.9) == 5.0);
  CHECK(cli::quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK_THROWS_AS(cli::quantile({}, 0.5), EmptyInputError);
}

TEST_CASE("top-regions fractions") {
  auto year = [](std::size_t n, const std::function<double(std::size_t, int)>& mean, double var) {
    std::vector<cli::DayGrid> days(kYearDays);
    for (int d = 0; d < kYearDays; ++d) {
      for (std::size_t i = 0; i < n; ++i) {
        days[d].points.push_back({30.0 + static_cast<double>(i), -100.0});
        days[d].pred.mean.push_back(mean(i, d));
        days[d].pred.variance.push_back(var);
      }
    }
    return days;
  };
  SUBCASE("single point") {
    const auto r = cli::top_regions(year(1, [](std::size_t, int d) { return 100.0 + d; }, 4.0));
    CHECK(r[0].top_decile == 1.0);
    CHECK(r[0].confident == 1.0);
  }
  SUBCASE("dominant point") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::vector<double> noise(50 * kYearDays);
    for (auto& v : noise) v = u(rng);
    const std::size_t n = 50;
    const auto r = cli::top_regions(
        year(n, [&](std::size_t i, int d) { return i == 7 ? 500.0 : noise[i * kYearDays + d]; }, 1.0));
    CHECK(r[7].top_decile == 1.0);
    CHECK(r[7].confident == 1.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += r[i].top_decile;
      if (i != 7) CHECK(r[i].top_decile < 1.0);
    }
    // at most ceil(10% of n) points per day are in the top decile
    CHECK(total <= 5.0 + 1e-12);
  }
  SUBCASE("alternating pair") {
    const auto r = cli::top_regions(
        year(2, [](std::size_t i, int d) { return (static_cast<int>(i) + d) % 2 == 0 ? 200.0 : 100.0; }, 1.0));
    CHECK(r[0].top_decile == doctest::Approx(0.5).epsilon(0.01));
    CHECK(r[1].top_decile == doctest::Approx(0.5).epsilon(0.01));
    CHECK(r[0].top_decile + r[1].top_decile == doctest::Approx(1.0));
  }
  SUBCASE("incomplete year") {
    auto days = year(3, [](std::size_t i, int) { return static_cast<double>(i); }, 1.0);
    days.pop_back();
    CHECK_THROWS_AS(cli::top_regions(days), CoverageError);
  }
}

TEST_CASE("the installed binary runs") {
  TempDir dir;
  const auto in = write_dataset(dir, "d.csv", synthetic(10, 12, 9));
  const std::string cmd = std::string(SOLGP_BIN) + " --out-dir " + (dir / "o") + " aggregate --input " + in +
                          " > " + (dir / "log.txt") + " 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(dir / "o/aggregate_field.csv"));
  const std::string bad = std::string(SOLGP_BIN) + " aggregate --input /nonexistent.csv > " + (dir / "log2.txt") +
                          " 2>&1";
  CHECK(std::system(bad.c_str()) != 0);
  CHECK(slurp(dir / "log2.txt").find("nonexistent") != std::string::npos);
}
