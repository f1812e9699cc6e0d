#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "ascertain/report.hpp"
#include "support.hpp"

namespace {

struct Run {
  int exit = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(ASCERTAIN_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.exit = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "ascertain_cli_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

const std::string kObserved = testing::data_path("nvdrs_observed.csv");

}  // namespace

TEST_CASE("fit writes a report") {
  const auto r = run("fit --input " + kObserved + " --delta 0.2");
  REQUIRE(r.exit == 0);
  std::istringstream in(r.out);
  const auto report = ascertain::Report::parse(in);
  REQUIRE(report.find("fit"));
  CHECK(std::abs(report.find("fit")->number("ratio") - 1.237) < 2e-3);
  CHECK(report.find("run")->get("input_sha256")->size() == 64);
  CHECK(report.find("probabilities.1"));
}

TEST_CASE("malformed input exits with a validation error") {
  const auto bad = scratch("bad.csv");
  std::ofstream(bad) << "exposure,pattern,count\nE,10x,3\n";
  const auto r = run("fit --input " + bad.string());
  CHECK(r.exit == 2);
  CHECK(r.out.find("line 2") != std::string::npos);
  CHECK(run("fit --input " + kObserved + " --variant nonsense").exit == 2);
  CHECK(run("fit").exit == 2);
  CHECK(run("fit --input " + kObserved + " --exposed X").exit == 2);
}

TEST_CASE("test output is reproducible and independent of threads") {
  const auto draws = scratch("draws.csv");
  const std::string base = "test --input " + kObserved + " --bootstrap 10 --seed 4 --delta 0.1 --delta 0.3";
  const auto a = run(base + " --threads 1 --draws " + draws.string());
  const auto b = run(base + " --threads 1 --draws " + draws.string());
  const auto c = run(base + " --threads 4 --draws " + draws.string());
  REQUIRE(a.exit == 0);
  CHECK(a.out == b.out);
  CHECK(a.out == c.out);
  CHECK(a.out.find("[test.2]") != std::string::npos);
  CHECK(count_lines(slurp(draws)) == 11);
}

TEST_CASE("loglinear selection and completion") {
  const auto completed = scratch("completed.csv");
  const auto r = run("loglinear --input " + kObserved + " --completed " + completed.string());
  REQUIRE(r.exit == 0);
  CHECK(r.out.find("DC:CME LE:CME") != std::string::npos);
  std::ifstream in(completed);
  const auto back = ascertain::read_table_csv(in);
  CHECK(back.tables.at("E").count(0u) == 85);
  CHECK(back.tables.at("U").count(0u) == 63);
  const auto strict = run("loglinear --input " + kObserved + " --lower-p 0.99");
  CHECK(strict.exit == 2);
  CHECK(strict.out.find("no admissible") != std::string::npos);
}

TEST_CASE("simulate studies write their CSV") {
  const auto csv = scratch("bias.csv");
  const auto r = run("simulate --study bias --config " + testing::data_path("bias_study.json") +
                     " --replicates 20 --csv " + csv.string());
  REQUIRE(r.exit == 0);
  CHECK(count_lines(slurp(csv)) == 16);
  const auto est = scratch("est.csv");
  REQUIRE(run("simulate --study estimators --config " + testing::data_path("estimator_study.json") +
              " --replicates 5 --csv " + est.string())
              .exit == 0);
  CHECK(count_lines(slurp(est)) == 19);
  CHECK(run("simulate --study bias --config " + testing::data_path("bias_study.json") + " --replicates 0").exit == 2);
}

TEST_CASE("probs from a saved fit report") {
  const auto rep = scratch("fit.txt");
  REQUIRE(run("fit --input " + kObserved + " --out " + rep.string()).exit == 0);
  const auto r = run("probs --params " + rep.string() + " --delta 0.2");
  REQUIRE(r.exit == 0);
  CHECK(r.out.find("pattern,exposed_theta_hat") != std::string::npos);
  const auto flat = run("probs --alpha 0,0,0 --alpha2 0,0,0 --theta 0 --delta 0");
  REQUIRE(flat.exit == 0);
  std::istringstream in(flat.out);
  const auto report = ascertain::Report::parse(in);
  const ascertain::CsvBlock* probs = nullptr;
  for (const auto& s : report.sections())
    if (!probs) probs = s.find_table("probabilities");
  REQUIRE(probs);
  REQUIRE(probs->rows.size() == 8);
  for (const auto& row : probs->rows)
    for (std::size_t c = 1; c < row.size(); ++c) CHECK(std::stod(row[c]) == doctest::Approx(0.125).epsilon(1e-14));
}
