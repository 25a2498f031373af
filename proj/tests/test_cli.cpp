#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct RunResult {
  int code = -1;
  std::string output;  // stdout and stderr combined
};

RunResult run_cli(const std::string& args) {
  const std::string command = std::string(ESM_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult result;
  char buf[512];
  for (;;) {
    const std::size_t got = fread(buf, 1, sizeof buf, pipe);
    if (got == 0) break;
    result.output.append(buf, got);
  }
  const int status = pclose(pipe);
  result.code = WEXITSTATUS(status);
  return result;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool file_exists(const std::string& path) { return std::ifstream(path).good(); }

struct FileGuard {
  std::vector<std::string> paths;
  ~FileGuard() {
    for (const std::string& path : paths) std::remove(path.c_str());
  }
};

std::vector<double> parse_number_line(const std::string& text) {
  std::vector<double> values;
  std::stringstream line(text.substr(0, text.find('\n')));
  std::string field;
  while (std::getline(line, field, ',')) values.push_back(std::stod(field));
  return values;
}

/// anll value for one split name out of a split,anll,record_count CSV.
double anll_from_report(const std::string& path, const std::string& split) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.rfind(split + ",", 0) != 0) continue;
    const std::size_t first = line.find(','), second = line.find(',', first + 1);
    return std::stod(line.substr(first + 1, second - first - 1));
  }
  FAIL("split '", split, "' not found in ", path);
  return 0.0;
}

/// Shared synthetic dataset; generated once through the CLI itself.
const std::string& dataset_path() {
  static const std::string path = [] {
    write_file("cli_synth.cfg",
               "graph = cycle(6,1.0)\n"
               "base = discrete\n"
               "n = 3\n"
               "synth.basis_m = 2\n"
               "synth.records_per_node = 50\n"
               "synth.seed = 5\n"
               "synth.out_data = cli_data.csv\n");
    const RunResult synth = run_cli("synth cli_synth.cfg");
    REQUIRE(synth.code == 0);
    return std::string("cli_data.csv");
  }();
  return path;
}

const char* kFitCommonKeys =
    "graph = cycle(6,1.0)\n"
    "base = discrete\n"
    "n = 3\n"
    "gamma1 = 0\n"
    "gamma2 = 0\n"
    "data = cli_data.csv\n"
    "split = 0.8,0.2,0\n"
    "split_seed = 3\n";

}  // namespace

TEST_CASE("spectra subcommand") {
  SUBCASE("the product worked example prints the five bottom eigenvalues") {
    const RunResult r = run_cli("spectra 'product(path(2,15),path(27,175))' --m 5");
    CHECK(r.code == 0);
    const std::vector<double> values = parse_number_line(r.output);
    REQUIRE(values.size() == 5);
    auto chain = [](int k) { return 175.0 * (2.0 - 2.0 * std::cos(std::numbers::pi * k / 27.0)); };
    const double expected[5] = {0.0, chain(1), chain(2), chain(3), 30.0};
    for (int i = 0; i < 5; ++i) CHECK(std::abs(values[i] - expected[i]) <= 1e-3);
  }

  SUBCASE("a single vertex has the zero eigenvalue") {
    const RunResult r = run_cli("spectra 'path(1,1)' --m 1");
    CHECK(r.code == 0);
    const std::vector<double> values = parse_number_line(r.output);
    REQUIRE(values.size() == 1);
    CHECK(values[0] == 0.0);
  }

  SUBCASE("invalid graphs exit with the bad-input code") {
    CHECK(run_cli("spectra 'cycle(2,1)'").code == 2);
    CHECK(run_cli("spectra 'blob(3,1)'").code == 2);
    CHECK(run_cli("spectra 'path(4,1)' --m 9").code == 2);
  }

  SUBCASE("--out writes one row per requested eigenpair") {
    FileGuard guard{{"cli_spectrum.csv"}};
    const RunResult r = run_cli("spectra 'path(3,1)' --m 2 --out cli_spectrum.csv");
    CHECK(r.code == 0);
    std::ifstream in("cli_spectrum.csv");
    REQUIRE(in.good());
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2);
  }
}

TEST_CASE("fit subcommand") {
  dataset_path();

  SUBCASE("a flat eigenbasis fit scores like the pooled fit when unregularized") {
    FileGuard guard{{"cli_common.cfg", "cli_common.esm", "cli_common_diag.csv",
                     "cli_common_anll.csv", "cli_eigen1.cfg", "cli_eigen1.esm",
                     "cli_eigen1_diag.csv", "cli_eigen1_anll.csv"}};
    write_file("cli_common.cfg", std::string(kFitCommonKeys) +
                                     "m = common\n"
                                     "out_model = cli_common.esm\n"
                                     "out_diagnostics = cli_common_diag.csv\n"
                                     "out_report = cli_common_anll.csv\n");
    write_file("cli_eigen1.cfg", std::string(kFitCommonKeys) +
                                     "m = 1\n"
                                     "abs_tol = 1e-9\n"
                                     "rel_tol = 1e-7\n"
                                     "max_iter = 20000\n"
                                     "out_model = cli_eigen1.esm\n"
                                     "out_diagnostics = cli_eigen1_diag.csv\n"
                                     "out_report = cli_eigen1_anll.csv\n");
    CHECK(run_cli("fit cli_common.cfg").code == 0);
    CHECK(run_cli("fit cli_eigen1.cfg").code == 0);
    const double common_train = anll_from_report("cli_common_anll.csv", "train");
    const double eigen_train = anll_from_report("cli_eigen1_anll.csv", "train");
    CHECK(std::abs(common_train - eigen_train) <= 1e-5);
    const double common_val = anll_from_report("cli_common_anll.csv", "validation");
    const double eigen_val = anll_from_report("cli_eigen1_anll.csv", "validation");
    CHECK(std::abs(common_val - eigen_val) <= 1e-5);
  }

  SUBCASE("reruns are byte-identical") {
    FileGuard guard{{"cli_rerun.cfg", "cli_rerun_a.esm", "cli_rerun_a_diag.csv",
                     "cli_rerun_a_anll.csv", "cli_rerun_b.esm"}};
    write_file("cli_rerun.cfg", std::string(kFitCommonKeys) +
                                    "m = 3\n"
                                    "out_model = cli_rerun_a.esm\n"
                                    "out_diagnostics = cli_rerun_a_diag.csv\n"
                                    "out_report = cli_rerun_a_anll.csv\n");
    CHECK(run_cli("fit cli_rerun.cfg").code == 0);
    const std::string first_model = read_file("cli_rerun_a.esm");
    const std::string first_diag = read_file("cli_rerun_a_diag.csv");
    CHECK(run_cli("fit cli_rerun.cfg --out cli_rerun_b.esm").code == 0);
    CHECK(read_file("cli_rerun_b.esm") == first_model);
    CHECK(read_file("cli_rerun_a_diag.csv") == first_diag);
  }

  SUBCASE("unknown config keys fail fast without partial outputs") {
    FileGuard guard{{"cli_bogus.cfg", "cli_bogus.esm"}};
    write_file("cli_bogus.cfg", std::string(kFitCommonKeys) +
                                    "m = 2\n"
                                    "bogus = 1\n"
                                    "out_model = cli_bogus.esm\n");
    const RunResult r = run_cli("fit cli_bogus.cfg");
    CHECK(r.code == 2);
    CHECK(r.output.find("bogus") != std::string::npos);
    CHECK_FALSE(file_exists("cli_bogus.esm"));
  }

  SUBCASE("an iteration-starved fit exits nonzero but still writes its artifacts") {
    FileGuard guard{{"cli_starved.cfg", "cli_starved.esm", "cli_starved_diag.csv",
                     "cli_starved_anll.csv"}};
    write_file("cli_starved.cfg", std::string(kFitCommonKeys) +
                                      "m = 2\n"
                                      "max_iter = 1\n"
                                      "out_model = cli_starved.esm\n"
                                      "out_diagnostics = cli_starved_diag.csv\n"
                                      "out_report = cli_starved_anll.csv\n");
    const RunResult r = run_cli("fit cli_starved.cfg");
    CHECK(r.code == 1);
    CHECK(r.output.find("converged: no") != std::string::npos);
    CHECK(file_exists("cli_starved.esm"));
    CHECK(file_exists("cli_starved_diag.csv"));
    CHECK(file_exists("cli_starved_anll.csv"));
    // The saved model is usable despite the early stop.
    const RunResult eval = run_cli("eval cli_starved.esm " + dataset_path());
    CHECK(eval.code == 0);
  }
}

TEST_CASE("eval subcommand") {
  dataset_path();
  FileGuard guard{{"cli_eval.cfg", "cli_eval.esm", "cli_eval_diag.csv", "cli_eval_anll.csv"}};
  write_file("cli_eval.cfg", std::string(kFitCommonKeys) +
                                 "m = 2\n"
                                 "out_model = cli_eval.esm\n"
                                 "out_diagnostics = cli_eval_diag.csv\n"
                                 "out_report = cli_eval_anll.csv\n");
  REQUIRE(run_cli("fit cli_eval.cfg").code == 0);

  SUBCASE("evaluation is idempotent") {
    const RunResult a = run_cli("eval cli_eval.esm " + dataset_path());
    const RunResult b = run_cli("eval cli_eval.esm " + dataset_path());
    CHECK(a.code == 0);
    CHECK(a.output == b.output);
    CHECK(std::isfinite(std::stod(a.output)));
  }

  SUBCASE("malformed datasets are bad input") {
    FileGuard bad{{"cli_bad_data.csv"}};
    write_file("cli_bad_data.csv", "z,y\n99,1\n");
    const RunResult r = run_cli("eval cli_eval.esm cli_bad_data.csv");
    CHECK(r.code == 2);
    CHECK(r.output.find("line 2") != std::string::npos);
  }

  SUBCASE("a missing model file is bad input") {
    CHECK(run_cli("eval nope.esm " + dataset_path()).code == 2);
  }
}

TEST_CASE("synth subcommand") {
  FileGuard guard{{"cli_synth2.cfg", "cli_synth_a.csv", "cli_synth_b.csv", "cli_synth_c.csv"}};
  write_file("cli_synth2.cfg",
             "graph = path(4,1.0)\n"
             "base = logistic\n"
             "n = 2\n"
             "synth.basis_m = 2\n"
             "synth.records_per_node = 10\n"
             "synth.seed = 1\n"
             "synth.out_data = cli_synth_a.csv\n");

  SUBCASE("the seed pins the output") {
    CHECK(run_cli("synth cli_synth2.cfg").code == 0);
    CHECK(run_cli("synth cli_synth2.cfg --out cli_synth_b.csv").code == 0);
    CHECK(read_file("cli_synth_a.csv") == read_file("cli_synth_b.csv"));
    CHECK(run_cli("synth cli_synth2.cfg --seed 2 --out cli_synth_c.csv").code == 0);
    CHECK(read_file("cli_synth_a.csv") != read_file("cli_synth_c.csv"));
  }
}

TEST_CASE("search subcommand") {
  dataset_path();
  FileGuard guard{{"cli_search.cfg", "cli_search.csv"}};
  write_file("cli_search.cfg", std::string(kFitCommonKeys) +
                                   "search.gamma1 = 0.1,0.5\n"
                                   "search.m = 1,3\n"
                                   "search.out = cli_search.csv\n");
  const RunResult r = run_cli("search cli_search.cfg");
  CHECK(r.code == 0);
  CHECK(r.output.find("best:") != std::string::npos);
  std::ifstream in("cli_search.csv");
  REQUIRE(in.good());
  std::string line;
  int rows = -1;  // uncount the header
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);
}

TEST_CASE("top-level argument handling") {
  CHECK(run_cli("").code == 2);             // a subcommand is required
  CHECK(run_cli("frobnicate").code == 2);   // unknown subcommand
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("fit").code == 2);          // missing config argument
}
