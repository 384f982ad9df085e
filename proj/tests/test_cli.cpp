#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

std::string cli_path() {
  const char* env = std::getenv("STC_CLI");
  REQUIRE_MESSAGE(env != nullptr, "STC_CLI must point at the stc binary");
  return env;
}

struct RunResult {
  int exit_code = 0;
  std::string out;
  std::string err;
};

RunResult run(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path();
  const std::string out_file = (dir / ("stc_cli_out" + std::to_string(counter))).string();
  const std::string err_file = (dir / ("stc_cli_err" + std::to_string(counter))).string();
  ++counter;
  const std::string cmd = cli_path() + " " + args + " >" + out_file + " 2>" + err_file;
  const int raw = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  auto slurp = [](const std::string& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  res.out = slurp(out_file);
  res.err = slurp(err_file);
  return res;
}

std::string write_file(const std::string& name, const std::string& content) {
  const std::string path = (fs::temp_directory_path() / name).string();
  std::ofstream out(path, std::ios::trunc);
  out << content;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tmp(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("generate is deterministic and writes a metadata sidecar") {
  const std::string spec = write_file(
      "cli_gen.json", R"({"kind":"low-rank","shape":[5,5,5],"true_rank":1,"seed":3})");
  const std::string out1 = tmp("cli_t1.sptn"), out2 = tmp("cli_t2.sptn");
  RunResult a = run("generate --spec " + spec + " --out " + out1 + " --quiet");
  RunResult b = run("generate --spec " + spec + " --out " + out2 + " --quiet");
  CHECK(a.exit_code == 0);
  CHECK(b.exit_code == 0);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(slurp(out1).rfind("{\"count\":125", 0) == 0);
  const std::string meta = slurp(out1 + ".meta.json");
  CHECK(meta.find("config_hash") != std::string::npos);
}

TEST_CASE("sample then complete recovers a rank-1 tensor end to end") {
  const std::string spec = write_file(
      "cli_gen2.json", R"({"kind":"low-rank","shape":[6,6,6],"true_rank":1,"seed":7})");
  const std::string dense = tmp("cli_dense.sptn");
  const std::string sparse = tmp("cli_sparse.sptn");
  const std::string recon = tmp("cli_recon.sptn");
  const std::string model = tmp("cli_model.ckpt");
  REQUIRE(run("generate --spec " + spec + " --out " + dense + " --quiet").exit_code == 0);
  REQUIRE(run("sample --tensor " + dense + " --fraction 0.2 --sample-seed 3 --out " +
              sparse + " --quiet").exit_code == 0);
  RunResult c = run("complete --tensor " + sparse + " --method cpd --rank 1 --out " + recon +
                    " --model " + model + " --seed 5 --json");
  CHECK(c.exit_code == 0);
  CHECK(c.out.find("\"out\"") != std::string::npos);

  // check held-out error via the benchmark experiment on the same generator
  const std::string bench = write_file("cli_bench.json", R"({
    "tensor": {"generate": {"kind":"low-rank","shape":[6,6,6],"true_rank":1,"seed":7}},
    "methods": [{"method":"cpd","rank":1}],
    "fractions": [0.2],
    "repetitions": 1,
    "seed": 5
  })");
  const std::string report = tmp("cli_report");
  REQUIRE(run("benchmark --spec " + bench + " --out " + report + " --quiet").exit_code == 0);
  const std::string csv = slurp(report + ".csv");
  CHECK(csv.rfind("tensor,method,", 0) == 0);
  // cpd row mae < 1e-3: parse the mae column of the cpd_r1 row
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);  // header
  bool found = false;
  while (std::getline(lines, line)) {
    if (line.find(",cpd_r1,") == std::string::npos) continue;
    std::istringstream cells(line);
    std::string cell;
    for (int i = 0; i < 8; ++i) std::getline(cells, cell, ',');
    CHECK(std::stod(cell) < 1e-3);
    found = true;
  }
  CHECK(found);
  CHECK(slurp(report + ".json").find("config_hash") != std::string::npos);

  // model checkpoint exists and loads (reconstruct through complete --config)
  CHECK(fs::exists(model));
}

TEST_CASE("complete reads method config from a file, flags override") {
  const std::string gen = write_file(
      "cli_gen4.json", R"({"kind":"low-rank","shape":[5,5,5],"true_rank":1,"seed":2})");
  const std::string dense = tmp("cli_dense4.sptn"), sparse = tmp("cli_sparse4.sptn");
  REQUIRE(run("generate --spec " + gen + " --out " + dense + " --quiet").exit_code == 0);
  REQUIRE(run("sample --tensor " + dense + " --fraction 0.3 --sample-seed 1 --out " +
              sparse + " --quiet").exit_code == 0);
  const std::string cfg = write_file("cli_method.json", R"({
    "method": "tt", "rank": 2,
    "train": {"max_epochs": 200, "max_restarts": 1}
  })");
  const std::string out = tmp("cli_out4.sptn");
  CHECK(run("complete --tensor " + sparse + " --config " + cfg + " --out " + out +
            " --quiet").exit_code == 0);
  CHECK(fs::exists(out));
  // unknown keys in the config are rejected by name
  const std::string bad = write_file("cli_method_bad.json", R"({"method":"tt","wobble":1})");
  RunResult r = run("complete --tensor " + sparse + " --config " + bad + " --out " + out);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("wobble") != std::string::npos);
}

TEST_CASE("malformed config json exits 2 with a machine readable error") {
  const std::string bad = write_file("cli_bad.json", "{broken");
  const std::string out = tmp("cli_never.sptn");
  RunResult r = run("generate --spec " + bad + " --out " + out);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("\"error\"") != std::string::npos);
  CHECK(r.err.find("parse") != std::string::npos);
}

TEST_CASE("unknown config keys are named in the error") {
  const std::string bad = write_file(
      "cli_badkey.json", R"({"kind":"low-rank","shape":[4,4],"true_rank":1,"wat":1})");
  RunResult r = run("generate --spec " + bad + " --out " + tmp("cli_never2.sptn"));
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("wat") != std::string::npos);
}

TEST_CASE("convert csv dump to sptn") {
  const std::string dump = write_file("cli_dump.csv", "# shape 3 3 sparse\n0,1,0.5\n2,2,4.5\n");
  const std::string out = tmp("cli_conv.sptn");
  RunResult r = run("convert --in " + dump + " --format csv --out " + out + " --quiet");
  CHECK(r.exit_code == 0);
  const std::string content = slurp(out);
  CHECK(content.find("\"kind\":\"sparse\"") != std::string::npos);
  CHECK(content.find("2 2 4.5") != std::string::npos);
}

TEST_CASE("ensemble subcommand") {
  const std::string spec = write_file(
      "cli_gen3.json", R"({"kind":"low-rank","shape":[6,6,6],"true_rank":2,"seed":9})");
  const std::string dense = tmp("cli_dense3.sptn");
  const std::string sparse = tmp("cli_sparse3.sptn");
  REQUIRE(run("generate --spec " + spec + " --out " + dense + " --quiet").exit_code == 0);
  REQUIRE(run("sample --tensor " + dense + " --fraction 0.2 --sample-seed 1 --out " +
              sparse + " --quiet").exit_code == 0);
  const std::string espec = write_file("cli_ens.json", R"({
    "base": {"method": "cpd"},
    "ranks": [1, 2],
    "aggregator": "mean",
    "seed": 2,
    "train": {"max_epochs": 300, "max_restarts": 2}
  })");
  const std::string out = tmp("cli_ens_out.sptn");
  const std::string model = tmp("cli_ens_model.ckpt");
  RunResult r = run("ensemble --tensor " + sparse + " --spec " + espec + " --out " + out +
                    " --model " + model + " --quiet");
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out));
  CHECK(fs::exists(model));
  CHECK(fs::exists(model + ".base0"));
}

TEST_CASE("lambda and rankscan experiments run from the cli") {
  const std::string lspec = write_file("cli_lambda.json", R"({
    "tensor": {"generate": {"kind":"smooth-grid","shape":[6,6,6],"frequency":1.0,"seed":2}},
    "model": {"method":"cpd-s","rank":2},
    "train": {"max_epochs": 300, "max_restarts": 2},
    "lambda_grid": [0.0, 0.1],
    "fractions": [0.1],
    "repetitions": 1,
    "seed": 4
  })");
  const std::string lout = tmp("cli_lambda_report");
  CHECK(run("lambda --spec " + lspec + " --out " + lout + " --quiet").exit_code == 0);
  const std::string csv = slurp(lout + ".csv");
  CHECK(csv.find("cpd-s_l0.1") != std::string::npos);

  const std::string rspec = write_file("cli_rank.json", R"({
    "tensor": {"generate": {"kind":"low-rank","shape":[6,6,6],"true_rank":1,"seed":3}},
    "rank_grid": [1, 2],
    "train": {"max_epochs": 500, "max_restarts": 2},
    "seed": 4
  })");
  const std::string rout = tmp("cli_rank_report");
  CHECK(run("rankscan --spec " + rspec + " --out " + rout + " --quiet").exit_code == 0);
  CHECK(slurp(rout + ".csv").find("decompose") != std::string::npos);
}

TEST_CASE("crossdataset and timing experiments run from the cli") {
  const std::string cspec = write_file("cli_cross.json", R"({
    "stack": [
      {"generate": {"kind":"low-rank","shape":[6,6,6],"true_rank":1,"seed":3}},
      {"generate": {"kind":"low-rank","shape":[6,6,6],"true_rank":1,"seed":3}}
    ],
    "methods": [{"method":"cpd","rank":1,"train":{"max_epochs":300,"max_restarts":2}}],
    "target_index": 0,
    "target_fraction": 0.05,
    "context_fraction": 0.2,
    "repetitions": 1,
    "seed": 6
  })");
  const std::string cout_prefix = tmp("cli_cross_report");
  CHECK(run("crossdataset --spec " + cspec + " --out " + cout_prefix + " --quiet --threads 2")
            .exit_code == 0);
  const std::string csv = slurp(cout_prefix + ".csv");
  CHECK(csv.find("_joint") != std::string::npos);
  CHECK(csv.find("_single") != std::string::npos);

  const std::string tspec = write_file("cli_timing.json", R"({
    "tensor": {"generate": {"kind":"low-rank","shape":[5,5,5],"true_rank":1,"seed":3}},
    "methods": [{"method":"cpd","rank":1,"train":{"max_epochs":200,"max_restarts":1}}],
    "fractions": [0.2],
    "repetitions": 2,
    "seed": 6
  })");
  const std::string tout_prefix = tmp("cli_timing_report");
  CHECK(run("timing --spec " + tspec + " --out " + tout_prefix + " --quiet").exit_code == 0);
  CHECK(slurp(tout_prefix + ".json").find("seconds") != std::string::npos);
}

TEST_CASE("missing input file is an io error with exit 1") {
  RunResult r = run("complete --tensor " + tmp("nope.sptn") + " --out " + tmp("x.sptn"));
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("\"io\"") != std::string::npos);
}
