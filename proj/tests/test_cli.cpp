#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef MSTGD_CLI_PATH
#define MSTGD_CLI_PATH "./mstgd"
#endif

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

int run_cli(const std::string& args, const std::string& stdout_path = "") {
  std::string cmd = std::string(MSTGD_CLI_PATH) + " " + args;
  if (!stdout_path.empty()) cmd += " > " + stdout_path + " 2>/dev/null";
  else cmd += " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("cli: unknown dataset kind exits with the usage code") {
  CHECK(run_cli("estimate --data nope --reps 1 --seed 1") == 2);
}

TEST_CASE("cli: unknown suite exits with the usage code") {
  CHECK(run_cli("verify --suite bogus --seed 1") == 2);
}

TEST_CASE("cli: unknown flag exits with the usage code") {
  CHECK(run_cli("train --nonsense 3") == 2);
}

TEST_CASE("cli: estimate writes csv and reports rank") {
  const auto csv = temp_path("mstgd_cli_est.csv");
  const auto out = temp_path("mstgd_cli_est.out");
  CHECK(run_cli("estimate --data dec_udata --reps 3 --seed 7 --out " + csv, out) == 0);
  const auto body = slurp(csv);
  // header plus 3 reps x 10 rounds x 4 methods
  std::stringstream ss(body);
  std::string line;
  int lines = 0;
  while (std::getline(ss, line)) ++lines;
  CHECK(lines == 1 + 3 * 10 * 4);
  const auto echoed = slurp(out);
  CHECK(echoed.find("\"command\": \"estimate\"") != std::string::npos);
  CHECK(echoed.find("mst") != std::string::npos);
}

TEST_CASE("cli: repeated invocations are byte-identical") {
  const auto csv1 = temp_path("mstgd_cli_det1.csv");
  const auto csv2 = temp_path("mstgd_cli_det2.csv");
  CHECK(run_cli("estimate --data vard_ndata --reps 4 --seed 3 --out " + csv1) == 0);
  CHECK(run_cli("estimate --data vard_ndata --reps 4 --seed 3 --out " + csv2) == 0);
  CHECK(slurp(csv1) == slurp(csv2));

  const auto t1 = temp_path("mstgd_cli_tr1.csv");
  const auto t2 = temp_path("mstgd_cli_tr2.csv");
  const std::string train_args =
      "train --model quadratic --opt mstgd --h 0.5 --batch 8 --iters 40 --seed 5 "
      "--record-every 1 --out ";
  CHECK(run_cli(train_args + t1) == 0);
  CHECK(run_cli(train_args + t2) == 0);
  CHECK(slurp(t1) == slurp(t2));
}

TEST_CASE("cli: fgd training loss is monotone") {
  const auto csv = temp_path("mstgd_cli_fgd.csv");
  CHECK(run_cli("train --model quadratic --opt fgd --h 0.5 --iters 50 --seed 2 "
                "--record-every 1 --out " + csv) == 0);
  std::stringstream ss(slurp(csv));
  std::string line;
  std::getline(ss, line);  // header
  double prev = 1e300;
  int rows = 0;
  while (std::getline(ss, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto c3 = line.find(',', c2 + 1);
    const double loss = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
    CHECK(loss <= prev + 1e-15);
    prev = loss;
    ++rows;
  }
  CHECK(rows == 51);
}

TEST_CASE("cli: zero iterations emit only the initial row") {
  const auto csv = temp_path("mstgd_cli_zero.csv");
  CHECK(run_cli("train --model quadratic --opt sgd --h 0.1 --iters 0 --seed 2 "
                "--out " + csv) == 0);
  std::stringstream ss(slurp(csv));
  std::string line;
  int lines = 0;
  while (std::getline(ss, line)) ++lines;
  CHECK(lines == 2);  // header + initial row
}

TEST_CASE("cli: mlp without data sources is a usage error") {
  CHECK(run_cli("train --model mlp --opt mstgd --iters 1") == 2);
}

TEST_CASE("cli: verify suite writes a json report and exits clean") {
  const auto json_path = temp_path("mstgd_cli_verify.json");
  CHECK(run_cli("verify --suite lemma2 --seed 1 --out " + json_path) == 0);
  const auto body = slurp(json_path);
  CHECK(body.find("\"check\"") != std::string::npos);
  CHECK(body.find("\"violated\"") != std::string::npos);
  // byte-identical on repeat
  const auto json2 = temp_path("mstgd_cli_verify2.json");
  CHECK(run_cli("verify --suite lemma2 --seed 1 --out " + json2) == 0);
  CHECK(slurp(json_path) == slurp(json2));
}
