#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <vector>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int exit_code = -1;
  std::string out;
};

Outcome run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + CSROBUST_CLI + "\" " + args + " 2>/dev/null";
  Outcome o;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) o.out.append(buf, n);
  const int status = pclose(p);
  o.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("csrobust_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Every file under dir keyed by its relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

const char* kMethods =
    R"([{"id":"zf","family":"zero_filled"},)"
    R"({"id":"l1","family":"l1","lambda":1e-3,"max_iters":30,"transform":{"kind":"haar","levels":2}},)"
    R"({"id":"dec","family":"decoder","layers":3,"channels":4,"iterations":10},)"
    R"({"id":"cnn","family":"cnn","depth":2,"width":4,"epochs":2}])";

// Tiny configs for every command, all reading data/ relative to the config directory.
std::map<std::string, std::string> configs() {
  const std::string m = kMethods;
  const std::string mani = R"("manifest":"data/a/manifest.json","train_manifest":"data/a/manifest.json")";
  return {
      {"recon", R"({"manifest":"data/a/manifest.json","image_id":"a-0001","methods":)" + m +
                    R"(,"train_manifest":"data/a/manifest.json"})"},
      {"metrics", "{" + mani + R"(,"methods":)" + m + "}"},
      {"attack", "{" + mani + R"(,"split":"all","max_images":2,"epsilons":[0,0.05],"methods":)" + m +
                     R"(,"pgd":{"iterations":3},"joint":{"outer_iterations":3}})"},
      {"transfer", "{" + mani + R"(,"split":"all","max_images":2,"epsilons":[0.05],"methods":)" + m +
                       R"(,"pgd":{"iterations":3},"joint":{"outer_iterations":3}})"},
      {"shift",
       R"({"domain_a":"data/a/manifest.json","domain_b":"data/b/manifest.json","families":[)"
       R"({"family":"l1","variants":[{"id":"l1a","family":"l1","lambda":1e-3,"max_iters":20,"transform":{"kind":"haar","levels":2}},)"
       R"({"id":"l1b","family":"l1","lambda":1e-2,"max_iters":20,"transform":{"kind":"haar","levels":2}}]},)"
       R"({"family":"zero_filled","variants":[{"id":"zf","family":"zero_filled"}]}]})"},
      {"filter", "{" + mani + R"(,"fraction":0.25,"filter_method":{"id":"f","family":"zero_filled"},"methods":)" + m +
                     "}"},
      {"spectrum", R"({"manifest":"data/a/manifest.json","subset_manifest":"data/b/manifest.json"})"},
      {"probe", "{" + mani + R"(,"methods":)" + m + R"(,"probe":{"window":3,"stride":5}})"},
      {"sweep", "{" + mani + R"(,"split":"all","max_images":2,"n_locations":2,"methods":)" + m + "}"},
  };
}

}  // namespace

TEST_CASE("errors print a JSON record and map to exit codes") {
  const fs::path dir = scratch("errors");
  Outcome o = run_cli("gen --config " + (dir / "absent.json").string());
  CHECK(o.exit_code == 3);
  json j = json::parse(o.out);
  CHECK(j["status"] == "error");
  CHECK(j["code"] == "missing-input");

  write(dir / "bad.json", "{\"size\":");
  o = run_cli("gen --config " + (dir / "bad.json").string());
  CHECK(o.exit_code == 2);
  CHECK(json::parse(o.out)["code"] == "schema");

  write(dir / "typo.json", R"({"sise":16,"domains":[]})");
  CHECK(run_cli("gen --config " + (dir / "typo.json").string()).exit_code == 2);
  CHECK(run_cli("gen").exit_code == 2);
  CHECK(run_cli("frobnicate --config x").exit_code == 2);
  CHECK(run_cli("gen --config x --jobs 0").exit_code == 2);
  CHECK(run_cli("--version").exit_code == 0);

  write(dir / "noisy.json",
        R"({"size":16,"seed":1,"domains":[{"name":"n","family":"ellipses","count":1}]})");
  REQUIRE(run_cli("gen --config " + (dir / "noisy.json").string() + " --out " + (dir / "d").string()).exit_code ==
          0);
  write(dir / "cnn.json", R"({"manifest":"d/n/manifest.json","methods":[{"id":"c","family":"cnn","model":"nope.cnw"}]})");
  CHECK(run_cli("metrics --config " + (dir / "cnn.json").string()).exit_code == 3);
}

TEST_CASE("every command is byte-identical across runs and job counts") {
  const fs::path dir = scratch("determinism");
  write(dir / "gen.json",
        R"({"size":16,"n_coils":2,"seed":7,"domains":[)"
        R"({"name":"a","family":"ellipses","count":8},)"
        R"({"name":"b","families":["textured","smooth"],"count":8,"snr_db":30}]})");
  for (const auto& [cmd, text] : configs()) write(dir / (cmd + ".json"), text);

  std::map<std::string, std::string> first;
  int round = 0;
  for (int jobs : {1, 3, 1}) {
    const fs::path data = dir / "data";
    fs::remove_all(data);
    Outcome o = run_cli("gen --config " + (dir / "gen.json").string() + " --out " + data.string() +
                        " --jobs " + std::to_string(jobs));
    REQUIRE(o.exit_code == 0);
    const fs::path out = dir / ("out" + std::to_string(round));
    for (const auto& [cmd, text] : configs()) {
      INFO(cmd);
      o = run_cli(cmd + " --config " + (dir / (cmd + ".json")).string() + " --out " + (out / cmd).string() +
                  " --jobs " + std::to_string(jobs));
      REQUIRE(o.exit_code == 0);
      const json j = json::parse(o.out);
      CHECK(j["status"] == "ok");
      CHECK(j["command"] == cmd);
      CHECK(!j["artifacts"].empty());
    }
    auto snap = snapshot(out);
    for (const auto& [k, v] : snapshot(data)) snap["data/" + k] = v;
    if (round == 0) {
      first = snap;
      CHECK(first.size() > 20);
    } else {
      INFO("jobs=" << jobs);
      REQUIRE(snap.size() == first.size());
      for (const auto& [k, v] : first) {
        INFO(k);
        CHECK(snap.at(k) == v);
      }
    }
    ++round;
  }
}

namespace {

// Rows of a CSV body keyed by their first n columns joined with commas.
std::map<std::string, std::vector<std::string>> csv_rows(const std::string& text, int key_cols) {
  std::map<std::string, std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    std::string key;
    for (int i = 0; i < key_cols; ++i) key += (i ? "," : "") + cells[i];
    out[key] = cells;
  }
  return out;
}

}  // namespace

TEST_CASE("pipeline: full sampling inverts exactly and the zero-strength attack matches clean scores") {
  const fs::path dir = scratch("pipeline");
  write(dir / "gen.json",
        R"({"size":16,"n_coils":3,"seed":9,"domains":[{"name":"a","family":"ellipses","count":6}]})");
  REQUIRE(run_cli("gen --config " + (dir / "gen.json").string() + " --out " + (dir / "data").string()).exit_code == 0);

  write(dir / "recon.json",
        R"({"manifest":"data/a/manifest.json","image_id":"a-0002","mask":{"acceleration":1},)"
        R"("metrics":["nmse"],"methods":[{"id":"zf","family":"zero_filled"}]})");
  REQUIRE(run_cli("recon --config " + (dir / "recon.json").string() + " --out " + (dir / "recon").string()).exit_code ==
          0);
  const auto recon = csv_rows(slurp(dir / "recon" / "metrics.csv"), 4);
  REQUIRE(recon.count("zf,a,a-0002,nmse") == 1);
  CHECK(std::stod(recon.at("zf,a,a-0002,nmse")[4]) <= 1e-10);

  const std::string methods =
      R"("methods":[{"id":"zf","family":"zero_filled"},)"
      R"({"id":"l1","family":"l1","lambda":1e-3,"max_iters":40,"transform":{"kind":"haar","levels":2}}])";
  write(dir / "metrics.json", R"({"manifest":"data/a/manifest.json","metrics":["psnr"],)" + methods + "}");
  write(dir / "attack.json", R"({"manifest":"data/a/manifest.json","split":"all","epsilons":[0,0.05],)" + methods +
                                 R"(,"joint":{"outer_iterations":5}})");
  REQUIRE(run_cli("metrics --config " + (dir / "metrics.json").string() + " --out " + (dir / "m").string()).exit_code ==
          0);
  REQUIRE(run_cli("attack --config " + (dir / "attack.json").string() + " --out " + (dir / "at").string()).exit_code ==
          0);
  std::map<std::string, std::vector<double>> clean;
  for (const auto& [key, cells] : csv_rows(slurp(dir / "m" / "metrics.csv"), 4)) clean[cells[0]].push_back(std::stod(cells[4]));
  const auto attack = csv_rows(slurp(dir / "at" / "attack.csv"), 3);
  for (const auto& [method, values] : clean) {
    INFO(method);
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    const auto it = attack.find(method + ",0,adversarial");
    REQUIRE(it != attack.end());
    CHECK(std::abs(std::stod(it->second[3]) - mean) <= 1e-9 * mean);
    CHECK(std::stoi(it->second[6]) == static_cast<int>(values.size()));
  }
}
