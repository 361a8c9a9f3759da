#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "lpal/cli.hpp"
#include "lpal/dataset.hpp"
#include "lpal/io.hpp"

using namespace lpal;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = parse_and_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path dir(const std::string& name) {
  auto d = fs::temp_directory_path() / "lpal_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("gen-data is deterministic") {
  const auto d = dir("gen");
  CHECK(cli({"gen-data", "--shape", "two-moons", "--n", "500", "--noise", "0.1", "--seed", "7", "--out",
             (d / "a.csv").string()}).code == 0);
  CHECK(cli({"gen-data", "--shape", "two-moons", "--n", "500", "--noise", "0.1", "--seed", "7", "--out",
             (d / "b.csv").string()}).code == 0);
  CHECK(read_file(d / "a.csv") == read_file(d / "b.csv"));
  const Dataset ds = load_dataset(d / "a.csv", DataFormat::csv);
  std::size_t ones = 0;
  for (int y : ds.evaluation_labels()) ones += y;
  CHECK(ones == 250);

  CHECK(cli({"gen-data", "--shape", "blobs", "--classes", "10", "--n", "1000", "--out", (d / "blobs.f32").string()})
            .code == 0);
  const Dataset bl = load_dataset(d / "blobs.f32", DataFormat::raw_f32);
  std::vector<int> per(10, 0);
  for (int y : bl.evaluation_labels()) per[y]++;
  for (int v : per) CHECK(v == 100);

  CHECK(cli({"gen-data", "--shape", "chain", "--out", (d / "chain.csv").string()}).code == 0);
  CHECK(read_file(d / "chain.edges") == "0 1 1\n1 2 1\n");
  CHECK(cli({"gen-data", "--shape", "blobs", "--classes", "10", "--n", "5", "--out", (d / "x.csv").string()}).code ==
        1);
  CHECK(cli({"gen-data", "--shape", "spiral", "--out", (d / "x.csv").string()}).code == 1);
}

TEST_CASE("error exit codes") {
  CHECK(cli({"run", "--dataset", "moons.csv", "--strategy", "bogus"}).code == 1);
  CHECK(cli({"run", "--no-such-flag"}).code == 1);
  CHECK(cli({}).code == 1);
  CHECK(cli({"run", "--dataset", "/nonexistent/file.csv"}).code == 1);
  const auto help = cli({"run", "--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("0.99") != std::string::npos);
  CHECK(help.out.find("210") != std::string::npos);
}

TEST_CASE("config file precedence and unknown keys") {
  const auto d = dir("config");
  CHECK(cli({"gen-data", "--shape", "two-moons", "--n", "120", "--out", (d / "m.csv").string()}).code == 0);
  write_file_atomic(d / "ok.cfg", "# manifest\nstrategy = random\ncycles = 2\nrepeats = 1\nper_class = 1\nfast = true\n");
  const auto r = cli({"run", "--config", (d / "ok.cfg").string(), "--dataset", (d / "m.csv").string(), "--cycles",
                      "3", "--out", (d / "o").string()});
  CHECK(r.code == 0);
  const auto records = read_file(d / "o" / "records.jsonl");
  CHECK(std::count(records.begin(), records.end(), '\n') == 3);
  CHECK(records.find("\"random\"") != std::string::npos);

  write_file_atomic(d / "bad.cfg", "bogus_key = 1\n");
  CHECK(cli({"run", "--config", (d / "bad.cfg").string(), "--dataset", (d / "m.csv").string()}).code == 1);
  write_file_atomic(d / "garbage.cfg", "cycles\n");
  CHECK(cli({"run", "--config", (d / "garbage.cfg").string(), "--dataset", (d / "m.csv").string()}).code == 1);
}

TEST_CASE("run, propagate, acquire and agree write their outputs") {
  const auto d = dir("smoke");
  const auto data = (d / "moons.csv").string();
  CHECK(cli({"gen-data", "--shape", "two-moons", "--n", "200", "--out", data}).code == 0);
  const std::vector<std::string> common{"--dataset", data, "--per-class", "1", "--fast", "--k-graph", "10"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), common.begin(), common.end());
    return cli(a);
  };
  CHECK(with({"run", "--strategy", "jlp", "--budget", "2", "--cycles", "2", "--repeats", "1", "--semi", "--pre",
              "--out", (d / "run").string()})
            .code == 0);
  CHECK(fs::exists(d / "run" / "records.jsonl"));
  CHECK(fs::exists(d / "run" / "curves.csv"));

  CHECK(cli({"propagate", "--dataset", data, "--per-class", "1", "--k-graph", "10", "--out", (d / "prop").string(),
             "--dump-graph"})
            .code == 0);
  CHECK(fs::exists(d / "prop" / "graph.edges"));
  const auto prop = read_file(d / "prop" / "propagation.csv");
  CHECK(prop.substr(0, prop.find('\n')) == "index,pseudo_label,weight");
  CHECK(std::count(prop.begin(), prop.end(), '\n') == 199);

  CHECK(with({"acquire", "--strategy", "coreset", "--budget", "5", "--out", (d / "acq").string()}).code == 0);
  const auto acq = read_file(d / "acq" / "acquired.csv");
  CHECK(std::count(acq.begin(), acq.end(), '\n') == 6);

  CHECK(with({"agree", "--budget", "4", "--cycles", "1", "--out", (d / "agree").string()}).code == 0);
  const auto agree = read_file(d / "agree" / "agreement.csv");
  CHECK(std::count(agree.begin(), agree.end(), '\n') == 4);
  CHECK(fs::exists(d / "agree" / "scatter.csv"));
}

TEST_CASE("propagate on the chain fixture") {
  const auto d = dir("chain");
  CHECK(cli({"gen-data", "--shape", "chain", "--out", (d / "chain.csv").string()}).code == 0);
  CHECK(cli({"propagate", "--dataset", (d / "chain.csv").string(), "--graph", (d / "chain.edges").string(),
             "--labeled", "0", "--alpha", "0.5", "--out", (d / "o").string()})
            .code == 0);
  CHECK(read_file(d / "o" / "propagation.csv") == "index,pseudo_label,weight\n1,0,1\n2,0,1\n");
}

TEST_CASE("identical argv gives identical records") {
  const auto d = dir("determinism");
  const auto data = (d / "moons.csv").string();
  CHECK(cli({"gen-data", "--n", "150", "--out", data}).code == 0);
  for (const char* o : {"a", "b"})
    CHECK(cli({"run", "--dataset", data, "--strategy", "uncertainty,coreset,random", "--per-class", "1", "--budget",
               "2", "--cycles", "3", "--repeats", "2", "--fast", "--seed", "5", "--out", (d / o).string()})
              .code == 0);
  CHECK(read_file(d / "a" / "records.jsonl") == read_file(d / "b" / "records.jsonl"));
}
