#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path data_dir = fs::path(SRCID_SOURCE_DIR) / "tests" / "data";

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SRCID_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int pipeline(const fs::path& out) {
  const std::string common = "-c \"" + (data_dir / "smoke_pipeline.json").string() + "\" -o \"" + out.string() + "\"";
  for (const char* cmd : {"synth", "beamform", "identify", "evaluate"})
    if (const int code = run_cli(std::string(cmd) + " " + common)) return code;
  return 0;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag) {
    path = fs::temp_directory_path() / (std::string("srcid_cli_") + tag);
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("pipeline runs and reruns byte-identically") {
  TempDir a("a"), b("b");
  REQUIRE(pipeline(a.path) == 0);
  REQUIRE(pipeline(b.path) == 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a.path)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(e.path(), a.path);
    CHECK_MESSAGE(read_file(e.path()) == read_file(b.path / rel), rel.string());
  }
  CHECK(files >= 16);
}

TEST_CASE("exit codes") {
  TempDir tmp("codes");
  CHECK(run_cli("identify --no-such-flag") == 2);
  CHECK(run_cli("identify --method kmeans") == 2);
  CHECK(run_cli("identify -c /nonexistent/config.json") == 2);

  // identification without beamformed data
  CHECK(run_cli("identify -o \"" + (tmp.path / "empty").string() + "\"") == 3);

  REQUIRE(pipeline(tmp.path / "run") == 0);
  const fs::path bad = tmp.path / "bad.json";
  std::ofstream(bad) << R"({"sind": {"t_sigma_level": 9}})";
  CHECK(run_cli("identify -c \"" + bad.string() + "\" -o \"" + (tmp.path / "run").string() + "\"") == 2);
  CHECK(run_cli("identify --t 1 -o \"" + (tmp.path / "run").string() + "\"") == 2);

  // a damaged parts file
  std::ofstream(tmp.path / "run" / "parts.csv", std::ios::app) << "0,abc,0,1024,0,0,1\n";
  CHECK(run_cli("identify -c \"" + (data_dir / "smoke_pipeline.json").string() + "\" -o \"" +
                (tmp.path / "run").string() + "\"") == 3);
}
