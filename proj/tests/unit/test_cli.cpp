#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "commands.hpp"
#include "config.hpp"
#include "literal.hpp"
#include "rp2ends/error.hpp"

using namespace rp2ends;
using namespace rp2ends::cli;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::IoError;
}

struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("rp2ends_cli_" + std::to_string(::getpid()) + "_" +
                                       std::to_string(std::rand()));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return dir / name;
  }
};

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(RP2ENDS_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("complex literals") {
    const cplx kI(0, 1);
    CHECK(parse_complex("2") == cplx(2));
    CHECK(parse_complex("-2i") == -2.0 * kI);
    CHECK(parse_complex("i") == kI);
    CHECK(parse_complex("-i") == -kI);
    CHECK(parse_complex("1+i") == cplx(1, 1));
    CHECK(parse_complex("1-1i") == cplx(1, -1));
    CHECK(parse_complex(" -1.5e-3-2.5i ") == cplx(-1.5e-3, -2.5));
    CHECK(parse_complex("+.5") == cplx(0.5));
    CHECK(parse_complex("3E2i") == cplx(0, 300));
    for (const char* bad : {"", "1+", "i1", "2i+1", "1+2+3i", "1 2", "1ii", "e5", "--1", "1e999", "1,2", "j"}) {
      CAPTURE(bad);
      CHECK(code_of([&] { parse_complex(bad); }) == ErrorCode::ParseError);
    }
  }

  TEST_CASE("round trip of formatted literals") {
    for (cplx z : {cplx(0.1, -0.3), cplx(-1e-300, 2.5e10), cplx(0.0, 0.0), cplx(1.0 / 3.0, -2.0 / 7.0)}) {
      CHECK(parse_complex(format_complex(z)) == z);
    }
    CHECK(parse_real(format_real(0.1)) == 0.1);
  }

  TEST_CASE("scalars and lists") {
    CHECK(parse_real("-2.5e1") == -25.0);
    CHECK(code_of([] { parse_real("2i"); }) == ErrorCode::ParseError);
    CHECK(parse_integer("+7") == 7);
    CHECK(code_of([] { parse_integer("7.0"); }) == ErrorCode::ParseError);
    CHECK(parse_bool("yes"));
    CHECK_FALSE(parse_bool("off"));
    CHECK(code_of([] { parse_bool("maybe"); }) == ErrorCode::ParseError);
    CHECK(split_list(" a , b,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(code_of([] { split_list("a,,b"); }) == ErrorCode::ParseError);
  }

  TEST_CASE("config files") {
    std::istringstream in("# comment\n\nresidue = 1-2i  # trailing\nnx=32\nthetas = 0, 1.5\n");
    const Config c = Config::parse(in, "t.cfg");
    CHECK(c.complex("residue", 0.0) == cplx(1, -2));
    CHECK(c.integer("nx", 0) == 32);
    CHECK(c.reals("thetas") == std::vector<double>{0.0, 1.5});
    CHECK(c.real("missing", 4.0) == 4.0);
    CHECK_NOTHROW(c.require_known({"residue", "nx", "thetas"}));
    CHECK(code_of([&] { c.require_known({"residue", "nx"}); }) == ErrorCode::ConfigError);
    CHECK(code_of([&] { c.integer("residue", 0); }) == ErrorCode::ConfigError);

    std::istringstream dup("a = 1\na = 2\n");
    CHECK(code_of([&] { Config::parse(dup); }) == ErrorCode::ConfigError);
    std::istringstream junk("just words\n");
    CHECK(code_of([&] { Config::parse(junk); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { Config::load("/nonexistent/rp2ends.cfg"); }) == ErrorCode::IoError);
  }

  TEST_CASE("exit codes") {
    Scratch s;
    const fs::path log = s.dir / "log.txt";
    CHECK(run("classify 0 2 -2i 1+i", log) == 0);
    CHECK(slurp(log).find("QuasiHyperbolic") != std::string::npos);
    CHECK(run("classify 1+", log) == 2);
    CHECK(run("nosuchcommand", log) == 2);
    CHECK(run("triangle --format xml", log) == 2);
    CHECK(run("triangle --config " + s.write("b.cfg", "bogus = 1\n").string(), log) == 2);
    CHECK(slurp(log).find("bogus") != std::string::npos);
    CHECK(run("wang --config " + (s.dir / "missing.cfg").string(), log) == 2);
    CHECK(run("spectrum --config " + s.write("s.cfg", "lambda = 1, 1, 1\n").string(), log) == 3);
    CHECK(run("--help", log) == 0);
  }

  TEST_CASE("outputs are reproducible") {
    Scratch s;
    const fs::path log = s.dir / "log.txt";
    const fs::path cfg = s.write("h.cfg", "field = model\nresidue = 2\ny = 2\n");
    for (const char* cmd : {"classify 0 2 -2 2i -2i 1+i", "triangle"}) {
      const std::string name(cmd);
      const fs::path a = s.dir / "a";
      const fs::path b = s.dir / "b";
      REQUIRE(run(name + " --out " + a.string(), log) == 0);
      REQUIRE(run(name + " --out " + b.string(), log) == 0);
      for (const auto& e : fs::directory_iterator(a)) {
        CAPTURE(e.path());
        CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
      }
      fs::remove_all(a);
      fs::remove_all(b);
    }
    CHECK(run("holonomy --config " + cfg.string(), log) == 0);
    CHECK(slurp(log).find("eigen") != std::string::npos);
    CHECK(run("classify 2 --format json --out " + (s.dir / "j").string(), log) == 0);
    const std::string json = slurp(s.dir / "j" / "classify.json");
    CHECK(json.find("\"plus_infinity\"") != std::string::npos);
  }

  TEST_CASE("error codes map to exit statuses") {
    CHECK(exit_code_for(Error(ErrorCode::ConfigError, "x")) == 2);
    CHECK(exit_code_for(Error(ErrorCode::ParseError, "x")) == 2);
    CHECK(exit_code_for(Error(ErrorCode::IoError, "x")) == 2);
    CHECK(exit_code_for(Error(ErrorCode::BarrierFailure, "x")) == 3);
    CHECK(exit_code_for(std::runtime_error("x")) == 3);
  }
}
