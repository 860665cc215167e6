#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "kmf/experiments.hpp"
#include "kmf/io.hpp"

using namespace kmf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  auto d = fs::temp_directory_path() / ("kmf_test_" + tag);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("config parsing") {
  auto cfg = Config::parse_string(
      "[experiment]\nname = verify-mto\n\n[fields]\ncount = 7\nseed = 5\n"
      "# comment\n[solver]\nk_list = 2, 4, 8\n");
  REQUIRE(cfg.get_string("experiment.name") == "verify-mto");
  REQUIRE(cfg.get_int("fields.count") == 7);
  REQUIRE(cfg.get_list("solver.k_list") == std::vector<double>{2.0, 4.0, 8.0});
  REQUIRE(cfg.get_double("fields.missing", 1.5) == 1.5);
  REQUIRE_THROWS_AS(cfg.get_string("fields.missing"), ConfigError);
  REQUIRE_THROWS_AS(Config::parse_string("key_without_section = 1\n"), ConfigError);
  // echo round-trips
  auto cfg2 = Config::parse_string(cfg.echo());
  REQUIRE(cfg2.echo() == cfg.echo());
}

TEST_CASE("experiment registry") {
  const auto& table = experiment_table();
  REQUIRE(table.size() == 10);
  for (size_t i = 1; i < table.size(); ++i) REQUIRE(table[i - 1].name < table[i].name);
  bool has_fang = false;
  for (const auto& e : table) has_fang |= e.name == "verify-fang";
  REQUIRE(has_fang);
  const std::string listing = list_experiments_text();
  REQUIRE(listing.find("verify-fang") != std::string::npos);
}

TEST_CASE("unknown experiment fails without artifacts") {
  auto cfg = Config::parse_string("[experiment]\nname = no-such-thing\n");
  RunOptions opts;
  opts.output_dir = temp_dir("unknown").string();
  std::string msg;
  REQUIRE(run_experiment(cfg, opts, &msg) == 2);
  REQUIRE(msg.find("unknown experiment") != std::string::npos);
  REQUIRE(!fs::exists(opts.output_dir));
}

TEST_CASE("runs are deterministic and manifest-complete") {
  auto cfg = Config::parse_string(
      "[experiment]\nname = verify-mto\n[surface]\nkind = sphere\nn_theta = 16\nn_phi = 32\n"
      "[fields]\ncount = 4\nseed = 9\nmoebius_count = 2\n");
  RunOptions opts;
  auto d1 = temp_dir("det1"), d2 = temp_dir("det2");
  opts.output_dir = d1.string();
  REQUIRE(run_experiment(cfg, opts) == 0);
  opts.output_dir = d2.string();
  REQUIRE(run_experiment(cfg, opts) == 0);
  REQUIRE(slurp(d1 / "margins.csv") == slurp(d2 / "margins.csv"));
  REQUIRE(slurp(d1 / "manifest.txt") == slurp(d2 / "manifest.txt"));
  // manifest embeds a re-parsable config echo
  const std::string man = slurp(d1 / "manifest.txt");
  const auto at = man.find("config:\n");
  REQUIRE(at != std::string::npos);
  auto cfg2 = Config::parse_string(man.substr(at + 8));
  REQUIRE(cfg2.get_string("experiment.name") == "verify-mto");
  REQUIRE(fs::exists(d1 / "margin_vs_case.dat"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("seed and threads options") {
  auto cfg = Config::parse_string(
      "[experiment]\nname = verify-mto\n[surface]\nkind = sphere\nn_theta = 16\nn_phi = 32\n"
      "[fields]\ncount = 6\nseed = 9\nmoebius_count = 1\n");
  RunOptions a, b, c;
  auto d1 = temp_dir("seed1"), d2 = temp_dir("seed2"), d3 = temp_dir("thr");
  a.output_dir = d1.string();
  b.output_dir = d2.string();
  b.seed_override = 77;
  c.output_dir = d3.string();
  c.threads = 4;
  REQUIRE(run_experiment(cfg, a) == 0);
  REQUIRE(run_experiment(cfg, b) == 0);
  REQUIRE(run_experiment(cfg, c) == 0);
  REQUIRE(slurp(d1 / "margins.csv") != slurp(d2 / "margins.csv"));
  // row-level seeding makes thread count irrelevant to results
  REQUIRE(slurp(d1 / "margins.csv") == slurp(d3 / "margins.csv"));
  fs::remove_all(d1);
  fs::remove_all(d2);
  fs::remove_all(d3);
}

TEST_CASE("field serialization round trips") {
  auto s = build_torus({0.25, 1.2}, 16);
  Rng rng(77);
  Eigen::VectorXd v(s->num_nodes());
  for (int i = 0; i < s->num_nodes(); ++i) v[i] = rng.normal();
  auto dir = temp_dir("io");
  fs::create_directories(dir);

  save_field_binary(dir / "f.bin", s, v);
  BinaryFieldHeader hdr;
  auto w = load_field_binary(dir / "f.bin", &hdr);
  REQUIRE(w.size() == v.size());
  REQUIRE((w - v).cwiseAbs().maxCoeff() == 0.0);  // bit-exact
  REQUIRE(hdr.kind == SurfaceKind::torus);
  REQUIRE(hdr.dim0 == 16);
  REQUIRE(hdr.tau == std::complex<double>(0.25, 1.2));

  save_field_text(dir / "f.txt", v);
  auto t = load_field_text(dir / "f.txt");
  REQUIRE((t - v).cwiseAbs().maxCoeff() < 1e-15);
  fs::remove_all(dir);
}
