#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nmc/cli.hpp"
#include "nmc/metrics.hpp"
#include "nmc/policy.hpp"
#include "nmc/records.hpp"

using namespace nmc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("nmc_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  f << content;
}

}  // namespace

TEST_CASE("key-value config: sections, comments, types, errors") {
  KeyValueConfig cfg = KeyValueConfig::parse(
      "top = 1\n"
      "[schedule]\n"
      "beta_i = 2.5  # inline comment\n"
      "total_sweeps = 1000\n"
      "\n"
      "[run]\n"
      "algo = nmc\n"
      "flag = true\n");
  CHECK(cfg.get_int("top", 0) == 1);
  CHECK(cfg.get_double("schedule.beta_i", 0) == 2.5);
  CHECK(cfg.get_int("schedule.total_sweeps", 0) == 1000);
  CHECK(cfg.get_string("run.algo", "") == "nmc");
  CHECK(cfg.get_bool("run.flag", false));
  CHECK(cfg.get_double("missing", 9.5) == 9.5);
  CHECK_THROWS(KeyValueConfig::parse("[broken\n"));
  CHECK_THROWS(KeyValueConfig::parse("novalue\n"));
  CHECK_THROWS(cfg.get_int("run.algo", 0));
}

TEST_CASE("solve options: preset < config < flags") {
  KeyValueConfig file = KeyValueConfig::parse(
      "[schedule]\nbeta_i = 2.5\n[run]\nreplicas = 32\n");
  KeyValueConfig flags;
  flags.set("run.replicas", "8");
  SolveOptions opt = make_solve_options("sf250", file, flags);
  CHECK(opt.schedule.beta_i == 2.5);          // config beats preset (2.0)
  CHECK(opt.n_replicas == 8);                 // flag beats config (32)
  CHECK(opt.schedule.total_sweeps == 30000);  // preset survives elsewhere
  CHECK(opt.nmc.r == 4.5);
  CHECK(opt.nmc.n_steps == 53);
  CHECK(opt.success_threshold == 0);
  REQUIRE(opt.generate.has_value());
  CHECK(opt.generate->spec.n == 250);
  CHECK(opt.generate->spec.m == 2300);
  CHECK_THROWS_AS(make_solve_options("nope", {}, {}), ConfigError);
}

TEST_CASE("built-in presets carry the benchmark defaults") {
  const SolvePreset* uf500 = find_preset("uf500");
  REQUIRE(uf500);
  CHECK(uf500->schedule.beta_i == 3.0);
  CHECK(uf500->schedule.beta_f == 8.0);
  CHECK(uf500->schedule.total_sweeps == 50000);
  CHECK(uf500->nmc.beta_nmc == 5.0);
  CHECK(uf500->nmc.n_steps == 50);
  CHECK(uf500->nmc.n_sw == 200);
  CHECK(uf500->nmc.r == 3.0);
  CHECK(uf500->gen.m == 4942);
  CHECK(uf500->success_threshold == 1);
  for (const char* name : {"uf1000", "uf2000", "sf250", "sf100", "sf64"})
    CHECK(find_preset(name) != nullptr);
  // Table-style train presets load without overrides
  const TrainPreset* sf = find_train_preset("scale-free");
  REQUIRE(sf);
  CHECK(sf->ppo.gamma == 0.75);
  CHECK(sf->ppo.lambda_gae == 0.95);
  CHECK(sf->ppo.c_vf == 0.25);
  CHECK(sf->ppo.c_ent == 1e-3);
  CHECK(sf->ppo.eps_clip == 0.25);
  CHECK(sf->ppo.epochs == 5);
  CHECK(sf->ppo.minibatch_sequences == 64);
  CHECK(sf->ppo.nmc.n_steps == 54);
  CHECK(sf->ppo.n_steps_per_update == 18);
  CHECK(sf->ppo.n_eps == 5);
  CHECK_NOTHROW(sf->ppo.validate());
  const TrainPreset* uf = find_train_preset("uniform");
  REQUIRE(uf);
  CHECK(uf->ppo.nmc.n_steps == 51);
  CHECK(uf->ppo.n_steps_per_update == 17);
  CHECK_NOTHROW(uf->ppo.validate());
  CHECK_NOTHROW(find_train_preset("uniform-finetune")->ppo.validate());
}

TEST_CASE("records: round trip with metadata, schema version enforced") {
  std::vector<RunRecord> records;
  RunRecord r;
  r.instance = "foo.cnf";
  r.replica = 3;
  r.min_energy = 2;
  r.first_success_mcs = 777;
  r.total_mcs = 1000;
  r.best_assignment = {1, 0, 1};
  records.push_back(r);
  r.replica = 4;
  r.first_success_mcs.reset();
  records.push_back(r);

  std::stringstream buf;
  write_records(buf, records, {{"algo", "sa"}});
  Metadata meta;
  std::vector<RunRecord> back = read_records(buf, &meta);
  REQUIRE(back.size() == 2);
  CHECK(meta.at("algo") == "sa");
  CHECK(back[0].first_success_mcs == 777);
  CHECK(!back[1].first_success_mcs.has_value());
  CHECK(back[0].best_assignment == Assignment{1, 0, 1});
  CHECK(back[0].min_energy == 2.0);

  std::stringstream bad("#nmc-records v999\nheader\n");
  CHECK_THROWS_AS(read_records(bad), std::runtime_error);
}

TEST_CASE("cmd_gen: manifest plus deterministic replay") {
  TempDir dir("gen");
  GenOptions opt;
  opt.spec.family = ClauseFamily::kScaleFree;
  opt.spec.n = 40;
  opt.spec.m = 160;
  opt.spec.b = 3.0;
  opt.spec.seed = 7;
  opt.count = 3;
  opt.out_dir = dir.str();
  opt.prefix = "sf";
  CHECK(cmd_gen(opt) == kExitOk);
  CHECK(fs::exists(dir.file("sf_000.cnf")));
  CHECK(fs::exists(dir.file("sf_002.cnf")));
  CHECK(fs::exists(dir.file("sf_manifest.json")));
  std::string first = slurp(dir.file("sf_001.cnf"));
  std::string manifest = slurp(dir.file("sf_manifest.json"));

  TempDir dir2("gen2");
  opt.out_dir = dir2.str();
  CHECK(cmd_gen(opt) == kExitOk);
  CHECK(slurp(dir2.file("sf_001.cnf")) == first);  // bit-identical replay
  CHECK(slurp(dir2.file("sf_manifest.json")) == manifest);

  // count 0: manifest only
  TempDir dir3("gen3");
  opt.out_dir = dir3.str();
  opt.count = 0;
  CHECK(cmd_gen(opt) == kExitOk);
  CHECK(fs::exists(dir3.file("sf_manifest.json")));
  CHECK(!fs::exists(dir3.file("sf_000.cnf")));
}

TEST_CASE("cmd_solve: sa quickly satisfies a single-clause instance") {
  TempDir dir("solve_sa");
  spit(dir.file("one.cnf"), "p cnf 4 1\n1 2 3 4 0\n");
  SolveOptions opt;
  opt.instance_files = {dir.file("one.cnf")};
  opt.algo = "sa";
  opt.schedule = Schedule{1.0, 4.0, 100};
  opt.success_threshold = 0;
  opt.n_replicas = 8;
  opt.seed = 3;
  opt.out_dir = dir.str();
  CHECK(cmd_solve(opt) == kExitOk);
  std::ifstream in(dir.file("records.csv"));
  Metadata meta;
  std::vector<RunRecord> records = read_records(in, &meta);
  REQUIRE(records.size() == 8);
  CHECK(meta.at("algo") == "sa");
  CHECK(pos_at(records, 100) == 1.0);  // POS = 1
  for (const RunRecord& r : records) {
    CHECK(*r.first_success_mcs <= 2);
    CHECK(r.min_energy == 0.0);
  }
}

TEST_CASE("cmd_solve: huge-r nmc reproduces sa best states on a flat schedule") {
  TempDir dir("solve_eq");
  GenOptions gen;
  gen.spec.n = 24;
  gen.spec.m = 100;
  gen.spec.seed = 5;
  gen.out_dir = dir.str();
  gen.prefix = "inst";
  cmd_gen(gen);

  SolveOptions nmc_opt;
  nmc_opt.instance_files = {dir.file("inst_000.cnf")};
  nmc_opt.algo = "nmc";
  nmc_opt.schedule = Schedule{2.0, 2.0, 220};  // flat temperature
  nmc_opt.nmc.beta_nmc = 2.0;
  nmc_opt.nmc.n_steps = 4;
  nmc_opt.nmc.n_cycles = 1;
  nmc_opt.nmc.n_sw = 5;
  nmc_opt.nmc.r = 1e18;  // masks are always empty
  nmc_opt.success_threshold = -1;
  nmc_opt.n_replicas = 4;
  nmc_opt.seed = 11;
  nmc_opt.out_dir = (dir.path / "nmc").string();
  CHECK(cmd_solve(nmc_opt) == kExitOk);

  // matched SA run: drop the 4 no-op backbone stages from the budget
  SolveOptions sa_opt = nmc_opt;
  sa_opt.algo = "sa";
  sa_opt.schedule.total_sweeps = 216;
  sa_opt.out_dir = (dir.path / "sa").string();
  CHECK(cmd_solve(sa_opt) == kExitOk);

  std::ifstream in_nmc(nmc_opt.out_dir + "/records.csv");
  std::ifstream in_sa(sa_opt.out_dir + "/records.csv");
  auto rec_nmc = read_records(in_nmc);
  auto rec_sa = read_records(in_sa);
  REQUIRE(rec_nmc.size() == rec_sa.size());
  for (size_t i = 0; i < rec_nmc.size(); ++i) {
    CHECK(rec_nmc[i].min_energy == rec_sa[i].min_energy);
    CHECK(rec_nmc[i].best_assignment == rec_sa[i].best_assignment);
  }
}

TEST_CASE("cmd_solve: replay produces byte-identical streams") {
  TempDir a("replay_a"), b("replay_b");
  SolveOptions opt;
  GenOptions gen;
  gen.spec.n = 30;
  gen.spec.m = 120;
  gen.spec.seed = 9;
  gen.count = 2;
  gen.prefix = "g";
  opt.generate = gen;
  opt.algo = "nmc";
  opt.schedule = Schedule{2.0, 8.0, 300};
  opt.nmc.beta_nmc = 5.0;
  opt.nmc.n_steps = 5;
  opt.nmc.n_cycles = 3;
  opt.nmc.n_sw = 10;
  opt.nmc.r = 2.0;
  opt.n_replicas = 4;
  opt.seed = 21;
  opt.out_dir = a.str();
  CHECK(cmd_solve(opt) == kExitOk);
  opt.out_dir = b.str();
  opt.threads = 1;  // thread count must not affect the stream
  CHECK(cmd_solve(opt) == kExitOk);
  CHECK(slurp(a.file("records.csv")) == slurp(b.file("records.csv")));
  CHECK(slurp(a.file("jumpstats.csv")) == slurp(b.file("jumpstats.csv")));
}

TEST_CASE("cmd_train: zero repetitions emit the init checkpoint") {
  TempDir dir("train0");
  TrainOptions opt;
  GenOptions gen;
  gen.spec.n = 16;
  gen.spec.m = 60;
  gen.spec.seed = 2;
  gen.count = 1;
  gen.prefix = "t";
  opt.generate = gen;
  opt.ppo.schedule = Schedule{2.0, 8.0, 100};
  opt.ppo.nmc.beta_nmc = 5.0;
  opt.ppo.nmc.n_steps = 4;
  opt.ppo.nmc.n_cycles = 2;
  opt.ppo.nmc.n_sw = 5;
  opt.ppo.n_replicas = 4;
  opt.ppo.minibatch_sequences = 2;
  opt.ppo.n_steps_per_update = 2;
  opt.ppo.n_eps = 1;
  opt.ppo.n_train_reps = 0;
  opt.seed = 77;
  opt.out_dir = dir.str();
  CHECK(cmd_train(opt) == kExitOk);
  PolicyParams from_disk = load_params(dir.file("policy.ckpt"));
  PolicyParams expected = init_params(77);
  CHECK(from_disk.dot(expected) == doctest::Approx(expected.squared_norm()));
  CHECK(fs::exists(dir.file("trainlog.csv")));
}

TEST_CASE("cmd_eval: tts points match the closed form, diversity conventions") {
  TempDir dir("eval");
  // two instances, four replicas each, hand-set success sweeps
  std::vector<RunRecord> records;
  auto mk = [&](const std::string& inst, int rep, double emin,
                std::optional<uint64_t> fs) {
    RunRecord r;
    r.instance = inst;
    r.replica = rep;
    r.min_energy = emin;
    r.first_success_mcs = fs;
    r.total_mcs = 1000;
    r.best_assignment = Assignment(6, rep % 2);
    return r;
  };
  records.push_back(mk("a", 0, 0, 100));
  records.push_back(mk("a", 1, 0, 600));
  records.push_back(mk("a", 2, 1, std::nullopt));
  records.push_back(mk("a", 3, 2, std::nullopt));
  records.push_back(mk("b", 0, 3, std::nullopt));
  records.push_back(mk("b", 1, 4, std::nullopt));
  records.push_back(mk("b", 2, 5, std::nullopt));
  records.push_back(mk("b", 3, 2, std::nullopt));
  {
    std::ofstream out(dir.file("records.csv"));
    write_records(out, records, {});
  }
  EvalOptions opt;
  opt.records_files = {dir.file("records.csv")};
  opt.metric = "tts";
  opt.budgets = {500, 1000};
  opt.n_boot = 50;
  opt.seed = 2;
  opt.out_dir = dir.str();
  CHECK(cmd_eval(opt) == kExitOk);

  std::string points = slurp(dir.file("tts_point.csv"));
  // instance a, budget 500: pos = 1/4, tts = 500 ln(0.01)/ln(0.75)
  double expect = 500.0 * std::log(0.01) / std::log(0.75);
  std::ostringstream row;
  row << "a,500," << format_double(0.25) << ',' << format_double(expect);
  CHECK(points.find(row.str()) != std::string::npos);
  // instance b never succeeds: tts column stays empty
  CHECK(points.find("b,500,0,\n") != std::string::npos);
  std::string boot = slurp(dir.file("tts.csv"));
  CHECK(boot.find("metric,budget,percentile,mean,stddev") == 0);
  CHECK(boot.find("tts_min") != std::string::npos);

  // diversity: instance b has no solutions at threshold 0
  opt.metric = "diversity";
  opt.success_threshold = 0;
  CHECK(cmd_eval(opt) == kExitOk);
  std::string summary = slurp(dir.file("diversity_summary.csv"));
  CHECK(summary.find("b,0,0,1") != std::string::npos);  // D = 0, no solutions
  // instance a found two distinct solutions (alternating assignments)
  CHECK(summary.find("a,") != std::string::npos);

  opt.metric = "residual";
  CHECK(cmd_eval(opt) == kExitOk);
  CHECK(slurp(dir.file("residual.csv")).find("residual,") != std::string::npos);

  opt.metric = "bogus";
  CHECK_THROWS_AS(cmd_eval(opt), ConfigError);
}

TEST_CASE("cmd_trace: emits window diagnostics rows") {
  TempDir dir("trace");
  GenOptions gen;
  gen.spec.n = 20;
  gen.spec.m = 80;
  gen.spec.seed = 4;
  gen.out_dir = dir.str();
  gen.prefix = "x";
  cmd_gen(gen);
  TraceOptions opt;
  opt.instance_files = {dir.file("x_000.cnf")};
  opt.algo = "nmc";
  opt.schedule = Schedule{2.0, 8.0, 200};
  opt.nmc.beta_nmc = 5.0;
  opt.nmc.n_steps = 4;
  opt.nmc.n_cycles = 2;
  opt.nmc.n_sw = 10;
  opt.nmc.r = 2.0;
  opt.window = 50;
  opt.n_replicas = 2;
  opt.seed = 6;
  opt.out_dir = dir.str();
  CHECK(cmd_trace(opt) == kExitOk);
  std::string trace = slurp(dir.file("trace.csv"));
  CHECK(trace.find("#nmc-trace v1") == 0);
  // 200 MCS in windows of 50, two replicas: 2 * 5 rows (window of mcs=0..)
  int rows = 0;
  for (char c : trace) rows += c == '\n';
  CHECK(rows == 2 + 2 * 5);
}
