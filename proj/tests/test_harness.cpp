#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "trajcurr/harness.hpp"

using namespace trajcurr;

namespace {

harness::ExperimentConfig tiny_config(harness::Variant variant) {
  harness::ExperimentConfig config;
  config.variant = variant;
  config.context_dim = variant == harness::Variant::CurrotL ? 2 : 51;
  config.particles = 8;
  config.candidates_per_particle = 8;
  config.iterations = 4;
  config.seed = 3;
  return config;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("variant names round trip") {
  for (auto v : {harness::Variant::Currot, harness::Variant::CurrotA,
                 harness::Variant::CurrotAO, harness::Variant::CurrotL,
                 harness::Variant::NoCurriculum})
    CHECK(harness::variant_from_string(harness::to_string(v)) == v);
  CHECK_THROWS_AS(harness::variant_from_string("curr0t"), std::invalid_argument);
}

TEST_CASE("config validation") {
  SUBCASE("defaults are valid") {
    harness::ExperimentConfig config;
    config.validate();
  }

  SUBCASE("currot_l must run in the 2-D space") {
    harness::ExperimentConfig config;
    config.variant = harness::Variant::CurrotL;
    config.context_dim = 51;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  }

  SUBCASE("high-dimensional variants reject dim 2") {
    harness::ExperimentConfig config;
    config.variant = harness::Variant::CurrotAO;
    config.context_dim = 2;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  }

  SUBCASE("dim must be divisible by three") {
    harness::ExperimentConfig config;
    config.context_dim = 52;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  }

  SUBCASE("derived settings must agree with the variant") {
    KeyValueConfig kv;
    kv.set("variant", "currot");
    kv.set("metric", "mahalanobis");
    CHECK_THROWS_AS(harness::ExperimentConfig::from_config(kv), std::invalid_argument);

    KeyValueConfig kv2;
    kv2.set("variant", "currot_ao");
    kv2.set("sampler", "half_ball");
    CHECK_THROWS_AS(harness::ExperimentConfig::from_config(kv2), std::invalid_argument);

    KeyValueConfig ok;
    ok.set("variant", "currot_ao");
    ok.set("sampler", "cone");
    ok.set("metric", "mahalanobis");
    CHECK(harness::ExperimentConfig::from_config(ok).variant == harness::Variant::CurrotAO);
  }

  SUBCASE("config text round trip") {
    auto config = tiny_config(harness::Variant::CurrotA);
    auto back = harness::ExperimentConfig::from_config(config.to_config());
    CHECK(back.variant == config.variant);
    CHECK(back.context_dim == config.context_dim);
    CHECK(back.particles == config.particles);
    CHECK(back.iterations == config.iterations);
    CHECK(back.seed == config.seed);
  }

  SUBCASE("lowdim-2 alias parses") {
    KeyValueConfig kv;
    kv.set("variant", "currot_l");
    kv.set("context_dim", "lowdim-2");
    CHECK(harness::ExperimentConfig::from_config(kv).context_dim == 2);
  }
}

TEST_CASE("tiny runs are reproducible byte for byte") {
  for (auto variant : {harness::Variant::CurrotAO, harness::Variant::Currot,
                       harness::Variant::CurrotL}) {
    auto config = tiny_config(variant);
    auto first = harness::run_experiment(config);
    auto second = harness::run_experiment(config);
    CHECK(harness::run_csv(first) == harness::run_csv(second));
    REQUIRE(first.final_particles.contexts.size() == second.final_particles.contexts.size());
    CHECK(std::memcmp(first.final_particles.contexts.data(),
                      second.final_particles.contexts.data(),
                      sizeof(double) * first.final_particles.contexts.size()) == 0);
  }
}

TEST_CASE("run writes schema, rows and final particles") {
  auto config = tiny_config(harness::Variant::CurrotAO);
  std::string dir = "/tmp/trajcurr_harness_test";
  std::filesystem::remove_all(dir);
  auto log = harness::run_experiment(config, dir);

  auto csv = slurp(dir + "/run.csv");
  CHECK(csv.rfind("#schema=1\n", 0) == 0);
  CHECK(csv ==
        harness::run_csv(log));  // incremental file matches the in-memory log
  CHECK(static_cast<long>(log.rows.size()) ==
        config.iterations + log.warmup_iterations);

  long iteration = -1;
  auto particles = curriculum::particles_from_json(slurp(dir + "/particles_final.json"),
                                                   &iteration);
  CHECK(particles.contexts.rows() == config.particles);
  CHECK(iteration == static_cast<long>(log.rows.size()));
}

TEST_CASE("no_curriculum reports transport distance as not applicable") {
  auto config = tiny_config(harness::Variant::NoCurriculum);
  auto log = harness::run_experiment(config);
  CHECK(static_cast<long>(log.rows.size()) == config.iterations);
  for (const auto& row : log.rows) {
    CHECK(std::isnan(row.wasserstein));
    CHECK(row.moved_fraction == 0.0);
    // Sampling the target distribution directly leaves the surrogate without
    // reachable training tasks; its competence never leaves the rest region.
    CHECK(row.mean_metric == 0.0);
    CHECK(row.success_rate == 0.0);
  }
  CHECK(harness::run_csv(log).find("nan") != std::string::npos);
}

TEST_CASE("wall time column stays zero without the timing flag") {
  auto config = tiny_config(harness::Variant::CurrotAO);
  auto log = harness::run_experiment(config);
  for (const auto& row : log.rows) CHECK(row.wall_time == 0.0);

  config.timing = true;
  auto timed = harness::run_experiment(config);
  double total = 0.0;
  for (const auto& row : timed.rows) total += row.wall_time;
  CHECK(total > 0.0);
}

TEST_CASE("ablation grid aggregates per cell and tolerates failures") {
  auto base = tiny_config(harness::Variant::CurrotAO);
  base.iterations = 3;
  std::string dir = "/tmp/trajcurr_ablate_test";
  std::filesystem::remove_all(dir);
  auto result = harness::ablate(base,
                                {harness::Variant::CurrotAO, harness::Variant::CurrotL},
                                {51}, {1, 2}, dir, 2);
  REQUIRE(result.cells.size() == 2);
  for (const auto& cell : result.cells) {
    CHECK(cell.seeds == 2);
    CHECK(cell.failures == 0);
  }
  // One header comment, one column header, one row per cell.
  CHECK(std::count(result.summary_csv.begin(), result.summary_csv.end(), '\n') == 4);
  CHECK(slurp(dir + "/summary.csv") == result.summary_csv);
  CHECK(std::filesystem::exists(dir + "/currot_ao_d51_s1/run.csv"));
  CHECK(std::filesystem::exists(dir + "/currot_l_d51_s2/run.csv"));
}

TEST_CASE("summary means are recomputable from the raw logs") {
  auto base = tiny_config(harness::Variant::CurrotAO);
  base.iterations = 3;
  std::string dir = "/tmp/trajcurr_ablate_recompute";
  std::filesystem::remove_all(dir);
  auto result = harness::ablate(base, {harness::Variant::CurrotAO}, {51}, {5, 6}, dir, 1);
  REQUIRE(result.cells.size() == 1);

  double sum = 0.0;
  for (auto seed : {5, 6}) {
    auto csv = slurp(dir + "/currot_ao_d51_s" + std::to_string(seed) + "/run.csv");
    std::istringstream in(csv);
    std::string line, last;
    while (std::getline(in, line))
      if (!line.empty() && line[0] != '#' && line.find("iteration") == std::string::npos)
        last = line;
    auto first_comma = last.find(',');
    auto second_comma = last.find(',', first_comma + 1);
    sum += std::stod(last.substr(first_comma + 1, second_comma - first_comma - 1));
  }
  CHECK(result.cells[0].mean_final_w2 == doctest::Approx(sum / 2.0).epsilon(1e-12));
}

TEST_CASE("empty ablation inputs give an empty table") {
  auto base = tiny_config(harness::Variant::CurrotAO);
  auto result = harness::ablate(base, {}, {51}, {1}, "", 1);
  CHECK(result.cells.empty());
  CHECK(std::count(result.summary_csv.begin(), result.summary_csv.end(), '\n') == 2);
}

TEST_CASE("oracle checks pass on a healthy build") {
  auto results = harness::run_checks();
  CHECK(results.size() >= 6);
  for (const auto& r : results) {
    INFO(r.name, ": ", r.detail);
    CHECK(r.pass);
  }
}

TEST_CASE("an injected fault is caught by the kernel residual check") {
  auto results = harness::run_checks(true);
  bool found = false;
  for (const auto& r : results)
    if (r.name == "lti.kernel_residual") {
      found = true;
      CHECK_FALSE(r.pass);
    }
  CHECK(found);
}

TEST_CASE("seeded surrogate run trace is pinned") {
  harness::ExperimentConfig config;
  config.variant = harness::Variant::CurrotAO;
  config.context_dim = 51;
  config.particles = 16;
  config.candidates_per_particle = 8;
  config.iterations = 6;
  config.seed = 11;
  auto log = harness::run_experiment(config);

  CHECK(harness::run_csv(log) ==
        "#schema=1\n"
        "iteration,wasserstein,mean_metric,success_rate,moved_fraction,wall_time\n"
        "0,0.9684989618494045,1500,1,1,0\n"
        "1,0.9406836836602911,1500,1,1,0\n"
        "2,0.9008138677294895,1500,1,1,0\n"
        "3,0.867495973474786,1500,1,1,0\n"
        "4,0.8351106313005356,1500,1,1,0\n"
        "5,0.8023613003949349,1500,1,1,0\n");

  // Transport distance shrinks across the trace.
  for (std::size_t i = 1; i < log.rows.size(); ++i)
    CHECK(log.rows[i].wasserstein < log.rows[i - 1].wasserstein);

  // Every particle stays feasible throughout the run.
  envs::EightEnv env{envs::EightEnv::Params{}};
  for (Eigen::Index i = 0; i < log.final_particles.contexts.rows(); ++i)
    CHECK(env.feasible(log.final_particles.contexts.row(i).transpose()));
}

TEST_CASE("ablation marks failing runs and continues") {
  auto base = tiny_config(harness::Variant::CurrotAO);
  base.iterations = 2;
  base.p0_radius_frac = 50.0;  // initial tasks far outside the mastered region
  base.max_warmup_iterations = 3;
  auto result = harness::ablate(base, {harness::Variant::CurrotAO}, {51}, {1, 2}, "", 1);
  REQUIRE(result.cells.size() == 1);
  CHECK(result.cells[0].seeds == 2);
  CHECK(result.cells[0].failures == 2);
}

TEST_CASE("CLI exit codes") {
  std::string cli = TRAJCURR_CLI_PATH;
  auto run = [&](const std::string& args) {
    int raw = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  CHECK(run("check") == 0);
  CHECK(run("check --inject-fault") == 2);
  CHECK(run("definitely-not-a-subcommand") == 1);
  CHECK(run("run --variant currot --metric mahalanobis") == 1);  // contradiction
  CHECK(run("export grid --segments 20") == 0);
}

TEST_CASE("CLI flags override the config file") {
  std::string dir = "/tmp/trajcurr_cli_config";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream cfg(dir + "/exp.cfg");
    cfg << "variant=currot_ao\nparticles=8\ncandidates_per_particle=6\niterations=3\nseed=4\n";
  }
  std::string cli = TRAJCURR_CLI_PATH;
  int raw = std::system((cli + " run --config " + dir + "/exp.cfg --iterations 2 --out " +
                         dir + "/out > /dev/null 2>&1")
                            .c_str());
  REQUIRE(WEXITSTATUS(raw) == 0);
  auto csv = slurp(dir + "/out/run.csv");
  // Two header lines plus one row per iteration; the flag wins over the file.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
