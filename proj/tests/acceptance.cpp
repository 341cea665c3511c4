// Acceptance suite: one line per criterion, nonzero exit on any failure.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "trajcurr/envs.hpp"
#include "trajcurr/harness.hpp"
#include "trajcurr/numio.hpp"
#include "trajcurr/oracles.hpp"

using namespace trajcurr;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& name, const std::string& detail) {
  std::printf("[%2d] %s  %-38s %s\n", criterion, pass ? "PASS" : "FAIL", name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// 1. Closed-form rollout vs step-wise propagation, plus the closing
//    constraint, on the eight-task grid.
void criterion_1() {
  Timer timer;
  auto basis = lti::kernel_basis(lti::KnotGrid::preset_eight());
  RngStream rng(1001);
  double worst_state = 0.0;
  double worst_closing = 0.0;
  for (int i = 0; i < 1000; ++i) {
    lti::Context context;
    context.axes = 3;
    context.start_positions = Eigen::Vector3d(0, 0, 1);
    context.coords.resize(51);
    for (int d = 0; d < 51; ++d) context.coords(d) = rng.gaussian();

    std::vector<double> times;
    for (int k = 0; k < 4; ++k) times.push_back(rng.uniform(1.0, 11.0));
    times.push_back(basis.grid.t_end());
    auto states = lti::rollout(context, basis, times);

    for (std::size_t ti = 0; ti < times.size(); ++ti)
      for (int a = 0; a < 3; ++a) {
        Eigen::VectorXd jerks = basis.basis * context.axis_coords(a, 17);
        Eigen::Vector3d expected = oracles::propagate_piecewise(
            basis.grid.knots, jerks, {context.start_positions(a), 0.0, 0.0}, times[ti]);
        Eigen::Vector3d got(states[ti][a].position, states[ti][a].velocity,
                            states[ti][a].acceleration);
        worst_state = std::max(worst_state, (got - expected).cwiseAbs().maxCoeff());
      }

    const auto& end = states.back();
    for (int a = 0; a < 3; ++a) {
      worst_closing =
          std::max(worst_closing, std::abs(end[a].position - context.start_positions(a)));
      worst_closing = std::max(worst_closing, std::abs(end[a].velocity));
      worst_closing = std::max(worst_closing, std::abs(end[a].acceleration));
    }
  }
  double elapsed = timer.seconds();
  bool pass = worst_state < 1e-8 && worst_closing < 1e-8 && elapsed < 10.0;
  report(1, pass, "closed form vs propagation oracle",
         "state err " + format_double(worst_state) + ", closing err " +
             format_double(worst_closing) + ", " + format_double(elapsed) + " s");
}

// 2. Transition matrix and segment response against quadrature.
void criterion_2() {
  RngStream rng(1002);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double lo = rng.uniform(0.0, 10.0);
    double hi = lo + rng.uniform(0.0, 5.0);
    double t = rng.uniform(0.0, 15.0);
    worst = std::max(worst, (lti::jerk_segment_response(lo, hi, t) -
                             oracles::simpson_segment_response(lo, hi, t))
                                .cwiseAbs()
                                .maxCoeff());
  }
  double worst_transition = 0.0;
  for (int i = 0; i < 500; ++i) {
    double dt = rng.uniform(0.0, 5.0);
    worst_transition =
        std::max(worst_transition,
                 (lti::transition_matrix(dt) - oracles::rk4_transition(dt)).cwiseAbs().maxCoeff());
  }
  bool pass = worst < 1e-9 && worst_transition < 1e-9;
  report(2, pass, "analytic solution vs quadrature",
         "segment err " + format_double(worst) + ", transition err " +
             format_double(worst_transition));
}

// 3. Trajectory metric equals rollout state-difference energy; whitening
//    reconstructs its matrix.
void criterion_3() {
  auto basis = lti::kernel_basis(lti::KnotGrid::preset_eight());
  metric::MetricBuildSpec spec;
  spec.eval_times = metric::MetricBuildSpec::default_eval_times(basis.grid);
  spec.axes = 3;
  Eigen::MatrixXd a = metric::build_state_metric(spec, basis);

  RngStream rng(1003);
  double worst_rel = 0.0;
  for (int pair = 0; pair < 50; ++pair) {
    lti::Context c1, c2;
    c1.axes = c2.axes = 3;
    c1.start_positions = c2.start_positions = Eigen::Vector3d(0, 0, 1);
    c1.coords.resize(51);
    c2.coords.resize(51);
    for (int d = 0; d < 51; ++d) {
      c1.coords(d) = rng.gaussian();
      c2.coords(d) = rng.gaussian();
    }
    double quad = (c1.coords - c2.coords).dot(a * (c1.coords - c2.coords));
    auto s1 = lti::rollout(c1, basis, spec.eval_times);
    auto s2 = lti::rollout(c2, basis, spec.eval_times);
    double energy = 0.0;
    for (std::size_t ti = 0; ti < spec.eval_times.size(); ++ti)
      for (int axis = 0; axis < 3; ++axis) {
        double dp = s1[ti][axis].position - s2[ti][axis].position;
        double dv = s1[ti][axis].velocity - s2[ti][axis].velocity;
        double da = s1[ti][axis].acceleration - s2[ti][axis].acceleration;
        energy += dp * dp + dv * dv + da * da;
      }
    worst_rel = std::max(worst_rel, std::abs(quad - energy) / std::max(1.0, energy));
  }

  Eigen::MatrixXd w = metric::whitening_transform(a, 1e-8);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  Eigen::VectorXd floored = eig.eigenvalues().cwiseMax(1e-8 * eig.eigenvalues().maxCoeff());
  Eigen::MatrixXd a_floored =
      eig.eigenvectors() * floored.asDiagonal() * eig.eigenvectors().transpose();
  double recon = (w.transpose() * w - a_floored).cwiseAbs().maxCoeff();

  bool pass = worst_rel < 1e-8 && recon < 1e-9;
  report(3, pass, "metric vs rollout energy + whitening",
         "rel err " + format_double(worst_rel) + ", reconstruction " + format_double(recon));
}

// 4. Auction vs enumeration, permutation equality when the optimum is
//    clearly unique.
void criterion_4() {
  Timer timer;
  RngStream rng(1004);
  double worst_excess = -1e300;
  int permutation_mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    int n = 5 + static_cast<int>(rng.engine()() % 4);  // 5..8
    Eigen::MatrixXd cost(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) cost(r, c) = rng.uniform(0.0, 10.0);
    transport::AuctionConfig config;
    auto resolved = config.resolved(cost);
    auto fast = transport::auction_assign(cost, config);
    auto exact = transport::brute_force_assign(cost);
    worst_excess = std::max(worst_excess, fast.total_cost - exact.total_cost -
                                              n * resolved.eps_min);
    if (fast.phi != exact.phi) ++permutation_mismatches;
  }
  double elapsed = timer.seconds();
  bool pass = worst_excess <= 1e-12 && permutation_mismatches == 0 && elapsed < 30.0;
  report(4, pass, "auction vs brute-force optimum",
         "worst excess " + format_double(worst_excess) + ", mismatches " +
             std::to_string(permutation_mismatches) + ", " + format_double(elapsed) + " s");
}

// 5. High-dimensional sampling geometry.
void criterion_5() {
  Timer timer;
  const int dim = 51;
  const double epsilon = 1.0;
  Eigen::VectorXd center = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd target = Eigen::VectorXd::Unit(dim, 0) * (epsilon / 2.0);
  const double base = (target - center).norm();
  const int draws = 100000;

  RngStream half_rng(1005);
  int half_improving = 0;
  for (int i = 0; i < draws; ++i)
    if ((curriculum::half_ball_sample(center, target, epsilon, half_rng) - target).norm() <
        base)
      ++half_improving;

  RngStream cone_rng(1006);
  int cone_improving = 0;
  for (int i = 0; i < draws; ++i)
    if ((curriculum::cone_sample(center, target, epsilon, 0.25 * 3.14159265358979323846,
                                 cone_rng) -
         target)
            .norm() < base)
      ++cone_improving;

  double half_frac = static_cast<double>(half_improving) / draws;
  double cone_frac = static_cast<double>(cone_improving) / draws;
  double elapsed = timer.seconds();
  bool pass = half_frac < 0.01 && cone_frac > 0.5 && elapsed < 10.0;
  report(5, pass, "half-ball vs cone sampling geometry",
         "half-ball improving " + format_double(half_frac) + ", cone improving " +
             format_double(cone_frac) + ", " + format_double(elapsed) + " s");
}

// 6. Curriculum convergence vs stall on the surrogate learner.
void criterion_6() {
  Timer timer;
  std::vector<double> ao_final, currot_ratio;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    harness::ExperimentConfig config;
    config.context_dim = 51;
    config.particles = 64;
    config.candidates_per_particle = 32;
    config.iterations = 200;
    config.seed = seed;

    config.variant = harness::Variant::CurrotAO;
    auto ao = harness::run_experiment(config);
    ao_final.push_back(ao.rows.back().wasserstein);

    config.variant = harness::Variant::Currot;
    auto plain = harness::run_experiment(config);
    currot_ratio.push_back(plain.rows.back().wasserstein / plain.eps_line);
  }
  double ao_median = median(ao_final);
  double stall_median = median(currot_ratio);
  double elapsed = timer.seconds();
  bool pass = ao_median < 0.05 && stall_median >= 0.5 && elapsed < 600.0;
  report(6, pass, "curriculum convergence vs stall",
         "currot_ao median W2 " + format_double(ao_median) + ", currot median W2/eps-line " +
             format_double(stall_median) + ", " + format_double(elapsed) + " s");
}

// 7. Snap-to-target: fully competent surrogate and reachable targets give an
//    exactly zero transport distance after one step.
void criterion_7() {
  envs::EightEnv env{envs::EightEnv::Params{}};
  envs::SurrogateLearner omniscient(env.trajectory_metric(), 1e12, 1e12, 1500.0);
  omniscient.master(Eigen::VectorXd::Zero(env.context_dim()));

  const int n = 16;
  RngStream init_rng(1007);
  curriculum::CurriculumState state;
  state.particles.contexts.resize(n, env.context_dim());
  for (int i = 0; i < n; ++i)
    state.particles.contexts.row(i) = env.sample_target(init_rng).transpose();

  curriculum::CurriculumConfig config;
  config.metric = env.trajectory_metric();
  config.delta = 1400.0;
  config.epsilon = 10.0;  // every assigned target is within reach
  config.bandwidth = 3.0;
  config.candidates_per_particle = 16;
  config.sampler = curriculum::SamplerKind::Cone;
  config.seed = 7;

  competence::PerformanceBuffer buffer(2 * n, 2 * n, config.delta);
  std::vector<competence::RolloutRecord> rollouts;
  for (int i = 0; i < n; ++i) {
    auto record = omniscient.rollout(state.particles.contexts.row(i).transpose());
    rollouts.push_back(record);
  }

  curriculum::UpdateEnv update_env;
  const envs::EightEnv* env_ptr = &env;
  update_env.feasible = [env_ptr](const Eigen::VectorXd& c) { return env_ptr->feasible(c); };

  auto sampler = [env_ptr](RngStream& rng) { return env_ptr->sample_target(rng); };
  auto stats =
      curriculum::curriculum_step(state, sampler, rollouts, buffer, config, update_env);

  bool pass = stats.active && stats.wasserstein == 0.0;
  report(7, pass, "snap-to-target exact zero",
         "post-update W2 = " + format_double(stats.wasserstein) + ", moved fraction " +
             format_double(stats.moved_fraction));
}

// 8. Delay model: draw distribution and FIFO ordering.
void criterion_8() {
  envs::DelayQueue<long> draws_queue(RngStream(1008), envs::DelayQueue<long>::default_pmf,
                                     0.0);
  const long draws = 1000000;
  for (long i = 0; i < draws; ++i) {
    draws_queue.push(i);
    draws_queue.tick();
  }
  double worst_dev = 0.0;
  for (std::size_t d = 0; d < 5; ++d) {
    double got = static_cast<double>(draws_queue.draw_counts()[d]) / draws;
    worst_dev = std::max(worst_dev, std::abs(got - envs::DelayQueue<long>::default_pmf[d]));
  }

  envs::DelayQueue<long> fifo_queue(RngStream(1009));
  RngStream ops(1010);
  long pushed = 0;
  long last = -1;
  long violations = 0;
  long operations = 0;
  while (operations < 1000000) {
    int bursts = static_cast<int>(ops.engine()() % 3);
    for (int b = 0; b < bursts; ++b) {
      fifo_queue.push(pushed++);
      ++operations;
    }
    for (long p : fifo_queue.tick()) {
      if (p <= last) ++violations;
      last = p;
    }
    ++operations;
  }

  bool pass = worst_dev <= 0.002 && violations == 0;
  report(8, pass, "delay pmf and FIFO ordering",
         "max pmf deviation " + format_double(worst_dev) + ", order violations " +
             std::to_string(violations));
}

// 9. Reward spot checks.
void criterion_9() {
  envs::RewardParams params;  // alpha = -8, discount = 0.992
  double at_3cm = envs::reward(0.03, 0.0, 0.0, 0.0, false, params);
  double tipped = envs::reward(0.0, 0.0, 0.0, 0.0, true, params);
  bool pass = std::abs(at_3cm - 0.1) < 1e-12 && std::abs(tipped + 1000.0) < 1e-9;
  report(9, pass, "reward spot checks",
         "r(3cm) = " + format_double(at_3cm) + ", tipped = " + format_double(tipped));
}

// 10. Byte-identical CSVs from two identical CLI invocations.
void criterion_10() {
  std::string dir_a = "/tmp/trajcurr_accept10_a";
  std::string dir_b = "/tmp/trajcurr_accept10_b";
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
  std::string flags =
      " run --seed 7 --variant currot_ao --particles 32 --candidates 16 --iterations 10";
  std::string cli = TRAJCURR_CLI_PATH;
  int rc_a = std::system((cli + flags + " --out " + dir_a + " > /dev/null").c_str());
  int rc_b = std::system((cli + flags + " --out " + dir_b + " > /dev/null").c_str());

  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  std::string csv_a = slurp(dir_a + "/run.csv");
  std::string csv_b = slurp(dir_b + "/run.csv");
  std::string particles_a = slurp(dir_a + "/particles_final.json");
  std::string particles_b = slurp(dir_b + "/particles_final.json");

  bool pass = rc_a == 0 && rc_b == 0 && !csv_a.empty() && csv_a == csv_b &&
              particles_a == particles_b;
  report(10, pass, "byte-identical seeded CLI runs",
         std::to_string(csv_a.size()) + " bytes, identical = " +
             (csv_a == csv_b ? "yes" : "no"));
}

}  // namespace

int main() {
  std::printf("acceptance criteria\n");
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  if (failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", failures);
  return 1;
}
