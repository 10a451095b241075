// Acceptance run: one PASS/FAIL line per criterion, on stdout and in
// acceptance_report.txt (working directory).
//
// usage: acceptance <unit-test-executable>...

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "mtda/experiment.hpp"
#include "mtda/metrics.hpp"
#include "mtda/trainer.hpp"

using namespace mtda;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;
std::ofstream report_file;

void report(int id, bool ok, const std::string& detail) {
  const std::string line = std::string(ok ? "PASS" : "FAIL") + " criterion " + std::to_string(id) + ": " + detail;
  std::printf("%s\n", line.c_str());
  std::fflush(stdout);
  report_file << line << std::endl;
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Runs {
  std::vector<double> eq;  // final equal-weight accuracy per seed
  double seconds = 0.0;
  double mean() const {
    double s = 0.0;
    for (double v : eq) s += v;
    return s / static_cast<double>(eq.size());
  }
};

Runs run_seeds(const char* label, TrainConfig config, const TrainData& data, std::size_t seeds) {
  const auto t0 = Clock::now();
  Runs r;
  for (const auto& rep : run_replications(config, data, seeds)) {
    r.eq.push_back(rep.report.equal_weight);
    std::fprintf(stderr, "  %-22s seed %llu  eq %.2f\n", label, static_cast<unsigned long long>(rep.seed),
                 rep.report.equal_weight);
  }
  r.seconds = seconds_since(t0);
  std::fprintf(stderr, "  %-22s mean %.2f  (%.0f s)\n", label, r.mean(), r.seconds);
  return r;
}

void criterion_property_suite(int argc, char** argv) {
  const auto t0 = Clock::now();
  int failed = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string cmd = std::string("\"") + argv[i] + "\" > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      std::fprintf(stderr, "  property suite failed: %s\n", argv[i]);
      ++failed;
    }
  }
  const double dt = seconds_since(t0);
  report(1, argc > 1 && failed == 0 && dt < 120.0,
         fmt("%d suites, %d failed, %.1f s (limit 120 s)", argc - 1, failed, dt));
}

void criterion_metrics() {
  const std::vector<double> accs{34.1, 52.6, 59.7};
  const double eq = equal_weight_accuracy(accs);
  const double w = weighted_accuracy(accs, std::vector<std::size_t>{250, 250, 250});
  const bool ok = std::abs(eq - 48.8) <= 0.05 && std::abs(w - eq) <= 1e-9;
  report(2, ok, fmt("equal-weight %.4f (48.8 +/- 0.05), |weighted - equal| = %.1e (<= 1e-9)", eq, std::abs(w - eq)));
}

bool same_run(const RunState& a, const RunState& b) {
  return a.history == b.history &&
         parameter_checksum(a.student_learner().net) == parameter_checksum(b.student_learner().net);
}

void criterion_mode_equivalence() {
  DeskScenarioSpec spec;
  spec.shifts = {desk_shifts().front()};
  spec.source_count = 200;
  const TrainData data = make_desk_scenario(spec);
  TrainConfig c = desk_config();
  c.epochs = 3;
  c.seed = 42;
  const RunState mt = train_mt_mtda(c, data);
  const RunState st = train_single_teacher_mixed(c, data);
  const RunState fs = train_fusion(c, data, Fusion::sum);
  const RunState fm = train_fusion(c, data, Fusion::mean);
  const bool a = same_run(mt, st), b = same_run(mt, fs), c2 = same_run(mt, fm);
  report(8, a && b && c2,
         fmt("n=1 single-teacher %s, sum fusion %s, mean fusion %s (bit-level histories and student weights)",
             a ? "identical" : "differs", b ? "identical" : "differs", c2 ? "identical" : "differs"));
}

}  // namespace

int main(int argc, char** argv) {
  report_file.open("acceptance_report.txt", std::ios::trunc);
  criterion_property_suite(argc, argv);
  criterion_metrics();

  const TrainData data = make_desk_scenario({});
  const TrainConfig base = desk_config();
  const std::size_t seeds = 3;
  std::fprintf(stderr, "desk scenario: %zu source, %zu targets, N_e = %d\n", data.source.size(), data.targets.size(),
               base.epochs);

  auto with_mode = [&](TrainMode m) {
    TrainConfig c = base;
    c.mode = m;
    return c;
  };
  const Runs mt = run_seeds("mt_mtda", with_mode(TrainMode::mt_mtda), data, seeds);
  const Runs so = run_seeds("source_only", with_mode(TrainMode::source_only), data, seeds);
  const double gap = mt.mean() - so.mean();
  const double minutes = (mt.seconds + so.seconds) / 60.0;
  report(3, gap >= 5.0 && minutes <= 30.0,
         fmt("mt_mtda %.2f vs source-only %.2f, gap %.2f (>= 5), %.1f min (<= 30)", mt.mean(), so.mean(), gap,
             minutes));

  const Runs sum = run_seeds("fusion_sum", with_mode(TrainMode::fusion_sum), data, seeds);
  const Runs mean = run_seeds("fusion_mean", with_mode(TrainMode::fusion_mean), data, seeds);
  int ordered = 0;
  for (std::size_t i = 0; i < seeds; ++i)
    if (mt.eq[i] >= sum.eq[i] && sum.eq[i] >= mean.eq[i]) ++ordered;
  const bool order_ok = mt.mean() >= sum.mean() && sum.mean() >= mean.mean();
  report(4, order_ok && mt.mean() - mean.mean() >= 2.0 && ordered >= 2,
         fmt("alternating %.2f, sum %.2f, mean %.2f; alternating - mean %.2f (>= 2); ordered on %d/3 seeds (>= 2)",
             mt.mean(), sum.mean(), mean.mean(), mt.mean() - mean.mean(), ordered));

  const Runs stm = run_seeds("single_teacher_mixed", with_mode(TrainMode::single_teacher_mixed), data, seeds);
  report(5, mt.mean() - stm.mean() >= 2.0,
         fmt("mt_mtda %.2f vs single teacher %.2f, gap %.2f (>= 2)", mt.mean(), stm.mean(), mt.mean() - stm.mean()));

  std::vector<double> order_eq{mt.eq[0]};
  for (std::vector<std::size_t> perm : {std::vector<std::size_t>{1, 2, 0}, std::vector<std::size_t>{2, 0, 1}}) {
    TrainConfig c = with_mode(TrainMode::mt_mtda);
    c.target_order = perm;
    order_eq.push_back(run_seeds("mt_mtda permuted", c, data, 1).eq.front());
  }
  const double sd = sample_std(order_eq);
  report(6, sd <= 1.5,
         fmt("equal-weight over orders {%.2f, %.2f, %.2f}, std %.2f (<= 1.5)", order_eq[0], order_eq[1], order_eq[2],
             sd));

  TrainConfig no_cst = with_mode(TrainMode::mt_mtda);
  no_cst.consistency_enabled = false;
  const Runs without = run_seeds("mt_mtda without CST", no_cst, data, seeds);
  report(7, mt.mean() >= without.mean() - 0.5,
         fmt("with CST %.2f vs without %.2f (with >= without - 0.5)", mt.mean(), without.mean()));

  criterion_mode_equivalence();
  return failures == 0 ? 0 : 1;
}
