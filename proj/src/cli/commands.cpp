#include "fblc/cli/commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "fblc/cli/config.hpp"
#include "fblc/fbl/fbl.hpp"
#include "fblc/sim/sim.hpp"

namespace fblc::cli {

namespace fs = std::filesystem;
using fbl::format_number;

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

namespace {

// Failure inside a named pipeline stage.
struct StageFailure : std::runtime_error {
  StageFailure(const std::string& stage, const std::string& what)
      : std::runtime_error(stage + " failed: " + what) {}
};

struct Loaded {
  ScenarioConfig cfg;
  Scenario scenario;
};

Loaded load(const CommandOptions& opt) {
  Loaded l;
  l.cfg = load_config(opt.config);
  if (opt.seed) l.cfg.verify.seed = *opt.seed;
  l.scenario = build_scenario(l.cfg);
  try {
    l.cfg.run.validate(l.scenario.system.t0);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("run: ") + e.what());
  }
  return l;
}

fbl::PipelineSettings pipeline(const Loaded& l) {
  fbl::PipelineSettings ps;
  ps.constraints = l.scenario.constraints;
  ps.reference = l.scenario.reference;
  ps.poles = l.cfg.run.poles;
  ps.betas = l.cfg.run.betas;
  ps.eps = l.cfg.run.eps;
  ps.max_order = l.cfg.run.max_order;
  return ps;
}

std::string describe_augment_error(const augment::AugmentError& e) {
  if (dynamic_cast<const augment::InfeasibleAnchor*>(&e)) return std::string("infeasible anchor: ") + e.what();
  if (auto* b = dynamic_cast<const augment::InputBoundInfeasible*>(&e)) {
    return std::string(e.what()) + " (needs beta > " + format_number(b->required_beta()) + ")";
  }
  return e.what();
}

fbl::SynthesizedController synthesize_anchor(const Loaded& l) {
  const auto& sys = l.scenario.system;
  std::optional<std::vector<double>> xi;
  if (!l.cfg.run.xi0.empty()) xi = l.cfg.run.xi0;
  try {
    return fbl::synthesize_at(sys, pipeline(l), sys.t0, sys.x0, xi);
  } catch (const augment::AugmentError& e) {
    throw StageFailure("constraint capture", describe_augment_error(e));
  } catch (const fbl::SynthesisError& e) {
    throw StageFailure("controller synthesis", e.what());
  } catch (const system::SystemError& e) {
    throw StageFailure("controller synthesis", e.what());
  }
}

sim::Trajectory simulate(const Loaded& l, bool constrained) {
  try {
    if (constrained) return sim::run_closed_loop(l.scenario.system, l.scenario.constraints, l.scenario.reference, l.cfg.run);
    return sim::run_classical_fbl(l.scenario.system, l.scenario.reference, l.cfg.run, l.scenario.constraints);
  } catch (const augment::AugmentError& e) {
    throw StageFailure("constraint capture", describe_augment_error(e));
  } catch (const fbl::SynthesisError& e) {
    throw StageFailure("controller synthesis", e.what());
  } catch (const sim::SimulationError& e) {
    throw StageFailure("simulation", std::string(e.what()) + " at t=" + format_number(e.time()));
  }
}

std::size_t column(const std::string& header, const std::string& name) {
  std::stringstream ss(header);
  std::string cell;
  for (std::size_t i = 1; std::getline(ss, cell, ','); ++i) {
    if (cell == name) return i;
  }
  return 0;
}

// Plot script for one or more trajectory CSVs sharing a header layout.
std::string trajectory_plot(const ScenarioConfig& cfg, const std::vector<std::pair<std::string, std::string>>& files,
                            const std::string& header, std::size_t constraints) {
  std::ostringstream os;
  if (cfg.plot == "python") {
    os << "import csv\nimport matplotlib.pyplot as plt\n\n";
    os << "fig, (ax_y, ax_phi) = plt.subplots(2, 1, sharex=True)\n";
    for (const auto& [file, label] : files) {
      os << "rows = list(csv.DictReader(open('" << file << "')))\n";
      os << "t = [float(r['t']) for r in rows]\n";
      os << "ax_y.plot(t, [float(r['y']) for r in rows], label='y " << label << "')\n";
      for (std::size_t k = 1; k <= constraints; ++k) {
        os << "ax_phi.plot(t, [float(r['phi" << k << "']) for r in rows], label='phi" << k << " " << label << "')\n";
      }
    }
    os << "ax_y.plot(t, [float(r['y_ref']) for r in rows], 'k--', label='y_ref')\n";
    os << "ax_phi.axhline(0.0, color='k', lw=0.5)\n";
    os << "ax_y.legend()\nax_phi.legend()\nax_phi.set_xlabel('t')\n";
    os << "fig.savefig('" << cfg.name << ".png', dpi=150)\n";
    return os.str();
  }
  os << "set datafile separator ','\nset terminal pngcairo size 900,700\n";
  os << "set output '" << cfg.name << ".png'\nset multiplot layout 2,1\nset xlabel 't'\n";
  const std::size_t ct = column(header, "t"), cy = column(header, "y"), cr = column(header, "y_ref");
  os << "plot ";
  for (const auto& [file, label] : files) {
    os << "'" << file << "' using " << ct << ":" << cy << " skip 1 with lines title 'y " << label << "', ";
  }
  os << "'" << files.front().first << "' using " << ct << ":" << cr << " skip 1 with lines dt 2 title 'y_ref'\n";
  if (constraints > 0) {
    os << "plot ";
    bool first = true;
    for (const auto& [file, label] : files) {
      for (std::size_t k = 1; k <= constraints; ++k) {
        os << (first ? "" : ", ") << "'" << file << "' using " << ct << ":" << column(header, "phi" + std::to_string(k))
           << " skip 1 with lines title 'phi" << k << " " << label << "'";
        first = false;
      }
    }
    os << ", 0 with lines lc 'black' notitle\n";
  }
  os << "unset multiplot\n";
  return os.str();
}

std::string plot_name(const ScenarioConfig& cfg, const std::string& stem) {
  return stem + (cfg.plot == "python" ? ".plot.py" : ".plot.gp");
}

double max_abs(const sim::Trajectory& tr, std::size_t state) {
  double m = 0.0;
  for (const auto& x : tr.x) m = std::max(m, std::fabs(x[state]));
  return m;
}

std::string run_summary(const sim::Trajectory& tr) {
  std::ostringstream os;
  os << "rows " << tr.size() << "\n";
  os << "max phi " << (tr.constraint_count ? format_number(tr.max_phi()) : std::string("n/a")) << "\n";
  os << "final tracking error " << format_number(tr.final_tracking_error()) << "\n";
  os << "events " << tr.events.size() << "\n";
  for (const auto& ev : tr.events) {
    os << "  t=" << format_number(ev.t) << " " << ev.from << " -> " << ev.to << "\n";
  }
  return os.str();
}

template <typename Body>
int guarded(const char* command, std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "fblc " << command << ": config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StageFailure& e) {
    err << "fblc " << command << ": " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "fblc " << command << ": " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int cmd_synthesize(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded("synthesize", err, [&] {
    auto l = load(opt);
    auto ctrl = synthesize_anchor(l);
    const fs::path file = opt.out_dir / (l.cfg.name + ".controller.txt");
    write_atomic(file, fbl::export_controller(ctrl));
    out << fbl::summary(ctrl) << "wrote " << file.string() << "\n";
    return kExitOk;
  });
}

int cmd_simulate(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded("simulate", err, [&] {
    auto l = load(opt);
    const auto t0 = std::chrono::steady_clock::now();
    auto tr = simulate(l, true);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string csv = l.cfg.name + ".csv";
    write_atomic(opt.out_dir / csv, tr.to_csv());
    const std::string script = plot_name(l.cfg, l.cfg.name);
    write_atomic(opt.out_dir / script, trajectory_plot(l.cfg, {{csv, "constrained"}}, tr.csv_header(), tr.constraint_count));
    out << run_summary(tr) << "runtime " << std::fixed << std::setprecision(3) << secs << " s\n";
    out << "wrote " << (opt.out_dir / csv).string() << " and " << (opt.out_dir / script).string() << "\n";
    return kExitOk;
  });
}

int cmd_compare(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded("compare", err, [&] {
    auto l = load(opt);
    auto classical = simulate(l, false);
    std::optional<sim::Trajectory> constrained;
    std::string failure;
    try {
      constrained = simulate(l, true);
    } catch (const StageFailure& e) {
      failure = e.what();
    }
    const std::size_t y_state = [&] {
      const auto& names = l.scenario.system.states;
      const auto out_vars = l.scenario.system.output.front().free_variables();
      for (std::size_t i = 0; i < names.size(); ++i) {
        if (out_vars.size() == 1 && *out_vars.begin() == names[i]) return i;
      }
      return std::size_t{0};
    }();

    std::ostringstream table;
    auto cell = [&](const std::string& text, std::size_t width) { table << std::left << std::setw(width) << text << ' '; };
    cell("run", 12), cell("max_phi", 24), cell("max|" + l.scenario.system.states[y_state] + "|", 24);
    cell("final_error", 24), table << "events\n";
    auto row = [&](const std::string& label, const sim::Trajectory& tr) {
      cell(label, 12);
      cell(tr.constraint_count ? format_number(tr.max_phi()) : std::string("n/a"), 24);
      cell(format_number(max_abs(tr, y_state)), 24);
      cell(format_number(tr.final_tracking_error()), 24);
      table << tr.events.size() << "\n";
    };
    if (constrained) {
      row("constrained", *constrained);
    } else {
      cell("constrained", 12), table << "failed: " << failure << "\n";
    }
    row("classical", classical);

    std::vector<std::pair<std::string, std::string>> files;
    if (constrained) {
      write_atomic(opt.out_dir / (l.cfg.name + ".constrained.csv"), constrained->to_csv());
      files.emplace_back(l.cfg.name + ".constrained.csv", "constrained");
    }
    write_atomic(opt.out_dir / (l.cfg.name + ".classical.csv"), classical.to_csv());
    files.emplace_back(l.cfg.name + ".classical.csv", "classical");
    write_atomic(opt.out_dir / plot_name(l.cfg, l.cfg.name + ".compare"),
                 trajectory_plot(l.cfg, files, classical.csv_header(), classical.constraint_count));
    write_atomic(opt.out_dir / (l.cfg.name + ".compare.txt"), table.str());
    out << table.str();
    if (!constrained) {
      err << "fblc compare: " << failure << "\n";
      return kExitRuntime;
    }
    return kExitOk;
  });
}

int cmd_verify(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded("verify", err, [&] {
    auto l = load(opt);
    const auto& sys = l.scenario.system;
    std::ostringstream report;
    bool ok = true;
    auto line = [&](bool pass, const std::string& text) {
      report << (pass ? "PASS " : "FAIL ") << text << "\n";
      ok = ok && pass;
    };
    report << "scenario " << l.cfg.name << "\nseed " << l.cfg.verify.seed << "\n";

    for (std::size_t k = 0; k < l.scenario.constraints.size(); ++k) {
      const auto& phi = l.scenario.constraints[k];
      const std::string tag = "phi" + std::to_string(k + 1);
      sim::Theorem1Settings st = l.cfg.verify;
      st.seed = l.cfg.verify.seed + k;
      auto th = sim::random_input_theorem1(sys, phi, l.cfg.run.eps, st);
      double worst_phi = -std::numeric_limits<double>::infinity(), worst_drift = 0.0;
      for (const auto& t : th.trials) {
        worst_phi = std::max(worst_phi, t.max_phi);
        worst_drift = std::max(worst_drift, t.max_drift);
      }
      line(th.passed() == th.trials.size(),
           tag + " random inputs: " + std::to_string(th.passed()) + "/" + std::to_string(th.trials.size()) +
               " trials, max phi " + format_number(worst_phi) + ", max drift " + format_number(worst_drift));

      auto ap = sim::capture_structure_checks(sys, phi, l.cfg.run.eps, l.cfg.verify.seed + 100 + k);
      line(ap.bindings > 0 && ap.zero_at_boundary == ap.bindings,
           tag + " input coefficient at zero slack: " + std::to_string(ap.zero_at_boundary) + "/" +
               std::to_string(ap.bindings) + " exactly zero");
      line(ap.bindings > 0 && ap.beta_spread <= ap.tolerance,
           tag + " coefficient / beta spread over beta in {1, 10, 100}: " + format_number(ap.beta_spread));
      line(ap.bindings > 0 && ap.delayed == ap.bindings,
           tag + " integral wrapping delays the input by one order: " + std::to_string(ap.delayed) + "/" +
               std::to_string(ap.bindings));
    }

    auto ctrl = synthesize_anchor(l);
    auto el = sim::check_elimination(ctrl, l.cfg.verify.seed + 200);
    line(el.passed(), "eliminated law vs recovered slacks: " + std::to_string(el.bindings) +
                          " bindings, max rel error " + format_number(el.max_relative_error));
    line(ctrl.gains.stable(), "poles " + fbl::format_number(ctrl.gains.poles.front()) + " give a stable error chain");

    const fs::path file = opt.out_dir / (l.cfg.name + ".verify.txt");
    write_atomic(file, report.str());
    out << report.str();
    if (!ok) {
      err << "fblc verify: one or more checks failed\n";
      return kExitVerify;
    }
    return kExitOk;
  });
}

int cmd_landscape(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded("landscape", err, [&] {
    auto l = load(opt);
    if (!l.cfg.landscape) throw ConfigError("landscape: section missing");
    const auto& sys = l.scenario.system;
    augment::AugmentedSystem aug;
    try {
      aug = augment::sequential_capture(sys, l.scenario.constraints, l.cfg.run.eps, {sys.t0, sys.x0}, l.cfg.run.betas,
                                        l.cfg.run.max_order, l.cfg.run.xi0);
    } catch (const augment::AugmentError& e) {
      throw StageFailure("constraint capture", describe_augment_error(e));
    }
    sim::Landscape land;
    try {
      land = sim::nrd_landscape(aug, l.cfg.landscape->axes, l.cfg.landscape->fixed, l.cfg.run.eps, l.cfg.run.max_order);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    std::map<int, std::size_t> counts;
    for (const auto& p : land.points) ++counts[p.sigma];
    const std::string csv = l.cfg.name + ".landscape.csv";
    write_atomic(opt.out_dir / csv, land.to_csv());

    std::ostringstream script;
    const auto& axes = l.cfg.landscape->axes;
    if (l.cfg.plot == "python") {
      script << "import csv\nimport matplotlib.pyplot as plt\n\n";
      script << "rows = [r for r in csv.DictReader(open('" << csv << "')) if r['sigma'] not in ('boundary', 'none')]\n";
      script << "fig = plt.figure()\n";
      if (axes.size() >= 3) {
        script << "ax = fig.add_subplot(projection='3d')\n";
        script << "sc = ax.scatter(*[[float(r[k]) for r in rows] for k in ('" << axes[0].name << "', '" << axes[1].name
               << "', '" << axes[2].name << "')], c=[int(r['sigma']) for r in rows], s=4)\n";
      } else {
        script << "ax = fig.add_subplot()\n";
        script << "sc = ax.scatter([float(r['" << axes[0].name << "']) for r in rows], "
               << (axes.size() > 1 ? "[float(r['" + axes[1].name + "']) for r in rows]" : "[0.0] * len(rows)")
               << ", c=[int(r['sigma']) for r in rows], s=4)\n";
      }
      script << "fig.colorbar(sc, label='sigma')\nfig.savefig('" << l.cfg.name << ".png', dpi=150)\n";
    } else {
      script << "set datafile separator ','\nset terminal pngcairo size 900,700\nset output '" << l.cfg.name
             << ".png'\n";
      const std::size_t sig = axes.size() + 1;
      if (axes.size() >= 3) {
        script << "splot '" << csv << "' using 1:2:3:(valid(" << sig << ") ? column(" << sig
               << ") : NaN) skip 1 with points pt 7 ps 0.3 palette title 'sigma'\n";
      } else {
        script << "plot '" << csv << "' using 1:" << (axes.size() > 1 ? "2" : "(0)") << ":(valid(" << sig
               << ") ? column(" << sig << ") : NaN) skip 1 with points pt 7 ps 0.5 palette title 'sigma'\n";
      }
    }
    const std::string script_name = plot_name(l.cfg, l.cfg.name + ".landscape");
    write_atomic(opt.out_dir / script_name, script.str());

    out << "points " << land.points.size() << "\n";
    for (const auto& [sigma, n] : counts) {
      out << "  " << (sigma == sim::kBoundary ? std::string("boundary") : sigma == sim::kNoOrder ? std::string("none") : "sigma=" + std::to_string(sigma))
          << " " << n << "\n";
    }
    out << "wrote " << (opt.out_dir / csv).string() << " and " << (opt.out_dir / script_name).string() << "\n";
    return kExitOk;
  });
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Constraint-capturing feedback linearisation toolkit", "fblc"};
  app.require_subcommand(1);
  CommandOptions opt;
  std::uint64_t seed = 0;
  std::string config, out_dir = ".";
  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const CommandOptions&, std::ostream&, std::ostream&);
  };
  const Entry entries[] = {
      {"synthesize", "Synthesize the controller at the initial point and export it", cmd_synthesize},
      {"simulate", "Run the switching closed loop and write the trajectory", cmd_simulate},
      {"compare", "Run the constrained and the classical loop side by side", cmd_compare},
      {"verify", "Run the structural and random-input checks", cmd_verify},
      {"landscape", "Evaluate the numerical relative degree over a grid", cmd_landscape},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> subs;
  std::vector<CLI::Option*> seed_opts;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", config, "Scenario file")->required();
    sub->add_option("--out", out_dir, "Output directory");
    seed_opts.push_back(sub->add_option("--seed", seed, "Seed for random sampling"));
    subs.emplace_back(sub, &e);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream os;
    app.exit(e, os, os);
    err << os.str();
    return e.get_exit_code() == 0 ? kExitOk : kExitConfig;
  }
  opt.config = config;
  opt.out_dir = out_dir;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (subs[i].first->parsed()) {
      if (seed_opts[i]->count() > 0) opt.seed = seed;
      return subs[i].second->fn(opt, out, err);
    }
  }
  return kExitConfig;
}

}  // namespace fblc::cli
