// Command-line front end: simulate, reproduce-paper, parse-seq.
//
// Exit status: 0 success, 1 I/O or internal failure, 2 configuration or
// input error, 3 numerical contract violation. Failures also print a
// one-line JSON error record on stderr.

#include "dressed/criteria.hpp"
#include "dressed/io.hpp"
#include "dressed/run.hpp"
#include "dressed/sequence_text.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace {

using dressed::json;

int fail(int code, const std::string& kind, const std::string& message, json extra = json::object()) {
  json err{{"kind", kind}, {"message", message}};
  for (auto& [k, v] : extra.items()) err[k] = v;
  std::cerr << json{{"error", err}, {"exit_code", code}}.dump() << std::endl;
  return code;
}

/// Maps exceptions to exit codes.
template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const dressed::ConfigError& e) {
    return fail(2, "config", e.what(), json{{"field", e.field()}});
  } catch (const dressed::ParseError& e) {
    return fail(2, "parse", e.message(), json{{"line", e.line()}, {"column", e.column()}});
  } catch (const dressed::contract_violation& e) {
    return fail(3, "numerical", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(2, "precondition", e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
}

int cmd_simulate(const std::string& path, const dressed::Overrides& ov) {
  std::string text;
  try {
    text = dressed::read_text_file(path);
  } catch (const std::exception& e) {
    throw dressed::ConfigError("", e.what());
  }
  const auto cfg = dressed::parse_run_config_text(text, ov);
  const auto out = dressed::execute(cfg);
  dressed::write_run_output(out, cfg.output_dir);
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote";
  for (const auto& [name, content] : out.files) std::cout << ' ' << (std::filesystem::path(cfg.output_dir) / name).string();
  std::cout << "\n";
  return 0;
}

std::string md_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) out += c == '|' ? std::string("\\|") : std::string(1, c);
  return out;
}

std::string report_markdown(const std::vector<dressed::CriterionOutcome>& results) {
  std::ostringstream md;
  int passed = 0;
  for (const auto& r : results) passed += r.pass();
  md << "# Reproduction report\n\n";
  md << "Software version " << DRESSED_VERSION << ". " << passed << " of " << results.size()
     << " criteria pass.\n\n";
  md << "| # | criterion | result | runtime (s) | limit (s) |\n|---|---|---|---|---|\n";
  for (const auto& r : results) {
    md << "| " << r.id << " | " << r.title << " | " << (r.pass() ? "PASS" : "FAIL") << " | "
       << dressed::fixed_number(r.seconds, 2) << " | " << dressed::fixed_number(r.limit_seconds, 0) << " |\n";
  }
  for (const auto& r : results) {
    md << "\n## " << r.id << ". " << r.title << "\n\n";
    md << "| quantity | simulated | target | published | result |\n|---|---|---|---|---|\n";
    for (const auto& c : r.checks) {
      const std::string target = c.upper_bound ? "<= " + md_number(c.expected)
                                               : md_number(c.expected) + " +- " + md_number(c.tolerance);
      md << "| " << md_cell(c.label) << " | " << md_number(c.measured) << (c.unit.empty() ? "" : " " + c.unit) << " | "
         << target << " | " << (c.context.empty() ? "-" : md_cell(c.context)) << " | " << (c.pass ? "pass" : "FAIL")
         << " |\n";
    }
    for (const auto& n : r.notes) md << "\n" << n << "\n";
    for (const auto& [name, sweep] : r.sweeps) {
      if (name == "alpha_sweep") {
        md << "\nnu_eff against alpha (MHz):\n\n| alpha | measured | predicted | error |\n|---|---|---|---|\n";
        const auto& m = sweep.column("nu_eff_measured");
        const auto& p = sweep.column("nu_eff_predicted");
        for (std::size_t i = 0; i < sweep.axis.size(); ++i) {
          md << "| " << md_number(sweep.axis[i]) << " | " << md_number(m[i]) << " | " << md_number(p[i]) << " | "
             << md_number(m[i] - p[i]) << " |\n";
        }
      }
    }
    if (!r.ensemble_rows.empty()) {
      md << "\n| drive (MHz) | Delta peak | Delta FWHM | R_dd peak | R_dd FWHM | Delta peak ratio |\n"
            "|---|---|---|---|---|---|\n";
      for (const auto& row : r.ensemble_rows) {
        auto o = [](const std::optional<double>& v) { return v ? md_number(*v) : std::string("-"); };
        md << "| " << dressed::drive_label(row.drive) << " | " << o(row.delta.peak) << " | " << o(row.delta.fwhm)
           << " | " << o(row.rdd.peak) << " | " << o(row.rdd.fwhm) << " | " << o(row.delta_peak_ratio) << " |\n";
      }
    }
    if (!r.sweeps.empty() || !r.ensemble_rows.empty()) {
      md << "\nFiles:";
      for (const auto& [name, sweep] : r.sweeps) md << " `" << name << ".csv` `" << name << ".svg`";
      if (!r.ensemble_rows.empty()) md << " `ensemble.csv` `ensemble.svg`";
      md << "\n";
    }
  }
  return md.str();
}

int cmd_reproduce(const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<dressed::CriterionOutcome> results;
  for (const auto& run : dressed::all_criteria()) {
    results.push_back(run());
    const auto& r = results.back();
    std::cout << dressed::status_line(r) << std::endl;
    for (const auto& [name, sweep] : r.sweeps) {
      dressed::write_text_file(dir + "/" + name + ".csv", dressed::sweep_csv(sweep));
      dressed::write_text_file(dir + "/" + name + ".svg", dressed::sweep_svg(sweep));
    }
    if (!r.ensemble_rows.empty()) {
      dressed::write_text_file(dir + "/ensemble.csv", dressed::ensemble_csv(r.ensemble_rows));
      std::vector<std::pair<std::string, dressed::PdfSummary>> h;
      for (const auto& row : r.ensemble_rows) h.push_back({"Delta " + dressed::drive_label(row.drive), row.delta});
      dressed::write_text_file(dir + "/ensemble.svg", dressed::pdf_svg("Delta distribution", h));
    }
  }
  dressed::write_text_file(dir + "/report.md", report_markdown(results));
  std::cout << "wrote " << dir << "/report.md\n";
  for (const auto& r : results) {
    if (!r.pass()) return 4;
  }
  return 0;
}

int cmd_parse_seq(const std::string& path) {
  std::string text;
  try {
    text = dressed::read_text_file(path);
  } catch (const std::exception& e) {
    throw dressed::ConfigError("", e.what());
  }
  const auto seq = dressed::parse_sequence(text);
  seq.validate();
  json bindings = json::object();
  for (const auto& [k, v] : seq.bindings) bindings[k] = v;
  std::cout << json{{"name", seq.name},
                    {"instructions", seq.instructions.size()},
                    {"total_segment_duration_us", seq.total_duration()},
                    {"parameters", bindings}}
                   .dump()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dressed-state two-qutrit simulator"};
  app.set_version_flag("--version", std::string(DRESSED_VERSION));
  app.require_subcommand(1);

  std::string config_path, out_dir, mode, seq_path, paper_dir = "paper_out";
  std::uint64_t seed = 0;
  bool plot = false;

  auto* sim = app.add_subcommand("simulate", "run one experiment from a JSON configuration");
  sim->add_option("config", config_path, "configuration file")->required();
  auto* seed_opt = sim->add_option("--seed", seed, "override the configured seed");
  auto* out_opt = sim->add_option("--out", out_dir, "override the output directory");
  auto* mode_opt = sim->add_option("--mode", mode, "override the evolution mode")->check(CLI::IsMember({"rwa", "lab"}));
  sim->add_flag("--plot", plot, "also write plot.svg");

  auto* rep = app.add_subcommand("reproduce-paper", "run every acceptance scenario and write a report");
  rep->add_option("--out", paper_dir, "output directory");

  auto* ps = app.add_subcommand("parse-seq", "validate a pulse-sequence file");
  ps->add_option("file", seq_path, "sequence file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }

  if (sim->parsed()) {
    dressed::Overrides ov;
    if (*seed_opt) ov.seed = seed;
    if (*out_opt) ov.output_dir = out_dir;
    if (*mode_opt) ov.mode = mode;
    ov.plot = plot;
    return guarded([&] { return cmd_simulate(config_path, ov); });
  }
  if (rep->parsed()) return guarded([&] { return cmd_reproduce(paper_dir); });
  return guarded([&] { return cmd_parse_seq(seq_path); });
}
