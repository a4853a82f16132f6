#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "ctrlkit/ctrlkit.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

int fail(int code, const std::string& msg) {
  std::cerr << "ctrl: error: " << msg << "\n";
  return code;
}

bool write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
  return static_cast<bool>(f);
}

struct Args {
  std::string spec, out, format = "report";
  std::map<std::string, std::string> values;
  bool force = false, timing = false;
};

void add_common(CLI::App* sub, Args& a, bool spec_required) {
  auto pos = sub->add_option("spec", a.spec, "spec file path or builtin name");
  if (spec_required) pos->required();
  sub->add_option("--out", a.out, "write the selected format to this path");
  sub->add_option("--format", a.format, "csv or report")->check(CLI::IsMember({"csv", "report"}));
  sub->add_flag("--timing", a.timing, "include wall-clock time in the report");
  for (const char* k : {"tol", "steps"}) sub->add_option(std::string("--") + k, a.values[k]);
}

void add_values(CLI::App* sub, Args& a, std::initializer_list<const char*> keys) {
  for (const char* k : keys) sub->add_option(std::string("--") + k, a.values[k]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Controllability, stabilization, optimal control and spectral PDE batch tool"};
  app.require_subcommand(1);
  bool list = false;
  app.add_flag("--list-builtins", list, "print the shipped spec names and exit");
  Args a;
  auto* analyze = app.add_subcommand("analyze", "Kalman, Hautus, decomposition, Gramian, time-varying and Lie tests");
  add_common(analyze, a, true);
  add_values(analyze, a, {"T", "t", "depth"});
  auto* stabilize = app.add_subcommand("stabilize", "pole placement, or a Routh verdict with --routh");
  add_common(stabilize, a, false);
  add_values(stabilize, a, {"poles", "routh", "T"});
  auto* lq = app.add_subcommand("lq", "finite-horizon Riccati feedback");
  add_common(lq, a, true);
  add_values(lq, a, {"T"});
  auto* shoot = app.add_subcommand("shoot", "Pontryagin shooting");
  add_common(shoot, a, true);
  add_values(shoot, a, {"x1"});
  auto* pde = app.add_subcommand("pde", "spectral 1D wave and heat problems");
  add_common(pde, a, true);
  add_values(pde, a, {"L", "N", "T", "pivot"});
  pde->add_flag("--force", a.force, "run HUM below the observability time");
  if (argc == 2 && std::string(argv[1]) == "--list-builtins") {
    std::cout << ctrl_builtin_names();
    return 0;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }
  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  std::string text, source, stem;
  if (!a.spec.empty()) {
    std::error_code ec;
    if (fs::is_regular_file(a.spec, ec)) {
      std::ifstream f(a.spec, std::ios::binary);
      std::stringstream ss;
      ss << f.rdbuf();
      if (!f) return fail(kExitInput, "cannot read " + a.spec);
      text = ss.str();
      source = a.spec;
      stem = fs::path(a.spec).stem().string();
    } else if (const char* b = ctrl_builtin_spec(a.spec.c_str())) {
      text = b;
      source = "builtin:" + a.spec;
      stem = a.spec;
    } else {
      return fail(kExitInput, "'" + a.spec + "' is neither a readable file nor a builtin (see --list-builtins)");
    }
  } else if (a.values["routh"].empty()) {
    return fail(kExitInput, "stabilize needs a spec or --routh");
  } else {
    stem = "routh";
  }

  ctrl_job* job = nullptr;
  if (int rc = ctrl_job_create(command.c_str(), text.c_str(), source.c_str(), &job); rc != CTRL_OK)
    return fail(rc == CTRL_ERR_INPUT ? kExitInput : kExitNumerical, ctrl_last_error());
  auto cleanup = std::unique_ptr<ctrl_job, void (*)(ctrl_job*)>(job, ctrl_job_destroy);
  auto set = [&](const std::string& k, const std::string& v) {
    return ctrl_job_set_option(job, k.c_str(), v.c_str());
  };
  for (auto& [k, v] : a.values)
    if (!v.empty())
      if (set(k, v) != CTRL_OK) return fail(kExitInput, ctrl_job_error(job));
  if (a.force) set("force", "1");
  if (a.timing) set("timing", "1");

  int rc = ctrl_job_run(job);
  if (rc != CTRL_OK)
    return fail(rc == CTRL_ERR_INPUT || rc == CTRL_ERR_ARGUMENT ? kExitInput : kExitNumerical, ctrl_job_error(job));
  std::string report = ctrl_job_report(job), csv = ctrl_job_csv(job);

  const std::string& chosen = a.format == "csv" ? csv : report;
  if (!a.out.empty()) {
    if (!write_file(a.out, chosen)) return fail(kExitInput, "cannot write " + a.out);
    return 0;
  }
  if (const char* dir = std::getenv("CTRL_OUT_DIR"); dir && *dir) {
    fs::path d(dir);
    std::error_code ec;
    fs::create_directories(d, ec);
    const std::string base = stem + "." + command;
    if (!write_file(d / (base + ".report.json"), report)) return fail(kExitInput, "cannot write into " + d.string());
    if (!csv.empty() && !write_file(d / (base + ".csv"), csv))
      return fail(kExitInput, "cannot write into " + d.string());
    return 0;
  }
  std::cout << chosen;
  return 0;
}
