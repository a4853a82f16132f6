#include "ctrlkit/ctrlkit.h"

#include <memory>
#include <new>
#include <string>

#include "batch.hpp"
#include "ctrlkit/lincontrol.hpp"
#include "ctrlkit/stabilize.hpp"

struct ctrl_job {
  std::unique_ptr<ctrl::batch::Job> job;
  ctrl::batch::Output out;
  std::string error;
  bool done = false;
};

namespace {

thread_local std::string last_error;

using RowMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMapOut = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <class F>
int guarded(F&& body, std::string* sink = nullptr) {
  int code = CTRL_OK;
  try {
    body();
    last_error.clear();
    return CTRL_OK;
  } catch (const ctrl::Error& e) {
    last_error = std::string(ctrl::to_string(e.kind())) + ": " + e.what();
    code = ctrl::batch::exit_code(e.kind()) == 2 ? CTRL_ERR_INPUT : CTRL_ERR_NUMERICAL;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    code = CTRL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = std::string("internal: ") + e.what();
    code = CTRL_ERR_INTERNAL;
  }
  if (sink) *sink = last_error;
  return code;
}

int bad_argument(const char* what) {
  last_error = what;
  return CTRL_ERR_ARGUMENT;
}

}  // namespace

extern "C" {

const char* ctrl_version(void) { return "1.0.0"; }

const char* ctrl_last_error(void) { return last_error.c_str(); }

int ctrl_expm(const double* M, int n, double* out) {
  if (!M || !out || n < 1) return bad_argument("ctrl_expm: null pointer or n < 1");
  return guarded([&] { RowMapOut(out, n, n) = ctrl::expm(RowMap(M, n, n)); });
}

int ctrl_kalman_rank(const double* A, const double* B, int n, int m, double tol, int* rank) {
  if (!A || !B || !rank || n < 1 || m < 1) return bad_argument("ctrl_kalman_rank: null pointer or empty shape");
  return guarded([&] {
    ctrl::LtiSystem s{RowMap(A, n, n), RowMap(B, n, m), {}};
    *rank = ctrl::kalman_test(s, tol > 0 ? tol : ctrl::kRankTol).rank;
  });
}

int ctrl_gramian(const double* A, const double* B, int n, int m, double T, int steps, double* G) {
  if (!A || !B || !G || n < 1 || m < 1) return bad_argument("ctrl_gramian: null pointer or empty shape");
  return guarded([&] {
    ctrl::LtiSystem s{RowMap(A, n, n), RowMap(B, n, m), {}};
    RowMapOut(G, n, n) = ctrl::gramian(s, T, steps).G;
  });
}

int ctrl_pole_place(const double* A, const double* B, int n, int m, const double* re, const double* im, double* K) {
  if (!A || !B || !re || !K || n < 1 || m < 1) return bad_argument("ctrl_pole_place: null pointer or empty shape");
  return guarded([&] {
    std::vector<ctrl::Complex> roots;
    for (int i = 0; i < n; ++i) roots.emplace_back(re[i], im ? im[i] : 0.0);
    ctrl::LtiSystem s{RowMap(A, n, n), RowMap(B, n, m), {}};
    RowMapOut(K, m, n) = ctrl::pole_place(s, ctrl::poly_from_roots(roots)).K;
  });
}

int ctrl_routh(const double* p, int deg, int* hurwitz, int* sign_changes, int* complete) {
  if (!p || deg < 0) return bad_argument("ctrl_routh: null pointer or negative degree");
  return guarded([&] {
    auto r = ctrl::routh(Eigen::Map<const ctrl::Vector>(p, deg + 1));
    if (hurwitz) *hurwitz = r.hurwitz;
    if (sign_changes) *sign_changes = r.sign_changes;
    if (complete) *complete = r.complete;
  });
}

int ctrl_lyapunov(const double* A, int n, double* P) {
  if (!A || !P || n < 1) return bad_argument("ctrl_lyapunov: null pointer or n < 1");
  return guarded([&] { RowMapOut(P, n, n) = ctrl::lyapunov_solve(RowMap(A, n, n)); });
}

const char* ctrl_builtin_spec(const char* name) {
  if (!name) return nullptr;
  auto text = ctrl::batch::builtin_spec(name);
  return text ? text->c_str() : nullptr;
}

const char* ctrl_builtin_names(void) {
  static const std::string joined = [] {
    std::string s;
    for (auto& n : ctrl::batch::builtin_names()) s += n + "\n";
    return s;
  }();
  return joined.c_str();
}

int ctrl_job_create(const char* command, const char* spec, const char* source, ctrl_job** out) {
  if (!command || !out) return bad_argument("ctrl_job_create: null command or output handle");
  *out = nullptr;
  return guarded([&] {
    auto j = std::make_unique<ctrl_job>();
    j->job = std::make_unique<ctrl::batch::Job>(command, spec ? spec : "", source ? source : "");
    *out = j.release();
  });
}

int ctrl_job_set_option(ctrl_job* job, const char* key, const char* value) {
  if (!job || !key) return bad_argument("ctrl_job_set_option: null job or key");
  return guarded([&] { job->job->set_option(key, value ? value : ""); }, &job->error);
}

int ctrl_job_run(ctrl_job* job) {
  if (!job) return bad_argument("ctrl_job_run: null job");
  job->done = false;
  job->out = {};
  return guarded(
      [&] {
        job->out = job->job->run();
        job->done = true;
        job->error.clear();
      },
      &job->error);
}

const char* ctrl_job_report(const ctrl_job* job) { return job && job->done ? job->out.report.c_str() : nullptr; }

const char* ctrl_job_csv(const ctrl_job* job) { return job && job->done ? job->out.csv.c_str() : nullptr; }

const char* ctrl_job_error(const ctrl_job* job) { return job ? job->error.c_str() : ""; }

void ctrl_job_destroy(ctrl_job* job) { delete job; }

}  // extern "C"
