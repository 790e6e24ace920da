#include "maulab.h"

#include <cstring>
#include <string>

#include "maulab/config.hpp"
#include "maulab/pipeline.hpp"

using maulab::Error;
using maulab::ErrorKind;

struct maulab_session {
  maulab::RunConfig config = maulab::RunConfig::from_preset("desk");
  std::string last_error;
};

namespace {

maulab_status status_from_kind(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return MAULAB_ERR_INVALID_ARGUMENT;
    case ErrorKind::Config: return MAULAB_ERR_CONFIG;
    case ErrorKind::Io: return MAULAB_ERR_IO;
    case ErrorKind::Dependency: return MAULAB_ERR_DEPENDENCY;
    case ErrorKind::Contract: return MAULAB_ERR_CONTRACT;
    case ErrorKind::Diverged: return MAULAB_ERR_DIVERGED;
    case ErrorKind::Internal: return MAULAB_ERR_INTERNAL;
  }
  return MAULAB_ERR_INTERNAL;
}

template <typename Fn>
maulab_status guarded(maulab_session* session, Fn&& fn) {
  if (!session) return MAULAB_ERR_INVALID_ARGUMENT;
  session->last_error.clear();
  try {
    fn();
    return MAULAB_OK;
  } catch (const Error& e) {
    session->last_error = e.what();
    return status_from_kind(e.kind());
  } catch (const std::exception& e) {
    session->last_error = e.what();
    return MAULAB_ERR_INTERNAL;
  }
}

}  // namespace

extern "C" {

const char* maulab_version(void) { return "0.1.0"; }

const char* maulab_status_name(maulab_status status) {
  switch (status) {
    case MAULAB_OK: return "ok";
    case MAULAB_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case MAULAB_ERR_CONFIG: return "config";
    case MAULAB_ERR_IO: return "io";
    case MAULAB_ERR_DEPENDENCY: return "dependency";
    case MAULAB_ERR_CONTRACT: return "contract";
    case MAULAB_ERR_DIVERGED: return "diverged";
    case MAULAB_ERR_INTERNAL: return "internal";
  }
  return "internal";
}

const char* maulab_stages(void) {
  return "generate train-vq encode train-detector finetune-corrector detect correct "
         "evaluate report";
}

maulab_status maulab_session_create(maulab_session** out_session) {
  if (!out_session) return MAULAB_ERR_INVALID_ARGUMENT;
  try {
    *out_session = new maulab_session();
    return MAULAB_OK;
  } catch (...) {
    return MAULAB_ERR_INTERNAL;
  }
}

void maulab_session_destroy(maulab_session* session) { delete session; }

maulab_status maulab_session_load_config(maulab_session* session, const char* config_path) {
  if (!config_path) return MAULAB_ERR_INVALID_ARGUMENT;
  return guarded(session, [&]() {
    std::string out_dir = session->config.out_dir();
    session->config = maulab::RunConfig::from_file(config_path);
    if (session->config.out_dir() == "runs/out") session->config.set_out_dir(out_dir);
  });
}

maulab_status maulab_session_set(maulab_session* session, const char* key, const char* value) {
  if (!key || !value) return MAULAB_ERR_INVALID_ARGUMENT;
  return guarded(session, [&]() {
    std::string k = key;
    if (k == "preset") {
      std::string out_dir = session->config.out_dir();
      session->config = maulab::RunConfig::from_preset(value);
      session->config.set_out_dir(out_dir);
    } else if (k == "seed") {
      session->config.set_seed(std::stoull(value));
    } else {
      session->config.set_override(k, value);
    }
  });
}

maulab_status maulab_session_config_json(maulab_session* session, char* buffer,
                                         size_t buffer_size, size_t* required_size) {
  if (!session) return MAULAB_ERR_INVALID_ARGUMENT;
  std::string dump = session->config.params().dump(2);
  size_t needed = dump.size() + 1;
  if (required_size) *required_size = needed;
  if (!buffer || buffer_size < needed) return MAULAB_ERR_INVALID_ARGUMENT;
  std::memcpy(buffer, dump.c_str(), needed);
  return MAULAB_OK;
}

maulab_status maulab_session_run_stage(maulab_session* session, const char* stage) {
  if (!stage) return MAULAB_ERR_INVALID_ARGUMENT;
  return guarded(session, [&]() {
    maulab::Pipeline pipeline(session->config);
    pipeline.run_stage(stage);
  });
}

const char* maulab_session_last_error(const maulab_session* session) {
  return session ? session->last_error.c_str() : "null session";
}

}  // extern "C"
