// Command-line front end over the maulab C API. Each subcommand runs one
// pipeline stage against an output directory.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maulab.h"

namespace {

struct SessionDeleter {
  void operator()(maulab_session* s) const { maulab_session_destroy(s); }
};
using SessionPtr = std::unique_ptr<maulab_session, SessionDeleter>;

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  return out;
}

int fail_with(const maulab_session* session, maulab_status status, const std::string& stage) {
  // One machine-readable error line on stderr.
  std::fprintf(stderr, "{\"error\":{\"stage\":\"%s\",\"status\":\"%s\",\"message\":\"%s\"}}\n",
               stage.c_str(), maulab_status_name(status),
               json_escape(maulab_session_last_error(session)).c_str());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masked acoustic-unit mispronunciation detection and correction pipeline"};
  app.set_version_flag("--version", maulab_version());
  app.require_subcommand(1);

  std::string config_path, preset, out_dir;
  std::vector<std::string> overrides;
  long long seed = -1;
  bool print_config = false;
  app.add_option("--config", config_path, "JSON config file merged over the preset")
      ->check(CLI::ExistingFile);
  app.add_option("--preset", preset, "configuration preset")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--seed", seed, "global seed for the whole pipeline");
  app.add_option("--out", out_dir, "output directory for artifacts");
  app.add_option("--set", overrides, "override a parameter, e.g. --set vq.codebook_size=32");
  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");

  std::vector<std::string> stages = {"generate",           "train-vq", "encode",
                                     "train-detector",     "finetune-corrector",
                                     "detect",             "correct",  "evaluate",
                                     "report"};
  std::string selected;
  for (const std::string& stage : stages) {
    CLI::App* sub = app.add_subcommand(stage);
    sub->callback([&selected, stage]() { selected = stage; });
  }

  CLI11_PARSE(app, argc, argv);

  maulab_session* raw = nullptr;
  if (maulab_session_create(&raw) != MAULAB_OK) {
    std::fprintf(stderr, "{\"error\":{\"stage\":\"init\",\"status\":\"internal\","
                         "\"message\":\"cannot create session\"}}\n");
    return 1;
  }
  SessionPtr session(raw);

  maulab_status status = MAULAB_OK;
  if (!preset.empty() &&
      (status = maulab_session_set(session.get(), "preset", preset.c_str())) != MAULAB_OK)
    return fail_with(session.get(), status, selected);
  if (!config_path.empty() &&
      (status = maulab_session_load_config(session.get(), config_path.c_str())) != MAULAB_OK)
    return fail_with(session.get(), status, selected);
  if (seed >= 0) {
    std::string value = std::to_string(seed);
    if ((status = maulab_session_set(session.get(), "seed", value.c_str())) != MAULAB_OK)
      return fail_with(session.get(), status, selected);
  }
  if (!out_dir.empty() &&
      (status = maulab_session_set(session.get(), "out_dir", out_dir.c_str())) != MAULAB_OK)
    return fail_with(session.get(), status, selected);
  for (const std::string& kv : overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "{\"error\":{\"stage\":\"%s\",\"status\":\"invalid_argument\","
                           "\"message\":\"--set expects key=value, got %s\"}}\n",
                   selected.c_str(), json_escape(kv).c_str());
      return 1;
    }
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if ((status = maulab_session_set(session.get(), key.c_str(), value.c_str())) != MAULAB_OK)
      return fail_with(session.get(), status, selected);
  }

  if (print_config) {
    size_t needed = 0;
    maulab_session_config_json(session.get(), nullptr, 0, &needed);
    std::vector<char> buffer(needed);
    if ((status = maulab_session_config_json(session.get(), buffer.data(), buffer.size(),
                                             &needed)) != MAULAB_OK)
      return fail_with(session.get(), status, selected);
    std::printf("%s\n", buffer.data());
    return 0;
  }

  if ((status = maulab_session_run_stage(session.get(), selected.c_str())) != MAULAB_OK)
    return fail_with(session.get(), status, selected);
  std::printf("%s: done\n", selected.c_str());
  return 0;
}
