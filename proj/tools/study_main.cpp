#include <csignal>
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "coordsr/errors.hpp"
#include "coordsr/study.hpp"
#include "coordsr/study_server.hpp"

namespace fs = std::filesystem;
using namespace coordsr;

namespace {
StudyServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reader-study HTTP service"};
  StudyServerOptions opt;
  std::string study_dir, key_file, log_file, ui_dir;
  app.add_option("--study-dir", study_dir, "Exported study directory (study.json, pairs/)")->required()->check(CLI::ExistingDirectory);
  app.add_option("--key-file", key_file, "Sealed key JSON; enables the summary endpoint")->check(CLI::ExistingFile);
  app.add_option("--log", log_file, "Response log (default: <study-dir>/responses.jsonl)");
  app.add_option("--ui-dir", ui_dir, "Built UI bundle served at /")->check(CLI::ExistingDirectory);
  app.add_option("--host", opt.host, "Bind address")->capture_default_str();
  app.add_option("--port", opt.port, "Port (0 picks a free one)")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    StudyDescriptor study = load_study(study_dir);
    std::optional<StudyKey> key;
    if (!key_file.empty()) key = load_study_key(key_file);
    const fs::path log = log_file.empty() ? fs::path(study_dir) / "responses.jsonl" : fs::path(log_file);
    StudyService service(std::move(study), std::move(key), log);
    opt.study_dir = study_dir;
    opt.ui_dir = ui_dir;
    StudyServer server(service, opt);
    const int port = server.bind();
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::printf("listening on %s:%d\n", opt.host.c_str(), port);
    std::fflush(stdout);
    server.run();
    g_server = nullptr;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
