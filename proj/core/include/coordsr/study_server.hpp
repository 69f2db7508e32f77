#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "coordsr/study.hpp"

namespace coordsr {

struct StudyServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path study_dir;  // serves <study_dir>/pairs at /pairs
  std::filesystem::path ui_dir;     // optional static UI bundle at /
};

/// HTTP front end for a StudyService.
class StudyServer {
 public:
  StudyServer(StudyService& service, StudyServerOptions opt);
  ~StudyServer();
  StudyServer(const StudyServer&) = delete;
  StudyServer& operator=(const StudyServer&) = delete;

  /// Binds the socket; returns the bound port. Throws on failure.
  int bind();
  /// Serves until stop(); call bind() first.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace coordsr
