#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "slapseg/annosvc/store.hpp"

namespace slapseg::anno {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// GET /export writes here.
  std::filesystem::path export_dir;
  /// Optional static client mounted at /ui.
  std::filesystem::path static_dir;
};

/// JSON over HTTP:
///   GET  /tasks?stage=&cohort=&cursor=&limit=
///   GET  /tasks/{slap_id}
///   GET  /slaps/{slap_id}/image            (PNG)
///   POST /tasks/{slap_id}/rotation  {"angle", "annotator", "timestamp"}
///   POST /tasks/{slap_id}/boxes     {"base_version", "edits": [{"index", "box", "label"}],
///                                    "annotator", "timestamp", "finalize"}
///   GET  /export
/// Errors answer {"error": {"code": not_found|conflict|validation, "message"}}
/// with status 404, 409 or 400.
class AnnotationServer {
 public:
  AnnotationServer(AnnotationStore& store, ServerConfig cfg);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds the configured port, or any free port when it is 0. Returns the
  /// bound port.
  int bind();
  /// Blocks serving requests until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace slapseg::anno
