#include "slapseg/annosvc/server.hpp"

#include <fstream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "slapseg/common/error.hpp"

namespace slapseg::anno {

namespace {

using nlohmann::json;

json task_summary(const AnnotationTask& t) {
  return {{"slap_id", t.slap_id}, {"cohort", synth::to_string(t.cohort)}, {"hand", synth::to_string(t.hand)},
          {"stage", to_string(t.stage)}, {"version", t.version}};
}

json task_detail(const AnnotationTask& t) {
  json boxes = json::array();
  for (const ProposedBox& b : t.boxes) {
    boxes.push_back({{"box", {b.box.left, b.box.top, b.box.right, b.box.bottom}},
                     {"label", synth::to_string(b.label)},
                     {"source", to_string(b.source)}});
  }
  json j = task_summary(t);
  j["subject_id"] = t.subject_id;
  j["image_width"] = t.image_width;
  j["image_height"] = t.image_height;
  j["proposed_angle"] = t.proposed_angle;
  j["verified_angle"] = t.verified_angle ? json(*t.verified_angle) : json(nullptr);
  j["boxes"] = boxes;
  j["image"] = "/slaps/" + t.slap_id + "/image";
  return j;
}

void send_error(httplib::Response& res, int status, const char* code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(), "application/json");
}

void send_json(httplib::Response& res, const json& j) { res.set_content(j.dump(), "application/json"); }

/// Runs a handler and turns library errors into coded error payloads.
template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const NotFoundError& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const ConflictError& e) {
      send_error(res, 409, "conflict", e.what());
    } catch (const ValidationError& e) {
      send_error(res, 400, "validation", e.what());
    } catch (const ParseError& e) {
      send_error(res, 400, "validation", e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "validation", std::string("malformed request: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

json body_of(const httplib::Request& req) {
  json j = json::parse(req.body);
  if (!j.is_object()) throw ValidationError("request body must be a JSON object");
  return j;
}

}  // namespace

struct AnnotationServer::Impl {
  AnnotationStore& store;
  ServerConfig cfg;
  httplib::Server http;
  int port = -1;

  Impl(AnnotationStore& s, ServerConfig c) : store(s), cfg(std::move(c)) {}

  void routes() {
    http.Get("/tasks", guarded([this](const httplib::Request& req, httplib::Response& res) {
      TaskFilter f;
      if (req.has_param("stage")) f.stage = parse_stage(req.get_param_value("stage"));
      if (req.has_param("cohort")) f.cohort = synth::parse_cohort(req.get_param_value("cohort"));
      if (req.has_param("cursor")) f.cursor = req.get_param_value("cursor");
      if (req.has_param("limit")) {
        const std::string v = req.get_param_value("limit");
        std::size_t used = 0;
        long n = 0;
        try {
          n = std::stol(v, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != v.size() || n <= 0) throw ValidationError("limit must be a positive integer");
        f.limit = static_cast<std::size_t>(n);
      }
      const TaskPage page = store.list_tasks(f);
      json tasks = json::array();
      for (const AnnotationTask& t : page.tasks) tasks.push_back(task_summary(t));
      send_json(res, {{"tasks", tasks}, {"next_cursor", page.next_cursor.empty() ? json(nullptr) : json(page.next_cursor)}});
    }));
    http.Get(R"(/tasks/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, task_detail(store.get_task(req.matches[1])));
    }));
    http.Get(R"(/slaps/([^/]+)/image)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::ifstream in(store.image_path(req.matches[1]), std::ios::binary);
      if (!in) throw NotFoundError("image for '" + std::string(req.matches[1]) + "' is missing");
      std::ostringstream bytes;
      bytes << in.rdbuf();
      res.set_content(bytes.str(), "image/png");
    }));
    http.Post(R"(/tasks/([^/]+)/rotation)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json b = body_of(req);
      const int v = store.submit_rotation(req.matches[1], b.at("angle").get<double>(),
                                          b.value("annotator", std::string()), b.value("timestamp", std::string()));
      send_json(res, {{"version", v}});
    }));
    http.Post(R"(/tasks/([^/]+)/boxes)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json b = body_of(req);
      Correction c;
      c.base_version = b.at("base_version").get<int>();
      c.annotator = b.value("annotator", std::string());
      c.timestamp = b.value("timestamp", std::string());
      c.finalize = b.value("finalize", true);
      for (const json& e : b.value("edits", json::array())) {
        BoxEdit ed;
        const long idx = e.at("index").get<long>();
        if (idx < 0) throw ValidationError("edit index must be non-negative");
        ed.index = static_cast<std::size_t>(idx);
        const json& box = e.at("box");
        if (!box.is_array() || box.size() != 4) throw ValidationError("box must be [left, top, right, bottom]");
        ed.box = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(), box[3].get<double>()};
        if (e.contains("label")) ed.label = synth::parse_finger_label(e.at("label").get<std::string>());
        c.edits.push_back(ed);
      }
      send_json(res, {{"version", store.submit_boxes(req.matches[1], c)}});
    }));
    http.Get("/export", guarded([this](const httplib::Request&, httplib::Response& res) {
      if (cfg.export_dir.empty()) throw ValidationError("server has no export directory");
      const ExportResult r = store.export_annotations(cfg.export_dir);
      send_json(res, {{"manifest", r.manifest_path.string()},
                      {"slaps", r.manifest.slaps.size()},
                      {"warning", r.warning ? json(*r.warning) : json(nullptr)}});
    }));
    if (!cfg.static_dir.empty() && !http.set_mount_point("/ui", cfg.static_dir.string())) {
      throw ValidationError("static directory " + cfg.static_dir.string() + " does not exist");
    }
  }
};

AnnotationServer::AnnotationServer(AnnotationStore& store, ServerConfig cfg)
    : impl_(std::make_unique<Impl>(store, std::move(cfg))) {
  impl_->routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind() {
  if (impl_->cfg.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(impl_->cfg.host);
  } else if (impl_->http.bind_to_port(impl_->cfg.host, impl_->cfg.port)) {
    impl_->port = impl_->cfg.port;
  }
  if (impl_->port <= 0) throw IoError("cannot bind " + impl_->cfg.host + ":" + std::to_string(impl_->cfg.port));
  return impl_->port;
}

void AnnotationServer::serve() {
  if (impl_->port <= 0) bind();
  impl_->http.listen_after_bind();
}

void AnnotationServer::stop() {
  if (impl_) impl_->http.stop();
}

}  // namespace slapseg::anno
