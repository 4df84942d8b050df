// HTTP front end for the workflow service. JSON request/response on /v1/...,
// plus a server-sent-events pose stream on
// GET /v1/sessions/{id}/navigation/stream.
#include "igss/error.hpp"
#include "igss/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <iostream>

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

igss::Request to_request(const httplib::Request& req) {
  igss::Request r;
  r.method = req.method;
  r.path = req.path;
  r.body = req.body;
  for (const auto& [k, v] : req.params) r.query[k] = v;
  return r;
}

void write_response(const igss::Response& in, httplib::Response& out) {
  out.status = in.status;
  out.set_content(in.body, in.content_type);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image-guided spine surgery workflow service"};
  int port = 8080;
  std::string host = "127.0.0.1", data_dir = "data", config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--port", port, "listen port")->check(CLI::Range(1, 65535));
  app.add_option("--host", host, "listen address");
  app.add_option("--data-dir", data_dir, "directory holding one event log per session");
  app.add_option("--seed", seed, "seed for simulated tracker noise");
  app.add_option("--config", config_path, "service config JSON")->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  try {
    igss::ServiceConfig cfg = config_path.empty() ? igss::ServiceConfig{} : igss::load_service_config(config_path);
    cfg.data_dir = data_dir;
    if (seed) cfg.seed = *seed;
    igss::Service service(cfg);

    httplib::Server server;
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    server.Get(R"(/v1/sessions/([A-Za-z0-9_-]+)/navigation/stream)",
               [&](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 std::shared_ptr<igss::Subscription> sub;
                 try {
                   sub = service.subscribe(id);
                 } catch (const igss::Error& e) {
                   res.status = igss::http_status(e.kind());
                   res.set_content(std::string(R"({"schema_version":1,"error":")") +
                                       std::string(igss::to_string(e.kind())) + R"(","message":"stream unavailable"})",
                                   "application/json");
                   return;
                 }
                 res.set_chunked_content_provider("text/event-stream", [sub, id](std::size_t, httplib::DataSink& sink) {
                   if (sub->closed()) {
                     sink.done();
                     return true;
                   }
                   if (auto f = sub->pop(std::chrono::milliseconds(500))) {
                     const std::string msg = "data: " + igss::serialize_navigation_frame(id, *f) + "\n\n";
                     if (!sink.write(msg.data(), msg.size())) return false;
                   } else {
                     static const std::string ping = ": keep-alive\n\n";
                     if (!sink.write(ping.data(), ping.size())) return false;
                   }
                   return true;
                 });
               });

    const auto forward = [&](const httplib::Request& req, httplib::Response& res) {
      write_response(service.handle(to_request(req)), res);
    };
    server.Get(".*", forward);
    server.Post(".*", forward);
    server.Put(".*", forward);
    server.Delete(".*", forward);

    std::cout << "listening on " << host << ':' << port << ", data in " << data_dir << ", "
              << service.session_ids().size() << " session(s) restored" << std::endl;
    if (!server.listen(host, port)) {
      std::cerr << "error: cannot listen on " << host << ':' << port << '\n';
      return 1;
    }
  } catch (const igss::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
