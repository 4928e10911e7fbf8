#include "vchatter/http_server.hpp"

#include <httplib.h>

#include <memory>

#include "vchatter/error.hpp"
#include "vchatter/service.hpp"

namespace vchatter::service {

namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status(e.code()), {{"error", to_json(to_api_error(e))}});
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("request body is not JSON: ") + e.what());
  }
}

bool wants_stream(const httplib::Request& req) {
  if (req.get_param_value("stream") == "1") return true;
  return req.get_header_value("Accept").find("text/event-stream") != std::string::npos;
}

std::string sse(std::string_view event, const json& data) {
  return "event: " + std::string(event) + "\ndata: " + data.dump() + "\n\n";
}

// Runs `call` either as a plain JSON request or as an event stream whose
// chunk texts concatenate to the persisted reply.
template <typename Call>
void chat(const httplib::Request& req, httplib::Response& res, Call call) {
  if (!wants_stream(req)) {
    try {
      send_json(res, 200, to_json(call(provider::ChunkSink{})));
    } catch (const Error& e) {
      send_error(res, e);
    }
    return;
  }
  res.status = 200;
  res.set_header("Cache-Control", "no-cache");
  res.set_chunked_content_provider(
      "text/event-stream", [call](std::size_t, httplib::DataSink& sink) {
        auto emit = [&sink](const std::string& s) { sink.write(s.data(), s.size()); };
        try {
          auto result = call([&](const provider::StreamChunk& c) {
            if (!c.error) emit(sse("chunk", {{"text", c.text}}));
          });
          emit(sse("envelope", to_json(result)));
        } catch (const Error& e) {
          emit(sse("error", to_json(to_api_error(e))));
        }
        sink.done();
        return true;
      });
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", {{"code", "internal"}, {"message", e.what()}, {"retryable", false}}}});
    }
  };
}

}  // namespace

void register_routes(httplib::Server& server, Service& svc) {
  server.Post("/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const json body = body_of(req);
                const std::string id =
                    svc.create_session(body.value("pseudonym", ""), body.value("opt_in", false));
                send_json(res, 201, {{"session_id", id}, {"state", protocol::to_json(svc.get_session(id))}});
              }));

  server.Get("/sessions/:id", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, svc.session_view(req.path_params.at("id")));
             }));

  server.Post("/sessions/:id/therapist/messages",
              guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const json body = body_of(req);
                const std::string id = req.path_params.at("id");
                const std::string text = body.value("text", "");
                const bool finish = body.value("finish", false);
                chat(req, res, [&svc, id, text, finish](const provider::ChunkSink& sink) {
                  return svc.post_therapist_message(id, text, finish, sink);
                });
              }));

  server.Post("/sessions/:id/plan/confirm",
              guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const json body = body_of(req);
                const auto edits = plan_edits_from_json(body.value("edits", json(nullptr)));
                auto out = svc.confirm_plan(req.path_params.at("id"), edits);
                json j{{"state", protocol::to_json(out.state)}};
                if (!out.warnings.empty()) j["warnings"] = out.warnings;
                send_json(res, 200, j);
              }));

  server.Post("/sessions/:id/scenario/:slot/messages",
              guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const json body = body_of(req);
                const std::string id = req.path_params.at("id");
                int slot = 0;
                try {
                  slot = std::stoi(req.path_params.at("slot"));
                } catch (const std::exception&) {
                  throw Error(ErrorCode::Validation, "slot must be an integer");
                }
                const std::string text = body.value("text", "");
                const bool help = body.value("help", false);
                chat(req, res, [&svc, id, slot, text, help](const provider::ChunkSink& sink) {
                  return svc.post_scenario_message(id, slot, text, help, sink);
                });
              }));

  server.Post("/sessions/:id/task", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                const json body = body_of(req);
                const std::string id = req.path_params.at("id");
                const std::string o = body.value("outcome", "success");
                if (o != "success" && o != "failed") {
                  throw Error(ErrorCode::Validation, "outcome must be \"success\" or \"failed\"");
                }
                const auto outcome =
                    o == "success" ? protocol::TaskOutcome::Success : protocol::TaskOutcome::Failed;
                const std::string summary = body.value("summary", "");
                chat(req, res, [&svc, id, outcome, summary](const provider::ChunkSink& sink) {
                  return svc.complete_task(id, outcome, summary, sink);
                });
              }));

  server.Post("/sessions/:id/scales/:instrument/:timing",
              guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                auto timing = store::parse_timing(req.path_params.at("timing"));
                if (!timing) throw Error(ErrorCode::Validation, "timing must be pre or post");
                auto score = svc.submit_scale(req.path_params.at("id"), req.path_params.at("instrument"),
                                              *timing, body_of(req));
                send_json(res, 200, instruments::to_json(score));
              }));

  server.Get("/outcomes", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
               const auto report = svc.get_outcomes();
               if (req.get_param_value("format") == "text") {
                 res.set_content(stats::render_table(report), "text/plain; charset=utf-8");
               } else {
                 send_json(res, 200, stats::to_json(report));
               }
             }));

  server.Get("/protocol", guarded([](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, protocol::transition_table_json());
             }));
}

bool serve(Service& svc, const std::string& host, int port) {
  httplib::Server server;
  register_routes(server, svc);
  return server.listen(host, port);
}

}  // namespace vchatter::service
