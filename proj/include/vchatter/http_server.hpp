#pragma once

#include <string>

namespace httplib {
class Server;
}

namespace vchatter::service {

class Service;

/// Mounts the REST routes. Chat routes stream server-sent events
/// (`event: chunk`, then `event: envelope` or `event: error`) when the client
/// sends `Accept: text/event-stream` or `?stream=1`; otherwise they answer
/// with one JSON document.
void register_routes(httplib::Server& server, Service& service);

/// Blocks serving on host:port.
bool serve(Service& service, const std::string& host, int port);

}  // namespace vchatter::service
