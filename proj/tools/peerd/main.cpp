// peerd: one peer over UDP/TCP plus the loopback control API.
// Exit codes: 0 clean shutdown, 2 configuration error, 3 bind failure.
#include <chrono>
#include <future>
#include <iostream>
#include <thread>

#include <boost/asio/executor_work_guard.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/signal_set.hpp>

#include <CLI11.hpp>
#include <httplib.h>

#include "collab/peerd/control_api.hpp"
#include "collab/peerd/real_transport.hpp"

namespace asio = boost::asio;
using namespace collab;

namespace {

std::int64_t wall_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

// Runs fn on the protocol loop and waits for its result.
template <typename F>
auto on_loop(asio::io_context& io, F fn) -> decltype(fn()) {
  std::packaged_task<decltype(fn())()> task(std::move(fn));
  auto fut = task.get_future();
  asio::post(io, [&task] { task(); });
  return fut.get();
}

void reply(httplib::Response& res, const peerd::ApiResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peerd: serverless collaboration peer"};
  std::string config_path;
  bool quiet = false;
  app.add_option("-c,--config", config_path, "config file (JSON)")->required();
  app.add_flag("-q,--quiet", quiet, "no startup banner");
  CLI11_PARSE(app, argc, argv);

  peerd::PeerConfig config;
  try {
    auto loaded = peerd::load_config(config_path);
    for (const auto& w : loaded.warnings) std::cerr << "peerd: warning: " << w << "\n";
    config = std::move(loaded.config);
    peerd::validate_paths(config);
  } catch (const Error& e) {
    std::cerr << "peerd: " << e.what() << "\n";
    return 2;
  }

  asio::io_context io;
  std::unique_ptr<peerd::RealTransport> transport;
  try {
    transport = std::make_unique<peerd::RealTransport>(io, config.listen);
  } catch (const Error& e) {
    std::cerr << "peerd: " << e.what() << "\n";
    return e.code() == Errc::config ? 2 : 3;
  }

  httplib::Server http;
  if (!http.bind_to_port("127.0.0.1", config.control_port)) {
    std::cerr << "peerd: cannot bind control port 127.0.0.1:" << config.control_port << "\n";
    return 3;
  }

  auto rng = std::make_shared<crypto::SystemRandom>();
  std::unique_ptr<peerd::Peer> peer;
  try {
    auto subject = config.display_name.empty() ? std::string("peer") : config.display_name;
    auto id = peerd::load_or_create_identity(config.identity_path, subject, *rng, wall_ms());
    peerd::PeerRuntime rt;
    rt.rng = rng;
    peer = std::make_unique<peerd::Peer>(*transport, std::move(id), config, rt);
  } catch (const Error& e) {
    std::cerr << "peerd: identity: " << e.what() << "\n";
    return 2;
  }
  peerd::ControlApi api(*peer);

  auto work = asio::make_work_guard(io);
  std::thread loop([&] { io.run(); });
  on_loop(io, [&] {
    peer->start();
    return 0;
  });

  asio::signal_set signals(io, SIGINT, SIGTERM);
  signals.async_wait([&](const boost::system::error_code&, int) { http.stop(); });

  auto to_request = [](const httplib::Request& req) {
    peerd::ApiRequest r{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) r.query[k] = v;
    return r;
  };
  auto dispatch = [&](const httplib::Request& req, httplib::Response& res) {
    auto r = to_request(req);
    reply(res, on_loop(io, [&] { return api.handle(r); }));
  };
  // Long poll: block off-loop until something newer than `since` exists.
  http.Get("/api/events", [&](const httplib::Request& req, httplib::Response& res) {
    auto r = to_request(req);
    std::uint64_t since = 0;
    long wait_ms = 25'000;
    try {
      if (r.query.contains("since")) since = std::stoull(r.query["since"]);
      if (r.query.contains("wait")) wait_ms = std::clamp(std::stol(r.query["wait"]), 0L, 60'000L);
    } catch (const std::exception&) {
      res.status = 400;
      res.set_content(R"({"error":"bad since/wait"})", "application/json");
      return;
    }
    if (peer->events().last_seq() <= since) peer->events().wait(since, std::chrono::milliseconds(wait_ms));
    reply(res, api.handle(r));
  });
  for (const auto* pattern : {R"(/api/.*)"}) {
    http.Get(pattern, dispatch);
    http.Post(pattern, dispatch);
    http.Put(pattern, dispatch);
    http.Delete(pattern, dispatch);
  }
  http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    res.status = 500;
    res.set_content(R"({"error":"internal"})", "application/json");
  });

  if (!quiet) {
    std::cerr << "peerd: " << identity::fingerprint_hex(peer->node().identity().fingerprint()) << " on " << transport->local_addr().to_string()
              << ", control http://127.0.0.1:" << config.control_port << "\n";
  }
  http.listen_after_bind();

  on_loop(io, [&] {
    peer->save_state();
    peer.reset();
    transport.reset();
    signals.cancel();
    return 0;
  });
  work.reset();
  io.stop();
  loop.join();
  return 0;
}
