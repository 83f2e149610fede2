// peerctl: thin command-line client of a running peerd's control API.
#include <chrono>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

using nlohmann::json;

namespace {

struct Client {
  std::string host = "127.0.0.1";
  int port = 7777;

  // Prints nothing; returns the parsed body or exits non-zero on failure.
  json call(const std::string& method, const std::string& path, const json& body = nullptr) const {
    httplib::Client cli(host, port);
    cli.set_read_timeout(30, 0);
    httplib::Result res = method == "GET" ? cli.Get(path.c_str())
                                          : cli.Post(path.c_str(), body.is_null() ? std::string("{}") : body.dump(), "application/json");
    if (!res) {
      std::cerr << "peerctl: cannot reach peerd at " << host << ":" << port << " (" << httplib::to_string(res.error()) << ")\n";
      std::exit(3);
    }
    json out = json::parse(res->body, nullptr, false);
    if (res->status >= 400) {
      std::cerr << "peerctl: " << res->status << " " << (out.is_object() ? out.value("error", std::string()) + ": " + out.value("detail", res->body) : res->body) << "\n";
      std::exit(1);
    }
    return out;
  }
};

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peerctl: talk to a local peerd"};
  app.require_subcommand(1);
  Client c;
  std::string daemon = "127.0.0.1:7777";
  app.add_option("-d,--daemon", daemon, "control address host:port");

  auto* roster = app.add_subcommand("roster", "who is online");

  auto* venues = app.add_subcommand("venues", "list venues, or create one with --create");
  std::string create_name;
  bool private_venue = false;
  venues->add_option("--create", create_name, "new venue name");
  venues->add_flag("--private", private_venue, "invitation only");

  auto* say = app.add_subcommand("say", "post to a venue (no text: show transcript)");
  std::string venue;
  std::string text;
  say->add_option("venue", venue, "venue id")->required();
  say->add_option("text", text, "message");

  auto* note = app.add_subcommand("note", "leave a note (no args: show notes)");
  std::string recipient;
  note->add_option("recipient", recipient, "recipient fingerprint");
  note->add_option("text", text, "note body");

  auto* share = app.add_subcommand("share", "share a file (no path: list shares)");
  std::string share_path;
  std::vector<std::string> tags;
  share->add_option("path", share_path, "file to share");
  share->add_option("-t,--tag", tags, "tag (repeatable)");

  auto* search = app.add_subcommand("search", "search the lobby and print hits");
  std::vector<std::string> terms;
  int wait_ms = 2000;
  search->add_option("terms", terms, "search terms")->required();
  search->add_option("-w,--wait", wait_ms, "milliseconds to collect hits");

  auto* get = app.add_subcommand("get", "fetch a hit");
  std::string query_id, entry_id, responder, dest;
  get->add_option("query_id", query_id)->required();
  get->add_option("entry_id", entry_id)->required();
  get->add_option("--responder", responder, "responder fingerprint when several peers hold the entry");
  get->add_option("--dest", dest, "destination path");

  auto* transfers = app.add_subcommand("transfers", "list transfers");

  CLI11_PARSE(app, argc, argv);
  if (auto colon = daemon.rfind(':'); colon != std::string::npos) {
    c.host = daemon.substr(0, colon);
    c.port = std::stoi(daemon.substr(colon + 1));
  }

  if (*roster) print(c.call("GET", "/api/roster"));
  if (*venues) {
    if (create_name.empty()) print(c.call("GET", "/api/venues"));
    else print(c.call("POST", "/api/venues", {{"name", create_name}, {"visibility", private_venue ? "PRIVATE" : "PUBLIC"}}));
  }
  if (*say) {
    auto path = "/api/venues/" + venue + "/messages";
    print(text.empty() ? c.call("GET", path) : c.call("POST", path, {{"body", text}}));
  }
  if (*note) {
    if (recipient.empty()) print(c.call("GET", "/api/notes"));
    else print(c.call("POST", "/api/notes", {{"recipient", recipient}, {"body", text}}));
  }
  if (*share) {
    if (share_path.empty()) print(c.call("GET", "/api/shares"));
    else print(c.call("POST", "/api/shares", {{"path", share_path}, {"tags", tags}}));
  }
  if (*search) {
    std::string q;
    for (const auto& t : terms) q += (q.empty() ? "" : " ") + t;
    auto id = c.call("POST", "/api/search", {{"q", q}}).at("query_id").get<std::string>();
    std::this_thread::sleep_for(std::chrono::milliseconds(wait_ms));
    print(json{{"query_id", id}, {"hits", c.call("GET", "/api/search/" + id + "/hits")}});
  }
  if (*get) {
    json body{{"query_id", query_id}, {"entry_id", entry_id}};
    if (!responder.empty()) body["responder"] = responder;
    if (!dest.empty()) body["dest"] = dest;
    print(c.call("POST", "/api/transfers", body));
  }
  if (*transfers) print(c.call("GET", "/api/transfers"));
  return 0;
}
