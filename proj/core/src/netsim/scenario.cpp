#include "collab/netsim/scenario.hpp"

#include <fstream>

#include "collab/common/error.hpp"

namespace collab::netsim {

using nlohmann::json;

EndpointAddr addr_from_json(const json& v) {
  if (v.is_number_unsigned() || v.is_number_integer()) return EndpointAddr::sim(v.get<std::uint32_t>());
  if (v.is_string()) return EndpointAddr::parse(v.get<std::string>());
  throw Error(Errc::config, "address must be a node number or an address string");
}

namespace {

PartitionGroups groups_from_json(const json& v) {
  PartitionGroups groups;
  for (const auto& g : v) {
    std::set<EndpointAddr> members;
    for (const auto& a : g) members.insert(addr_from_json(a));
    groups.push_back(std::move(members));
  }
  return groups;
}

template <typename T>
T field_or(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::config, std::string("scenario field '") + key + "' has the wrong type");
  }
}

}  // namespace

Scenario Scenario::from_json(const json& doc) {
  if (!doc.is_object()) throw Error(Errc::config, "scenario must be a JSON object");
  Scenario s;
  s.seed = field_or<std::uint64_t>(doc, "seed", 0);
  if (auto it = doc.find("policy"); it != doc.end()) {
    const auto& p = *it;
    s.policy.loss_prob = field_or<double>(p, "loss_prob", 0.0);
    s.policy.delay_min = field_or<SimTime>(p, "delay_min_ms", 1);
    s.policy.delay_max = field_or<SimTime>(p, "delay_max_ms", s.policy.delay_min);
    s.policy.duplicate_prob = field_or<double>(p, "duplicate_prob", 0.0);
    s.policy.reorder = field_or<bool>(p, "reorder", true);
    if (auto part = p.find("partition"); part != p.end()) s.policy.partition = groups_from_json(*part);
  }
  if (auto bad = s.policy.invalid_field()) throw Error(Errc::invalid_policy, "invalid policy field: " + *bad);
  if (auto it = doc.find("faults"); it != doc.end()) {
    for (const auto& f : *it) {
      ScheduledFault sf;
      sf.at = field_or<SimTime>(f, "at_ms", 0);
      auto kind = field_or<std::string>(f, "kind", "");
      json args = f.value("args", json::object());
      if (kind == "partition") {
        sf.fault = Fault::partition_of(groups_from_json(args.value("groups", json::array())));
      } else if (kind == "heal") {
        sf.fault = Fault::heal();
      } else if (kind == "set_loss") {
        sf.fault = Fault::set_loss(args.value("p", 0.0));
      } else {
        throw Error(Errc::config, "unknown fault kind '" + kind + "'");
      }
      s.faults.push_back(std::move(sf));
    }
  }
  if (auto it = doc.find("workload"); it != doc.end()) s.workload = *it;
  return s;
}

Scenario Scenario::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open scenario file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(Errc::config, "scenario is not valid JSON: " + std::string(e.what()));
  }
  return from_json(doc);
}

std::unique_ptr<Network> Scenario::make_network() const {
  auto net = std::make_unique<Network>(seed, policy);
  for (const auto& f : faults) net->schedule_fault(f.at, f.fault);
  return net;
}

}  // namespace collab::netsim
