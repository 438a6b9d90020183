// SPDX-License-Identifier: Apache-2.0
#include "vnfscale/io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vnfscale/error.hpp"

namespace vnfscale::io {

void expect_fields(const Json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) throw Error(Errc::ParseError, what + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) throw Error(Errc::ParseError, what + ": unknown field '" + key + "'");
  }
  for (const char* a : allowed)
    if (!j.contains(a)) throw Error(Errc::ParseError, what + ": missing field '" + std::string(a) + "'");
}

namespace {

template <typename T>
T get_as(const Json& j, const char* key, const std::string& what) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, what + "." + key + ": " + e.what());
  }
}

}  // namespace

Json to_json(const NetworkTopology& t) {
  Json nodes = Json::array();
  for (const auto& n : t.nodes) nodes.push_back({{"id", n.id}, {"deployable", n.deployable}});
  Json links = Json::array();
  for (const auto& l : t.links) links.push_back({{"u", l.u}, {"v", l.v}, {"latency_ms", l.latency_ms}});
  return Json{{"name", t.name}, {"nodes", nodes}, {"links", links}};
}

NetworkTopology topology_from_json(const Json& j) {
  expect_fields(j, {"name", "nodes", "links"}, "topology");
  NetworkTopology t;
  t.name = get_as<std::string>(j, "name", "topology");
  for (const auto& n : j.at("nodes")) {
    expect_fields(n, {"id", "deployable"}, "topology.nodes[]");
    t.nodes.push_back({get_as<int>(n, "id", "node"), get_as<bool>(n, "deployable", "node")});
  }
  for (const auto& l : j.at("links")) {
    expect_fields(l, {"u", "v", "latency_ms"}, "topology.links[]");
    t.links.push_back({get_as<int>(l, "u", "link"), get_as<int>(l, "v", "link"), get_as<double>(l, "latency_ms", "link")});
  }
  return t;
}

Json to_json(const SfcRequest& r) {
  Json chain = Json::array();
  for (VnfType v : r.chain) chain.push_back(std::string(vnf_name(v)));
  return Json{{"id", r.id}, {"ingress", r.ingress}, {"egress", r.egress}, {"chain", chain}, {"sla_ms", r.sla_ms}};
}

SfcRequest request_from_json(const Json& j) {
  expect_fields(j, {"id", "ingress", "egress", "chain", "sla_ms"}, "request");
  SfcRequest r;
  r.id = get_as<int>(j, "id", "request");
  r.ingress = get_as<int>(j, "ingress", "request");
  r.egress = get_as<int>(j, "egress", "request");
  r.sla_ms = get_as<double>(j, "sla_ms", "request");
  for (const auto& name : j.at("chain")) {
    if (!name.is_string()) throw Error(Errc::ParseError, "request.chain entries must be type names");
    auto v = parse_vnf(name.get<std::string>());
    if (!v) throw Error(Errc::ParseError, "unknown VNF type '" + name.get<std::string>() + "'");
    r.chain.push_back(*v);
  }
  return r;
}

Json to_json(const Deployment& d) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < d.nodes(); ++i) {
    Json row = Json::array();
    for (std::size_t v = 0; v < kNumVnfTypes; ++v) row.push_back(d.at(static_cast<int>(i), v));
    rows.push_back(row);
  }
  return rows;
}

Deployment deployment_from_json(const Json& j) {
  if (!j.is_array()) throw Error(Errc::ParseError, "deployment: expected a matrix");
  Deployment d(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != kNumVnfTypes)
      throw Error(Errc::ParseError, "deployment row " + std::to_string(i) + " must have 5 entries");
    for (std::size_t v = 0; v < kNumVnfTypes; ++v) {
      if (!j[i][v].is_number_integer()) throw Error(Errc::ParseError, "deployment entries must be integers");
      d.at(static_cast<int>(i), v) = j[i][v].get<int>();
    }
  }
  return d;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

NetworkTopology read_topology(const std::filesystem::path& path) { return topology_from_json(read_json(path)); }

void write_topology(const std::filesystem::path& path, const NetworkTopology& t) { write_json(path, to_json(t)); }

std::vector<SfcRequest> read_requests(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<SfcRequest> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(request_from_json(Json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_requests(const std::filesystem::path& path, const std::vector<SfcRequest>& requests) {
  std::ostringstream os;
  for (const auto& r : requests) os << to_json(r).dump() << "\n";
  write_text(path, os.str());
}

}  // namespace vnfscale::io
