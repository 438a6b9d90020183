// SPDX-License-Identifier: Apache-2.0
//
// Structured-text (JSON) persistence for topologies, requests and deployments.
// Readers reject unknown or missing fields.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vnfscale/net_model.hpp"

namespace vnfscale::io {

using Json = nlohmann::ordered_json;

Json to_json(const NetworkTopology& t);
NetworkTopology topology_from_json(const Json& j);

Json to_json(const SfcRequest& r);
SfcRequest request_from_json(const Json& j);

/// Integer matrix [node][vnf].
Json to_json(const Deployment& d);
Deployment deployment_from_json(const Json& j);

NetworkTopology read_topology(const std::filesystem::path& path);
void write_topology(const std::filesystem::path& path, const NetworkTopology& t);

/// One JSON object per line.
std::vector<SfcRequest> read_requests(const std::filesystem::path& path);
void write_requests(const std::filesystem::path& path, const std::vector<SfcRequest>& requests);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed, trailing newline; byte-stable for identical input.
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Throws ParseError if `j` has keys outside `allowed` or misses one of them.
void expect_fields(const Json& j, std::initializer_list<const char*> allowed, const std::string& what);

}  // namespace vnfscale::io
