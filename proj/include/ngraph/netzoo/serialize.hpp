#pragma once

#include <string>

#include "ngraph/netzoo/checkpoint.hpp"
#include "ngraph/util/json_fields.hpp"

namespace ngraph::zoo {

/// JSON document {version: 1, spec: [...], params: [...], metadata: {...}}
/// with parameters stored as base64 little-endian float64 blobs.
util::Json spec_to_json(const LayerSpec& s);
/// `path` prefixes error messages, e.g. "spec[2]".
LayerSpec spec_from_json(const util::Json& j, const std::string& path);

std::string checkpoint_to_json(const Checkpoint& net);
/// Throws util::FormatError (with byte offset or field path) for malformed
/// input, including unknown activation ids.
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const Checkpoint& net, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ngraph::zoo
