#include "lsdat/oracle.hpp"

#include <fstream>
#include <limits>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "lsdat/errors.hpp"
#include "lsdat/log.hpp"

namespace lsdat {

namespace {

using nlohmann::json;

// Splits "http://host:port" into a httplib client base and keeps any
// path prefix so reverse-proxied endpoints still work.
struct ParsedUrl {
  std::string base;
  std::string path_prefix;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("remote oracle url must include a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, ""};
  }
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') {
    prefix.pop_back();
  }
  return {url.substr(0, path_start), prefix};
}

}  // namespace

LinearOracle::LinearOracle(std::vector<std::vector<double>> weights, std::vector<double> biases)
    : weights_(std::move(weights)), biases_(std::move(biases)) {
  if (weights_.empty()) {
    throw ConfigError("linear oracle needs at least one class");
  }
  if (biases_.size() != weights_.size()) {
    throw ConfigError("linear oracle weight/bias count mismatch");
  }
  const std::size_t dim = weights_.front().size();
  for (const auto& row : weights_) {
    if (row.size() != dim) {
      throw ConfigError("linear oracle weight rows must share one length");
    }
  }
}

Label LinearOracle::classify(const ImageTensor& img) {
  if (img.data.size() != weights_.front().size()) {
    throw OracleError("linear oracle input size mismatch: got " +
                      std::to_string(img.data.size()) + ", expected " +
                      std::to_string(weights_.front().size()));
  }
  Label best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    double score = biases_[c];
    const auto& row = weights_[c];
    for (std::size_t i = 0; i < row.size(); ++i) {
      score += row[i] * img.data[i];
    }
    if (score > best_score) {
      best_score = score;
      best = static_cast<Label>(c);
    }
  }
  return best;
}

CentroidOracle::CentroidOracle(std::vector<ImageTensor> centroids)
    : centroids_(std::move(centroids)) {
  if (centroids_.empty()) {
    throw ConfigError("centroid oracle needs at least one class");
  }
  for (const auto& c : centroids_) {
    if (!c.same_shape(centroids_.front())) {
      throw ConfigError("centroid oracle centroids must share one shape");
    }
  }
}

Label CentroidOracle::classify(const ImageTensor& img) {
  if (!img.same_shape(centroids_.front())) {
    throw OracleError("centroid oracle input shape mismatch");
  }
  Label best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids_.size(); ++c) {
    double dist = 0.0;
    const auto& ref = centroids_[c].data;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const double d = img.data[i] - ref[i];
      dist += d * d;
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<Label>(c);
    }
  }
  return best;
}

RemoteOracle::RemoteOracle(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.class_count < 1) {
    throw ConfigError("remote oracle class_count must be positive");
  }
  parse_url(cfg_.url);  // validate eagerly
}

Label RemoteOracle::classify(const ImageTensor& img) {
  const ParsedUrl parsed = parse_url(cfg_.url);

  json body;
  body["height"] = img.height;
  body["width"] = img.width;
  body["channels"] = img.channels;
  body["pixels"] = img.data;
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    httplib::Client client(parsed.base);
    client.set_connection_timeout(0, cfg_.timeout_ms * 1000);
    client.set_read_timeout(0, cfg_.timeout_ms * 1000);
    client.set_write_timeout(0, cfg_.timeout_ms * 1000);

    auto res = client.Post(parsed.path_prefix + "/classify", payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      LSDAT_LOG_WARN("remote oracle attempt %d/%d failed: %s", attempt + 1, cfg_.retries + 1,
                     last_error.c_str());
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status);
      LSDAT_LOG_WARN("remote oracle attempt %d/%d failed: %s", attempt + 1, cfg_.retries + 1,
                     last_error.c_str());
      continue;
    }
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception& e) {
      last_error = std::string("bad response body: ") + e.what();
      LSDAT_LOG_WARN("remote oracle attempt %d/%d failed: %s", attempt + 1, cfg_.retries + 1,
                     last_error.c_str());
      continue;
    }
    if (!reply.contains("label") || !reply["label"].is_number_integer()) {
      last_error = "response missing integer \"label\"";
      LSDAT_LOG_WARN("remote oracle attempt %d/%d failed: %s", attempt + 1, cfg_.retries + 1,
                     last_error.c_str());
      continue;
    }
    return reply["label"].get<Label>();
  }
  throw OracleTransportError("remote oracle classify failed after " +
                             std::to_string(cfg_.retries + 1) + " attempts (" + last_error + ")");
}

ReplayOracle::ReplayOracle(std::vector<ReplayEntry> trace, int class_count)
    : trace_(std::move(trace)), class_count_(class_count) {
  if (class_count_ < 1) {
    throw ConfigError("replay oracle class_count must be positive");
  }
}

Label ReplayOracle::classify(const ImageTensor& img) {
  if (position_ >= trace_.size()) {
    throw ReplayError("replay trace exhausted after " + std::to_string(trace_.size()) +
                      " queries");
  }
  const ReplayEntry& entry = trace_[position_];
  const std::uint64_t hash = content_hash(img);
  if (hash != entry.image_hash) {
    throw ReplayError("replay trace diverged at query " + std::to_string(position_) +
                      ": image hash mismatch");
  }
  ++position_;
  return entry.label;
}

std::unique_ptr<Oracle> make_linear_oracle(std::vector<std::vector<double>> weights,
                                           std::vector<double> biases) {
  return std::make_unique<LinearOracle>(std::move(weights), std::move(biases));
}

std::unique_ptr<Oracle> make_centroid_oracle(std::vector<ImageTensor> centroids) {
  return std::make_unique<CentroidOracle>(std::move(centroids));
}

std::unique_ptr<Oracle> make_remote_oracle(RemoteConfig cfg) {
  return std::make_unique<RemoteOracle>(std::move(cfg));
}

void save_trace(const std::filesystem::path& path, const std::vector<ReplayEntry>& trace,
                int class_count) {
  json doc;
  doc["version"] = 1;
  doc["class_count"] = class_count;
  json entries = json::array();
  for (const auto& e : trace) {
    json item;
    item["hash"] = e.image_hash;
    item["label"] = e.label;
    entries.push_back(std::move(item));
  }
  doc["entries"] = std::move(entries);

  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open trace file for writing: " + path.string());
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw IoError("failed writing trace file: " + path.string());
  }
}

std::unique_ptr<ReplayOracle> load_replay_oracle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open trace file: " + path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("malformed trace file " + path.string() + ": " + e.what());
  }
  if (!doc.contains("entries") || !doc["entries"].is_array()) {
    throw IoError("trace file missing \"entries\" array: " + path.string());
  }
  std::vector<ReplayEntry> trace;
  trace.reserve(doc["entries"].size());
  for (const auto& item : doc["entries"]) {
    ReplayEntry e;
    e.image_hash = item.at("hash").get<std::uint64_t>();
    e.label = item.at("label").get<Label>();
    trace.push_back(e);
  }
  const int classes = doc.value("class_count", 2);
  return std::make_unique<ReplayOracle>(std::move(trace), classes);
}

}  // namespace lsdat
