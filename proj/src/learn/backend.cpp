#include "sketchfuzz/learn/backend.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sketchfuzz/core/text.hpp"

namespace sketchfuzz {

using nlohmann::json;

std::string_view to_string(BackendMode mode) {
  switch (mode) {
  case BackendMode::Live: return "live";
  case BackendMode::Replay: return "replay";
  case BackendMode::Null: return "null";
  }
  return "?";
}

std::string prompt_digest(std::string_view prompt) {
  return text::hex64(text::fnv1a(text::collapse_whitespace(prompt)));
}

std::string slugify(std::string_view name) {
  std::string out;
  bool dash = false;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      if (dash && !out.empty())
        out.push_back('-');
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      dash = false;
    } else {
      dash = true;
    }
  }
  if (out.empty())
    out = "x" + text::hex64(text::fnv1a(name)).substr(0, 8);
  return out;
}

Transcript::Transcript(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path())
    std::filesystem::create_directories(path_.parent_path());
}

void Transcript::record(const CompletionRequest& req, const std::string& response) {
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  json j = {{"digest", prompt_digest(req.prompt)},
            {"slug", req.slug},
            {"prompt", req.prompt},
            {"response", response},
            {"timestamp",
             std::chrono::duration_cast<std::chrono::milliseconds>(now).count()}};
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  out << j.dump() << '\n';
}

std::optional<std::string> CompletionBackend::complete(const CompletionRequest& req) {
  ++calls_;
  auto response = do_complete(req);
  if (transcript_)
    transcript_->record(req, response.value_or(""));
  return response;
}

// ---------------------------------------------------------------- replay

ReplayBackend::ReplayBackend(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_))
    throw Error("replay fixture directory not found: " + dir_.string());
}

std::optional<std::string> ReplayBackend::do_complete(const CompletionRequest& req) {
  for (const std::string& name : {prompt_digest(req.prompt), req.slug}) {
    if (name.empty())
      continue;
    const auto path = dir_ / (name + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in)
      continue;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- live

RateLimiter::RateLimiter(double per_second, double burst)
    : rate_(per_second), burst_(burst), tokens_(burst),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  std::unique_lock lock(mutex_);
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    tokens_ = std::min(burst_, tokens_ + rate_ * std::chrono::duration<double>(now - last_).count());
    last_ = now;
    if (tokens_ >= 1) {
      tokens_ -= 1;
      return;
    }
    const auto wait = std::chrono::duration<double>((1 - tokens_) / rate_);
    lock.unlock();
    std::this_thread::sleep_for(wait);
    lock.lock();
  }
}

LiveSettings LiveSettings::from_environment() {
  auto env = [](const char* k) {
    const char* v = std::getenv(k);
    return v ? std::string(v) : std::string();
  };
  LiveSettings s;
  s.endpoint = env("LLM_ENDPOINT");
  s.model = env("LLM_MODEL");
  s.api_key = env("LLM_API_KEY");
  return s;
}

LiveBackend::LiveBackend(LiveSettings settings, std::shared_ptr<RateLimiter> limiter)
    : settings_(std::move(settings)), limiter_(std::move(limiter)) {
  if (settings_.endpoint.empty())
    throw Error("live backend needs LLM_ENDPOINT");
  if (settings_.model.empty())
    throw Error("live backend needs LLM_MODEL");
}

std::optional<std::string> LiveBackend::do_complete(const CompletionRequest& req) {
  // Split "scheme://host[:port]/path".
  const std::string& url = settings_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw BackendUnavailable("malformed LLM_ENDPOINT: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path =
      path_start == std::string::npos ? "/" : url.substr(path_start);

  if (limiter_)
    limiter_->acquire();
  httplib::Client client(origin);
  client.set_read_timeout(settings_.timeout);
  client.set_connection_timeout(std::chrono::seconds(10));
  httplib::Headers headers;
  if (!settings_.api_key.empty())
    headers.emplace("Authorization", "Bearer " + settings_.api_key);
  json body = {{"model", settings_.model},
               {"temperature", 0},
               {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})}};
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res)
    throw BackendUnavailable("completion request failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw BackendUnavailable("completion endpoint returned HTTP " + std::to_string(res->status));
  try {
    auto j = json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendUnavailable(std::string("unexpected completion response: ") + e.what());
  }
}

std::unique_ptr<CompletionBackend> make_backend(std::string_view spec) {
  if (spec == "null" || spec.empty())
    return std::make_unique<NullBackend>();
  if (spec.starts_with("replay:"))
    return std::make_unique<ReplayBackend>(std::filesystem::path(spec.substr(7)));
  if (spec == "live") {
    static auto limiter = std::make_shared<RateLimiter>(1.0, 4.0);
    return std::make_unique<LiveBackend>(LiveSettings::from_environment(), limiter);
  }
  throw Error("unknown backend: " + std::string(spec) +
              " (expected live, replay:<dir> or null)");
}

} // namespace sketchfuzz
