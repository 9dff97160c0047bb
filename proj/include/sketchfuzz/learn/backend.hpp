#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "sketchfuzz/core/types.hpp"

namespace sketchfuzz {

class BackendUnavailable : public Error {
public:
  using Error::Error;
};

enum class BackendMode { Live, Replay, Null };
std::string_view to_string(BackendMode mode);

enum class TaskKind { ListFeatures, Summarize, Synthesize };

struct CompletionRequest {
  TaskKind task = TaskKind::Synthesize;
  std::string prompt;
  // Human readable fixture name, e.g. "synth-expression-ceil". Replay mode
  // falls back to <slug>.txt when no digest file exists.
  std::string slug;
};

// Digest of the whitespace-normalized prompt, 16 hex digits.
std::string prompt_digest(std::string_view prompt);
// Lower-case alphanumeric runs joined by '-'; names without letters or
// digits map to "x" plus their digest prefix.
std::string slugify(std::string_view name);

// Append-only JSONL log of every exchange.
class Transcript {
public:
  explicit Transcript(std::filesystem::path path);
  void record(const CompletionRequest& req, const std::string& response);

private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

class CompletionBackend {
public:
  virtual ~CompletionBackend() = default;
  virtual BackendMode mode() const = 0;
  // nullopt when the backend has no answer. Throws BackendUnavailable on
  // transport failures.
  std::optional<std::string> complete(const CompletionRequest& req);
  std::uint64_t calls() const { return calls_; }
  void set_transcript(std::shared_ptr<Transcript> t) { transcript_ = std::move(t); }

protected:
  virtual std::optional<std::string> do_complete(const CompletionRequest& req) = 0;

private:
  std::atomic<std::uint64_t> calls_{0};
  std::shared_ptr<Transcript> transcript_;
};

class NullBackend final : public CompletionBackend {
public:
  BackendMode mode() const override { return BackendMode::Null; }

protected:
  std::optional<std::string> do_complete(const CompletionRequest&) override {
    return std::nullopt;
  }
};

// Answers from files: <digest>.txt, else <slug>.txt.
class ReplayBackend final : public CompletionBackend {
public:
  explicit ReplayBackend(std::filesystem::path dir);
  BackendMode mode() const override { return BackendMode::Replay; }

protected:
  std::optional<std::string> do_complete(const CompletionRequest& req) override;

private:
  std::filesystem::path dir_;
};

// Token bucket shared by every live backend in the process.
class RateLimiter {
public:
  RateLimiter(double per_second, double burst);
  void acquire();

private:
  std::mutex mutex_;
  double rate_, burst_, tokens_;
  std::chrono::steady_clock::time_point last_;
};

struct LiveSettings {
  std::string endpoint;  // chat-completions URL
  std::string model;
  std::string api_key;
  std::chrono::seconds timeout{120};

  // Reads LLM_ENDPOINT, LLM_MODEL and LLM_API_KEY.
  static LiveSettings from_environment();
};

class LiveBackend final : public CompletionBackend {
public:
  LiveBackend(LiveSettings settings, std::shared_ptr<RateLimiter> limiter);
  BackendMode mode() const override { return BackendMode::Live; }

protected:
  std::optional<std::string> do_complete(const CompletionRequest& req) override;

private:
  LiveSettings settings_;
  std::shared_ptr<RateLimiter> limiter_;
};

// "null", "replay:<dir>" or "live".
std::unique_ptr<CompletionBackend> make_backend(std::string_view spec);

} // namespace sketchfuzz
