#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include "forge/error.hpp"

namespace forge {

// Exponential backoff: delay(i) = min(max_delay, base_delay * 2^i), scaled by
// a jitter factor in [1 - jitter, 1] drawn from a generator seeded with seed.
struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{100};
  std::chrono::milliseconds max_delay{2000};
  double jitter = 0.5;
  std::uint64_t seed = 0;

  std::chrono::milliseconds delay_for(int attempt) const;
};

void sleep_for_retry(std::chrono::milliseconds delay);

// Calls fn(attempt) until it returns. Errors of kind kClient are treated as
// transient and retried; anything else propagates at once. Exhausting the
// budget throws Error(kEndpointUnavailable).
template <class Fn>
auto with_retries(const RetryPolicy& policy, std::string_view what, Fn&& fn)
    -> decltype(fn(0)) {
  const int attempts = policy.attempts < 1 ? 1 : policy.attempts;
  std::string last;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    try {
      return fn(attempt);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kClient) throw;
      last = e.what();
    }
    if (attempt + 1 < attempts) sleep_for_retry(policy.delay_for(attempt));
  }
  throw Error(ErrorKind::kEndpointUnavailable,
              std::string(what) + " failed after " + std::to_string(attempts) +
                  " attempts: " + last);
}

// Minimal JSON-over-HTTP POST client. Safe to share across threads: every
// call opens its own connection.
class HttpJsonClient {
 public:
  HttpJsonClient(std::string base_url, RetryPolicy retry,
                 std::chrono::milliseconds timeout = std::chrono::seconds(60));

  // POSTs body (a JSON document) to path and returns the response body.
  // Transport failures and 5xx responses are retried; 4xx responses throw
  // Error(kProtocol) immediately.
  std::string post(std::string_view path, const std::string& body) const;

  const std::string& base_url() const { return base_url_; }

 private:
  std::string base_url_;
  RetryPolicy retry_;
  std::chrono::milliseconds timeout_;
};

}  // namespace forge
