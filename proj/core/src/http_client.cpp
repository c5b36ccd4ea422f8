#include "forge/http_client.hpp"

#include <algorithm>
#include <random>
#include <thread>

#include "httplib.h"

namespace forge {

std::chrono::milliseconds RetryPolicy::delay_for(int attempt) const {
  const auto base = static_cast<double>(base_delay.count());
  const double raw = std::min(static_cast<double>(max_delay.count()),
                              base * static_cast<double>(1ULL << std::min(attempt, 30)));
  std::mt19937_64 gen(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(attempt + 1)));
  const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;  // [0, 1)
  const double factor = 1.0 - std::clamp(jitter, 0.0, 1.0) * u;
  return std::chrono::milliseconds(static_cast<long long>(raw * factor));
}

void sleep_for_retry(std::chrono::milliseconds delay) {
  if (delay.count() > 0) std::this_thread::sleep_for(delay);
}

HttpJsonClient::HttpJsonClient(std::string base_url, RetryPolicy retry,
                               std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), retry_(retry), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::string HttpJsonClient::post(std::string_view path, const std::string& body) const {
  const std::string target(path);
  return with_retries(retry_, base_url_ + target, [&](int) -> std::string {
    httplib::Client client(base_url_);
    if (!client.is_valid()) {
      throw Error(ErrorKind::kInvalidArgument, "invalid endpoint URL '" + base_url_ + "'");
    }
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(target, body, "application/json");
    if (!res) {
      throw Error(ErrorKind::kClient, "transport error: " + httplib::to_string(res.error()));
    }
    if (res->status >= 500) {
      throw Error(ErrorKind::kClient, "HTTP " + std::to_string(res->status));
    }
    if (res->status >= 400) {
      throw Error(ErrorKind::kProtocol,
                  "HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    return res->body;
  });
}

}  // namespace forge
