#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <thread>

#include "error.hpp"
#include "log.hpp"

namespace verbatim {

struct RetryPolicy {
    int retries = 3;                          // attempts after the first
    std::chrono::milliseconds backoff{200};   // doubled after every failure
    std::chrono::milliseconds max_backoff{5000};
};

/// Runs `fn` until it succeeds or the policy is exhausted, rethrowing the last
/// BackendError. Other exceptions propagate immediately.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, const std::string& what, Fn&& fn) -> decltype(fn())
{
    auto delay = policy.backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (const BackendError& e) {
            if (attempt >= policy.retries) {
                throw;
            }
            log::warn(what + " failed (attempt " + std::to_string(attempt + 1) + "): " + e.what());
            if (delay.count() > 0) {
                std::this_thread::sleep_for(delay);
            }
            delay = std::min(delay * 2, policy.max_backoff);
        }
    }
}

}  // namespace verbatim
