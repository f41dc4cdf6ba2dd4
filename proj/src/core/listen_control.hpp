// Copyright 2026 The RefSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <thread>

namespace refsd::detail {

// Makes stop() effective whether it lands before, during or after run().
class ListenControl {
 public:
  void run(httplib::Server& server) {
    entered_ = true;
    if (!stop_requested_) server.listen_after_bind();
    returned_ = true;
  }

  void stop(httplib::Server& server) {
    stop_requested_ = true;
    while (entered_ && !returned_ && !server.is_running()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    server.stop();
  }

 private:
  std::atomic<bool> entered_{false};
  std::atomic<bool> returned_{false};
  std::atomic<bool> stop_requested_{false};
};

}  // namespace refsd::detail
