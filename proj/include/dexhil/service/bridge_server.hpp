#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

namespace dexhil::service {

/// Outgoing frames. State frames are droppable (oldest first once
/// `state_capacity` are waiting); every other frame is always kept.
class FrameQueue {
 public:
  explicit FrameQueue(std::size_t state_capacity = 8) : capacity_(state_capacity) {}

  /// Never blocks.
  void push(const nlohmann::json& frame);
  /// Waits up to `timeout_ms`; false on timeout or close.
  bool pop(std::string& line, int timeout_ms);
  void close();
  void clear();
  std::size_t size() const;
  long dropped() const { return dropped_; }

 private:
  struct Item {
    std::string line;
    bool state;
  };
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Item> items_;
  std::size_t capacity_;
  std::size_t states_ = 0;
  std::atomic<long> dropped_{0};
  bool closed_ = false;
};

/// Line-delimited JSON over TCP, one operator at a time: a second connection
/// receives an error frame and is closed.
class BridgeServer {
 public:
  using LineHandler = std::function<std::optional<nlohmann::json>(const std::string&)>;
  using ConnectHandler = std::function<void()>;

  /// Port 0 picks a free port; see port().
  BridgeServer(int port, LineHandler on_line, ConnectHandler on_connect = {}, std::size_t state_capacity = 8);
  ~BridgeServer();
  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  int port() const { return port_; }
  bool connected() const { return client_ >= 0; }
  long refused() const { return refused_; }
  /// Queues a frame for the current client; discarded when nobody is connected.
  void send(const nlohmann::json& frame);
  const FrameQueue& queue() const { return queue_; }
  void stop();

 private:
  void accept_loop();
  void reader_loop(int fd);
  void writer_loop(int fd);
  void drop_client();

  LineHandler on_line_;
  ConnectHandler on_connect_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<int> client_{-1};
  std::atomic<bool> running_{true};
  std::atomic<long> refused_{0};
  FrameQueue queue_;
  std::mutex client_mutex_;
  std::thread accept_thread_;
  std::thread reader_;
  std::thread writer_;
};

}  // namespace dexhil::service
