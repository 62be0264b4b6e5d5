#include "dexhil/service/bridge_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <stdexcept>

namespace dexhil::service {

void FrameQueue::push(const nlohmann::json& frame) {
  const bool state = frame.value("type", std::string()) == "state";
  std::string line = frame.dump() + "\n";
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (closed_) return;
    if (state && states_ >= capacity_) {
      for (auto it = items_.begin(); it != items_.end(); ++it) {
        if (it->state) {
          items_.erase(it);
          --states_;
          ++dropped_;
          break;
        }
      }
    }
    items_.push_back({std::move(line), state});
    states_ += state;
  }
  cv_.notify_one();
}

bool FrameQueue::pop(std::string& line, int timeout_ms) {
  std::unique_lock<std::mutex> lock(mutex_);
  if (!cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms), [&] { return closed_ || !items_.empty(); }))
    return false;
  if (items_.empty()) return false;
  line = std::move(items_.front().line);
  states_ -= items_.front().state;
  items_.pop_front();
  return true;
}

void FrameQueue::close() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

void FrameQueue::clear() {
  std::lock_guard<std::mutex> lock(mutex_);
  items_.clear();
  states_ = 0;
}

std::size_t FrameQueue::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return items_.size();
}

namespace {

bool send_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    const ssize_t n = ::send(fd, s.data() + off, s.size() - off, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

BridgeServer::BridgeServer(int port, LineHandler on_line, ConnectHandler on_connect, std::size_t state_capacity)
    : on_line_(std::move(on_line)), on_connect_(std::move(on_connect)), queue_(state_capacity) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 4) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw std::runtime_error("bridge: cannot listen on port " + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  accept_thread_ = std::thread(&BridgeServer::accept_loop, this);
}

BridgeServer::~BridgeServer() { stop(); }

void BridgeServer::send(const nlohmann::json& frame) {
  if (client_ >= 0) queue_.push(frame);
}

void BridgeServer::stop() {
  if (!running_.exchange(false)) return;
  if (accept_thread_.joinable()) accept_thread_.join();
  drop_client();
  queue_.close();
  if (reader_.joinable()) reader_.join();
  if (writer_.joinable()) writer_.join();
  ::close(listen_fd_);
}

void BridgeServer::drop_client() {
  const int fd = client_.exchange(-1);
  if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
}

void BridgeServer::accept_loop() {
  int current = -1;  // fd owned by the reader/writer pair
  auto reap = [&] {
    if (current >= 0 && client_ != current) {
      if (reader_.joinable()) reader_.join();
      if (writer_.joinable()) writer_.join();
      ::close(current);
      current = -1;
    }
  };
  while (running_) {
    reap();
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    reap();
    if (current >= 0) {
      ++refused_;
      send_all(fd, nlohmann::json{{"type", "error"}, {"v", 1}, {"message", "another operator is connected"}}.dump() +
                       "\n");
      ::close(fd);
      continue;
    }
    queue_.clear();
    current = fd;
    client_ = fd;
    if (on_connect_) on_connect_();
    reader_ = std::thread(&BridgeServer::reader_loop, this, fd);
    writer_ = std::thread(&BridgeServer::writer_loop, this, fd);
  }
  drop_client();
  if (reader_.joinable()) reader_.join();
  if (writer_.joinable()) writer_.join();
  if (current >= 0) ::close(current);
}

void BridgeServer::reader_loop(int fd) {
  std::string buffer;
  char chunk[4096];
  while (client_ == fd) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    for (std::size_t pos; (pos = buffer.find('\n')) != std::string::npos;) {
      std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (auto reply = on_line_(line)) queue_.push(*reply);
    }
    if (buffer.size() > (1 << 20)) {
      queue_.push(nlohmann::json{{"type", "error"}, {"v", 1}, {"message", "line too long"}});
      buffer.clear();
    }
  }
  int expected = fd;
  if (client_.compare_exchange_strong(expected, -1)) ::shutdown(fd, SHUT_RDWR);
}

void BridgeServer::writer_loop(int fd) {
  std::string line;
  while (client_ == fd) {
    if (!queue_.pop(line, 50)) continue;
    if (!send_all(fd, line)) break;
  }
  int expected = fd;
  if (client_.compare_exchange_strong(expected, -1)) ::shutdown(fd, SHUT_RDWR);
}

}  // namespace dexhil::service
