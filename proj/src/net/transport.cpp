/*
 * Copyright 2026 The ShieldRun Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "shieldrun/net/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

#include "shieldrun/bridge/bridge.hpp"
#include "shieldrun/sched/scheduler.hpp"

namespace shieldrun::net {

namespace {

struct Direction {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::uint8_t> buf;
  bool closed = false;
  sched::Scheduler* sched = nullptr;
  sched::LockId lock = 0;

  void signal(std::unique_lock<std::mutex>& lk) {
    sched::Scheduler* s = sched;
    sched::LockId l = lock;
    lk.unlock();
    cv.notify_all();
    if (s) s->wake(l);
  }
};

class PipeEnd : public Transport {
 public:
  PipeEnd(std::shared_ptr<Direction> in, std::shared_ptr<Direction> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~PipeEnd() override { close(); }

  void write_all(ByteSpan data) override {
    std::unique_lock lk(out_->mu);
    if (out_->closed) raise(Errc::ChannelClosed, "pipe closed");
    out_->buf.insert(out_->buf.end(), data.begin(), data.end());
    out_->signal(lk);
  }

  void read_exact(MutableByteSpan out) override {
    std::size_t done = 0;
    while (done < out.size()) {
      std::unique_lock lk(in_->mu);
      if (!in_->buf.empty()) {
        std::size_t n = std::min(out.size() - done, in_->buf.size());
        std::copy_n(in_->buf.begin(), n, out.begin() + done);
        in_->buf.erase(in_->buf.begin(), in_->buf.begin() + n);
        done += n;
        continue;
      }
      if (in_->closed) raise(Errc::ChannelClosed, "end of stream");
      if (sched::Scheduler::in_green_thread()) {
        sched::Scheduler* s = sched::Scheduler::current();
        if (in_->sched != s) {
          in_->sched = s;
          in_->lock = s->new_lock_id();
        }
        sched::LockId l = in_->lock;
        lk.unlock();
        s->block_on(l);
      } else {
        in_->cv.wait(lk);
      }
    }
  }

  void close() override {
    for (auto& d : {out_, in_}) {
      std::unique_lock lk(d->mu);
      if (d->closed) continue;
      d->closed = true;
      d->signal(lk);
    }
  }

 private:
  std::shared_ptr<Direction> in_;
  std::shared_ptr<Direction> out_;
};

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> memory_pipe() {
  auto a_to_b = std::make_shared<Direction>();
  auto b_to_a = std::make_shared<Direction>();
  return {std::make_unique<PipeEnd>(b_to_a, a_to_b), std::make_unique<PipeEnd>(a_to_b, b_to_a)};
}

FdTransport::~FdTransport() { close(); }

void FdTransport::write_all(ByteSpan data) {
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::send(fd_, data.data() + done, data.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE || errno == ECONNRESET) raise(Errc::ChannelClosed, "peer closed");
      raise(Errc::IoError, std::string("send: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

void FdTransport::read_exact(MutableByteSpan out) {
  std::size_t done = 0;
  while (done < out.size()) {
    ssize_t n = ::recv(fd_, out.data() + done, out.size() - done, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == ECONNRESET) raise(Errc::ChannelClosed, "peer reset");
      raise(Errc::IoError, std::string("recv: ") + std::strerror(errno));
    }
    if (n == 0) raise(Errc::ChannelClosed, "end of stream");
    done += static_cast<std::size_t>(n);
  }
}

void FdTransport::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

BridgeTransport::~BridgeTransport() {
  try {
    close();
  } catch (...) {
  }
}

void BridgeTransport::write_all(ByteSpan data) {
  std::size_t done = 0;
  while (done < data.size()) {
    std::size_t piece = std::min<std::size_t>(data.size() - done, 64 * 1024);
    bridge::SyscallRequest req;
    req.cls = bridge::SyscallClass::Write;
    req.args[0] = fd_;
    req.args[1] = -1;
    req.in_payload.assign(data.begin() + done, data.begin() + done + piece);
    auto r = bridge_.call(std::move(req));
    if (r.status < 0) raise(Errc::ChannelClosed, "stream write failed");
    if (r.status == 0) raise(Errc::IoError, "stream write made no progress");
    done += static_cast<std::size_t>(r.status);
  }
}

void BridgeTransport::read_exact(MutableByteSpan out) {
  std::size_t done = 0;
  while (done < out.size()) {
    bridge::SyscallRequest req;
    req.cls = bridge::SyscallClass::Read;
    req.args[0] = fd_;
    req.args[1] = -1;
    req.out_capacity = std::min<std::size_t>(out.size() - done, 64 * 1024);
    auto r = bridge_.call(std::move(req));
    if (r.status < 0) raise(Errc::IoError, "stream read failed");
    if (r.status == 0) raise(Errc::ChannelClosed, "end of stream");
    std::copy(r.payload.begin(), r.payload.end(), out.begin() + done);
    done += r.payload.size();
  }
}

void BridgeTransport::close() {
  if (fd_ < 0) return;
  ::shutdown(fd_, SHUT_RDWR);  // wakes a host worker blocked in read
  bridge::SyscallRequest req;
  req.cls = bridge::SyscallClass::Close;
  req.args[0] = fd_;
  fd_ = -1;
  bridge_.call(std::move(req));
}

Endpoint parse_endpoint(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos) raise(Errc::InvalidArgument, "expected host:port, got '" + text + "'");
  Endpoint e;
  e.host = text.substr(0, colon);
  if (e.host.empty()) e.host = "127.0.0.1";
  try {
    unsigned long p = std::stoul(text.substr(colon + 1));
    if (p > 65535) throw std::out_of_range("port");
    e.port = static_cast<std::uint16_t>(p);
  } catch (const std::exception&) {
    raise(Errc::InvalidArgument, "bad port in '" + text + "'");
  }
  return e;
}

namespace {

sockaddr_in resolve(const Endpoint& e) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    raise(Errc::IoError, "cannot resolve " + e.host);
  }
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  ::freeaddrinfo(res);
  addr.sin_port = htons(e.port);
  return addr;
}

}  // namespace

int tcp_listen(const Endpoint& at, std::uint16_t* bound_port) {
  sockaddr_in addr = resolve(at);
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) raise(Errc::IoError, "socket failed");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 64) != 0) {
    int err = errno;
    ::close(fd);
    raise(Errc::IoError, "cannot listen on " + at.host + ":" + std::to_string(at.port) + ": " +
                             std::strerror(err));
  }
  if (bound_port) {
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    *bound_port = ntohs(addr.sin_port);
  }
  return fd;
}

int tcp_accept(int listen_fd) {
  for (;;) {
    int fd = ::accept4(listen_fd, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return fd;
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return -1;
  }
}

int tcp_connect(const Endpoint& to) {
  sockaddr_in addr = resolve(to);
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) raise(Errc::IoError, "socket failed");
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    int err = errno;
    ::close(fd);
    raise(Errc::IoError, "cannot connect to " + to.host + ":" + std::to_string(to.port) + ": " +
                             std::strerror(err));
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

}  // namespace shieldrun::net
