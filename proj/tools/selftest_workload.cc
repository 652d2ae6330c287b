/*
 * Copyright 2026 The Prismlike Authors.
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
 *
 * SPDX-License-Identifier: Apache-2.0
 */


// A small multi-threaded workload that exercises every probe family: a
// contended mutex, a pipe read through epoll, a loopback TCP echo, a child
// process fed through a second pipe and periodic fsync'd writes.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <pthread.h>
#include <sys/epoll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

namespace {

using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

std::atomic<bool> g_done{false};

void Name(const char* name) { pthread_setname_np(pthread_self(), name); }

void LockWorker(std::mutex& mu, const char* name) {
  Name(name);
  while (!g_done) {
    std::lock_guard<std::mutex> lock(mu);
    std::this_thread::sleep_for(2ms);
  }
}

void PipeWriter(int fd) {
  Name("sw_pipe_tx");
  char buf[64] = {};
  while (!g_done) {
    if (write(fd, buf, sizeof(buf)) < 0) break;
    std::this_thread::sleep_for(5ms);
  }
  close(fd);
}

void EpollReader(int fd) {
  Name("sw_epoll_rx");
  int ep = epoll_create1(EPOLL_CLOEXEC);
  epoll_event ev{};
  ev.events = EPOLLIN;
  ev.data.fd = fd;
  epoll_ctl(ep, EPOLL_CTL_ADD, fd, &ev);
  char buf[256];
  while (!g_done) {
    epoll_event out[4];
    int n = epoll_wait(ep, out, 4, 100);
    if (n > 0 && read(fd, buf, sizeof(buf)) <= 0) break;
  }
  close(ep);
  close(fd);
}

void EchoServer(int listener) {
  Name("sw_echo_srv");
  int conn = accept(listener, nullptr, nullptr);
  char buf[64];
  while (conn >= 0) {
    ssize_t n = recv(conn, buf, sizeof(buf), 0);
    if (n <= 0 || send(conn, buf, static_cast<size_t>(n), 0) < 0) break;
  }
  if (conn >= 0) close(conn);
}

void EchoClient(uint16_t port) {
  Name("sw_echo_cli");
  int s = socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (connect(s, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) return;
  char buf[32] = {};
  while (!g_done) {
    if (send(s, buf, sizeof(buf), 0) < 0 || recv(s, buf, sizeof(buf), 0) <= 0) break;
    std::this_thread::sleep_for(5ms);
  }
  close(s);
}

void DiskWriter(const std::string& path) {
  Name("sw_disk");
  std::vector<char> block(64 * 1024, 'x');
  while (!g_done) {
    FILE* f = fopen(path.c_str(), "w");
    if (f == nullptr) return;
    fwrite(block.data(), 1, block.size(), f);
    fflush(f);
    fsync(fileno(f));
    fclose(f);
    std::this_thread::sleep_for(50ms);
  }
  unlink(path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prismlike self-test workload"};
  double seconds = 5;
  std::string scratch = "/tmp";
  app.add_option("--seconds", seconds, "How long to run")->check(CLI::NonNegativeNumber);
  app.add_option("--scratch", scratch, "Directory for the fsync'd file");
  CLI11_PARSE(app, argc, argv);

  int child_pipe[2];
  if (pipe2(child_pipe, O_CLOEXEC) != 0) return 2;
  pid_t child = fork();
  if (child == 0) {
    close(child_pipe[1]);
    char buf[64];
    while (read(child_pipe[0], buf, sizeof(buf)) > 0) {
    }
    _exit(0);
  }
  close(child_pipe[0]);

  int epoll_pipe[2];
  if (pipe2(epoll_pipe, O_CLOEXEC) != 0) return 2;

  int listener = socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  socklen_t len = sizeof(addr);
  if (bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      listen(listener, 1) != 0 ||
      getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    return 2;
  }

  std::printf("ready %d\n", getpid());
  std::fflush(stdout);

  std::mutex mu;
  std::vector<std::thread> threads;
  threads.emplace_back(LockWorker, std::ref(mu), "sw_lock_a");
  threads.emplace_back(LockWorker, std::ref(mu), "sw_lock_b");
  threads.emplace_back(PipeWriter, child_pipe[1]);
  threads.emplace_back(PipeWriter, epoll_pipe[1]);
  threads.emplace_back(EpollReader, epoll_pipe[0]);
  threads.emplace_back(EchoServer, listener);
  threads.emplace_back(EchoClient, ntohs(addr.sin_port));
  threads.emplace_back(DiskWriter, scratch + "/prismlike-selftest-" + std::to_string(getpid()));

  auto end = Clock::now() + std::chrono::duration<double>(seconds);
  while (Clock::now() < end) std::this_thread::sleep_for(10ms);
  g_done = true;
  shutdown(listener, SHUT_RDWR);
  for (auto& t : threads) t.join();
  close(listener);
  waitpid(child, nullptr, 0);
  return 0;
}
