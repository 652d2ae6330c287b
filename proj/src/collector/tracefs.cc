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


#include "prismlike/collector/tracefs.h"

#include <errno.h>
#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <thread>

#include <glog/logging.h>

#include "prismlike/core/status_macros.h"
#include "prismlike/core/strings.h"

namespace prismlike {
namespace {

constexpr int kFutexPrivateFlag = 128;
constexpr int kFutexCmdMask = 0x7f;

// Returns the value after "key=" up to the next " <word>=" boundary given by
// `next_key`, or to the end of the body.
std::string_view FieldBetween(std::string_view body, std::string_view key,
                              std::string_view next_key) {
  size_t pos = body.find(key);
  if (pos == std::string_view::npos) return {};
  pos += key.size();
  size_t end = next_key.empty() ? body.size() : body.find(next_key, pos);
  if (end == std::string_view::npos) end = body.size();
  return body.substr(pos, end - pos);
}

template <typename T>
bool ParseNumber(std::string_view s, T* out) {
  s = Trim(s);
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    return ParseInt(s.substr(2), out, 16);
  }
  return ParseInt(s, out);
}

// Parses "(name: value, name: value)" syscall arguments.
std::map<std::string_view, uint64_t> SyscallArgs(std::string_view body) {
  std::map<std::string_view, uint64_t> args;
  body = Trim(body);
  if (body.empty() || body.front() != '(') return args;
  body.remove_prefix(1);
  if (!body.empty() && body.back() == ')') body.remove_suffix(1);
  for (std::string_view part : Split(body, ',')) {
    size_t colon = part.find(':');
    if (colon == std::string_view::npos) continue;
    uint64_t v = 0;
    if (ParseNumber(part.substr(colon + 1), &v)) args[Trim(part.substr(0, colon))] = v;
  }
  return args;
}

SchedSwitchOut SwitchOutFor(std::string_view state) {
  SchedSwitchOut out;
  if (state.empty() || state[0] == 'R') {
    out.next_state = SchedState::kRunnable;
  } else if (state[0] == 'D') {
    out.next_state = SchedState::kBlock;
  } else if (state[0] == 'X' || state[0] == 'Z') {
    out.next_state = SchedState::kSleep;
    out.exiting = true;
  } else {
    out.next_state = SchedState::kSleep;
  }
  return out;
}

std::string Comm(std::string_view comm) {
  return std::string(comm.substr(0, kMaxCommLen - 1));
}

}  // namespace

absl::StatusOr<TracefsLine> ParseTracefsLine(std::string_view line) {
  // The cpu column "[NNN]" is the first reliable anchor: comm may contain
  // spaces, dashes and parentheses.
  size_t cpu_open = std::string_view::npos;
  for (size_t pos = line.find(" ["); pos != std::string_view::npos;
       pos = line.find(" [", pos + 1)) {
    size_t close = line.find(']', pos);
    if (close == std::string_view::npos) break;
    std::string_view digits = line.substr(pos + 2, close - pos - 2);
    if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string_view::npos) {
      cpu_open = pos;
      break;
    }
  }
  if (cpu_open == std::string_view::npos) return absl::InvalidArgumentError("no cpu column");

  TracefsLine out;
  std::string_view head = Trim(line.substr(0, cpu_open));
  if (!head.empty() && head.back() == ')') {
    size_t open = head.rfind('(');
    if (open == std::string_view::npos) return absl::InvalidArgumentError("bad tgid column");
    std::string_view tgid = Trim(head.substr(open + 1, head.size() - open - 2));
    int32_t v = 0;
    if (ParseInt(tgid, &v)) out.tgid = v;
    head = Trim(head.substr(0, open));
  }
  size_t dash = head.rfind('-');
  if (dash == std::string_view::npos || !ParseInt(head.substr(dash + 1), &out.tid)) {
    return absl::InvalidArgumentError("bad task column");
  }
  out.comm = std::string(head.substr(0, dash));

  std::string_view rest = line.substr(line.find(']', cpu_open) + 1);
  rest = Trim(rest);
  size_t sp = rest.find(' ');
  if (sp == std::string_view::npos) return absl::InvalidArgumentError("no timestamp");
  rest = Trim(rest.substr(sp));
  size_t colon = rest.find(": ");
  if (colon == std::string_view::npos) return absl::InvalidArgumentError("no timestamp");
  std::string_view ts = rest.substr(0, colon);
  size_t dot = ts.find('.');
  int64_t secs = 0, frac = 0;
  std::string_view frac_text = dot == std::string_view::npos ? "" : ts.substr(dot + 1);
  if (!ParseInt(ts.substr(0, dot), &secs) || (!frac_text.empty() && !ParseInt(frac_text, &frac)) ||
      frac_text.size() > 9) {
    return absl::InvalidArgumentError(StrCat("bad timestamp ", ts));
  }
  for (size_t i = frac_text.size(); i < 9; ++i) frac *= 10;
  out.ts = secs * kNanosPerSecond + frac;

  rest = rest.substr(colon + 2);
  size_t name_end = rest.find_first_of(":( ");
  if (name_end == std::string_view::npos) name_end = rest.size();
  out.event = rest.substr(0, name_end);
  out.body = rest.substr(name_end);
  if (out.event.empty()) return absl::InvalidArgumentError("no event name");
  return out;
}

ThreadRef TracefsDecoder::Thread(int32_t tid, std::optional<int32_t> tgid, std::string_view comm) {
  if (tgid && *tgid > 0) {
    tgid_of_[tid] = *tgid;
  } else if (auto it = tgid_of_.find(tid); it != tgid_of_.end()) {
    tgid = it->second;
  } else {
    tgid = resolver_.TgidOf(tid).value_or(tid);
    tgid_of_[tid] = *tgid;
  }
  return ThreadRef{tid, *tgid, Comm(comm)};
}

void TracefsDecoder::Decode(std::string_view line, std::vector<KernelEvent>& out) {
  if (Trim(line).empty() || line.front() == '#') return;
  ++stats_.lines;
  auto parsed = ParseTracefsLine(line);
  if (!parsed.ok()) {
    ++stats_.unparsed;
    return;
  }
  if (ignored_.empty()) return DecodeLine(*parsed, out);
  const size_t first = out.size();
  DecodeLine(*parsed, out);
  auto keep = std::remove_if(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
                             [&](const KernelEvent& e) { return ignored_.count(e.thread.tgid) > 0; });
  out.erase(keep, out.end());
}

void TracefsDecoder::DecodeLine(const TracefsLine& l, std::vector<KernelEvent>& out) {
  if (l.event == "sched_switch") return DecodeSwitch(l, out);
  if (l.event == "sched_wakeup" || l.event == "sched_wakeup_new") return DecodeWakeup(l, out);
  if (l.tid == 0) return;
  ThreadRef t = Thread(l.tid, l.tgid, l.comm);
  if (l.event == "block_rq_issue") return DecodeBlock(l, t, out);
  if (l.event.starts_with("sys_")) {
    if (l.body.starts_with("(")) return DecodeEnter(l, t, out);
    if (l.body.starts_with(" -> ")) return DecodeExit(l, t, out);
  }
  ++stats_.unparsed;
}

void TracefsDecoder::DecodeSwitch(const TracefsLine& l, std::vector<KernelEvent>& out) {
  std::string_view body = l.body;
  int32_t prev = 0, next = 0;
  if (!ParseInt(Trim(FieldBetween(body, "prev_pid=", " prev_prio=")), &prev) ||
      !ParseInt(Trim(FieldBetween(body, "next_pid=", " next_prio=")), &next)) {
    ++stats_.unparsed;
    return;
  }
  if (prev != 0) {
    SchedSwitchOut so = SwitchOutFor(Trim(FieldBetween(body, "prev_state=", " ==> ")));
    so.in_iowait = so.next_state == SchedState::kBlock && issued_io_[prev];
    issued_io_.erase(prev);
    ThreadRef t = Thread(prev, prev == l.tid ? l.tgid : std::nullopt,
                         FieldBetween(body, "prev_comm=", " prev_pid="));
    out.push_back(KernelEvent{l.ts, std::move(t), so});
  }
  if (next != 0) {
    ThreadRef t = Thread(next, std::nullopt, FieldBetween(body, "next_comm=", " next_pid="));
    out.push_back(KernelEvent{l.ts, std::move(t), SchedSwitchIn{}});
  }
}

void TracefsDecoder::DecodeWakeup(const TracefsLine& l, std::vector<KernelEvent>& out) {
  int32_t pid = 0;
  if (!ParseInt(Trim(FieldBetween(l.body, " pid=", " prio=")), &pid)) {
    ++stats_.unparsed;
    return;
  }
  if (pid == 0) return;
  std::string_view comm = FieldBetween(l.body, "comm=", " pid=");
  out.push_back(KernelEvent{l.ts, Thread(pid, std::nullopt, comm), SchedWakeup{}});
}

void TracefsDecoder::DecodeBlock(const TracefsLine& l, const ThreadRef& t,
                                 std::vector<KernelEvent>& out) {
  // ": 8,0 WS 4096 () 123456 + 8 none,0,0 [comm]"
  std::string_view body = Trim(l.body.substr(1));
  size_t sp = body.find(' ');
  std::vector<std::string_view> dev = Split(body.substr(0, sp), ',');
  size_t plus = body.find(" + ");
  uint32_t major = 0, minor = 0;
  int64_t sectors = 0;
  if (dev.size() != 2 || plus == std::string_view::npos || !ParseInt(dev[0], &major) ||
      !ParseInt(dev[1], &minor)) {
    ++stats_.unparsed;
    return;
  }
  std::string_view count = body.substr(plus + 3);
  count = count.substr(0, count.find(' '));
  if (!ParseInt(count, &sectors)) {
    ++stats_.unparsed;
    return;
  }
  if (sectors <= 0) return;
  issued_io_[t.tid] = true;
  out.push_back(KernelEvent{l.ts, t, BlockRq{BlockDev{major, minor}, sectors}});
}

void TracefsDecoder::DecodeEnter(const TracefsLine& l, const ThreadRef& t,
                                 std::vector<KernelEvent>& out) {
  std::string_view name = l.event.substr(4);
  auto args = SyscallArgs(l.body);
  pending_.erase(t.tid);
  auto arg = [&](std::string_view key) -> std::optional<uint64_t> {
    auto it = args.find(key);
    if (it == args.end()) return std::nullopt;
    return it->second;
  };

  if (name == "futex") {
    auto uaddr = arg("uaddr");
    auto op = arg("op");
    if (!uaddr || !op) return;
    int cmd = static_cast<int>(*op) & kFutexCmdMask;
    FutexEnter f;
    f.uaddr = *uaddr;
    f.shared = (*op & kFutexPrivateFlag) == 0;
    f.val = static_cast<int64_t>(arg("val").value_or(0));
    switch (cmd) {
      case 0:   // WAIT
      case 6:   // LOCK_PI
      case 9:   // WAIT_BITSET
      case 11:  // WAIT_REQUEUE_PI
      case 13:  // LOCK_PI2
        f.op = FutexOp::kWait;
        break;
      case 1:   // WAKE
      case 3:   // REQUEUE
      case 4:   // CMP_REQUEUE
      case 5:   // WAKE_OP
      case 7:   // UNLOCK_PI
      case 10:  // WAKE_BITSET
        f.op = FutexOp::kWake;
        break;
      default:
        return;
    }
    KernelEvent e{l.ts, t, f};
    out.push_back(e);
    pending_[t.tid] = Pending{std::string(name), std::move(e)};
    return;
  }

  if (name == "epoll_wait" || name == "epoll_pwait" || name == "epoll_pwait2") {
    auto epfd = arg("epfd");
    if (!epfd) return;
    EpollObj ep{SyntheticEpollAddr(t.tgid, static_cast<int>(*epfd))};
    out.push_back(KernelEvent{l.ts, t, EpollWaitEnter{ep}});
    pending_[t.tid] = Pending{std::string(name), KernelEvent{l.ts, t, EpollWaitExit{ep}}};
    return;
  }

  if (name == "epoll_ctl") {
    auto epfd = arg("epfd");
    auto op = arg("op");
    auto fd = arg("fd");
    if (!epfd || !op || !fd || (*op != 1 && *op != 2)) return;
    auto resolved = resolver_.Resolve(t.tid, static_cast<int>(*fd));
    if (!resolved || !resolved->bri) {
      ++stats_.unresolved_fds;
      return;
    }
    EpollCtl ctl{EpollObj{SyntheticEpollAddr(t.tgid, static_cast<int>(*epfd))}, *resolved->bri,
                 *op == 1 ? EpollAction::kInsert : EpollAction::kRemove};
    // Reported on a successful return.
    pending_[t.tid] = Pending{std::string(name), KernelEvent{l.ts, t, std::move(ctl)}};
    return;
  }

  bool reads = name == "read" || name == "readv" || name == "recvfrom" || name == "recvmsg";
  bool writes = name == "write" || name == "writev" || name == "sendto" || name == "sendmsg";
  if (!reads && !writes) return;
  auto fd = arg("fd");
  if (!fd) return;
  auto resolved = resolver_.Resolve(t.tid, static_cast<int>(*fd));
  if (!resolved) {
    ++stats_.unresolved_fds;
    return;
  }
  KernelEvent e{l.ts, t, SchedWakeup{}};
  if (resolved->kind == ResolvedFd::Kind::kFifo && resolved->bri) {
    e.kind = VfsAccess{*resolved->bri->get_if<VfsInode>(), reads ? VfsDir::kRead : VfsDir::kWrite,
                       FileKind::kFifo, resolved->blocking, true};
  } else if (resolved->kind == ResolvedFd::Kind::kSocket && resolved->bri) {
    SockAccess s;
    s.bri = *resolved->bri->get_if<SocketTuple>();
    s.dir = reads ? SockDir::kRecv : SockDir::kSend;
    s.enter = true;
    s.remote = resolved->remote;
    e.kind = std::move(s);
  } else {
    return;
  }
  out.push_back(e);
  pending_[t.tid] = Pending{std::string(name), std::move(e)};
}

void TracefsDecoder::DecodeExit(const TracefsLine& l, const ThreadRef& t,
                                std::vector<KernelEvent>& out) {
  auto it = pending_.find(t.tid);
  if (it == pending_.end() || it->second.syscall != l.event.substr(4)) return;
  Pending p = std::move(it->second);
  pending_.erase(it);
  uint64_t raw = 0;
  ParseNumber(l.body.substr(4), &raw);
  int64_t ret = static_cast<int64_t>(raw);

  KernelEvent e = std::move(p.event);
  e.ts = l.ts;
  e.thread = t;
  std::visit(
      [&](auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, FutexEnter>) {
          e.kind = FutexExit{ret};
          out.push_back(std::move(e));
        } else if constexpr (std::is_same_v<K, EpollWaitExit>) {
          out.push_back(std::move(e));
        } else if constexpr (std::is_same_v<K, EpollCtl>) {
          if (ret == 0) out.push_back(std::move(e));
        } else if constexpr (std::is_same_v<K, VfsAccess> || std::is_same_v<K, SockAccess>) {
          k.enter = false;
          out.push_back(std::move(e));
        }
      },
      e.kind);
}

//-----------------------------------------------------------------------------
// TracefsSource
//-----------------------------------------------------------------------------

TracefsSource::TracefsSource(TracefsOptions options, std::string dir, FdResolver& resolver)
    : options_(std::move(options)), dir_(std::move(dir)), decoder_(resolver) {
  decoder_.IgnoreProcess(getpid());
}

absl::StatusOr<std::unique_ptr<TracefsSource>> TracefsSource::Create(TracefsOptions options,
                                                                    FdResolver& resolver) {
  std::string instances = options.root + "/instances";
  struct stat st{};
  if (stat(instances.c_str(), &st) != 0) {
    if (errno == EACCES || errno == EPERM) {
      return absl::PermissionDeniedError(
          StrCat("no access to tracefs at ", options.root, " (run as root or grant CAP_SYS_ADMIN)"));
    }
    return absl::FailedPreconditionError(StrCat("tracefs is not mounted at ", options.root));
  }
  if (options.instance.empty()) options.instance = StrCat("prismlike-", getpid());
  std::string dir = instances + "/" + options.instance;
  if (mkdir(dir.c_str(), 0755) != 0 && errno != EEXIST) {
    int err = errno;
    if (err == EACCES || err == EPERM || err == EROFS) {
      return absl::PermissionDeniedError(
          StrCat("cannot create a trace instance under ", instances, ": ", strerror(err),
                 " (run as root or grant CAP_SYS_ADMIN)"));
    }
    return absl::UnavailableError(StrCat("mkdir ", dir, ": ", strerror(err)));
  }
  return std::unique_ptr<TracefsSource>(new TracefsSource(std::move(options), dir, resolver));
}

TracefsSource::~TracefsSource() { Teardown(); }

absl::Status TracefsSource::WriteControl(const std::string& file, std::string_view value) {
  std::ofstream out(dir_ + "/" + file);
  out << value;
  out.flush();
  if (!out) return absl::UnavailableError(StrCat("cannot write ", dir_, "/", file));
  return absl::OkStatus();
}

absl::Status TracefsSource::Start() {
  PL_RETURN_IF_ERROR(WriteControl("trace_clock", "mono"));
  if (!WriteControl("options/record-tgid", "1").ok()) {
    warnings_.push_back("options/record-tgid");
  }
  WriteControl("buffer_size_kb", std::to_string(options_.buffer_kb)).IgnoreError();

  // Keep the collector's own reads of trace_pipe out of the trace.
  std::string notrace;
  for (const auto& task : std::filesystem::directory_iterator("/proc/self/task")) {
    notrace += task.path().filename().string() + " ";
  }
  if (!WriteControl("set_event_notrace_pid", notrace).ok()) {
    warnings_.push_back("set_event_notrace_pid");
  }

  const char* mandatory[] = {"sched/sched_switch", "sched/sched_wakeup"};
  const char* optional[] = {
      "sched/sched_wakeup_new",        "syscalls/sys_enter_futex",
      "syscalls/sys_exit_futex",       "syscalls/sys_enter_read",
      "syscalls/sys_exit_read",        "syscalls/sys_enter_write",
      "syscalls/sys_exit_write",       "syscalls/sys_enter_readv",
      "syscalls/sys_exit_readv",       "syscalls/sys_enter_writev",
      "syscalls/sys_exit_writev",      "syscalls/sys_enter_recvfrom",
      "syscalls/sys_exit_recvfrom",    "syscalls/sys_enter_recvmsg",
      "syscalls/sys_exit_recvmsg",     "syscalls/sys_enter_sendto",
      "syscalls/sys_exit_sendto",      "syscalls/sys_enter_sendmsg",
      "syscalls/sys_exit_sendmsg",     "syscalls/sys_enter_epoll_wait",
      "syscalls/sys_exit_epoll_wait",  "syscalls/sys_enter_epoll_pwait",
      "syscalls/sys_exit_epoll_pwait", "syscalls/sys_enter_epoll_pwait2",
      "syscalls/sys_exit_epoll_pwait2", "syscalls/sys_enter_epoll_ctl",
      "syscalls/sys_exit_epoll_ctl",   "block/block_rq_issue",
  };
  for (const char* event : mandatory) {
    std::string file = StrCat("events/", event, "/enable");
    if (!WriteControl(file, "1").ok()) {
      return absl::UnavailableError(StrCat("scheduler tracepoint ", event, " is unavailable"));
    }
    enabled_.push_back(file);
  }
  for (const char* event : optional) {
    std::string file = StrCat("events/", event, "/enable");
    if (WriteControl(file, "1").ok()) {
      enabled_.push_back(file);
    } else {
      warnings_.push_back(event);
      LOG(WARNING) << "tracepoint " << event << " unavailable; collection is partial";
    }
  }
  // select and poll keep their descriptor sets in user memory, which
  // tracepoints cannot read.
  warnings_.push_back("select/poll BRI capture");

  PL_RETURN_IF_ERROR(WriteControl("tracing_on", "1"));
  pipe_fd_ = open((dir_ + "/trace_pipe").c_str(), O_RDONLY | O_NONBLOCK | O_CLOEXEC);
  if (pipe_fd_ < 0) return absl::UnavailableError(StrCat("open trace_pipe: ", strerror(errno)));
  return absl::OkStatus();
}

absl::StatusOr<bool> TracefsSource::Poll(std::vector<KernelEvent>& out,
                                         std::chrono::milliseconds timeout) {
  if (pipe_fd_ < 0) return false;
  char buf[1 << 16];
  bool got = false;
  for (int round = 0; round < 16; ++round) {
    ssize_t n = read(pipe_fd_, buf, sizeof(buf));
    if (n > 0) {
      got = true;
      partial_.append(buf, static_cast<size_t>(n));
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    if (n < 0 && errno != EAGAIN) {
      return absl::DataLossError(StrCat("read trace_pipe: ", strerror(errno)));
    }
    break;
  }
  size_t start = 0;
  for (size_t nl = partial_.find('\n'); nl != std::string::npos;
       nl = partial_.find('\n', start)) {
    decoder_.Decode(std::string_view(partial_).substr(start, nl - start), out);
    start = nl + 1;
  }
  partial_.erase(0, start);
  if (got) return true;
  if (stopped_) return false;
  std::this_thread::sleep_for(timeout);
  return true;
}

void TracefsSource::Stop() {
  if (stopped_) return;
  stopped_ = true;
  WriteControl("tracing_on", "0").IgnoreError();
}

void TracefsSource::Teardown() {
  if (pipe_fd_ >= 0) close(pipe_fd_);
  pipe_fd_ = -1;
  if (dir_.empty()) return;
  WriteControl("tracing_on", "0").IgnoreError();
  for (const std::string& file : enabled_) WriteControl(file, "0").IgnoreError();
  if (rmdir(dir_.c_str()) != 0) {
    LOG(WARNING) << "could not remove trace instance " << dir_ << ": " << strerror(errno);
  }
  dir_.clear();
}

}  // namespace prismlike
