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

#include "prismlike/collector/trace_codec.h"

#include <algorithm>
#include <charconv>
#include <fstream>

#include <json.hpp>

#include "prismlike/core/status_macros.h"
#include "prismlike/core/strings.h"

namespace prismlike {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

absl::Status FieldError(std::string_view field, std::string_view what) {
  return absl::InvalidArgumentError(StrCat("field '", field, "': ", what));
}

const json* Find(const json& obj, std::string_view field) {
  auto it = obj.find(field);
  return it == obj.end() ? nullptr : &*it;
}

absl::StatusOr<int64_t> GetInt(const json& obj, std::string_view field) {
  const json* v = Find(obj, field);
  if (v == nullptr) return FieldError(field, "missing");
  if (!v->is_number_integer()) return FieldError(field, "expected integer");
  return v->get<int64_t>();
}

absl::StatusOr<bool> GetBool(const json& obj, std::string_view field,
                             std::optional<bool> fallback = std::nullopt) {
  const json* v = Find(obj, field);
  if (v == nullptr) {
    if (fallback.has_value()) return *fallback;
    return FieldError(field, "missing");
  }
  if (!v->is_boolean()) return FieldError(field, "expected boolean");
  return v->get<bool>();
}

absl::StatusOr<std::string> GetString(const json& obj, std::string_view field) {
  const json* v = Find(obj, field);
  if (v == nullptr) return FieldError(field, "missing");
  if (!v->is_string()) return FieldError(field, "expected string");
  return v->get<std::string>();
}

// Unsigned 64-bit values: a non-negative integer or a "0x" hex string.
absl::StatusOr<uint64_t> GetU64(const json& obj, std::string_view field) {
  const json* v = Find(obj, field);
  if (v == nullptr) return FieldError(field, "missing");
  if (v->is_number_unsigned()) return v->get<uint64_t>();
  if (v->is_number_integer()) {
    if (v->get<int64_t>() < 0) return FieldError(field, "negative");
    return static_cast<uint64_t>(v->get<int64_t>());
  }
  if (v->is_string()) {
    const auto& s = v->get_ref<const std::string&>();
    std::string_view digits = s;
    int base = 10;
    if (digits.starts_with("0x") || digits.starts_with("0X")) {
      digits.remove_prefix(2);
      base = 16;
    }
    uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out, base);
    if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size()) {
      return FieldError(field, "bad number");
    }
    return out;
  }
  return FieldError(field, "expected integer or hex string");
}

template <typename E, size_t N>
absl::StatusOr<E> GetEnum(const json& obj, std::string_view field,
                          const std::pair<std::string_view, E> (&names)[N]) {
  auto s = GetString(obj, field);
  if (!s.ok()) return s.status();
  for (const auto& [name, value] : names) {
    if (*s == name) return value;
  }
  return FieldError(field, StrCat("unknown value '", *s, "'"));
}

constexpr std::pair<std::string_view, FutexOp> kFutexOps[] = {{"wait", FutexOp::kWait},
                                                              {"wake", FutexOp::kWake}};
constexpr std::pair<std::string_view, VfsDir> kVfsDirs[] = {{"read", VfsDir::kRead},
                                                            {"write", VfsDir::kWrite}};
constexpr std::pair<std::string_view, FileKind> kFileKinds[] = {
    {"fifo", FileKind::kFifo}, {"regular", FileKind::kRegular}, {"other", FileKind::kOther}};
constexpr std::pair<std::string_view, SockDir> kSockDirs[] = {{"recv", SockDir::kRecv},
                                                              {"send", SockDir::kSend}};
constexpr std::pair<std::string_view, PollApi> kPollApis[] = {{"select", PollApi::kSelect},
                                                              {"poll", PollApi::kPoll}};
constexpr std::pair<std::string_view, EpollAction> kEpollActions[] = {
    {"insert", EpollAction::kInsert}, {"remove", EpollAction::kRemove}};

template <typename E, size_t N>
std::string_view NameOf(E value, const std::pair<std::string_view, E> (&names)[N]) {
  for (const auto& [name, v] : names) {
    if (v == value) return name;
  }
  return "?";
}

std::string Hex(uint64_t v) { return fmt::format("0x{:x}", v); }

absl::StatusOr<std::vector<Bri>> GetBriList(const json& obj, std::string_view field,
                                            bool required) {
  std::vector<Bri> out;
  const json* v = Find(obj, field);
  if (v == nullptr) {
    if (required) return FieldError(field, "missing");
    return out;
  }
  if (!v->is_array()) return FieldError(field, "expected array of bri keys");
  for (const json& item : *v) {
    if (!item.is_string()) return FieldError(field, "expected array of bri keys");
    auto bri = ParseBriKey(item.get<std::string>());
    if (!bri.ok()) return FieldError(field, StatusMessage(bri.status()));
    out.push_back(*std::move(bri));
  }
  return out;
}

absl::StatusOr<EventKind> DecodeKind(std::string_view kind, const json& o) {
  if (kind == "SchedSwitchOut") {
    SchedSwitchOut e;
    PL_ASSIGN_OR_RETURN(std::string state, GetString(o, "next_state"));
    PL_ASSIGN_OR_RETURN(e.next_state, ParseSchedState(state));
    PL_ASSIGN_OR_RETURN(e.in_iowait, GetBool(o, "in_iowait", false));
    PL_ASSIGN_OR_RETURN(e.exiting, GetBool(o, "exiting", false));
    return e;
  }
  if (kind == "SchedSwitchIn") return SchedSwitchIn{};
  if (kind == "SchedWakeup") return SchedWakeup{};
  if (kind == "FutexEnter") {
    FutexEnter e;
    PL_ASSIGN_OR_RETURN(e.uaddr, GetU64(o, "uaddr"));
    PL_ASSIGN_OR_RETURN(e.op, GetEnum(o, "op", kFutexOps));
    if (Find(o, "val") != nullptr) {
      PL_ASSIGN_OR_RETURN(e.val, GetInt(o, "val"));
    }
    PL_ASSIGN_OR_RETURN(e.shared, GetBool(o, "shared", false));
    return e;
  }
  if (kind == "FutexExit") {
    FutexExit e;
    PL_ASSIGN_OR_RETURN(e.result, GetInt(o, "result"));
    return e;
  }
  if (kind == "VfsAccess") {
    VfsAccess e;
    PL_ASSIGN_OR_RETURN(e.bri.s_dev, GetU64(o, "s_dev"));
    PL_ASSIGN_OR_RETURN(e.bri.i_ino, GetU64(o, "i_ino"));
    PL_ASSIGN_OR_RETURN(e.dir, GetEnum(o, "dir", kVfsDirs));
    PL_ASSIGN_OR_RETURN(e.file_kind, GetEnum(o, "file_kind", kFileKinds));
    PL_ASSIGN_OR_RETURN(e.blocking, GetBool(o, "blocking", true));
    PL_ASSIGN_OR_RETURN(e.enter, GetBool(o, "enter"));
    return e;
  }
  if (kind == "SockAccess") {
    SockAccess e;
    PL_ASSIGN_OR_RETURN(std::string fam, GetString(o, "family"));
    PL_ASSIGN_OR_RETURN(SocketFamily family, ParseSocketFamily(fam));
    PL_ASSIGN_OR_RETURN(std::string src, GetString(o, "src"));
    PL_ASSIGN_OR_RETURN(std::string dst, GetString(o, "dst"));
    PL_ASSIGN_OR_RETURN(Bri bri, CanonicalizeSocket(family, src, dst));
    e.bri = *bri.get_if<SocketTuple>();
    PL_ASSIGN_OR_RETURN(e.remote, NormalizeEndpoint(family, dst));
    PL_ASSIGN_OR_RETURN(e.dir, GetEnum(o, "dir", kSockDirs));
    PL_ASSIGN_OR_RETURN(e.enter, GetBool(o, "enter"));
    return e;
  }
  if (kind == "PollEnter") {
    PollEnter e;
    PL_ASSIGN_OR_RETURN(e.api, GetEnum(o, "api", kPollApis));
    PL_ASSIGN_OR_RETURN(e.bris, GetBriList(o, "bris", true));
    return e;
  }
  if (kind == "PollExit") {
    PollExit e;
    PL_ASSIGN_OR_RETURN(e.api, GetEnum(o, "api", kPollApis));
    PL_ASSIGN_OR_RETURN(e.bris, GetBriList(o, "bris", false));
    return e;
  }
  if (kind == "EpollCtl") {
    EpollCtl e;
    PL_ASSIGN_OR_RETURN(e.epoll.kaddr, GetU64(o, "epoll_kaddr"));
    PL_ASSIGN_OR_RETURN(std::string target, GetString(o, "target"));
    auto bri = ParseBriKey(target);
    if (!bri.ok()) return FieldError("target", StatusMessage(bri.status()));
    e.target = *std::move(bri);
    PL_ASSIGN_OR_RETURN(e.action, GetEnum(o, "action", kEpollActions));
    return e;
  }
  if (kind == "EpollWaitEnter") {
    EpollWaitEnter e;
    PL_ASSIGN_OR_RETURN(e.epoll.kaddr, GetU64(o, "epoll_kaddr"));
    return e;
  }
  if (kind == "EpollWaitExit") {
    EpollWaitExit e;
    PL_ASSIGN_OR_RETURN(e.epoll.kaddr, GetU64(o, "epoll_kaddr"));
    return e;
  }
  if (kind == "BlockRq") {
    BlockRq e;
    PL_ASSIGN_OR_RETURN(int64_t major, GetInt(o, "dev_major"));
    PL_ASSIGN_OR_RETURN(int64_t minor, GetInt(o, "dev_minor"));
    if (major < 0 || minor < 0) return FieldError("dev_major", "negative");
    e.dev = {static_cast<uint32_t>(major), static_cast<uint32_t>(minor)};
    PL_ASSIGN_OR_RETURN(e.sectors, GetInt(o, "sectors"));
    if (e.sectors < 0) return FieldError("sectors", "negative");
    return e;
  }
  return absl::InvalidArgumentError(StrCat("unknown event kind '", kind, "'"));
}

ojson BriKeys(const std::vector<Bri>& bris) {
  ojson arr = ojson::array();
  for (const Bri& b : bris) arr.push_back(b.Key());
  return arr;
}

struct KindEncoder {
  ojson& o;
  void operator()(const SchedSwitchOut& e) {
    o["next_state"] = SchedStateName(e.next_state);
    if (e.in_iowait) o["in_iowait"] = true;
    if (e.exiting) o["exiting"] = true;
  }
  void operator()(const SchedSwitchIn&) {}
  void operator()(const SchedWakeup&) {}
  void operator()(const FutexEnter& e) {
    o["uaddr"] = Hex(e.uaddr);
    o["op"] = NameOf(e.op, kFutexOps);
    o["val"] = e.val;
    if (e.shared) o["shared"] = true;
  }
  void operator()(const FutexExit& e) { o["result"] = e.result; }
  void operator()(const VfsAccess& e) {
    o["s_dev"] = e.bri.s_dev;
    o["i_ino"] = e.bri.i_ino;
    o["dir"] = NameOf(e.dir, kVfsDirs);
    o["file_kind"] = NameOf(e.file_kind, kFileKinds);
    o["blocking"] = e.blocking;
    o["enter"] = e.enter;
  }
  void operator()(const SockAccess& e) {
    o["family"] = SocketFamilyName(e.bri.family);
    // src is whichever canonical endpoint is not the remote one.
    const std::string& src = e.remote == e.bri.first ? e.bri.second : e.bri.first;
    o["src"] = src;
    o["dst"] = e.remote.empty() ? e.bri.second : e.remote;
    o["dir"] = NameOf(e.dir, kSockDirs);
    o["enter"] = e.enter;
  }
  void operator()(const PollEnter& e) {
    o["api"] = NameOf(e.api, kPollApis);
    o["bris"] = BriKeys(e.bris);
  }
  void operator()(const PollExit& e) {
    o["api"] = NameOf(e.api, kPollApis);
    if (!e.bris.empty()) o["bris"] = BriKeys(e.bris);
  }
  void operator()(const EpollCtl& e) {
    o["epoll_kaddr"] = Hex(e.epoll.kaddr);
    o["target"] = e.target.Key();
    o["action"] = NameOf(e.action, kEpollActions);
  }
  void operator()(const EpollWaitEnter& e) { o["epoll_kaddr"] = Hex(e.epoll.kaddr); }
  void operator()(const EpollWaitExit& e) { o["epoll_kaddr"] = Hex(e.epoll.kaddr); }
  void operator()(const BlockRq& e) {
    o["dev_major"] = e.dev.major;
    o["dev_minor"] = e.dev.minor;
    o["sectors"] = e.sectors;
  }
};

}  // namespace

absl::StatusOr<KernelEvent> DecodeTraceLine(std::string_view line) {
  json o = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (o.is_discarded()) return absl::InvalidArgumentError("malformed JSON");
  if (!o.is_object()) return absl::InvalidArgumentError("expected a JSON object");

  KernelEvent ev;
  PL_ASSIGN_OR_RETURN(ev.ts, GetInt(o, "ts"));
  PL_ASSIGN_OR_RETURN(int64_t tid, GetInt(o, "tid"));
  PL_ASSIGN_OR_RETURN(int64_t tgid, GetInt(o, "tgid"));
  if (tid <= 0 || tgid <= 0 || tid > INT32_MAX || tgid > INT32_MAX) {
    return absl::InvalidArgumentError("tid/tgid out of range");
  }
  ev.thread.tid = static_cast<int32_t>(tid);
  ev.thread.tgid = static_cast<int32_t>(tgid);
  if (const json* comm = Find(o, "comm"); comm != nullptr) {
    if (!comm->is_string()) return FieldError("comm", "expected string");
    ev.thread.comm = comm->get<std::string>().substr(0, kMaxCommLen - 1);
  }
  PL_ASSIGN_OR_RETURN(std::string kind, GetString(o, "kind"));
  PL_ASSIGN_OR_RETURN(ev.kind, DecodeKind(kind, o));
  return ev;
}

std::string EncodeTraceLine(const KernelEvent& event) {
  ojson o;
  o["ts"] = event.ts;
  o["tid"] = event.thread.tid;
  o["tgid"] = event.thread.tgid;
  o["comm"] = event.thread.comm;
  o["kind"] = EventKindName(event.kind);
  std::visit(KindEncoder{o}, event.kind);
  return o.dump();
}

absl::StatusOr<std::vector<KernelEvent>> ReadTrace(std::istream& in) {
  std::vector<KernelEvent> events;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto ev = DecodeTraceLine(line);
    if (!ev.ok()) {
      return absl::InvalidArgumentError(
          StrCat("trace line ", lineno, ": ", StatusMessage(ev.status())));
    }
    events.push_back(*std::move(ev));
  }
  if (in.bad()) return absl::DataLossError("read error");
  std::stable_sort(events.begin(), events.end(),
                   [](const KernelEvent& a, const KernelEvent& b) { return a.ts < b.ts; });
  return events;
}

absl::StatusOr<std::vector<KernelEvent>> ReadTraceFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(StrCat("cannot open trace ", path));
  return ReadTrace(in);
}

void TraceWriter::Write(const KernelEvent& event) {
  out_ << EncodeTraceLine(event) << '\n';
  ++written_;
}

absl::Status WriteTraceFile(const std::string& path, const std::vector<KernelEvent>& events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) return absl::PermissionDeniedError(StrCat("cannot write ", path));
  TraceWriter w(out);
  for (const auto& e : events) w.Write(e);
  out.flush();
  if (!out) return absl::DataLossError(StrCat("write failed: ", path));
  return absl::OkStatus();
}

}  // namespace prismlike
