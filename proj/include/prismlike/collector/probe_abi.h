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


/*
 * Byte layouts shared with the kernel probe programs: the event ring records
 * they emit and the keys and values of the maps the live collector reads.
 * Plain C so both sides compile the same definitions. All integers are
 * little-endian, every struct is naturally aligned and padding is explicit.
 *
 * Bump PL_ABI_VERSION on any layout change. The collector refuses to attach
 * to probes reporting a different version.
 */

#ifndef PRISMLIKE_COLLECTOR_PROBE_ABI_H_
#define PRISMLIKE_COLLECTOR_PROBE_ABI_H_

#include <stdint.h>

#define PL_ABI_MAGIC 0x504c5052u /* "PLPR" */
#define PL_ABI_VERSION 1u
#define PL_COMM_LEN 16
#define PL_MAX_BRIS_PER_THREAD 128
#define PL_MAX_POLL_BRIS 64

/* Map names. */
#define PL_MAP_ABI "pl_abi"
#define PL_MAP_MONITORED "pl_monitored"
#define PL_MAP_AGG "pl_agg"
#define PL_MAP_EVENTS "pl_events"

/* Value of pl_abi[0]. */
struct pl_abi_info {
  uint32_t magic;
  uint32_t version;
  uint32_t max_bris_per_thread;
  uint32_t reserved;
};

/* pl_monitored: key is a uint32_t tgid. */
enum pl_monitor_state {
  PL_MON_BOOTSTRAP = 1,
  PL_MON_DISCOVERED = 2,
};
struct pl_monitored_value {
  uint8_t state;
  uint8_t pad[3];
  uint32_t parent_tgid;
};

enum pl_bri_kind {
  PL_BRI_NONE = 0,
  PL_BRI_VFS = 1,
  PL_BRI_SOCKET = 2,
  PL_BRI_FUTEX = 3,
  PL_BRI_EPOLL = 4,
  PL_BRI_BLOCK = 5,
};

enum pl_family {
  PL_FAMILY_INET4 = 1,
  PL_FAMILY_INET6 = 2,
  PL_FAMILY_UNIX = 3,
};

/* inet: addr in network order, port in host order. unix: dev and inode of
 * the socket in the first 16 bytes of addr. */
struct pl_endpoint {
  uint8_t family;
  uint8_t pad;
  uint16_t port;
  uint32_t pad2;
  uint8_t addr[16];
};

struct pl_bri {
  uint8_t kind;
  uint8_t pad[7];
  union {
    struct {
      uint64_t s_dev;
      uint64_t i_ino;
    } vfs;
    struct {
      struct pl_endpoint a;
      struct pl_endpoint b;
    } sock;
    struct {
      uint64_t uaddr;
      uint32_t tgid;
      uint32_t shared;
    } futex;
    struct {
      uint64_t kaddr;
    } epoll;
    struct {
      uint32_t major;
      uint32_t minor;
    } block;
  } u;
};

enum pl_record_type {
  PL_REC_SWITCH_OUT = 1,
  PL_REC_SWITCH_IN = 2,
  PL_REC_WAKEUP = 3,
  PL_REC_FUTEX_ENTER = 4,
  PL_REC_FUTEX_EXIT = 5,
  PL_REC_VFS = 6,
  PL_REC_SOCK = 7,
  PL_REC_POLL_ENTER = 8,
  PL_REC_POLL_EXIT = 9,
  PL_REC_EPOLL_CTL = 10,
  PL_REC_EPOLL_WAIT_ENTER = 11,
  PL_REC_EPOLL_WAIT_EXIT = 12,
  PL_REC_BLOCK_RQ = 13,
};

/* Every ring record starts with this header. size covers header and
 * payload and is a multiple of 8. */
struct pl_record_hdr {
  uint64_t ts_ns;
  uint32_t tid;
  uint32_t tgid;
  char comm[PL_COMM_LEN];
  uint16_t type;
  uint16_t size;
  uint32_t flags;
};

enum pl_sched_state {
  PL_STATE_RUNNING = 0,
  PL_STATE_RUNNABLE = 1,
  PL_STATE_SLEEP = 2,
  PL_STATE_BLOCK = 3,
};

struct pl_switch_out {
  uint8_t state;
  uint8_t in_iowait;
  uint8_t exiting;
  uint8_t pad[5];
};

struct pl_futex_enter {
  uint64_t uaddr;
  int64_t val;
  uint8_t op; /* 0 wait, 1 wake */
  uint8_t shared;
  uint8_t pad[6];
};

struct pl_futex_exit {
  int64_t result;
};

struct pl_vfs {
  uint64_t s_dev;
  uint64_t i_ino;
  uint8_t dir; /* 0 read, 1 write */
  uint8_t file_kind; /* 0 fifo, 1 regular, 2 other */
  uint8_t blocking;
  uint8_t enter;
  uint8_t pad[4];
};

struct pl_sock {
  struct pl_endpoint a;
  struct pl_endpoint b;
  uint8_t dir; /* 0 recv, 1 send */
  uint8_t enter;
  uint8_t remote; /* 0 unknown, 1 a, 2 b */
  uint8_t pad[5];
};

/* Followed by nbris struct pl_bri. */
struct pl_poll {
  uint8_t api; /* 0 select, 1 poll */
  uint8_t pad[3];
  uint32_t nbris;
};

struct pl_epoll_ctl {
  uint64_t kaddr;
  uint8_t action; /* 0 insert, 1 remove */
  uint8_t pad[7];
  struct pl_bri target;
};

struct pl_epoll_wait {
  uint64_t kaddr;
};

struct pl_block_rq {
  uint32_t major;
  uint32_t minor;
  int64_t sectors;
};

/* pl_agg: per-thread, per-resource accumulators drained once per window. */
struct pl_agg_key {
  uint32_t tid;
  uint32_t tgid;
  uint16_t metric; /* metric ordinal in canonical order */
  uint8_t access;
  uint8_t pad[5];
  struct pl_bri resource;
  struct pl_bri subject;
};

struct pl_agg_value {
  uint64_t time_ns;
  uint64_t count;
};

#ifdef __cplusplus
#include <cstddef>
static_assert(sizeof(struct pl_abi_info) == 16);
static_assert(sizeof(struct pl_monitored_value) == 8);
static_assert(sizeof(struct pl_endpoint) == 24);
static_assert(sizeof(struct pl_bri) == 56);
static_assert(offsetof(struct pl_bri, u) == 8);
static_assert(sizeof(struct pl_record_hdr) == 40);
static_assert(offsetof(struct pl_record_hdr, type) == 32);
static_assert(sizeof(struct pl_switch_out) == 8);
static_assert(sizeof(struct pl_futex_enter) == 24);
static_assert(sizeof(struct pl_futex_exit) == 8);
static_assert(sizeof(struct pl_vfs) == 24);
static_assert(sizeof(struct pl_sock) == 56);
static_assert(sizeof(struct pl_poll) == 8);
static_assert(sizeof(struct pl_epoll_ctl) == 72);
static_assert(sizeof(struct pl_epoll_wait) == 8);
static_assert(sizeof(struct pl_block_rq) == 16);
static_assert(sizeof(struct pl_agg_key) == 128);
static_assert(offsetof(struct pl_agg_key, resource) == 16);
static_assert(sizeof(struct pl_agg_value) == 16);
#endif

#endif /* PRISMLIKE_COLLECTOR_PROBE_ABI_H_ */
