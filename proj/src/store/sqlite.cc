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

#include "src/store/sqlite.h"

#include "prismlike/core/strings.h"

namespace prismlike::sqlite {

absl::Status ErrorFrom(sqlite3* db, int rc, std::string_view what) {
  std::string msg = StrCat(what, ": ", db != nullptr ? sqlite3_errmsg(db) : sqlite3_errstr(rc));
  switch (rc & 0xff) {
    case SQLITE_CONSTRAINT:
      return absl::AlreadyExistsError(StrCat("conflict: ", msg));
    case SQLITE_READONLY:
      return absl::PermissionDeniedError(msg);
    case SQLITE_CANTOPEN:
    case SQLITE_NOTADB:
      return absl::NotFoundError(msg);
    case SQLITE_BUSY:
    case SQLITE_LOCKED:
      return absl::UnavailableError(msg);
    case SQLITE_IOERR:
    case SQLITE_FULL:
      return absl::DataLossError(msg);
    case SQLITE_ERROR:
      return absl::InvalidArgumentError(msg);
    default:
      return absl::InternalError(msg);
  }
}

Stmt& Stmt::operator=(Stmt&& other) noexcept {
  if (this != &other) {
    if (stmt_ != nullptr) sqlite3_finalize(stmt_);
    db_ = other.db_;
    stmt_ = other.stmt_;
    other.stmt_ = nullptr;
  }
  return *this;
}

Stmt::~Stmt() {
  if (stmt_ != nullptr) sqlite3_finalize(stmt_);
}

Stmt& Stmt::Bind(int idx, int64_t v) {
  sqlite3_bind_int64(stmt_, idx, v);
  return *this;
}

Stmt& Stmt::Bind(int idx, double v) {
  sqlite3_bind_double(stmt_, idx, v);
  return *this;
}

Stmt& Stmt::Bind(int idx, std::string_view v) {
  sqlite3_bind_text(stmt_, idx, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
  return *this;
}

Stmt& Stmt::BindNull(int idx) {
  sqlite3_bind_null(stmt_, idx);
  return *this;
}

Stmt& Stmt::Bind(int idx, const Value& v) {
  if (const auto* i = std::get_if<int64_t>(&v)) return Bind(idx, *i);
  if (const auto* d = std::get_if<double>(&v)) return Bind(idx, *d);
  if (const auto* s = std::get_if<std::string>(&v)) return Bind(idx, std::string_view(*s));
  return BindNull(idx);
}

absl::StatusOr<bool> Stmt::Step() {
  int rc = sqlite3_step(stmt_);
  if (rc == SQLITE_ROW) return true;
  if (rc == SQLITE_DONE) return false;
  return ErrorFrom(db_, sqlite3_extended_errcode(db_), "step");
}

absl::Status Stmt::Exec() {
  auto r = Step();
  while (r.ok() && *r) r = Step();
  Reset();
  return r.status();
}

void Stmt::Reset() {
  sqlite3_reset(stmt_);
  sqlite3_clear_bindings(stmt_);
}

std::string Stmt::Text(int col) const {
  const unsigned char* p = sqlite3_column_text(stmt_, col);
  if (p == nullptr) return {};
  return std::string(reinterpret_cast<const char*>(p),
                     static_cast<size_t>(sqlite3_column_bytes(stmt_, col)));
}

Value Stmt::Get(int col) const {
  switch (sqlite3_column_type(stmt_, col)) {
    case SQLITE_INTEGER:
      return Int(col);
    case SQLITE_FLOAT:
      return Real(col);
    case SQLITE_NULL:
      return std::monostate{};
    default:
      return Text(col);
  }
}

absl::StatusOr<Db> Db::Open(const std::string& path, int flags) {
  sqlite3* raw = nullptr;
  int rc = sqlite3_open_v2(path.c_str(), &raw, flags, nullptr);
  Db db;
  db.db_ = raw;
  if (rc != SQLITE_OK) return ErrorFrom(raw, rc, StrCat("open ", path));
  sqlite3_extended_result_codes(raw, 1);
  sqlite3_busy_timeout(raw, 5000);
  return db;
}

Db& Db::operator=(Db&& other) noexcept {
  if (this != &other) {
    if (db_ != nullptr) sqlite3_close_v2(db_);
    db_ = other.db_;
    other.db_ = nullptr;
  }
  return *this;
}

Db::~Db() {
  if (db_ != nullptr) sqlite3_close_v2(db_);
}

absl::Status Db::Exec(std::string_view sql) {
  std::string text(sql);
  char* err = nullptr;
  int rc = sqlite3_exec(db_, text.c_str(), nullptr, nullptr, &err);
  if (rc != SQLITE_OK) {
    std::string msg = err != nullptr ? err : "";
    sqlite3_free(err);
    return ErrorFrom(db_, rc, StrCat("exec: ", msg));
  }
  return absl::OkStatus();
}

absl::StatusOr<Stmt> Db::Prepare(std::string_view sql) {
  sqlite3_stmt* stmt = nullptr;
  const char* tail = nullptr;
  int rc = sqlite3_prepare_v2(db_, sql.data(), static_cast<int>(sql.size()), &stmt, &tail);
  if (rc != SQLITE_OK) return ErrorFrom(db_, rc, "prepare");
  if (stmt == nullptr) return absl::InvalidArgumentError("empty statement");
  Stmt out(db_, stmt);
  // Only one statement per Prepare.
  if (tail != nullptr && !Trim(std::string_view(tail, sql.data() + sql.size() - tail)).empty()) {
    std::string_view rest = Trim(std::string_view(tail, sql.data() + sql.size() - tail));
    if (rest != ";") return absl::InvalidArgumentError("multiple statements are not allowed");
  }
  return out;
}

}  // namespace prismlike::sqlite
