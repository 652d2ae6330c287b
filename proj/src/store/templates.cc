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


#include "prismlike/store/templates.h"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "prismlike/core/status_macros.h"
#include "prismlike/core/strings.h"

namespace prismlike {
namespace internal {
// Generated from sql/*.sql at build time.
const std::vector<std::pair<std::string_view, std::string_view>>& EmbeddedTemplates();
}  // namespace internal

namespace {

constexpr size_t kMaxBindingLen = 8192;
constexpr int kMaxDepth = 32;

bool KnownPlaceholder(std::string_view name) {
  return name == kPidFilter || name == kBaselineFilter || name == kCompareFilter ||
         name == kBriFilter;
}

std::string Upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

enum class Tok { kIdent, kInt, kString, kOp, kLParen, kRParen, kComma, kEnd };

struct Token {
  Tok type;
  std::string text;
};

absl::StatusOr<std::vector<Token>> Tokenize(std::string_view s) {
  std::vector<Token> out;
  size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      out.push_back({Tok::kIdent, std::string(s.substr(i, j - i))});
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      if (j - i > 18) return absl::InvalidArgumentError("integer literal too long");
      if (j < s.size() && (std::isalpha(static_cast<unsigned char>(s[j])) || s[j] == '.')) {
        return absl::InvalidArgumentError(StrCat("bad number near '", s.substr(i, j - i + 1), "'"));
      }
      out.push_back({Tok::kInt, std::string(s.substr(i, j - i))});
      i = j;
    } else if (c == '\'') {
      std::string text;
      size_t j = i + 1;
      bool closed = false;
      while (j < s.size()) {
        if (s[j] == '\'') {
          if (j + 1 < s.size() && s[j + 1] == '\'') {
            text.push_back('\'');
            j += 2;
            continue;
          }
          closed = true;
          ++j;
          break;
        }
        text.push_back(s[j++]);
      }
      if (!closed) return absl::InvalidArgumentError("unterminated string literal");
      out.push_back({Tok::kString, std::move(text)});
      i = j;
    } else if (c == '(') {
      out.push_back({Tok::kLParen, "("});
      ++i;
    } else if (c == ')') {
      out.push_back({Tok::kRParen, ")"});
      ++i;
    } else if (c == ',') {
      out.push_back({Tok::kComma, ","});
      ++i;
    } else if (c == '=' || c == '<' || c == '>' || c == '!') {
      std::string op(1, c);
      if (i + 1 < s.size() && (s[i + 1] == '=' || (c == '<' && s[i + 1] == '>'))) {
        op.push_back(s[i + 1]);
      }
      if (op == "!") return absl::InvalidArgumentError("unexpected '!'");
      i += op.size();
      if (op == "==") op = "=";
      if (op == "!=") op = "<>";
      out.push_back({Tok::kOp, op});
    } else {
      return absl::InvalidArgumentError(StrCat("unexpected character '", std::string(1, c), "'"));
    }
  }
  out.push_back({Tok::kEnd, ""});
  return out;
}

enum class LiteralKind { kInt, kString };

struct Policy {
  std::vector<std::string> columns;
  LiteralKind literal;
  bool allow_ranges;
};

const Policy* PolicyFor(std::string_view placeholder) {
  static const Policy kPid{{"pid"}, LiteralKind::kInt, true};
  static const Policy kTs{{"ts"}, LiteralKind::kInt, true};
  static const Policy kBri{{"bri_key", "res_kind"}, LiteralKind::kString, false};
  if (placeholder == kPidFilter) return &kPid;
  if (placeholder == kBaselineFilter || placeholder == kCompareFilter) return &kTs;
  if (placeholder == kBriFilter) return &kBri;
  return nullptr;
}

std::string QuoteSql(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    out.push_back(c);
    if (c == '\'') out.push_back('\'');
  }
  out.push_back('\'');
  return out;
}

class PredicateParser {
 public:
  PredicateParser(std::vector<Token> tokens, const Policy& policy)
      : tokens_(std::move(tokens)), policy_(policy) {}

  absl::StatusOr<std::string> Parse() {
    PL_RETURN_IF_ERROR(Or(0));
    if (Peek().type != Tok::kEnd) return Unexpected();
    return out_;
  }

 private:
  const Token& Peek() const { return tokens_[pos_]; }
  const Token& Next() { return tokens_[pos_++]; }
  bool IsKeyword(std::string_view kw) const {
    return Peek().type == Tok::kIdent && Upper(Peek().text) == kw;
  }
  absl::Status Unexpected() const {
    if (Peek().type == Tok::kEnd) return absl::InvalidArgumentError("unexpected end of predicate");
    return absl::InvalidArgumentError(StrCat("unexpected '", Peek().text, "'"));
  }

  absl::Status Or(int depth) {
    PL_RETURN_IF_ERROR(And(depth));
    while (IsKeyword("OR")) {
      Next();
      out_ += " OR ";
      PL_RETURN_IF_ERROR(And(depth));
    }
    return absl::OkStatus();
  }

  absl::Status And(int depth) {
    PL_RETURN_IF_ERROR(Unary(depth));
    while (IsKeyword("AND")) {
      Next();
      out_ += " AND ";
      PL_RETURN_IF_ERROR(Unary(depth));
    }
    return absl::OkStatus();
  }

  absl::Status Unary(int depth) {
    if (depth > kMaxDepth) return absl::InvalidArgumentError("predicate nested too deeply");
    if (IsKeyword("NOT")) {
      Next();
      out_ += "NOT ";
      return Unary(depth + 1);
    }
    if (IsKeyword("TRUE") || IsKeyword("FALSE")) {
      out_ += Upper(Next().text);
      return absl::OkStatus();
    }
    if (Peek().type == Tok::kLParen) {
      Next();
      out_ += "(";
      PL_RETURN_IF_ERROR(Or(depth + 1));
      if (Peek().type != Tok::kRParen) return Unexpected();
      Next();
      out_ += ")";
      return absl::OkStatus();
    }
    return Comparison();
  }

  absl::Status Literal(std::string_view column) {
    const Token& t = Next();
    if (policy_.literal == LiteralKind::kInt) {
      if (t.type != Tok::kInt) {
        return absl::InvalidArgumentError(StrCat("expected an integer, got '", t.text, "'"));
      }
      int64_t v = 0;
      if (!ParseInt(t.text, &v)) return absl::InvalidArgumentError("integer out of range");
      out_ += StrCat(v);
      return absl::OkStatus();
    }
    if (t.type != Tok::kString) {
      return absl::InvalidArgumentError(StrCat("expected a quoted string, got '", t.text, "'"));
    }
    if (column == "bri_key" && !ParseBriKey(t.text).ok()) {
      return absl::InvalidArgumentError(StrCat("not a bri_key: '", t.text, "'"));
    }
    if (column == "res_kind" && t.text != "pipe" && t.text != "socket" && t.text != "futex" &&
        t.text != "epoll") {
      return absl::InvalidArgumentError(StrCat("unknown res_kind '", t.text, "'"));
    }
    out_ += QuoteSql(t.text);
    return absl::OkStatus();
  }

  absl::Status Comparison() {
    if (Peek().type != Tok::kIdent) return Unexpected();
    const std::string column = Next().text;
    if (std::find(policy_.columns.begin(), policy_.columns.end(), column) ==
        policy_.columns.end()) {
      return absl::InvalidArgumentError(StrCat("column '", column, "' is not allowed here"));
    }
    out_ += column;
    bool negated = false;
    if (IsKeyword("NOT")) {
      Next();
      negated = true;
    }
    if (IsKeyword("IN")) {
      Next();
      out_ += negated ? " NOT IN (" : " IN (";
      if (Peek().type != Tok::kLParen) return Unexpected();
      Next();
      PL_RETURN_IF_ERROR(Literal(column));
      while (Peek().type == Tok::kComma) {
        Next();
        out_ += ", ";
        PL_RETURN_IF_ERROR(Literal(column));
      }
      if (Peek().type != Tok::kRParen) return Unexpected();
      Next();
      out_ += ")";
      return absl::OkStatus();
    }
    if (IsKeyword("BETWEEN")) {
      if (!policy_.allow_ranges) return absl::InvalidArgumentError("BETWEEN is not allowed here");
      Next();
      out_ += negated ? " NOT BETWEEN " : " BETWEEN ";
      PL_RETURN_IF_ERROR(Literal(column));
      if (!IsKeyword("AND")) return Unexpected();
      Next();
      out_ += " AND ";
      return Literal(column);
    }
    if (negated || Peek().type != Tok::kOp) return Unexpected();
    const std::string op = Next().text;
    if (!policy_.allow_ranges && op != "=" && op != "<>") {
      return absl::InvalidArgumentError(StrCat("operator ", op, " is not allowed here"));
    }
    out_ += StrCat(" ", op, " ");
    return Literal(column);
  }

  std::vector<Token> tokens_;
  const Policy& policy_;
  size_t pos_ = 0;
  std::string out_;
};

const std::regex& PlaceholderRe() {
  static const std::regex kRe(R"(\{\{\s*([A-Za-z0-9_]+)\s*\}\})");
  return kRe;
}

}  // namespace

absl::StatusOr<QueryTemplate> ParseTemplate(std::string_view text) {
  QueryTemplate t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::string body;
  bool in_header = true;
  while (std::getline(in, line)) {
    std::string_view l = Trim(line);
    if (in_header && l.substr(0, 2) == "--") {
      std::string_view rest = Trim(l.substr(2));
      const size_t colon = rest.find(':');
      if (colon == std::string_view::npos) continue;
      const std::string key(Trim(rest.substr(0, colon)));
      const std::string value(Trim(rest.substr(colon + 1)));
      if (key == "name") {
        t.name = value;
      } else if (key == "description") {
        t.description = value;
      } else if (key == "plot") {
        t.plot = value;
      } else if (key == "columns") {
        for (auto c : Split(value, ',')) t.columns.emplace_back(Trim(c));
      }
      continue;
    }
    if (in_header && l.empty()) continue;
    in_header = false;
    body += line;
    body += '\n';
  }
  if (t.name.empty()) return absl::InvalidArgumentError("template has no '-- name:' header");
  for (char c : t.name) {
    if (!std::islower(static_cast<unsigned char>(c)) && !std::isdigit(static_cast<unsigned char>(c)) &&
        c != '_') {
      return absl::InvalidArgumentError(StrCat("bad template name '", t.name, "'"));
    }
  }
  if (t.plot.empty()) t.plot = "line";
  if (t.plot != "line" && t.plot != "histogram" && t.plot != "bar") {
    return absl::InvalidArgumentError(StrCat("template ", t.name, ": unknown plot '", t.plot, "'"));
  }
  if (Trim(body).empty()) return absl::InvalidArgumentError(StrCat("template ", t.name, " is empty"));
  t.text = std::move(body);
  for (std::sregex_iterator it(t.text.begin(), t.text.end(), PlaceholderRe()), end; it != end;
       ++it) {
    const std::string name = (*it)[1].str();
    if (!KnownPlaceholder(name)) {
      return absl::InvalidArgumentError(
          StrCat("template ", t.name, ": unknown placeholder '", name, "'"));
    }
    if (std::find(t.placeholders.begin(), t.placeholders.end(), name) == t.placeholders.end()) {
      t.placeholders.push_back(name);
    }
  }
  return t;
}

const TemplateRegistry& TemplateRegistry::Builtin() {
  static const TemplateRegistry* kRegistry = [] {
    auto* r = new TemplateRegistry();
    for (const auto& [file, text] : internal::EmbeddedTemplates()) {
      auto t = ParseTemplate(text);
      if (!t.ok()) {
        std::fprintf(stderr, "embedded template %s: %s\n", std::string(file).c_str(),
                     StatusMessage(t.status()).c_str());
        std::abort();
      }
      (void)r->Add(*std::move(t));
    }
    return r;
  }();
  return *kRegistry;
}

absl::Status TemplateRegistry::Add(QueryTemplate tmpl) {
  std::string name = tmpl.name;
  templates_[name] = std::move(tmpl);
  return absl::OkStatus();
}

absl::Status TemplateRegistry::LoadDirectory(const std::string& dir) {
  std::error_code ec;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.path().extension() == ".sql") files.push_back(entry.path());
  }
  if (ec) return absl::NotFoundError(StrCat("cannot list ", dir, ": ", ec.message()));
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    auto t = ParseTemplate(ss.str());
    if (!t.ok()) {
      return absl::InvalidArgumentError(StrCat(f.string(), ": ", StatusMessage(t.status())));
    }
    PL_RETURN_IF_ERROR(Add(*std::move(t)));
  }
  return absl::OkStatus();
}

absl::StatusOr<const QueryTemplate*> TemplateRegistry::Find(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) return absl::NotFoundError(StrCat("unknown template '", name, "'"));
  return &it->second;
}

std::vector<const QueryTemplate*> TemplateRegistry::List() const {
  std::vector<const QueryTemplate*> out;
  for (const auto& [name, t] : templates_) out.push_back(&t);
  return out;
}

absl::StatusOr<std::string> ValidateBinding(std::string_view placeholder, std::string_view text) {
  const Policy* policy = PolicyFor(placeholder);
  if (policy == nullptr) {
    return absl::InvalidArgumentError(StrCat("unknown binding '", placeholder, "'"));
  }
  if (text.size() > kMaxBindingLen) {
    return absl::InvalidArgumentError(StrCat(placeholder, ": predicate too long"));
  }
  if (Trim(text).empty()) return absl::InvalidArgumentError(StrCat(placeholder, ": empty"));
  auto tokens = Tokenize(text);
  if (!tokens.ok()) {
    return absl::InvalidArgumentError(StrCat(placeholder, ": ", StatusMessage(tokens.status())));
  }
  auto rendered = PredicateParser(*std::move(tokens), *policy).Parse();
  if (!rendered.ok()) {
    return absl::InvalidArgumentError(StrCat(placeholder, ": ", StatusMessage(rendered.status())));
  }
  return StrCat("(", *rendered, ")");
}

absl::StatusOr<std::string> BindingFromJson(std::string_view placeholder,
                                            const nlohmann::json& value) {
  if (value.is_string()) {
    const std::string s = value.get<std::string>();
    if (placeholder == kBriFilter && ParseBriKey(s).ok()) {
      return ValidateBinding(placeholder, StrCat("bri_key = ", QuoteSql(s)));
    }
    return ValidateBinding(placeholder, s);
  }
  if (placeholder == kPidFilter) {
    std::vector<int64_t> pids;
    if (value.is_number_integer()) {
      pids.push_back(value.get<int64_t>());
    } else if (value.is_array()) {
      for (const auto& v : value) {
        if (!v.is_number_integer()) {
          return absl::InvalidArgumentError("pid_filter: pids must be integers");
        }
        pids.push_back(v.get<int64_t>());
      }
    } else {
      return absl::InvalidArgumentError("pid_filter: expected a predicate, pid or list of pids");
    }
    if (pids.empty()) return std::string("(FALSE)");
    std::string list;
    for (int64_t p : pids) list += StrCat(list.empty() ? "" : ", ", p);
    return ValidateBinding(placeholder, StrCat("pid IN (", list, ")"));
  }
  if (placeholder == kBaselineFilter || placeholder == kCompareFilter) {
    if (!value.is_object() || !value.contains("start") || !value.contains("end") ||
        !value["start"].is_number_integer() || !value["end"].is_number_integer()) {
      return absl::InvalidArgumentError(
          StrCat(placeholder, ": expected a predicate or {\"start\": ns, \"end\": ns}"));
    }
    const int64_t start = value["start"].get<int64_t>();
    const int64_t end = value["end"].get<int64_t>();
    if (start < 0 || end < start) {
      return absl::InvalidArgumentError(StrCat(placeholder, ": inverted range"));
    }
    return ValidateBinding(placeholder, StrCat("ts >= ", start, " AND ts < ", end));
  }
  return absl::InvalidArgumentError(StrCat(placeholder, ": expected a string"));
}

absl::StatusOr<std::string> RenderTemplate(const QueryTemplate& tmpl, const Bindings& bindings) {
  for (const auto& [name, value] : bindings) {
    if (!KnownPlaceholder(name)) {
      return absl::InvalidArgumentError(StrCat("unknown binding '", name, "'"));
    }
  }
  std::map<std::string, std::string> rendered;
  for (const std::string& name : tmpl.placeholders) {
    auto it = bindings.find(name);
    if (it == bindings.end()) {
      if (name == kPidFilter || name == kBriFilter) {
        rendered[name] = "(TRUE)";
        continue;
      }
      return absl::InvalidArgumentError(StrCat("missing binding '", name, "'"));
    }
    PL_ASSIGN_OR_RETURN(rendered[name], ValidateBinding(name, it->second));
  }
  std::string out;
  auto begin = std::sregex_iterator(tmpl.text.begin(), tmpl.text.end(), PlaceholderRe());
  size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    out.append(tmpl.text, last, static_cast<size_t>(it->position()) - last);
    out += rendered.at((*it)[1].str());
    last = static_cast<size_t>(it->position() + it->length());
  }
  out.append(tmpl.text, last, std::string::npos);
  return out;
}

absl::StatusOr<Table> RunTemplate(const MetricStore& store, const TemplateRegistry& registry,
                                  std::string_view name, const Bindings& bindings) {
  PL_ASSIGN_OR_RETURN(const QueryTemplate* tmpl, registry.Find(name));
  PL_ASSIGN_OR_RETURN(std::string sql, RenderTemplate(*tmpl, bindings));
  return store.Select(sql);
}

}  // namespace prismlike
