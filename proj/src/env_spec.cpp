#include "erw/env_spec.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "erw/error.hpp"

namespace erw {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_plain(std::string_view text) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    throw DomainError(fmt::format("'{}' is not a number", text));
  }
  return value;
}

bool parse_bool(std::string_view text) {
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  throw DomainError(fmt::format("'{}' is not a boolean", text));
}

template <class F>
auto with_context(const KeyValueDocument::Entry& e, F&& f) {
  try {
    return f(e.value);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& ex) {
    throw ParseError(fmt::format("line {}: key '{}': {}", e.line, e.key, ex.what()), e.line, e.key);
  }
}

}  // namespace

double parse_number(std::string_view text) {
  text = trim(text);
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    const double num = parse_plain(trim(text.substr(0, slash)));
    const double den = parse_plain(trim(text.substr(slash + 1)));
    if (den == 0.0) throw DomainError(fmt::format("'{}' divides by zero", text));
    return num / den;
  }
  return parse_plain(text);
}

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (auto part : split(text, ',')) out.push_back(parse_number(part));
  return out;
}

KeyValueDocument KeyValueDocument::parse(std::string_view text) {
  KeyValueDocument doc;
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ParseError(fmt::format("line {}: expected 'key = value'", line_no), line_no, "");
      }
      const auto key = std::string(trim(line.substr(0, eq)));
      if (key.empty()) throw ParseError(fmt::format("line {}: empty key", line_no), line_no, "");
      if (!seen.insert(key).second) {
        throw ParseError(fmt::format("line {}: duplicate key '{}'", line_no, key), line_no, key);
      }
      doc.entries_.push_back({key, std::string(trim(line.substr(eq + 1))), line_no});
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return doc;
}

KeyValueDocument KeyValueDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const KeyValueDocument::Entry* KeyValueDocument::find(std::string_view key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

CookieEnvironment env_from_document(const KeyValueDocument& doc) {
  const auto* kind = doc.find("kind");
  if (!kind) throw ParseError("missing required key 'kind'", 0, "kind");

  std::set<std::string, std::less<>> allowed{"kind", "reflect"};
  if (kind->value == "finite") {
    allowed.insert("strengths");
  } else if (kind->value == "geometric-tail") {
    allowed.insert({"head", "ratio", "scale"});
  } else if (kind->value == "custom") {
    allowed.insert("rule");
  } else if (kind->value != "transient-example" && kind->value != "placebo") {
    throw ParseError(fmt::format("line {}: key 'kind': unknown kind '{}'", kind->line, kind->value), kind->line,
                     "kind");
  }
  for (const auto& e : doc.entries()) {
    if (!allowed.contains(e.key)) {
      throw ParseError(fmt::format("line {}: key '{}' is not valid for kind '{}'", e.line, e.key, kind->value),
                       e.line, e.key);
    }
  }
  auto require = [&](std::string_view key) -> const KeyValueDocument::Entry& {
    const auto* e = doc.find(key);
    if (!e) throw ParseError(fmt::format("kind '{}' requires key '{}'", kind->value, key), kind->line, std::string(key));
    return *e;
  };

  auto env = [&]() {
    if (kind->value == "finite") {
      const auto& e = require("strengths");
      return with_context(e, [](const std::string& v) { return CookieEnvironment::finite(parse_number_list(v)); });
    }
    if (kind->value == "placebo") return CookieEnvironment::placebo();
    if (kind->value == "transient-example") return CookieEnvironment::transient_example();
    if (kind->value == "custom") {
      const auto& e = require("rule");
      return with_context(e, [](const std::string& v) { return CookieEnvironment::custom(v); });
    }
    const auto& ratio_e = require("ratio");
    const auto& scale_e = require("scale");
    const double ratio = with_context(ratio_e, [](const std::string& v) { return parse_number(v); });
    const double scale = with_context(scale_e, [](const std::string& v) { return parse_number(v); });
    std::vector<double> head;
    if (const auto* h = doc.find("head")) {
      head = with_context(*h, [](const std::string& v) { return parse_number_list(v); });
    }
    return with_context(ratio_e, [&](const std::string&) { return CookieEnvironment::geometric_tail(head, ratio, scale); });
  }();

  if (const auto* r = doc.find("reflect")) {
    if (with_context(*r, [](const std::string& v) { return parse_bool(v); })) env = reflect(env);
  }
  return env;
}

CookieEnvironment load_env_file(const std::filesystem::path& path) {
  return env_from_document(KeyValueDocument::load(path));
}

CookieEnvironment parse_env_inline(std::string_view spec) {
  spec = trim(spec);
  const auto colon = spec.find(':');
  const auto kind = trim(spec.substr(0, colon));
  const auto args = colon == std::string_view::npos ? std::string_view{} : trim(spec.substr(colon + 1));
  if (kind == "reflect") return reflect(parse_env_inline(args));
  if (kind == "placebo") return CookieEnvironment::placebo();
  if (kind == "transient-example") return CookieEnvironment::transient_example();
  if (kind == "finite") return CookieEnvironment::finite(parse_number_list(args));
  if (kind == "custom") return CookieEnvironment::custom(std::string(args));
  if (kind == "geometric-tail") {
    const auto values = parse_number_list(args);
    if (values.size() < 2) throw DomainError("geometric-tail inline form is ratio,scale[,head...]");
    return CookieEnvironment::geometric_tail({values.begin() + 2, values.end()}, values[0], values[1]);
  }
  throw DomainError(fmt::format("unknown environment kind '{}'", kind));
}

}  // namespace erw
