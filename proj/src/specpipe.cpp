#include "psv/specpipe.hpp"

#include <cctype>
#include <optional>

namespace psv::specpipe {

namespace {

constexpr std::string_view kFence = "```";
constexpr std::string_view kPreludeUse = "use vstd::prelude::*;";
constexpr std::string_view kExternalBody = "#[verifier::external_body]";

enum class Lex : unsigned char { Code, Comment, String };

// Classifies each byte. Rust block comments nest.
std::vector<Lex> lex(std::string_view s) {
  std::vector<Lex> kind(s.size(), Lex::Code);
  std::size_t i = 0;
  while (i < s.size()) {
    if (s.compare(i, 2, "//") == 0) {
      while (i < s.size() && s[i] != '\n') kind[i++] = Lex::Comment;
    } else if (s.compare(i, 2, "/*") == 0) {
      int depth = 0;
      while (i < s.size()) {
        if (s.compare(i, 2, "/*") == 0) {
          ++depth;
          kind[i] = kind[i + 1] = Lex::Comment;
          i += 2;
        } else if (s.compare(i, 2, "*/") == 0) {
          kind[i] = kind[i + 1] = Lex::Comment;
          i += 2;
          if (--depth == 0) break;
        } else {
          kind[i++] = Lex::Comment;
        }
      }
    } else if (s[i] == '"') {
      kind[i++] = Lex::String;
      while (i < s.size() && s[i] != '"') {
        if (s[i] == '\\' && i + 1 < s.size()) kind[i++] = Lex::String;
        kind[i++] = Lex::String;
      }
      if (i < s.size()) kind[i++] = Lex::String;
    } else {
      ++i;
    }
  }
  return kind;
}

std::vector<bool> code_mask(std::string_view s) {
  const auto kind = lex(s);
  std::vector<bool> mask(kind.size());
  for (std::size_t i = 0; i < kind.size(); ++i) mask[i] = kind[i] == Lex::Code;
  return mask;
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Half-open byte range of one top-level item.
struct Item {
  std::size_t begin = 0;
  std::size_t end = 0;
  // Position of the first depth-0 '{', if any.
  std::optional<std::size_t> open_brace;
  bool closed = true;
};

struct Scan {
  std::vector<Item> items;
  bool stray_close = false;
};

Scan scan_items(std::string_view s, const std::vector<bool>& mask) {
  Scan scan;
  int brace = 0;
  int group = 0;  // parens and brackets
  Item cur;
  cur.begin = 0;
  bool has_content = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!mask[i]) continue;
    const char c = s[i];
    if (!std::isspace(static_cast<unsigned char>(c))) has_content = true;
    switch (c) {
      case '(':
      case '[':
        ++group;
        break;
      case ')':
      case ']':
        if (group > 0) --group;
        break;
      case '{':
        if (brace == 0 && group == 0 && !cur.open_brace) cur.open_brace = i;
        ++brace;
        break;
      case '}':
        if (brace == 0) {
          scan.stray_close = true;
          break;
        }
        if (--brace == 0 && group == 0) {
          cur.end = i + 1;
          scan.items.push_back(cur);
          cur = Item{};
          cur.begin = i + 1;
          has_content = false;
        }
        break;
      case ';':
        if (brace == 0 && group == 0) {
          cur.end = i + 1;
          scan.items.push_back(cur);
          cur = Item{};
          cur.begin = i + 1;
          has_content = false;
        }
        break;
      default:
        break;
    }
  }
  if (has_content) {
    cur.end = s.size();
    cur.closed = brace == 0;
    scan.items.push_back(cur);
  }
  return scan;
}

// Code-only view of [begin, end): comments and attributes blanked.
std::string code_only(std::string_view s, const std::vector<bool>& mask, std::size_t begin,
                      std::size_t end) {
  std::string out;
  out.reserve(end - begin);
  int attr_depth = 0;
  for (std::size_t i = begin; i < end; ++i) {
    if (!mask[i]) {
      out += ' ';
      continue;
    }
    if (attr_depth == 0 && s[i] == '#' && i + 1 < end && s[i + 1] == '[') {
      attr_depth = 1;
      out += ' ';
      ++i;
      out += ' ';
      continue;
    }
    if (attr_depth > 0) {
      if (s[i] == '[') ++attr_depth;
      if (s[i] == ']') --attr_depth;
      out += ' ';
      continue;
    }
    out += s[i];
  }
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (is_ident_char(s[i])) {
      std::size_t j = i;
      while (j < s.size() && is_ident_char(s[j])) ++j;
      out.emplace_back(s.substr(i, j - i));
      i = j;
    } else {
      if (!std::isspace(static_cast<unsigned char>(s[i]))) out.emplace_back(1, s[i]);
      ++i;
    }
  }
  return out;
}

struct FnInfo {
  bool is_fn = false;
  bool is_exec = false;
  std::string name;
};

FnInfo classify(std::string_view s, const std::vector<bool>& mask, const Item& item) {
  FnInfo info;
  const std::size_t stop = item.open_brace.value_or(item.end);
  const auto toks = words(code_only(s, mask, item.begin, stop));
  bool ghost = false;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t == "fn") {
      info.is_fn = true;
      info.is_exec = !ghost;
      if (i + 1 < toks.size()) info.name = toks[i + 1];
      return info;
    }
    if (t == "spec" || t == "proof") {
      ghost = true;
    } else if (t == "pub" || t == "open" || t == "closed" || t == "exec" || t == "const" ||
               t == "unsafe" || t == "async" || t == "broadcast" || t == "uninterp" ||
               t == "crate" || t == "(" || t == ")" || t == "super" || t == "in" ||
               t == "self") {
      // modifiers and visibility restrictions
    } else {
      return info;
    }
  }
  return info;
}

std::string trim_item(std::string_view s) { return trim(s); }

std::string strip_external_body(std::string_view header) {
  std::string out(header);
  const auto pos = out.find(kExternalBody);
  if (pos == std::string::npos) return out;
  auto end = pos + kExternalBody.size();
  while (end < out.size() && std::isspace(static_cast<unsigned char>(out[end]))) ++end;
  out.erase(pos, end - pos);
  return out;
}

// Unwraps `verus! { ... }` if present; otherwise returns the input.
std::string unwrap_verus_macro(std::string_view s) {
  const auto mask = code_mask(s);
  std::size_t pos = 0;
  while ((pos = s.find("verus!", pos)) != std::string_view::npos) {
    if (mask[pos] && (pos == 0 || !is_ident_char(s[pos - 1]))) break;
    pos += 6;
  }
  if (pos == std::string_view::npos) return std::string(s);
  std::size_t i = pos + 6;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  if (i >= s.size() || s[i] != '{') return std::string(s);
  const std::size_t open = i;
  int depth = 0;
  for (; i < s.size(); ++i) {
    if (!mask[i]) continue;
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) {
      return std::string(s.substr(open + 1, i - open - 1));
    }
  }
  return std::string(s.substr(open + 1));
}

struct Located {
  std::string text;
  std::vector<bool> mask;
  Scan scan;
  std::vector<std::size_t> helpers;  // indices into scan.items
  std::size_t target = 0;
  FnInfo info;
};

Located locate(std::string_view block) {
  Located loc;
  loc.text = unwrap_verus_macro(block);
  loc.mask = code_mask(loc.text);
  loc.scan = scan_items(loc.text, loc.mask);
  if (loc.scan.stray_close) {
    throw SpecError("unbalanced braces: unmatched '}'");
  }
  std::optional<std::size_t> target;
  bool any_fn = false;
  for (std::size_t i = 0; i < loc.scan.items.size(); ++i) {
    const auto info = classify(loc.text, loc.mask, loc.scan.items[i]);
    any_fn = any_fn || info.is_fn;
    if (info.is_fn && info.is_exec && info.name != "main" && loc.scan.items[i].open_brace) {
      target = i;
      loc.info = info;
    }
  }
  if (!target) {
    if (!loc.scan.items.empty() && !loc.scan.items.back().closed && any_fn) {
      throw SpecError("unbalanced braces in helpers");
    }
    throw SpecError("no function signature found");
  }
  loc.target = *target;
  for (std::size_t i = 0; i < loc.target; ++i) {
    const auto& item = loc.scan.items[i];
    const auto body = trim_item(std::string_view(loc.text).substr(item.begin, item.end - item.begin));
    if (body.empty() || body == kPreludeUse) continue;
    loc.helpers.push_back(i);
  }
  return loc;
}

}  // namespace

std::vector<std::string> extract_code_blocks(std::string_view text) {
  std::vector<std::string> blocks;
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find(kFence, pos);
    if (open == std::string_view::npos) break;
    // The info string (e.g. "rust") runs to the end of the fence line.
    auto content_start = text.find('\n', open + kFence.size());
    if (content_start == std::string_view::npos) {
      // Fence on the final line with nothing after it.
      const auto rest = text.substr(open + kFence.size());
      const auto inline_close = rest.find(kFence);
      if (inline_close != std::string_view::npos) {
        blocks.emplace_back(trim(rest.substr(0, inline_close)));
        pos = open + kFence.size() + inline_close + kFence.size();
        continue;
      }
      blocks.emplace_back();
      break;
    }
    ++content_start;
    const auto close = text.find(kFence, content_start);
    if (close == std::string_view::npos) {
      blocks.emplace_back(text.substr(content_start));
      break;
    }
    auto content = text.substr(content_start, close - content_start);
    if (!content.empty() && content.back() == '\n') content.remove_suffix(1);
    blocks.emplace_back(content);
    pos = close + kFence.size();
  }
  return blocks;
}

std::string first_code_block(std::string_view text) {
  auto blocks = extract_code_blocks(text);
  return blocks.empty() ? std::string() : std::move(blocks.front());
}

SpecParts split_spec(std::string_view block) {
  const auto loc = locate(block);
  SpecParts parts;
  const std::string_view text = loc.text;
  for (auto i : loc.helpers) {
    const auto& item = loc.scan.items[i];
    if (!item.closed) throw SpecError("unbalanced braces in helpers");
    parts.helpers.push_back(trim_item(text.substr(item.begin, item.end - item.begin)));
  }
  const auto& target = loc.scan.items[loc.target];
  const auto header = text.substr(target.begin, *target.open_brace + 1 - target.begin);
  parts.target_header = strip_external_body(trim_item(header));
  parts.target_name = loc.info.name;
  return parts;
}

std::string extract_spec(std::string_view block) {
  const auto parts = split_spec(block);
  std::string out;
  for (const auto& h : parts.helpers) {
    out += h;
    out += "\n\n";
  }
  out += parts.target_header;
  return out;
}

std::string normalize(std::string_view spec_text) {
  const auto kind = lex(spec_text);
  std::string out;
  out.reserve(spec_text.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < spec_text.size(); ++i) {
    const char c = spec_text[i];
    if (kind[i] == Lex::Comment || std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

std::string make_stub(std::string_view spec_text) {
  if (trim(spec_text).empty()) throw SpecError("empty specification");
  const auto loc = locate(spec_text);
  const auto& target = loc.scan.items[loc.target];
  if (target.closed || loc.target + 1 != loc.scan.items.size()) {
    throw SpecError("specification must end at the target function's opening brace");
  }
  // Exactly one unmatched brace: the target's own.
  const std::string_view text = loc.text;
  int depth = 0;
  for (std::size_t i = *target.open_brace; i < text.size(); ++i) {
    if (!loc.mask[i]) continue;
    if (text[i] == '{') ++depth;
    if (text[i] == '}') --depth;
  }
  if (depth != 1) throw SpecError("unbalanced braces in specification");

  const auto parts = split_spec(spec_text);
  std::string out = "use vstd::prelude::*;\n\nverus! {\n\n";
  for (const auto& h : parts.helpers) {
    out += h;
    out += "\n\n";
  }
  out += kExternalBody;
  out += '\n';
  out += parts.target_header;
  out += "\n  assume(false);\n  arbitrary()\n}\n\n} // verus!\n";
  return out;
}

std::string extract_body(std::string_view program) {
  const auto loc = locate(program);
  const auto& target = loc.scan.items[loc.target];
  if (!target.closed) throw SpecError("target function has no closed body");
  const auto begin = *target.open_brace + 1;
  const auto end = target.end - 1;
  return trim(std::string_view(loc.text).substr(begin, end - begin));
}

std::string assemble_program(std::string_view spec_text, std::string_view body) {
  const auto parts = split_spec(spec_text);
  std::string out = "use vstd::prelude::*;\n\nverus! {\n\n";
  for (const auto& h : parts.helpers) {
    out += h;
    out += "\n\n";
  }
  out += parts.target_header;
  out += "\n    ";
  out += body;
  out += "\n}\n\n} // verus!\n";
  return out;
}

}  // namespace psv::specpipe
