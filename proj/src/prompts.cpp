#include "psv/prompts.hpp"

namespace psv::assets {
extern const std::string_view proposer_v1;
extern const std::string_view solver_v1;
extern const std::string_view solver_exemplar_v1;
}  // namespace psv::assets

namespace psv::prompts {

namespace {

constexpr std::string_view kSystemMarker = "=== system ===\n";
constexpr std::string_view kUserMarker = "=== user ===\n";

std::string strip_trailing_newlines(std::string s) {
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

}  // namespace

Template parse_template(std::string_view asset) {
  Template t;
  const auto user = asset.find(kUserMarker);
  if (user == std::string_view::npos) {
    t.user = strip_trailing_newlines(std::string(asset));
    return t;
  }
  const auto sys = asset.find(kSystemMarker);
  if (sys != std::string_view::npos && sys < user) {
    const auto begin = sys + kSystemMarker.size();
    t.system = strip_trailing_newlines(std::string(asset.substr(begin, user - begin)));
  }
  t.user = strip_trailing_newlines(std::string(asset.substr(user + kUserMarker.size())));
  return t;
}

const Template& proposer() {
  static const Template t = parse_template(assets::proposer_v1);
  return t;
}

const Template& solver() {
  static const Template t = parse_template(assets::solver_v1);
  return t;
}

std::string_view solver_exemplar() { return assets::solver_exemplar_v1; }

json asset_hashes() {
  return {{"proposer_v1", sha256_hex(assets::proposer_v1)},
          {"solver_v1", sha256_hex(assets::solver_v1)},
          {"solver_exemplar_v1", sha256_hex(assets::solver_exemplar_v1)}};
}

std::string substitute(std::string_view text, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto it = vars.find(std::string(text.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

}  // namespace psv::prompts
