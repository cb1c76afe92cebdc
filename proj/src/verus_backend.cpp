#include "psv/verus_backend.hpp"

#include <unistd.h>

#include <cstdlib>
#include <regex>

#include "psv/specpipe.hpp"

namespace psv {

std::string resolve_verus_binary(const std::string& configured) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv("PSV_VERUS_BIN"); env != nullptr && *env != '\0') return env;
  return "verus";
}

VerifierVerdict classify_verus_result(const ProcessResult& r) {
  if (r.spawn_failed) {
    return VerifierVerdict::tool_error("cannot run verifier: " + r.spawn_error, r.wall_time);
  }
  if (r.timed_out) return VerifierVerdict::timeout(r.wall_time);
  if (r.term_signal != 0) {
    return VerifierVerdict::tool_error(
        "verifier killed by signal " + std::to_string(r.term_signal) + "\n" + r.output,
        r.wall_time);
  }
  if (r.output.find("panicked at") != std::string::npos) {
    return VerifierVerdict::tool_error("verifier panicked\n" + r.output, r.wall_time);
  }
  static const std::regex summary(R"(verification results::\s*(\d+) verified,\s*(\d+) errors?)");
  std::smatch m;
  const bool has_summary = std::regex_search(r.output, m, summary);
  const long errors = has_summary ? std::stol(m[2]) : -1;
  if (r.exit_code == 0) {
    if (errors > 0) return VerifierVerdict::rejected(r.output, r.wall_time);
    return VerifierVerdict::verified_in(r.wall_time);
  }
  if (errors > 0 || r.output.find("error") != std::string::npos) {
    return VerifierVerdict::rejected(r.output, r.wall_time);
  }
  return VerifierVerdict::tool_error(
      "verifier exited with status " + std::to_string(r.exit_code) + "\n" + r.output, r.wall_time);
}

VerusBackend::VerusBackend(VerusOptions options) : options_(std::move(options)) {
  options_.binary = resolve_verus_binary(options_.binary);
}

std::string VerusBackend::version() const {
  std::call_once(version_once_, [this] {
    const auto r = run_process({options_.binary, "--version"}, 30.0);
    if (!r.ok()) {
      version_ = "unavailable";
      return;
    }
    version_ = trim(r.output.substr(0, r.output.find('\n')));
    if (version_.empty()) version_ = "unknown";
  });
  return version_;
}

namespace {

class TempSource {
 public:
  TempSource(const fs::path& dir, std::string_view content) {
    const auto base = dir.empty() ? fs::temp_directory_path() : dir;
    fs::create_directories(base);
    std::string templ = (base / "psv-check-XXXXXX.rs").string();
    const int fd = ::mkstemps(templ.data(), 3);
    if (fd < 0) throw Error("cannot create temporary file in " + base.string());
    std::size_t off = 0;
    while (off < content.size()) {
      const auto n = ::write(fd, content.data() + off, content.size() - off);
      if (n <= 0) {
        ::close(fd);
        throw Error("cannot write temporary file " + templ);
      }
      off += static_cast<std::size_t>(n);
    }
    ::close(fd);
    path_ = templ;
  }
  TempSource(const TempSource&) = delete;
  TempSource& operator=(const TempSource&) = delete;
  ~TempSource() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

VerifierVerdict VerusBackend::verify_program(std::string_view program) const {
  if (trim(program).empty()) return VerifierVerdict::rejected("empty program");
  std::optional<TempSource> source;
  try {
    source.emplace(options_.scratch_dir, program);
  } catch (const std::exception& e) {
    return VerifierVerdict::tool_error(e.what());
  }
  std::vector<std::string> argv{options_.binary, source->path().string()};
  argv.insert(argv.end(), options_.extra_args.begin(), options_.extra_args.end());
  return classify_verus_result(run_process(argv, options_.timeout_seconds));
}

VerifierVerdict VerusBackend::verify_solution(const ProblemSpec& spec,
                                              std::string_view code) const {
  if (trim(code).empty()) return VerifierVerdict::rejected("empty program");
  if (auto why = spec_mismatch(spec, code)) return VerifierVerdict::rejected(*why);
  return verify_program(code);
}

VerifierVerdict VerusBackend::verify_spec_only(const ProblemSpec& spec) const {
  std::string stub;
  try {
    stub = specpipe::make_stub(spec.text);
  } catch (const specpipe::SpecError& e) {
    return VerifierVerdict::rejected(std::string("stub: ") + e.what());
  }
  return verify_program(stub);
}

}  // namespace psv
