#include <httplib.h>

#include <chrono>
#include <thread>

#include "psv/generation.hpp"

namespace psv {

json HttpBackend::request_body(const ModelRef& model, const GenerationRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  return {{"model", model.id},
          {"messages", messages},
          {"n", request.n},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens},
          {"seed", request.seed}};
}

namespace {

std::vector<std::string> parse_choices(const std::string& body) {
  const auto j = json::parse(body);
  std::vector<std::string> out;
  for (const auto& choice : j.at("choices")) {
    if (choice.contains("message")) {
      const auto& content = choice["message"].at("content");
      out.push_back(content.is_null() ? std::string() : content.get<std::string>());
    } else {
      out.push_back(choice.at("text").get<std::string>());
    }
  }
  return out;
}

bool retryable(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::vector<std::string> HttpBackend::generate(const ModelRef& model,
                                               const GenerationRequest& request) const {
  validate(request);
  const std::string endpoint = model.endpoint.empty() ? options_.endpoint : model.endpoint;
  httplib::Client client(endpoint);
  const auto timeout = std::chrono::duration<double>(options_.request_timeout_seconds);
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  if (!options_.api_key.empty()) client.set_bearer_token_auth(options_.api_key);

  std::vector<std::string> out;
  // Servers may cap n; keep asking until the request is filled.
  for (int round = 0; static_cast<int>(out.size()) < request.n; ++round) {
    if (round >= request.n) {
      throw BackendError("endpoint " + endpoint + " keeps returning no choices");
    }
    GenerationRequest part = request;
    part.n = request.n - static_cast<int>(out.size());
    part.seed = request.seed + static_cast<std::uint64_t>(round);
    const auto body = request_body(model, part).dump();

    std::string last_error;
    bool done = false;
    for (int attempt = 0; attempt < options_.max_attempts && !done; ++attempt) {
      if (attempt > 0) {
        const double backoff = options_.initial_backoff_seconds * (1 << (attempt - 1));
        std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      }
      auto res = client.Post(options_.path, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512);
        if (!retryable(res->status)) break;
        continue;
      }
      try {
        auto choices = parse_choices(res->body);
        choices.resize(std::min<std::size_t>(choices.size(), static_cast<std::size_t>(part.n)));
        out.insert(out.end(), choices.begin(), choices.end());
        done = true;
      } catch (const json::exception& e) {
        last_error = std::string("malformed response: ") + e.what();
      }
    }
    if (!done) {
      throw BackendError("generation failed at " + endpoint + options_.path + " after " +
                         std::to_string(options_.max_attempts) + " attempts: " + last_error);
    }
  }
  return out;
}

}  // namespace psv
