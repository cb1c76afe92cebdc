#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "psv/generation.hpp"
#include "psv/toy.hpp"
#include "psv/verifier.hpp"

using namespace psv;

namespace {

ProblemSpec valid_toy(const std::string& name, const std::string& expr) {
  auto p = ProblemSpec::from_text("fn " + name + "(x: i64) -> (result: i64)\n    requires\n"
                                  "        0 <= x <= 6,\n    ensures\n        result == " + expr +
                                  ",\n{",
                                  Origin::seed());
  p.validity = Validity::valid();
  return p;
}

// Minimal chat-completions server; `fail_first` requests get `fail_status`.
class FakeServer {
 public:
  FakeServer(int fail_first, int fail_status) : fail_first_(fail_first), fail_status_(fail_status) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int seen = calls_++;
      last_body_ = req.body;
      if (seen < fail_first_) {
        res.status = fail_status_;
        res.set_content("{\"error\":\"busy\"}", "application/json");
        return;
      }
      const auto body = json::parse(req.body);
      json choices = json::array();
      // Hand back at most two choices per call to exercise top-up rounds.
      const int n = std::min(2, body.value("n", 1));
      for (int i = 0; i < n; ++i) {
        choices.push_back({{"index", i},
                           {"message", {{"role", "assistant"},
                                        {"content", "c" + std::to_string(served_++)}}}});
      }
      res.set_content(json{{"choices", choices}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int calls() const { return calls_; }
  std::string last_body() const { return last_body_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int fail_first_;
  int fail_status_;
  std::atomic<int> calls_{0};
  std::atomic<int> served_{0};
  std::string last_body_;
};

HttpBackend http(const std::string& endpoint) {
  HttpBackendOptions o;
  o.endpoint = endpoint;
  o.initial_backoff_seconds = 0.01;
  o.request_timeout_seconds = 5;
  return HttpBackend(o);
}

GenerationRequest request(int n) {
  GenerationRequest r;
  r.messages = {{"user", "hello"}};
  r.n = n;
  return r;
}

}  // namespace

TEST_CASE("scripted backend replays by prompt hash, then by tag") {
  GenerationRequest r = request(2);
  r.tag = "propose/t=0/EASY";
  ScriptedBackend by_hash(json{{prompt_hash(r.messages), {"a", "b", "c"}}, {"tag:" + r.tag, {"z", "z"}}});
  CHECK(by_hash.generate(ModelRef::base("m"), r) == std::vector<std::string>{"a", "b"});
  ScriptedBackend by_tag(json{{"tag:" + r.tag, {"x", "y"}}});
  CHECK(by_tag.generate(ModelRef::base("m"), r) == std::vector<std::string>{"x", "y"});
  ScriptedBackend short_list(json{{"tag:" + r.tag, {"x"}}});
  CHECK_THROWS_AS(short_list.generate(ModelRef::base("m"), r), BackendError);
  ScriptedBackend empty(json::object());
  CHECK_THROWS_AS(empty.generate(ModelRef::base("m"), r), BackendError);
}

TEST_CASE("toy solver probability and coupling") {
  ToySolverState s;
  CHECK(s.probability("x + c") == doctest::Approx(0.1));
  s.trained["x + c"] = 4;
  CHECK(s.probability("x + c") == doctest::Approx(0.7));
  s.trained["x + c"] = 100;
  CHECK(s.probability("x + c") == 1.0);

  // Raising p never turns a correct sample wrong.
  const auto spec = valid_toy("f", "x + 5");
  toy::ToySpec ts = toy::ToySpec::parse(spec.text);
  ToySolverState lo, hi;
  hi.trained[ts.family()] = 3;
  const auto a = trainable_toy_solver(lo, spec.id, spec.text, 50, 9);
  const auto b = trainable_toy_solver(hi, spec.id, spec.text, 50, 9);
  int correct_lo = 0, correct_hi = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const bool ca = toy::check_expression(ts, a[j]).outcome == toy::OracleOutcome::Agree;
    const bool cb = toy::check_expression(ts, b[j]).outcome == toy::OracleOutcome::Agree;
    CHECK((!ca || cb));
    correct_lo += ca;
    correct_hi += cb;
  }
  CHECK(correct_hi >= correct_lo);
  CHECK(correct_hi > 0);
}

TEST_CASE("toy solver backend emits verifiable fenced programs") {
  ToySolverState always;
  always.p0 = 1.0;
  ToySolverBackend backend(always);
  ModelRef m = ModelRef::base("toy");
  const auto spec = valid_toy("g", "x * x");
  const auto sols = sample_solutions(backend, m, spec, 5, {}, 1, "solve/t=0/" + spec.id);
  REQUIRE(sols.size() == 5);
  ToyOracleBackend oracle;
  for (const auto& code : sols) CHECK(oracle.verify_solution(spec, code).verified());

  auto other = ProblemSpec::from_text("fn h(a: &Vec<u8>) -> (r: u8)\n{", Origin::seed());
  other.validity = Validity::valid();
  const auto none = sample_solutions(backend, m, other, 3, {}, 1, "x");
  CHECK(none == std::vector<std::string>(3, ""));
}

TEST_CASE("sampling preconditions") {
  ScriptedBackend empty(json::object());
  auto spec = valid_toy("f", "x");
  spec.validity = Validity::invalid("no");
  CHECK_THROWS(sample_solutions(empty, ModelRef::base("m"), spec, 1, {}, 0, "t"));
  CHECK(sample_proposals(empty, ModelRef::base("m"), {{"user", "p"}}, 0, {}, 0, "t").empty());
  GenerationRequest bad = request(0);
  CHECK_THROWS(validate(bad));
}

TEST_CASE("solver prompt carries exemplar and spec") {
  const auto msgs = solver_messages("fn f() {", "EXEMPLAR");
  REQUIRE(msgs.size() == 2);
  CHECK(msgs[0].role == "system");
  CHECK(msgs[1].content.find("EXEMPLAR") != std::string::npos);
  CHECK(msgs[1].content.find("```rust\nfn f() {\n```") != std::string::npos);
  CHECK(solver_messages("fn f() {")[1].content.find("max_element") != std::string::npos);
}

TEST_CASE("http backend tops up short responses") {
  FakeServer server(0, 200);
  const auto b = http(server.endpoint());
  GenerationRequest r = request(5);
  r.temperature = 0.8;
  r.max_tokens = 77;
  r.seed = 42;
  const auto out = b.generate(ModelRef::base("qwen"), r);
  CHECK(out.size() == 5);
  CHECK(server.calls() == 3);
  const auto body = json::parse(server.last_body());
  CHECK(body["model"] == "qwen");
  CHECK(body["max_tokens"] == 77);
  CHECK(body["temperature"] == doctest::Approx(0.8));
  CHECK(body["messages"][0]["content"] == "hello");
}

TEST_CASE("http backend retries transient failures") {
  FakeServer server(2, 503);
  const auto out = http(server.endpoint()).generate(ModelRef::base("m"), request(1));
  CHECK(out.size() == 1);
  CHECK(server.calls() == 3);
}

TEST_CASE("http backend gives up after bounded retries") {
  FakeServer server(10, 503);
  CHECK_THROWS_AS(http(server.endpoint()).generate(ModelRef::base("m"), request(1)), BackendError);
  CHECK(server.calls() == 3);
}

TEST_CASE("http backend does not retry client errors") {
  FakeServer server(10, 400);
  CHECK_THROWS_AS(http(server.endpoint()).generate(ModelRef::base("m"), request(1)), BackendError);
  CHECK(server.calls() == 1);
}

TEST_CASE("http backend reports an unreachable endpoint") {
  CHECK_THROWS_AS(http("http://127.0.0.1:1").generate(ModelRef::base("m"), request(1)),
                  BackendError);
}

TEST_CASE("model refs round trip") {
  ModelRef m = ModelRef::base("base");
  m.provenance = ModelRef::Provenance::Finetuned;
  m.iteration = 3;
  m.params = {{"k", 1}};
  CHECK(model_from_json(to_json(m)) == m);
}
