#include "evocaf/llm.hpp"

#include "evocaf/errors.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

using namespace evocaf;

TEST_CASE("mock provider replays its script in order") {
    auto provider = llm::make_mock_provider({{"", {"A", "B"}}});
    llm::LlmRequest req;
    req.system_prompt = "s";
    req.user_prompt = "u";
    CHECK(provider->complete(req).text == "A");
    CHECK(provider->complete(req).text == "B");
    CHECK(provider->complete(req).text == "A"); // cycles

    auto tagged = llm::make_mock_provider({{"init", {"I"}}, {"crossover", {"C"}}});
    req.tag = "crossover";
    CHECK(tagged->complete(req).text == "C");
    req.tag = "init";
    CHECK(tagged->complete(req).text == "I");
    req.tag = "mutation";
    CHECK_THROWS_AS(tagged->complete(req), ProviderUnavailable);
}

TEST_CASE("missing credential fails before any network call") {
    llm::HttpProviderConfig config;
    config.base_url = "http://127.0.0.1:9";
    config.api_key = "";
    CHECK_THROWS_AS(llm::make_http_provider(config), ConfigError);
    llm::HttpProviderConfig no_url;
    no_url.api_key = "k";
    CHECK_THROWS_AS(llm::make_http_provider(no_url), ConfigError);
}

TEST_CASE("http provider against a local stub server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        CHECK(req.get_header_value("Authorization") == "Bearer test-key");
        res.set_content(
            R"({"choices":[{"message":{"role":"assistant","content":"stub says hi"}}],)"
            R"("usage":{"prompt_tokens":12,"completion_tokens":3}})",
            "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    llm::HttpProviderConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    config.api_key = "test-key";
    config.model = "stub-model";
    auto provider = llm::make_http_provider(config);

    llm::LlmRequest req;
    req.system_prompt = "system";
    req.user_prompt = "user";
    const llm::LlmResponse resp = provider->complete(req);
    CHECK(resp.text == "stub says hi");
    CHECK(resp.prompt_tokens == 12);
    CHECK(resp.completion_tokens == 3);
    CHECK(hits.load() == 1);

    server.stop();
    worker.join();
}

TEST_CASE("http provider retries on 5xx and gives up after max attempts") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        if (++hits < 3) {
            res.status = 503;
            res.set_content("overloaded", "text/plain");
        } else {
            res.set_content(R"({"choices":[{"message":{"content":"third time lucky"}}]})",
                            "application/json");
        }
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    llm::HttpProviderConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    config.api_key = "k";
    config.backoff_initial_s = 0.01;
    auto provider = llm::make_http_provider(config);
    llm::LlmRequest req;
    req.user_prompt = "u";
    CHECK(provider->complete(req).text == "third time lucky");
    CHECK(hits.load() == 3);

    // every attempt lands in the interaction log, failures included
    const auto log = provider->attempts();
    REQUIRE(log.size() == 3);
    CHECK(log[0].status == 503);
    CHECK(log[1].status == 503);
    CHECK(log[2].status == 200);
    CHECK(log[0].request_hash == log[2].request_hash);
    for (const auto& a : log) CHECK(a.latency_s >= 0.0);

    // keep failing: exhausts the retry budget
    hits.store(-100);
    CHECK_THROWS_AS(provider->complete(req), ProviderUnavailable);

    server.stop();
    worker.join();
}

TEST_CASE("malformed response body raises a protocol error") {
    httplib::Server server;
    server.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("this is not json", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    llm::HttpProviderConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    config.api_key = "k";
    auto provider = llm::make_http_provider(config);
    llm::LlmRequest req;
    req.user_prompt = "u";
    CHECK_THROWS_AS(provider->complete(req), ProtocolError);

    server.stop();
    worker.join();
}

TEST_CASE("program extraction") {
    const auto [desc, source] = llm::extract_program("idea...\n```\nmean_test_y\n```");
    CHECK(desc == "idea...");
    CHECK(source == "mean_test_y");

    const auto [desc2, source2] = llm::extract_program(
        "first thoughts\n```\nold version\n```\nrefined\n```dsl\nbest_y + mean_test_y\n```\n");
    CHECK(desc2 == "first thoughts");
    CHECK(source2 == "best_y + mean_test_y"); // the last fenced block wins

    CHECK_THROWS_AS(llm::extract_program("plain prose, no fence"), ExtractionError);
}
