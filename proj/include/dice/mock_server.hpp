#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dice/image.hpp"
#include "dice/parse.hpp"

namespace dice {

// Scripted response rule. All present match fields must hold; the first
// matching rule wins.
struct MockRule {
    std::optional<std::string> contains;   // substring of system prompt or any text part
    std::optional<std::string> image_sha;  // sha256 of any decoded image part
    std::string text;
    std::vector<TokenLogprob> tokens;  // optional; synthesized when logprobs are
                                       // requested and this is empty
};

struct CapturedRequest {
    std::string path;
    nlohmann::json body;
};

// Deterministic embeddings used by the mock /v1/embeddings route: mean pixel
// channels plus a constant for images, digest bytes for text. Dimension 4,
// unnormalized (the gateway normalizes).
std::vector<double> mock_image_embedding(const Image& img);
std::vector<double> mock_text_embedding(const std::string& text);

// In-process HTTP server speaking the chat-completions and embeddings wire
// shapes, driven by scripted rules, capturing every request.
class MockServer {
public:
    MockServer();
    ~MockServer();

    void add_rule(MockRule rule);
    void set_default_text(std::string text);
    void set_capture_path(std::string path);  // JSONL, one request per line
    void load_script(const nlohmann::json& script);

    int start(int port = 0);  // binds 127.0.0.1 (free port when 0), returns the port
    void run(int port);  // blocking; for the standalone binary
    void stop();

    std::vector<CapturedRequest> captured() const;
    std::size_t request_count() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
};

MockRule mock_rule_from_json(const nlohmann::json& j);

}  // namespace dice
