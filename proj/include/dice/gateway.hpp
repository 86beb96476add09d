#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dice/image.hpp"
#include "dice/parse.hpp"
#include "dice/types.hpp"

namespace dice {

struct ImageBytes {
    std::string mime = "image/png";
    std::string data;  // raw encoded bytes
};

using ChatPart = std::variant<std::string, ImageBytes>;

struct ChatRequest {
    std::string system_prompt;
    std::vector<ChatPart> user_parts;
    bool want_logprobs = false;
    int top_k_alternatives = 5;
    double temperature = 0.0;
};

struct ChatResponse {
    std::string text;
    std::vector<TokenLogprob> tokens;  // empty when logprobs were not requested
};

// Canonical chat-completions-style JSON used both on the wire and as the
// cache key material.
nlohmann::json chat_request_to_json(const ChatRequest& req, const std::string& model);
ChatResponse chat_response_from_json(const nlohmann::json& j);
nlohmann::json chat_response_to_json(const ChatResponse& resp);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse chat(const ChatRequest& req) = 0;
    virtual std::vector<double> embed(const std::string& kind, const std::string& payload) = 0;
    virtual std::string endpoint_id() const = 0;
    virtual std::string model_id() const = 0;
};

struct RetryPolicy {
    int attempts = 3;
    std::vector<int> backoff_ms = {1000, 4000, 16000};
};

struct HttpBackendConfig {
    std::string base_url;  // e.g. http://127.0.0.1:8080
    std::string chat_model;
    std::string embed_model;
    std::string api_key;  // optional bearer token
    RetryPolicy retry;
    int timeout_sec = 60;
};

class HttpBackend : public ChatBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    ChatResponse chat(const ChatRequest& req) override;
    std::vector<double> embed(const std::string& kind, const std::string& payload) override;
    std::string endpoint_id() const override { return config_.base_url; }
    std::string model_id() const override { return config_.chat_model; }

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body);
    HttpBackendConfig config_;
};

// Unit-test backend: responses come from a user function, every request is
// recorded.
class ScriptedBackend : public ChatBackend {
public:
    std::function<ChatResponse(const ChatRequest&)> responder;
    std::function<std::vector<double>(const std::string&, const std::string&)> embedder;

    ChatResponse chat(const ChatRequest& req) override;
    std::vector<double> embed(const std::string& kind, const std::string& payload) override;
    std::string endpoint_id() const override { return "scripted"; }
    std::string model_id() const override { return "scripted-model"; }

    const std::vector<ChatRequest>& chat_requests() const { return chat_requests_; }
    const std::vector<std::pair<std::string, std::string>>& embed_requests() const {
        return embed_requests_;
    }

private:
    std::vector<ChatRequest> chat_requests_;
    std::vector<std::pair<std::string, std::string>> embed_requests_;
};

// File-per-key response cache. The key hashes the endpoint id, the model id
// and the canonical request JSON, so identical requests always hit the same
// entry.
class ResponseCache {
public:
    explicit ResponseCache(std::string dir);
    static std::string key_for(const std::string& endpoint_id, const std::string& model_id,
                               const nlohmann::json& request);
    std::optional<nlohmann::json> lookup(const std::string& key) const;
    void store(const std::string& key, const nlohmann::json& request,
               const nlohmann::json& response);

private:
    std::string dir_;
};

// Wraps a backend with the response cache; counts how many calls reached the
// inner backend.
class CachingBackend : public ChatBackend {
public:
    CachingBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<ResponseCache> cache);
    ChatResponse chat(const ChatRequest& req) override;
    std::vector<double> embed(const std::string& kind, const std::string& payload) override;
    std::string endpoint_id() const override { return inner_->endpoint_id(); }
    std::string model_id() const override { return inner_->model_id(); }
    std::size_t network_calls() const { return network_calls_; }

private:
    std::shared_ptr<ChatBackend> inner_;
    std::shared_ptr<ResponseCache> cache_;
    std::size_t network_calls_ = 0;
    std::mutex mu_;
};

struct GatewayOptions {
    int overlay_thickness = 4;
    int top_k_alternatives = 5;
};

// High-level operations over a chat backend: difference detection, coherence
// assessment, captioning and embeddings.
class Gateway {
public:
    explicit Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options = {});

    // Loads case images by path; overridable for tests.
    std::function<Image(const std::string&)> load = nullptr;

    ParseReport detect(const EditCase& c);
    std::pair<Image, Image> prepare_coherence_images(const EditCase& c,
                                                     const Difference& d) const;
    CoherenceVerdict assess_coherence(const EditCase& c, const Difference& d);

    std::string caption(const Image& image);
    std::string compose_target_caption(const std::string& original_caption,
                                       const std::string& prompt);

    std::vector<double> embed_image(const Image& image);
    std::vector<double> embed_text(const std::string& text);

private:
    std::vector<double> normalized(std::vector<double> v);
    std::shared_ptr<ChatBackend> backend_;
    GatewayOptions options_;
    std::optional<std::size_t> embed_dim_;
    std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
};

// Parses the coherence response contract ("Reasoning: ...", "Decision: YES|NO").
CoherenceVerdict parse_coherence_response(const std::string& text);

// Runs `tasks` on up to `workers` threads; exceptions propagate after all
// tasks finish or are abandoned.
void run_bounded(int workers, const std::vector<std::function<void()>>& tasks);

}  // namespace dice
