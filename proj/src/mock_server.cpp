#include "dice/mock_server.hpp"

#include <cctype>
#include <fstream>

#include <httplib.h>
#include <openssl/evp.h>

#include "dice/gateway.hpp"
#include "dice/image_io.hpp"
#include "dice/util.hpp"

namespace dice {

using Json = nlohmann::json;

std::vector<double> mock_image_embedding(const Image& img) {
    double r = 0.0, g = 0.0, b = 0.0;
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t i = 0; i < n; ++i) {
        r += img.pixels[i * 3];
        g += img.pixels[i * 3 + 1];
        b += img.pixels[i * 3 + 2];
    }
    const double scale = 255.0 * static_cast<double>(n);
    return {r / scale, g / scale, b / scale, 1.0};
}

std::vector<double> mock_text_embedding(const std::string& text) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
    std::vector<double> v;
    for (int i = 0; i < 4; ++i) v.push_back((digest[i] + 1.0) / 256.0);
    return v;
}

MockRule mock_rule_from_json(const Json& j) {
    MockRule rule;
    if (j.contains("contains")) rule.contains = j.at("contains").get<std::string>();
    if (j.contains("image_sha")) rule.image_sha = j.at("image_sha").get<std::string>();
    rule.text = j.value("text", "");
    if (j.contains("tokens")) {
        for (const Json& t : j.at("tokens")) {
            TokenLogprob tok;
            tok.token_text = t.at("token").get<std::string>();
            tok.logprob = t.at("logprob").get<double>();
            if (t.contains("top_logprobs"))
                for (const Json& alt : t.at("top_logprobs"))
                    tok.top_alternatives.emplace_back(alt.at("token").get<std::string>(),
                                                      alt.at("logprob").get<double>());
            rule.tokens.push_back(std::move(tok));
        }
    }
    return rule;
}

namespace {

// Whitespace-aware chunking so synthesized tokens concatenate to the text
// and the command word heads its own token.
std::vector<TokenLogprob> synthesize_tokens(const std::string& text) {
    std::vector<TokenLogprob> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        const bool ws = std::isspace(static_cast<unsigned char>(text[i])) != 0;
        std::size_t j = i;
        while (j < text.size() &&
               (std::isspace(static_cast<unsigned char>(text[j])) != 0) == ws)
            ++j;
        TokenLogprob tok;
        tok.token_text = text.substr(i, j - i);
        tok.logprob = 0.0;
        tok.top_alternatives = {{tok.token_text, 0.0}};
        tokens.push_back(std::move(tok));
        i = j;
    }
    return tokens;
}

struct ParsedParts {
    std::string all_text;  // system prompt + every text part
    std::vector<std::string> image_shas;
};

ParsedParts extract_parts(const Json& body) {
    ParsedParts parts;
    if (!body.contains("messages")) return parts;
    for (const Json& msg : body.at("messages")) {
        const Json& content = msg.at("content");
        if (content.is_string()) {
            parts.all_text += content.get<std::string>();
            parts.all_text.push_back('\n');
            continue;
        }
        for (const Json& part : content) {
            const std::string type = part.value("type", "");
            if (type == "text") {
                parts.all_text += part.at("text").get<std::string>();
                parts.all_text.push_back('\n');
            } else if (type == "image_url") {
                const std::string url = part.at("image_url").at("url").get<std::string>();
                const auto comma = url.find(',');
                if (comma != std::string::npos)
                    parts.image_shas.push_back(sha256_hex(base64_decode(url.substr(comma + 1))));
            }
        }
    }
    return parts;
}

}  // namespace

struct MockServer::Impl {
    httplib::Server server;
    mutable std::mutex mu;
    std::vector<MockRule> rules;
    std::string default_text;
    std::string capture_path;
    std::vector<CapturedRequest> captured;

    void capture(const std::string& path, const Json& body) {
        std::lock_guard<std::mutex> lock(mu);
        captured.push_back({path, body});
        if (!capture_path.empty()) {
            std::ofstream out(capture_path, std::ios::app);
            out << Json{{"path", path}, {"body", body}}.dump() << "\n";
        }
    }

    Json handle_chat(const Json& body) {
        const ParsedParts parts = extract_parts(body);
        ChatResponse resp;
        resp.text = default_text;
        std::vector<TokenLogprob> scripted;
        {
            std::lock_guard<std::mutex> lock(mu);
            for (const MockRule& rule : rules) {
                if (rule.contains &&
                    parts.all_text.find(*rule.contains) == std::string::npos)
                    continue;
                if (rule.image_sha) {
                    bool found = false;
                    for (const auto& sha : parts.image_shas) found |= sha == *rule.image_sha;
                    if (!found) continue;
                }
                resp.text = rule.text;
                scripted = rule.tokens;
                break;
            }
        }
        if (body.value("logprobs", false))
            resp.tokens = scripted.empty() ? synthesize_tokens(resp.text) : scripted;
        return chat_response_to_json(resp);
    }

    Json handle_embeddings(const Json& body) {
        const std::string input = body.at("input").get<std::string>();
        std::vector<double> v;
        if (input.rfind("data:image", 0) == 0) {
            const auto comma = input.find(',');
            const auto bytes = base64_decode(input.substr(comma + 1));
            v = mock_image_embedding(decode_image(bytes));
        } else {
            v = mock_text_embedding(input);
        }
        return Json{{"data", Json::array({Json{{"embedding", v}}})}};
    }

    void install_routes() {
        server.Post("/v1/chat/completions",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        const Json body = Json::parse(req.body);
                        capture("/v1/chat/completions", body);
                        res.set_content(handle_chat(body).dump(), "application/json");
                    });
        server.Post("/v1/embeddings",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        const Json body = Json::parse(req.body);
                        capture("/v1/embeddings", body);
                        res.set_content(handle_embeddings(body).dump(), "application/json");
                    });
    }
};

MockServer::MockServer() : impl_(std::make_unique<Impl>()) { impl_->install_routes(); }

MockServer::~MockServer() { stop(); }

void MockServer::add_rule(MockRule rule) {
    std::lock_guard<std::mutex> lock(impl_->mu);
    impl_->rules.push_back(std::move(rule));
}

void MockServer::set_default_text(std::string text) {
    std::lock_guard<std::mutex> lock(impl_->mu);
    impl_->default_text = std::move(text);
}

void MockServer::set_capture_path(std::string path) {
    std::lock_guard<std::mutex> lock(impl_->mu);
    impl_->capture_path = std::move(path);
}

void MockServer::load_script(const Json& script) {
    if (script.contains("default_text"))
        set_default_text(script.at("default_text").get<std::string>());
    if (script.contains("rules"))
        for (const Json& j : script.at("rules")) add_rule(mock_rule_from_json(j));
}

int MockServer::start(int port) {
    if (port > 0) {
        if (!impl_->server.bind_to_port("127.0.0.1", port))
            throw std::runtime_error("mock server failed to bind port " +
                                     std::to_string(port));
    } else {
        port = impl_->server.bind_to_any_port("127.0.0.1");
        if (port <= 0) throw std::runtime_error("mock server failed to bind");
    }
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void MockServer::run(int port) {
    if (!impl_->server.listen("127.0.0.1", port))
        throw std::runtime_error("mock server failed to listen on port " +
                                 std::to_string(port));
}

void MockServer::stop() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

std::vector<CapturedRequest> MockServer::captured() const {
    std::lock_guard<std::mutex> lock(impl_->mu);
    return impl_->captured;
}

std::size_t MockServer::request_count() const {
    std::lock_guard<std::mutex> lock(impl_->mu);
    return impl_->captured.size();
}

}  // namespace dice
