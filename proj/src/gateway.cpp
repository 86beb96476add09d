#include "dice/gateway.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <thread>

#include <httplib.h>

#include "dice/image_io.hpp"
#include "dice/prompts.hpp"
#include "dice/util.hpp"

namespace dice {

namespace prompts {

std::string fill(std::string tmpl, const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = tmpl.find(key, pos)) != std::string::npos) {
        tmpl.replace(pos, key.size(), value);
        pos += value.size();
    }
    return tmpl;
}

}  // namespace prompts

using Json = nlohmann::json;

Json chat_request_to_json(const ChatRequest& req, const std::string& model) {
    Json content = Json::array();
    for (const ChatPart& part : req.user_parts) {
        if (const auto* text = std::get_if<std::string>(&part)) {
            content.push_back({{"type", "text"}, {"text", *text}});
        } else {
            const auto& img = std::get<ImageBytes>(part);
            const std::string url =
                "data:" + img.mime + ";base64," +
                base64_encode(reinterpret_cast<const std::uint8_t*>(img.data.data()),
                              img.data.size());
            content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
        }
    }
    Json j{{"model", model},
           {"temperature", req.temperature},
           {"messages",
            Json::array({Json{{"role", "system"}, {"content", req.system_prompt}},
                         Json{{"role", "user"}, {"content", content}}})}};
    if (req.want_logprobs) {
        j["logprobs"] = true;
        j["top_logprobs"] = req.top_k_alternatives;
    }
    return j;
}

ChatResponse chat_response_from_json(const Json& j) {
    ChatResponse resp;
    const Json& choice = j.at("choices").at(0);
    resp.text = choice.at("message").at("content").get<std::string>();
    if (choice.contains("logprobs") && !choice.at("logprobs").is_null()) {
        for (const Json& t : choice.at("logprobs").at("content")) {
            TokenLogprob tok;
            tok.token_text = t.at("token").get<std::string>();
            tok.logprob = t.at("logprob").get<double>();
            if (t.contains("top_logprobs"))
                for (const Json& alt : t.at("top_logprobs"))
                    tok.top_alternatives.emplace_back(alt.at("token").get<std::string>(),
                                                      alt.at("logprob").get<double>());
            resp.tokens.push_back(std::move(tok));
        }
    }
    return resp;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw std::invalid_argument("base_url is required");
}

Json HttpBackend::post(const std::string& path, const Json& body) {
    std::string last_error;
    const int attempts = std::max(config_.retry.attempts, 1);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            const auto& backoff = config_.retry.backoff_ms;
            const int ms = backoff.empty()
                               ? 0
                               : backoff[std::min<std::size_t>(attempt - 1, backoff.size() - 1)];
            std::this_thread::sleep_for(std::chrono::milliseconds(ms));
        }
        httplib::Client client(config_.base_url);
        client.set_read_timeout(config_.timeout_sec, 0);
        client.set_connection_timeout(config_.timeout_sec, 0);
        httplib::Headers headers;
        if (!config_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + config_.api_key);
        const auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status) + ": " + res->body;
            continue;
        }
        try {
            return Json::parse(res->body);
        } catch (const std::exception& e) {
            last_error = std::string("bad response body: ") + e.what();
        }
    }
    throw std::runtime_error(config_.base_url + path + " failed after " +
                             std::to_string(attempts) + " attempts: " + last_error);
}

ChatResponse HttpBackend::chat(const ChatRequest& req) {
    return chat_response_from_json(
        post("/v1/chat/completions", chat_request_to_json(req, config_.chat_model)));
}

std::vector<double> HttpBackend::embed(const std::string& kind, const std::string& payload) {
    std::string input = payload;
    if (kind == "image")
        input = "data:image/png;base64," +
                base64_encode(reinterpret_cast<const std::uint8_t*>(payload.data()),
                              payload.size());
    const Json resp = post("/v1/embeddings",
                           Json{{"model", config_.embed_model}, {"input", input}});
    return resp.at("data").at(0).at("embedding").get<std::vector<double>>();
}

ChatResponse ScriptedBackend::chat(const ChatRequest& req) {
    chat_requests_.push_back(req);
    if (!responder) throw std::runtime_error("scripted backend has no responder");
    return responder(req);
}

std::vector<double> ScriptedBackend::embed(const std::string& kind,
                                           const std::string& payload) {
    embed_requests_.emplace_back(kind, payload);
    if (!embedder) throw std::runtime_error("scripted backend has no embedder");
    return embedder(kind, payload);
}

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::string ResponseCache::key_for(const std::string& endpoint_id, const std::string& model_id,
                                   const Json& request) {
    return sha256_hex(endpoint_id + "\n" + model_id + "\n" + request.dump());
}

std::optional<Json> ResponseCache::lookup(const std::string& key) const {
    const auto path = std::filesystem::path(dir_) / (key + ".json");
    if (!std::filesystem::exists(path)) return std::nullopt;
    return Json::parse(read_file(path.string())).at("response");
}

void ResponseCache::store(const std::string& key, const Json& request, const Json& response) {
    const auto path = std::filesystem::path(dir_) / (key + ".json");
    write_file_atomic(path.string(), Json{{"request", request}, {"response", response}}.dump());
}

Json chat_response_to_json(const ChatResponse& resp) {
    Json tokens = Json::array();
    for (const auto& t : resp.tokens) {
        Json alts = Json::array();
        for (const auto& [text, lp] : t.top_alternatives)
            alts.push_back({{"token", text}, {"logprob", lp}});
        tokens.push_back(
            {{"token", t.token_text}, {"logprob", t.logprob}, {"top_logprobs", alts}});
    }
    Json choice{{"message", {{"role", "assistant"}, {"content", resp.text}}}};
    if (!resp.tokens.empty()) choice["logprobs"] = {{"content", tokens}};
    return Json{{"choices", Json::array({choice})}};
}

CachingBackend::CachingBackend(std::shared_ptr<ChatBackend> inner,
                               std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

ChatResponse CachingBackend::chat(const ChatRequest& req) {
    const Json request_json = chat_request_to_json(req, inner_->model_id());
    const std::string key =
        ResponseCache::key_for(inner_->endpoint_id(), inner_->model_id(), request_json);
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (const auto hit = cache_->lookup(key)) return chat_response_from_json(*hit);
    }
    const ChatResponse resp = inner_->chat(req);
    std::lock_guard<std::mutex> lock(mu_);
    ++network_calls_;
    cache_->store(key, request_json, chat_response_to_json(resp));
    return resp;
}

std::vector<double> CachingBackend::embed(const std::string& kind,
                                          const std::string& payload) {
    const Json request_json{{"kind", kind}, {"input_sha256", sha256_hex(payload)}};
    const std::string key = ResponseCache::key_for(inner_->endpoint_id(),
                                                   inner_->model_id() + "/embed", request_json);
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (const auto hit = cache_->lookup(key)) return hit->get<std::vector<double>>();
    }
    const auto v = inner_->embed(kind, payload);
    std::lock_guard<std::mutex> lock(mu_);
    ++network_calls_;
    cache_->store(key, request_json, Json(v));
    return v;
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options)
    : backend_(std::move(backend)), options_(options) {
    load = [](const std::string& path) { return load_image(path); };
}

namespace {

ImageBytes to_png_part(const Image& img) {
    const auto bytes = encode_png(img);
    return {"image/png", std::string(bytes.begin(), bytes.end())};
}

}  // namespace

ParseReport Gateway::detect(const EditCase& c) {
    ChatRequest req;
    req.system_prompt = prompts::kDifferenceSystem;
    req.user_parts = {to_png_part(load(c.original_image)), to_png_part(load(c.edited_image))};
    req.want_logprobs = true;
    req.top_k_alternatives = options_.top_k_alternatives;
    const ChatResponse resp = backend_->chat(req);
    return attach_confidence(parse_differences(resp.text), resp.tokens);
}

std::pair<Image, Image> Gateway::prepare_coherence_images(const EditCase& c,
                                                          const Difference& d) const {
    Image original = load(c.original_image);
    Image edited = load(c.edited_image);
    switch (d.command) {
        case EditCommand::Add:
            edited = draw_box_outline(edited, d.bbox, kRed, options_.overlay_thickness);
            break;
        case EditCommand::Edit:
            original = draw_box_outline(original, d.bbox, kGreen, options_.overlay_thickness);
            break;
        case EditCommand::Remove:
            original = draw_box_outline(original, d.bbox, kBlue, options_.overlay_thickness);
            break;
    }
    return {std::move(original), std::move(edited)};
}

CoherenceVerdict parse_coherence_response(const std::string& text) {
    CoherenceVerdict verdict{false, "", true};
    std::size_t start = 0;
    const auto lower = [](std::string s) {
        for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        return s;
    };
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        const std::string line(trim(std::string_view(text).substr(start, end - start)));
        const std::string low = lower(line);
        if (const auto pos = low.find("reasoning:"); pos != std::string::npos) {
            verdict.rationale = std::string(trim(std::string_view(line).substr(pos + 10)));
        } else if (const auto dpos = low.find("decision:"); dpos != std::string::npos) {
            const std::string rest = low.substr(dpos + 9);
            const bool yes = rest.find("yes") != std::string::npos;
            const bool no = rest.find("no") != std::string::npos;
            if (yes != no) {
                verdict.decision = yes;
                verdict.flagged_unparseable = false;
            }
        }
        if (end == text.size()) break;
        start = end + 1;
    }
    return verdict;
}

CoherenceVerdict Gateway::assess_coherence(const EditCase& c, const Difference& d) {
    const auto [original, edited] = prepare_coherence_images(c, d);
    std::string user = prompts::fill(prompts::kCoherenceUserTemplate, "{SUBSTITUTE_PROMPT}",
                                     c.prompt);
    user = prompts::fill(std::move(user), "{SUBSTITUTE_CHANGE}", serialize_difference(d));
    ChatRequest req;
    req.system_prompt = prompts::kCoherenceSystem;
    req.user_parts = {user, to_png_part(original), to_png_part(edited)};
    return parse_coherence_response(backend_->chat(req).text);
}

std::string Gateway::caption(const Image& image) {
    ChatRequest req;
    req.system_prompt = prompts::kCaptionSystem;
    req.user_parts = {to_png_part(image)};
    return backend_->chat(req).text;
}

std::string Gateway::compose_target_caption(const std::string& original_caption,
                                            const std::string& prompt) {
    if (trim(prompt).empty()) throw std::invalid_argument("empty prompt");
    std::string user = prompts::fill(prompts::kComposeUserTemplate, "{SUBSTITUTE_CAPTION}",
                                     original_caption);
    user = prompts::fill(std::move(user), "{SUBSTITUTE_PROMPT}", prompt);
    ChatRequest req;
    req.system_prompt = prompts::kComposeSystem;
    req.user_parts = {user};
    return backend_->chat(req).text;
}

std::vector<double> Gateway::normalized(std::vector<double> v) {
    if (v.empty()) throw std::runtime_error("empty embedding");
    {
        std::lock_guard<std::mutex> lock(*mu_);
        if (embed_dim_ && *embed_dim_ != v.size())
            throw std::runtime_error("embedding dimension mismatch: expected " +
                                     std::to_string(*embed_dim_) + ", got " +
                                     std::to_string(v.size()));
        embed_dim_ = v.size();
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw std::runtime_error("zero-norm embedding");
    for (double& x : v) x /= norm;
    return v;
}

std::vector<double> Gateway::embed_image(const Image& image) {
    const auto bytes = encode_png(image);
    return normalized(backend_->embed("image", std::string(bytes.begin(), bytes.end())));
}

std::vector<double> Gateway::embed_text(const std::string& text) {
    return normalized(backend_->embed("text", text));
}

void run_bounded(int workers, const std::vector<std::function<void()>>& tasks) {
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::mutex err_mu;
    std::exception_ptr first_error;
    const int n = std::min<int>(workers, static_cast<int>(tasks.size()));
    for (int w = 0; w < n; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                try {
                    tasks[i]();
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dice
