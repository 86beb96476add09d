#include <cstdio>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dice/mock_server.hpp"
#include "dice/util.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Scripted chat/embeddings server for offline evaluation runs"};
    int port = 8099;
    std::string script_path;
    std::string capture_path;
    app.add_option("--port", port, "Port to listen on");
    app.add_option("--script", script_path, "JSON file with default_text and rules");
    app.add_option("--capture", capture_path, "JSONL file receiving every request");
    CLI11_PARSE(app, argc, argv);

    dice::MockServer server;
    try {
        if (!script_path.empty())
            server.load_script(nlohmann::json::parse(dice::read_file(script_path)));
        if (!capture_path.empty()) server.set_capture_path(capture_path);
        std::printf("listening on 127.0.0.1:%d\n", port);
        std::fflush(stdout);
        server.run(port);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
