#pragma once

#include <cmath>
#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "vivid/denoisers.hpp"
#include "vivid/errors.hpp"
#include "vivid/geometry.hpp"
#include "vivid/json.hpp"
#include "vivid/tensor.hpp"

namespace vivid {

/// JSON denoise request: flat float payloads, debuggability over throughput
/// at desk-scale tensor sizes. A binary framing is a documented extension
/// point.
struct DenoiseRequest {
    std::string kind;  // "view" | "video"
    LatentFrames frames;
    int timestep = 0;
    // view conditioning
    LatentFrames input_image;  // 1 x C x H x W when kind == "view"
    std::vector<RelativePose> relative_poses;
    // video conditioning
    Prompt prompt;
    double guidance_scale = 1.0;
};

struct DenoiseResponse {
    LatentFrames eps;
};

namespace detail {

inline nlohmann::json shape_json(const LatentFrames& t) {
    return nlohmann::json::array({t.frames, t.channels, t.height, t.width});
}

inline nlohmann::json flatten(const LatentFrames& t) {
    return nlohmann::json(t.data);
}

}  // namespace detail

inline nlohmann::json denoise_request_to_json(const DenoiseRequest& req) {
    nlohmann::json j{{"kind", req.kind},
                     {"shape", detail::shape_json(req.frames)},
                     {"frames", detail::flatten(req.frames)},
                     {"timestep", req.timestep},
                     {"guidance_scale", req.guidance_scale}};
    if (req.kind == "view") {
        nlohmann::json poses = nlohmann::json::array();
        for (const auto& p : req.relative_poses)
            poses.push_back({p.d_azimuth, p.d_elevation, p.d_radius});
        j["conditioning"] = {{"input_image", detail::flatten(req.input_image)},
                             {"input_image_shape", detail::shape_json(req.input_image)},
                             {"relative_poses", poses}};
    } else {
        j["prompt"] = req.prompt.is_null() ? nlohmann::json(nullptr)
                                           : nlohmann::json(*req.prompt.text);
    }
    return j;
}

inline DenoiseRequest denoise_request_from_json(const nlohmann::json& j) {
    DenoiseRequest req;
    req.kind = j.at("kind").get<std::string>();
    if (req.kind != "view" && req.kind != "video")
        throw ProtocolError("denoise request: kind must be \"view\" or \"video\"");
    const auto shape = j.at("shape");
    if (!shape.is_array() || shape.size() != 4)
        throw ProtocolError("denoise request: shape must be [F,C,H,W]");
    req.frames = LatentFrames(shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>(),
                              shape[3].get<int>());
    const auto& frames = j.at("frames");
    if (!frames.is_array() || frames.size() != req.frames.size())
        throw ProtocolError("denoise request: frames length does not match shape product");
    for (std::size_t i = 0; i < req.frames.size(); ++i) {
        req.frames.data[i] = frames[i].get<double>();
        if (!std::isfinite(req.frames.data[i]))
            throw ProtocolError("denoise request: non-finite frame value");
    }
    req.timestep = j.at("timestep").get<int>();
    req.guidance_scale = j.value("guidance_scale", 1.0);
    if (req.kind == "view") {
        const auto& cond = j.at("conditioning");
        const auto ishape = cond.at("input_image_shape");
        req.input_image = LatentFrames(ishape[0].get<int>(), ishape[1].get<int>(),
                                       ishape[2].get<int>(), ishape[3].get<int>());
        const auto& img = cond.at("input_image");
        if (!img.is_array() || img.size() != req.input_image.size())
            throw ProtocolError("denoise request: input_image length mismatch");
        for (std::size_t i = 0; i < req.input_image.size(); ++i)
            req.input_image.data[i] = img[i].get<double>();
        for (const auto& p : cond.at("relative_poses")) {
            if (!p.is_array() || p.size() != 3)
                throw ProtocolError("denoise request: relative pose must be [d_az,d_el,d_r]");
            req.relative_poses.push_back({p[0].get<double>(), p[1].get<double>(),
                                          p[2].get<double>()});
        }
    } else if (j.contains("prompt") && !j.at("prompt").is_null()) {
        req.prompt.text = j.at("prompt").get<std::string>();
    }
    return req;
}

inline nlohmann::json denoise_response_to_json(const DenoiseResponse& resp) {
    return {{"eps", detail::flatten(resp.eps)}, {"shape", detail::shape_json(resp.eps)}};
}

/// Parses and validates a response against the request shape.
inline DenoiseResponse denoise_response_from_json(const nlohmann::json& j,
                                                  const LatentFrames& expected) {
    if (!j.contains("shape") || !j.contains("eps"))
        throw ProtocolError("denoise response: missing shape or eps");
    const auto& shape = j.at("shape");
    if (!shape.is_array() || shape.size() != 4)
        throw ProtocolError("denoise response: shape must be [F,C,H,W]");
    DenoiseResponse resp;
    int dims[4];
    for (int i = 0; i < 4; ++i) {
        if (!shape[static_cast<std::size_t>(i)].is_number_integer())
            throw ProtocolError("denoise response: non-integer shape entry");
        dims[i] = shape[static_cast<std::size_t>(i)].get<int>();
        if (dims[i] <= 0) throw ProtocolError("denoise response: non-positive shape entry");
    }
    resp.eps = LatentFrames(dims[0], dims[1], dims[2], dims[3]);
    if (!resp.eps.same_shape(expected))
        throw ProtocolError("denoise response: shape " + resp.eps.shape_str() +
                            " does not match request " + expected.shape_str());
    const auto& eps = j.at("eps");
    if (!eps.is_array() || eps.size() != resp.eps.size())
        throw ProtocolError("denoise response: eps length does not match shape product");
    for (std::size_t i = 0; i < resp.eps.size(); ++i) {
        if (!eps[i].is_number()) throw ProtocolError("denoise response: non-numeric eps value");
        resp.eps.data[i] = eps[i].get<double>();
        if (!std::isfinite(resp.eps.data[i]))
            throw ProtocolError("denoise response: non-finite eps value");
    }
    return resp;
}

inline int remote_timeout_ms() {
    if (const char* env = std::getenv("VIVID_REMOTE_TIMEOUT_MS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 30000;
}

/// POSTs the request to <endpoint>/denoise and validates the reply.
inline DenoiseResponse remote_denoise(const std::string& endpoint, const DenoiseRequest& req,
                                      int timeout_ms = remote_timeout_ms()) {
    httplib::Client client(endpoint);
    client.set_connection_timeout(0, timeout_ms * 1000);
    client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    const std::string body = denoise_request_to_json(req).dump();
    httplib::Result res = client.Post("/denoise", body, "application/json");
    if (!res)
        throw TransportError("remote_denoise: cannot reach " + endpoint + " (" +
                             httplib::to_string(res.error()) + ")");
    if (res->status != 200) throw RemoteError(res->status, res->body);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(res->body);
    } catch (const std::exception& e) {
        throw ProtocolError(std::string("remote_denoise: invalid JSON: ") + e.what());
    }
    return denoise_response_from_json(j, req.frames);
}

/// Pluggable denoise handler for the server scaffold.
using DenoiseHandler = std::function<LatentFrames(const DenoiseRequest&)>;

/// Loopback HTTP server: /denoise runs the handler, /health returns 200.
/// The echo handler (eps := frames) is the protocol test double.
class DenoiseServer {
public:
    explicit DenoiseServer(DenoiseHandler handler) : handler_(std::move(handler)) {
        server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("ok", "text/plain");
        });
        server_.Post("/denoise", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                nlohmann::json j = nlohmann::json::parse(req.body);
                const DenoiseRequest parsed = denoise_request_from_json(j);
                DenoiseResponse resp;
                resp.eps = handler_(parsed);
                res.set_content(denoise_response_to_json(resp).dump(), "application/json");
            } catch (const std::exception& e) {
                res.status = 400;
                res.set_content(std::string("bad request: ") + e.what(), "text/plain");
            }
        });
    }

    ~DenoiseServer() { stop(); }

    /// Binds the given port (or any free port when 0) and serves on a
    /// background thread. Returns the bound port.
    int start(int port = 0, const std::string& host = "127.0.0.1") {
        if (port == 0) {
            port_ = server_.bind_to_any_port(host);
            if (port_ < 0) throw TransportError("DenoiseServer: cannot bind any port");
        } else {
            if (!server_.bind_to_port(host, port))
                throw TransportError("DenoiseServer: cannot bind port " + std::to_string(port));
            port_ = port;
        }
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    int port() const { return port_; }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    DenoiseHandler handler_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = -1;
};

inline std::unique_ptr<DenoiseServer> serve_echo(int port = 0) {
    auto server = std::make_unique<DenoiseServer>(
        [](const DenoiseRequest& req) { return req.frames; });
    server->start(port);
    return server;
}

// ---------------------------------------------------------------------------
// Engine-side adapters: a remote endpoint is just another denoiser.
// ---------------------------------------------------------------------------

/// Per-frame view requests carry the input image and that frame's relative
/// pose; guidance_scale is forwarded for backends that fuse guidance
/// server-side (the engine-side CFG policy stays in the guidance module).
class RemoteViewDenoiser final : public ViewDenoiser {
public:
    RemoteViewDenoiser(std::string endpoint, double guidance_scale)
        : endpoint_(std::move(endpoint)), guidance_scale_(guidance_scale) {}

    LatentFrames evaluate(const LatentFrames& z, int timestep, const ViewConditioning& cond,
                          int frame_index) const override {
        DenoiseRequest req;
        req.kind = "view";
        req.frames = z;
        req.timestep = timestep;
        req.input_image = cond.input_image;
        req.relative_poses = {cond.relative_poses.at(static_cast<std::size_t>(frame_index))};
        req.guidance_scale = guidance_scale_;
        return remote_denoise(endpoint_, req).eps;
    }

    std::string identifier() const override { return "remote.view@" + endpoint_; }

private:
    std::string endpoint_;
    double guidance_scale_;
};

class RemoteVideoDenoiser final : public VideoDenoiser {
public:
    explicit RemoteVideoDenoiser(std::string endpoint) : endpoint_(std::move(endpoint)) {}

    LatentFrames evaluate(const LatentFrames& z, int timestep,
                          const Prompt& prompt) const override {
        DenoiseRequest req;
        req.kind = "video";
        req.frames = z;
        req.timestep = timestep;
        req.prompt = prompt;
        return remote_denoise(endpoint_, req).eps;
    }

    std::string identifier() const override { return "remote.video@" + endpoint_; }

private:
    std::string endpoint_;
};

}  // namespace vivid
