#pragma once

// JSON-over-HTTP segmenter and captioner.
//
//   POST /segment  {"image": IMG, "box": {"cx","cy","w","h","angle"}}
//               -> {"height": H, "width": W, "mask": [0|1, ...]}
//   POST /caption  {"crop": IMG, "marked": IMG} -> {"text": "..."}
//
// IMG is {"height": H, "width": W, "rgb": [bytes, row-major HWC]}.

#include <chrono>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "saarn/dataset/clients.hpp"

namespace saarn::dataset {

struct HttpClientOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::chrono::milliseconds connect_timeout{2000};
  std::chrono::milliseconds read_timeout{10000};
};

namespace detail {

inline nlohmann::json image_to_json(const Image& img) {
  return {{"height", img.height}, {"width", img.width}, {"rgb", img.rgb}};
}

// Sends the request and returns the parsed JSON body; maps every failure to
// the matching client error.
inline nlohmann::json post_json(const HttpClientOptions& opts, const std::string& path,
                                const nlohmann::json& body) {
  httplib::Client cli(opts.host, opts.port);
  cli.set_connection_timeout(opts.connect_timeout);
  cli.set_read_timeout(opts.read_timeout);
  const auto start = std::chrono::steady_clock::now();
  auto res = cli.Post(path, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const auto elapsed = std::chrono::steady_clock::now() - start;
    if (err == httplib::Error::ConnectionTimeout ||
        (err == httplib::Error::Read && elapsed >= opts.read_timeout))
      throw TimeoutError(path + ": timed out (" + httplib::to_string(err) + ")");
    throw TransportError(path + ": " + httplib::to_string(err));
  }
  if (res->status != 200)
    throw TransportError(path + ": HTTP status " + std::to_string(res->status));
  auto parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object())
    throw MalformedResponseError(path + ": response is not a JSON object");
  return parsed;
}

}  // namespace detail

class HttpSegmenter final : public SegmenterClient {
 public:
  explicit HttpSegmenter(HttpClientOptions opts) : opts_(std::move(opts)) {}

  Mask segment(const Image& image, const OrientedBox& box) override {
    const nlohmann::json body{
        {"image", detail::image_to_json(image)},
        {"box", {{"cx", box.cx}, {"cy", box.cy}, {"w", box.w}, {"h", box.h}, {"angle", box.angle}}}};
    const auto reply = detail::post_json(opts_, "/segment", body);
    try {
      Mask m(reply.at("height").get<int>(), reply.at("width").get<int>());
      const auto& bits = reply.at("mask");
      if (m.height != image.height || m.width != image.width || !bits.is_array() ||
          bits.size() != m.bits.size())
        throw MalformedResponseError("/segment: mask does not match the image size");
      for (std::size_t i = 0; i < bits.size(); ++i) {
        const int v = bits[i].get<int>();
        if (v != 0 && v != 1) throw MalformedResponseError("/segment: mask values must be 0 or 1");
        m.bits[i] = static_cast<std::uint8_t>(v);
      }
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw MalformedResponseError(std::string("/segment: ") + e.what());
    }
  }

 private:
  HttpClientOptions opts_;
};

class HttpCaptioner final : public CaptionerClient {
 public:
  explicit HttpCaptioner(HttpClientOptions opts) : opts_(std::move(opts)) {}

  std::string caption(const CaptionRequest& request) override {
    const nlohmann::json body{{"crop", detail::image_to_json(request.crop)},
                              {"marked", detail::image_to_json(request.marked)}};
    const auto reply = detail::post_json(opts_, "/caption", body);
    const auto it = reply.find("text");
    if (it == reply.end() || !it->is_string() || it->get<std::string>().empty())
      throw MalformedResponseError("/caption: missing or empty 'text'");
    return it->get<std::string>();
  }

 private:
  HttpClientOptions opts_;
};

}  // namespace saarn::dataset
