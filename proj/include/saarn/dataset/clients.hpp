#pragma once

// Mask and caption providers used by the corpus builder. The local defaults
// are the box rasterizer and the template generator; remote implementations
// live in http_clients.hpp.

#include <stdexcept>
#include <string>

#include "saarn/dataset/expression.hpp"
#include "saarn/dataset/geometry.hpp"
#include "saarn/dataset/image.hpp"
#include "saarn/dataset/scene.hpp"
#include "saarn/random.hpp"

namespace saarn::dataset {

class ClientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TimeoutError : public ClientError {
 public:
  using ClientError::ClientError;
};

// Connection refused, reset, non-success status.
class TransportError : public ClientError {
 public:
  using ClientError::ClientError;
};

// Reply arrived but its content is unusable.
class MalformedResponseError : public ClientError {
 public:
  using ClientError::ClientError;
};

class SegmenterClient {
 public:
  virtual ~SegmenterClient() = default;
  virtual Mask segment(const Image& image, const OrientedBox& box) = 0;
};

struct CaptionRequest {
  Image crop;    // the instance, upsampled
  Image marked;  // full image with a red box around the instance
  // Scene context for generators that work from annotations rather than
  // pixels; remote captioners ignore it.
  const Scene* scene = nullptr;
  std::size_t target = 0;
  std::uint64_t seed = 0;
};

class CaptionerClient {
 public:
  virtual ~CaptionerClient() = default;
  virtual std::string caption(const CaptionRequest& request) = 0;
};

class RasterSegmenter final : public SegmenterClient {
 public:
  Mask segment(const Image& image, const OrientedBox& box) override {
    return rasterize_obb(box, image.height, image.width);
  }
};

class TemplateCaptioner final : public CaptionerClient {
 public:
  std::string caption(const CaptionRequest& request) override {
    if (!request.scene) throw MalformedResponseError("template captioner needs scene context");
    Rng rng(request.seed);
    return generate_expression(*request.scene, request.target, rng).text;
  }
};

inline CaptionRequest make_caption_request(const Scene& scene, std::size_t target, std::uint64_t seed) {
  const auto& box = scene.instances.at(target).box;
  return {crop_instance(scene.image, box), mark_instance(scene.image, box), &scene, target, seed};
}

}  // namespace saarn::dataset
