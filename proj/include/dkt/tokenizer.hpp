#pragma once

// Video clip -> token sequence: frame sampling, S x S patch extraction, linear
// patch embedding, class token and a learned joint space-time position table.
//
// Token layout: index 0 is the class token; patch s of frame t sits at
// 1 + t*M + s, where s enumerates the (H/S) x (W/S) grid row-major.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dkt/ops.hpp"
#include "dkt/tensor.hpp"

namespace dkt {

enum class Domain : std::uint8_t { source, target };

inline const char* domain_tag(Domain d) { return d == Domain::source ? "src" : "tgt"; }

/// Pixels in [0,1], laid out [frames][height][width][channels].
struct VideoClip {
  std::size_t frames = 0, height = 0, width = 0, channels = 0;
  std::vector<float> pixels;
  std::size_t label = 0;
  Domain domain = Domain::source;

  std::size_t frame_size() const { return height * width * channels; }
  float& at(std::size_t t, std::size_t y, std::size_t x, std::size_t c = 0) {
    return pixels[((t * height + y) * width + x) * channels + c];
  }
  float at(std::size_t t, std::size_t y, std::size_t x, std::size_t c = 0) const {
    return pixels[((t * height + y) * width + x) * channels + c];
  }
};

struct ClipSpec {
  std::size_t frames = 8;  // N, frames fed to the model
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 1;
  std::size_t patch = 8;  // S
  std::size_t stride = 2;  // temporal sampling stride
  std::size_t dim = 64;    // D

  std::size_t grid_h() const { return height / patch; }
  std::size_t grid_w() const { return width / patch; }
  std::size_t patches_per_frame() const { return grid_h() * grid_w(); }  // M
  std::size_t num_tokens() const { return 1 + patches_per_frame() * frames; }
  std::size_t patch_dim() const { return patch * patch * channels; }
  /// Raw frames a source video needs for N samples at this stride.
  std::size_t raw_frames() const { return (frames - 1) * stride + 1; }

  void validate() const {
    if (frames < 1) throw ShapeError("clip spec: frames must be >= 1");
    if (stride < 1) throw ShapeError("clip spec: stride must be >= 1");
    if (patch < 1 || height % patch != 0 || width % patch != 0)
      throw ShapeError("clip spec: frame " + std::to_string(height) + "x" + std::to_string(width) +
                       " not divisible by patch " + std::to_string(patch));
    if (channels < 1 || dim < 1) throw ShapeError("clip spec: channels and dim must be >= 1");
  }
};

inline std::size_t token_index(std::size_t s, std::size_t t, std::size_t patches_per_frame) {
  return 1 + t * patches_per_frame + s;
}

struct PatchPos {
  std::size_t s, t;
};

/// Inverse of token_index; index must be >= 1.
inline PatchPos patch_position(std::size_t index, std::size_t patches_per_frame) {
  return {(index - 1) % patches_per_frame, (index - 1) / patches_per_frame};
}

/// Frames 0, stride, 2*stride, ... (N of them).
inline VideoClip sample_frames(const VideoClip& video, std::size_t n, std::size_t stride) {
  const std::size_t need = (n - 1) * stride + 1;
  if (n == 0 || stride == 0) throw ShapeError("sample_frames: frames and stride must be >= 1");
  if (video.frames < need)
    throw ShapeError("sample_frames: video too short, need " + std::to_string(need) + " frames, have " +
                     std::to_string(video.frames));
  VideoClip out = video;
  out.frames = n;
  out.pixels.assign(n * video.frame_size(), 0.0f);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(video.pixels.begin() + static_cast<std::ptrdiff_t>(i * stride * video.frame_size()),
                video.frame_size(), out.pixels.begin() + static_cast<std::ptrdiff_t>(i * video.frame_size()));
  return out;
}

inline VideoClip sample_frames(const VideoClip& video, const ClipSpec& spec) {
  return sample_frames(video, spec.frames, spec.stride);
}

/// One row per (s,t) in token order (row = t*M + s); each row is the S x S x C
/// block, row-major with channels innermost.
template <class T>
Tensor<T> patchify(const VideoClip& clip, std::size_t patch) {
  if (patch == 0 || clip.height % patch != 0 || clip.width % patch != 0)
    throw ShapeError("patchify: frame " + std::to_string(clip.height) + "x" + std::to_string(clip.width) +
                     " not divisible by patch " + std::to_string(patch));
  const std::size_t gh = clip.height / patch, gw = clip.width / patch, m = gh * gw;
  const std::size_t pd = patch * patch * clip.channels;
  std::vector<T> out(clip.frames * m * pd);
  for (std::size_t t = 0; t < clip.frames; ++t)
    for (std::size_t gy = 0; gy < gh; ++gy)
      for (std::size_t gx = 0; gx < gw; ++gx) {
        T* row = out.data() + (t * m + gy * gw + gx) * pd;
        for (std::size_t y = 0; y < patch; ++y)
          for (std::size_t x = 0; x < patch; ++x)
            for (std::size_t c = 0; c < clip.channels; ++c)
              *row++ = static_cast<T>(clip.at(t, gy * patch + y, gx * patch + x, c));
      }
  return Tensor<T>({clip.frames * m, pd}, std::move(out));
}

/// Inverse of patchify.
template <class T>
VideoClip unpatchify(const Tensor<T>& patches, std::size_t frames, std::size_t height, std::size_t width,
                     std::size_t channels, std::size_t patch) {
  const std::size_t gh = height / patch, gw = width / patch, m = gh * gw;
  const std::size_t pd = patch * patch * channels;
  if (patches.rank() != 2 || patches.dim(0) != frames * m || patches.dim(1) != pd)
    throw ShapeError("unpatchify: got " + shape_str(patches.shape()));
  VideoClip clip;
  clip.frames = frames;
  clip.height = height;
  clip.width = width;
  clip.channels = channels;
  clip.pixels.assign(frames * height * width * channels, 0.0f);
  auto P = patches.data();
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t gy = 0; gy < gh; ++gy)
      for (std::size_t gx = 0; gx < gw; ++gx) {
        const T* row = P.data() + (t * m + gy * gw + gx) * pd;
        for (std::size_t y = 0; y < patch; ++y)
          for (std::size_t x = 0; x < patch; ++x)
            for (std::size_t c = 0; c < channels; ++c)
              clip.at(t, gy * patch + y, gx * patch + x, c) = static_cast<float>(*row++);
      }
  return clip;
}

template <class T>
struct TokenizerParams {
  Tensor<T> patch_embed;  // E: [S*S*C, D]
  Tensor<T> positions;    // P: [1 + M*N, D]
  Tensor<T> cls;          // z_cls: [D]
};

/// Z = (z_cls, v_1 E, ..., v_{MN} E) + P.
template <class T>
Tensor<T> embed(const Tensor<T>& patches, const TokenizerParams<T>& p) {
  const std::size_t d = p.patch_embed.dim(1);
  if (patches.rank() != 2 || patches.dim(1) != p.patch_embed.dim(0))
    throw ShapeError("embed: patches " + shape_str(patches.shape()) + " vs E " + shape_str(p.patch_embed.shape()));
  if (p.cls.numel() != d || p.positions.rank() != 2 || p.positions.dim(0) != patches.dim(0) + 1 ||
      p.positions.dim(1) != d)
    throw ShapeError("embed: positions " + shape_str(p.positions.shape()) + " / cls " + shape_str(p.cls.shape()) +
                     " inconsistent with " + std::to_string(patches.dim(0)) + " patches of width " +
                     std::to_string(d));
  Tensor<T> tokens = concat<T>({reshape(p.cls, {1, d}), matmul(patches, p.patch_embed)}, 0);
  return add(tokens, p.positions);
}

}  // namespace dkt
