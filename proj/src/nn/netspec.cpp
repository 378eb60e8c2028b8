#include "xgan/nn/netspec.hpp"

#include "xgan/errors.hpp"

namespace xgan {

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv: return "conv";
    case LayerKind::conv_transpose: return "conv_transpose";
  }
  return "?";
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

Shape LayerDesc::weight_shape() const {
  switch (kind) {
    case LayerKind::dense: return {in, out};
    case LayerKind::conv: return {out, in, kernel, kernel};
    case LayerKind::conv_transpose: return {in, out, kernel, kernel};
  }
  return {};
}

Shape NetSpec::output_shape() const {
  Shape s = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerDesc& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
    if (l.kind == LayerKind::dense) {
      if (shape_size(s) != l.in)
        throw ShapeError(where + ": expects " + std::to_string(l.in) + " features, got " + shape_str(s));
      s = {l.out};
    } else {
      if (s.size() != 3 || s[0] != l.in)
        throw ShapeError(where + ": expects " + std::to_string(l.in) + " channels, got " + shape_str(s));
      const std::size_t h = s[1], w = s[2];
      if (l.kind == LayerKind::conv) {
        if (h + 2 * l.padding < l.kernel || w + 2 * l.padding < l.kernel)
          throw ShapeError(where + ": kernel larger than padded input " + shape_str(s));
        s = {l.out, (h + 2 * l.padding - l.kernel) / l.stride + 1, (w + 2 * l.padding - l.kernel) / l.stride + 1};
      } else {
        s = {l.out, (h - 1) * l.stride + l.kernel + l.output_padding - 2 * l.padding,
             (w - 1) * l.stride + l.kernel + l.output_padding - 2 * l.padding};
      }
    }
    if (!l.reshape.empty()) {
      if (shape_size(l.reshape) != shape_size(s))
        throw ShapeError(where + ": cannot reshape " + shape_str(s) + " to " + shape_str(l.reshape));
      s = l.reshape;
    }
    if (l.pool != 0) {
      if (s.size() != 3 || s[1] < l.pool || s[2] < l.pool)
        throw ShapeError(where + ": cannot pool " + shape_str(s));
      s = {s[0], (s[1] - l.pool) / l.pool + 1, (s[2] - l.pool) / l.pool + 1};
    }
  }
  return s;
}

std::size_t NetSpec::leading_shared() const {
  std::size_t n = 0;
  while (n < share_mask.size() && share_mask[n]) ++n;
  return n;
}

std::size_t NetSpec::trailing_shared() const {
  std::size_t n = 0;
  while (n < share_mask.size() && share_mask[share_mask.size() - 1 - n]) ++n;
  return n;
}

NetSpec generator_spec(std::size_t latent, std::size_t channels, std::size_t size, std::size_t width) {
  if (size < 8 || size % 8 != 0) throw ConfigError("generator: image size must be a multiple of 8, got " + std::to_string(size));
  const std::size_t base = size / 8;
  NetSpec spec;
  spec.input_shape = {latent};

  LayerDesc fc;
  fc.kind = LayerKind::dense;
  fc.in = latent;
  fc.out = width * base * base;
  fc.reshape = {width, base, base};
  fc.batchnorm = true;
  fc.activation = Activation::relu;
  spec.layers.push_back(fc);

  for (std::size_t kernel : {5u, 5u, 3u}) {
    LayerDesc up;
    up.kind = LayerKind::conv_transpose;
    up.in = width;
    up.out = width;
    up.kernel = kernel;
    up.stride = 2;
    up.padding = kernel / 2;
    up.output_padding = 1;
    up.batchnorm = true;
    up.activation = Activation::relu;
    spec.layers.push_back(up);
  }

  LayerDesc out;
  out.kind = LayerKind::conv;
  out.in = width;
  out.out = channels;
  out.kernel = 3;
  out.padding = 1;
  out.activation = Activation::tanh;
  spec.layers.push_back(out);

  spec.share_mask = {true, true, true, true, false};
  return spec;
}

NetSpec discriminator_spec(std::size_t channels, std::size_t size, std::size_t width, std::size_t hidden) {
  if (size < 8 || size % 8 != 0)
    throw ConfigError("discriminator: image size must be a multiple of 8, got " + std::to_string(size));
  NetSpec spec;
  spec.input_shape = {channels, size, size};
  std::size_t in = channels;
  for (int i = 0; i < 3; ++i) {
    LayerDesc c;
    c.kind = LayerKind::conv;
    c.in = in;
    c.out = width;
    c.kernel = 5;
    c.padding = 2;
    c.pool = 2;
    c.activation = Activation::leaky_relu;
    spec.layers.push_back(c);
    in = width;
  }
  const std::size_t s = size / 8;
  LayerDesc fc;
  fc.in = width * s * s;
  fc.out = hidden;
  fc.activation = Activation::relu;
  spec.layers.push_back(fc);
  LayerDesc prob;
  prob.in = hidden;
  prob.out = 1;
  prob.activation = Activation::sigmoid;
  spec.layers.push_back(prob);
  spec.share_mask = {false, false, false, false, true};
  return spec;
}

NetSpec mlp_spec(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Activation hidden_act,
                 Activation out_act) {
  NetSpec spec;
  spec.input_shape = {in};
  std::size_t prev = in;
  for (std::size_t h : hidden) {
    LayerDesc l;
    l.in = prev;
    l.out = h;
    l.activation = hidden_act;
    spec.layers.push_back(l);
    prev = h;
  }
  LayerDesc last;
  last.in = prev;
  last.out = out;
  last.activation = out_act;
  spec.layers.push_back(last);
  spec.share_mask.assign(spec.layers.size(), false);
  return spec;
}

}  // namespace xgan
