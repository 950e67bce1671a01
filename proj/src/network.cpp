#include "soel/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "soel/error.hpp"

namespace soel::snn {

std::string Shape3::str() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

bool QuantizedWeights::valid() const {
  return std::all_of(values.begin(), values.end(), [](std::int16_t w) { return on_grid(w); });
}

std::int16_t quantize_weight(double shadow) {
  if (std::isnan(shadow)) return 0;
  // nearbyint honours the default round-to-nearest-even mode.
  const double q = std::nearbyint(shadow / 2.0) * 2.0;
  return static_cast<std::int16_t>(std::clamp(q, double{QuantizedWeights::kMin}, double{QuantizedWeights::kMax}));
}

QuantizedWeights quantize_weights(std::span<const double> shadow) {
  QuantizedWeights q;
  q.values.reserve(shadow.size());
  for (double w : shadow) q.values.push_back(quantize_weight(w));
  return q;
}

std::size_t LayerSpec::weight_count() const {
  switch (kind) {
    case LayerKind::SumPool: return 0;
    case LayerKind::Conv:
      return static_cast<std::size_t>(out.channels) * in.channels * kernel * kernel;
    case LayerKind::Dense: return out.size() * in.size();
  }
  return 0;
}

std::string LayerSpec::notation() const {
  switch (kind) {
    case LayerKind::SumPool: return std::to_string(kernel) + "a";
    case LayerKind::Conv:
      return std::to_string(out.channels) + "c" + std::to_string(kernel) + (zero_padding ? "z" : "");
    case LayerKind::Dense: return std::to_string(out.size());
  }
  return "?";
}

void NetworkSpec::validate() const {
  if (layers.empty()) throw Error(Errc::InvalidNetwork, "no layers");
  if (input.size() == 0) throw Error(Errc::InvalidNetwork, "empty input shape");
  Shape3 cur = input;
  int plastic = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "layer " + std::to_string(i + 1) + " (" + l.notation() + ")";
    if (!(l.in == cur)) throw Error(Errc::InvalidNetwork, where + " input " + l.in.str() + " != " + cur.str());
    if (l.kernel <= 0 || l.stride <= 0) throw Error(Errc::InvalidNetwork, where + " bad kernel/stride");
    if (l.kind == LayerKind::SumPool) {
      if (l.out.channels != l.in.channels || l.out.height != l.in.height / l.kernel ||
          l.out.width != l.in.width / l.kernel) {
        throw Error(Errc::InvalidNetwork, where + " pool output shape");
      }
    } else if (l.kind == LayerKind::Conv) {
      const int pad = l.padding();
      if (l.out.height != (l.in.height + 2 * pad - l.kernel) / l.stride + 1 ||
          l.out.width != (l.in.width + 2 * pad - l.kernel) / l.stride + 1) {
        throw Error(Errc::InvalidNetwork, where + " conv output shape");
      }
    }
    if (l.weights.values.size() != l.weight_count()) throw Error(Errc::InvalidNetwork, where + " weight count");
    if (!l.weights.valid()) throw Error(Errc::InvalidNetwork, where + " weights off the 8-bit even grid");
    if (l.has_neurons()) l.params.validate();
    if (l.out.size() == 0) throw Error(Errc::InvalidNetwork, where + " empty output");
    plastic += l.plastic ? 1 : 0;
    cur = l.out;
  }
  if (layers.back().kind != LayerKind::Dense) throw Error(Errc::InvalidNetwork, "final layer must be dense");
  if (plastic > 1) throw Error(Errc::InvalidNetwork, "more than one plastic layer");
}

NetworkSpec build_network(const Shape3& input, std::span<const std::string> tokens, const NeuronParams& params,
                          int n_outputs) {
  NetworkSpec net;
  net.input = input;
  Shape3 cur = input;
  auto number = [](std::string_view s, const std::string& token) {
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v <= 0) {
      throw Error(Errc::InvalidConfig, "bad layer token '" + token + "'");
    }
    return v;
  };
  for (const std::string& token : tokens) {
    LayerSpec l;
    l.in = cur;
    l.params = params;
    if (token == "N") {
      l.kind = LayerKind::Dense;
      l.out = {n_outputs, 1, 1};
    } else if (!token.empty() && token.back() == 'a') {
      l.kind = LayerKind::SumPool;
      l.kernel = l.stride = number(std::string_view(token).substr(0, token.size() - 1), token);
      l.out = {cur.channels, cur.height / l.kernel, cur.width / l.kernel};
    } else if (const auto c = token.find('c'); c != std::string::npos) {
      l.kind = LayerKind::Conv;
      std::string_view rest = std::string_view(token).substr(c + 1);
      l.zero_padding = !rest.empty() && rest.back() == 'z';
      if (l.zero_padding) rest.remove_suffix(1);
      const int filters = number(std::string_view(token).substr(0, c), token);
      l.kernel = number(rest, token);
      const int pad = l.padding();
      l.out = {filters, cur.height + 2 * pad - l.kernel + 1, cur.width + 2 * pad - l.kernel + 1};
    } else {
      l.kind = LayerKind::Dense;
      l.out = {number(token, token), 1, 1};
    }
    l.weights.values.assign(l.weight_count(), 0);
    cur = l.out;
    net.layers.push_back(std::move(l));
  }
  net.validate();
  return net;
}

NetworkSpec table1_network(int n_classes, const NeuronParams& params) {
  const std::vector<std::string> tokens{"4a", "16c5z", "2a", "32c3z", "2a", "512", "N"};
  return build_network({2, 128, 128}, tokens, params, n_classes);
}

}  // namespace soel::snn
