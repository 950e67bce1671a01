#pragma once

// Layer kernels in two flavours: a direct serial reference and an OpenMP
// version that scatters from active inputs and splits work across output
// units. For every output element both accumulate contributions in the same
// (channel, y, x) input order, so results are bit-identical for integer and
// floating-point activations alike.

#include <cstdint>
#include <exception>
#include <span>
#include <vector>

#include "soel/network.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace soel::snn::kernels {

enum class Backend { Serial, OpenMP };

namespace serial {

template <class W, class A>
void conv(const LayerSpec& l, std::span<const W> w, std::span<const A> in, std::span<A> out) {
  const int pad = l.padding();
  const int k = l.kernel;
  for (int o = 0; o < l.out.channels; ++o) {
    for (int oy = 0; oy < l.out.height; ++oy) {
      for (int ox = 0; ox < l.out.width; ++ox) {
        A acc{};
        for (int c = 0; c < l.in.channels; ++c) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * l.stride + ky - pad;
            if (iy < 0 || iy >= l.in.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * l.stride + kx - pad;
              if (ix < 0 || ix >= l.in.width) continue;
              const A a = in[(static_cast<std::size_t>(c) * l.in.height + iy) * l.in.width + ix];
              if (a == A{}) continue;
              acc += static_cast<A>(w[((static_cast<std::size_t>(o) * l.in.channels + c) * k + ky) * k + kx]) * a;
            }
          }
        }
        out[(static_cast<std::size_t>(o) * l.out.height + oy) * l.out.width + ox] = acc;
      }
    }
  }
}

template <class W, class A>
void dense(const LayerSpec& l, std::span<const W> w, std::span<const A> in, std::span<A> out) {
  const std::size_t n_in = l.in.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    A acc{};
    for (std::size_t j = 0; j < n_in; ++j) {
      if (in[j] == A{}) continue;
      acc += static_cast<A>(w[i * n_in + j]) * in[j];
    }
    out[i] = acc;
  }
}

template <class A>
void pool(const LayerSpec& l, std::span<const A> in, std::span<A> out) {
  const int k = l.kernel;
  for (int c = 0; c < l.out.channels; ++c) {
    for (int py = 0; py < l.out.height; ++py) {
      for (int px = 0; px < l.out.width; ++px) {
        A acc{};
        for (int dy = 0; dy < k; ++dy) {
          for (int dx = 0; dx < k; ++dx) {
            acc += in[(static_cast<std::size_t>(c) * l.in.height + py * k + dy) * l.in.width + px * k + dx];
          }
        }
        out[(static_cast<std::size_t>(c) * l.out.height + py) * l.out.width + px] = acc * static_cast<A>(l.pool_gain);
      }
    }
  }
}

/// Steps every neuron of a layer. `membrane` receives the pre-reset
/// voltage and may be empty.
void step_neurons(std::span<NeuronState> states, const NeuronParams& params, std::span<const std::int32_t> input,
                  std::span<std::int32_t> spikes, std::span<std::int32_t> membrane, OverflowMode overflow);

}  // namespace serial

namespace parallel {

/// Flat indices of non-zero entries, ascending.
template <class A>
void active_indices(std::span<const A> in, std::vector<std::uint32_t>& active) {
  active.clear();
  for (std::size_t j = 0; j < in.size(); ++j) {
    if (in[j] != A{}) active.push_back(static_cast<std::uint32_t>(j));
  }
}

template <class W, class A>
void conv(const LayerSpec& l, std::span<const W> w, std::span<const A> in, std::span<A> out) {
  std::vector<std::uint32_t> active;
  active_indices(in, active);
  const int pad = l.padding();
  const int k = l.kernel;
  const int plane = l.in.height * l.in.width;
  const std::size_t out_plane = static_cast<std::size_t>(l.out.height) * l.out.width;
  const int n_out = l.out.channels;
#pragma omp parallel for schedule(static)
  for (int o = 0; o < n_out; ++o) {
    A* dst = out.data() + o * out_plane;
    std::fill(dst, dst + out_plane, A{});
    for (const std::uint32_t j : active) {
      const int c = static_cast<int>(j) / plane;
      const int iy = (static_cast<int>(j) % plane) / l.in.width;
      const int ix = static_cast<int>(j) % l.in.width;
      const A a = in[j];
      const W* wk = w.data() + (static_cast<std::size_t>(o) * l.in.channels + c) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        const int ny = iy + pad - ky;
        if (ny < 0 || ny % l.stride != 0) continue;
        const int oy = ny / l.stride;
        if (oy >= l.out.height) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int nx = ix + pad - kx;
          if (nx < 0 || nx % l.stride != 0) continue;
          const int ox = nx / l.stride;
          if (ox >= l.out.width) continue;
          dst[static_cast<std::size_t>(oy) * l.out.width + ox] += static_cast<A>(wk[ky * k + kx]) * a;
        }
      }
    }
  }
}

template <class W, class A>
void dense(const LayerSpec& l, std::span<const W> w, std::span<const A> in, std::span<A> out) {
  std::vector<std::uint32_t> active;
  active_indices(in, active);
  const std::size_t n_in = l.in.size();
  const auto n_out = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n_out; ++i) {
    const W* row = w.data() + static_cast<std::size_t>(i) * n_in;
    A acc{};
    for (const std::uint32_t j : active) acc += static_cast<A>(row[j]) * in[j];
    out[static_cast<std::size_t>(i)] = acc;
  }
}

template <class A>
void pool(const LayerSpec& l, std::span<const A> in, std::span<A> out) {
  const int k = l.kernel;
  const int n_c = l.out.channels;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < n_c; ++c) {
    for (int py = 0; py < l.out.height; ++py) {
      for (int px = 0; px < l.out.width; ++px) {
        A acc{};
        for (int dy = 0; dy < k; ++dy) {
          const A* row = in.data() + (static_cast<std::size_t>(c) * l.in.height + py * k + dy) * l.in.width + px * k;
          for (int dx = 0; dx < k; ++dx) acc += row[dx];
        }
        out[(static_cast<std::size_t>(c) * l.out.height + py) * l.out.width + px] = acc * static_cast<A>(l.pool_gain);
      }
    }
  }
}

/// Steps every neuron of a layer. `membrane` receives the pre-reset
/// voltage and may be empty.
void step_neurons(std::span<NeuronState> states, const NeuronParams& params, std::span<const std::int32_t> input,
                  std::span<std::int32_t> spikes, std::span<std::int32_t> membrane, OverflowMode overflow);

}  // namespace parallel

/// Weighted input of a conv/dense layer, or the pooled sums of a pool layer.
template <class W, class A>
void accumulate(Backend backend, const LayerSpec& l, std::span<const W> w, std::span<const A> in, std::span<A> out) {
  switch (l.kind) {
    case LayerKind::SumPool:
      backend == Backend::Serial ? serial::pool<A>(l, in, out) : parallel::pool<A>(l, in, out);
      break;
    case LayerKind::Conv:
      backend == Backend::Serial ? serial::conv<W, A>(l, w, in, out) : parallel::conv<W, A>(l, w, in, out);
      break;
    case LayerKind::Dense:
      backend == Backend::Serial ? serial::dense<W, A>(l, w, in, out) : parallel::dense<W, A>(l, w, in, out);
      break;
  }
}

inline void step_neurons(Backend backend, std::span<NeuronState> states, const NeuronParams& params,
                         std::span<const std::int32_t> input, std::span<std::int32_t> spikes,
                         std::span<std::int32_t> membrane, OverflowMode overflow) {
  backend == Backend::Serial ? serial::step_neurons(states, params, input, spikes, membrane, overflow)
                             : parallel::step_neurons(states, params, input, spikes, membrane, overflow);
}

/// Caps OpenMP worker threads; values < 1 leave the runtime default.
void set_max_threads(int jobs);

}  // namespace soel::snn::kernels
