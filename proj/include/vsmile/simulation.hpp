#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vsmile/forward_variance.hpp"
#include "vsmile/types.hpp"

namespace vsmile {

// Simulated paths of (W increments, X, V, log S) on a uniform grid, row-major
// with one row per path. dw has n_steps columns; the others n_steps + 1.
struct PathSet {
  ModelSpec spec;
  TimeGrid grid;
  std::uint64_t seed = 0;
  bool antithetic = true;
  std::size_t n_paths = 0;
  std::vector<double> dw, x, v, log_s;
  std::vector<std::string> warnings;

  std::size_t n_nodes() const { return grid.n_steps + 1; }
  const double* dw_row(std::size_t p) const { return dw.data() + p * grid.n_steps; }
  const double* x_row(std::size_t p) const { return x.data() + p * n_nodes(); }
  const double* v_row(std::size_t p) const { return v.data() + p * n_nodes(); }
  const double* log_s_row(std::size_t p) const { return log_s.data() + p * n_nodes(); }
};

struct SimOptions {
  bool antithetic = true;
  // Index of the first path within a larger logical run: lets callers batch
  // big simulations without changing any draw (path i here uses the substream
  // of global path path_offset + i).
  std::size_t path_offset = 0;
};

// Exact Ornstein-Uhlenbeck update over one step:
//   x' = e^{-lambda dt} x + vol * sqrt((1 - e^{-2 lambda dt}) / (2 lambda)) * z
double ou_step(double prev_x, double lambda, double dt, double vol, double z);

// Draws per path and step: z_w, z_perp and (rough only) the extra innovation
// of the exactly-simulated singular sub-interval.
int noise_channels(KernelKind kind);

// Innovations for paths [0, n_paths), laid out per path as n_steps blocks of
// noise_channels(kind) values. Antithetic pairs (2i, 2i+1) share substream i
// with every Gaussian sign-flipped.
std::vector<double> make_noise(KernelKind kind, std::size_t n_paths, std::size_t n_steps,
                               std::uint64_t seed, const SimOptions& opts = {});

PathSet simulate(const ModelSpec& spec, const ForwardVarianceCurve& xi0, const TimeGrid& grid,
                 std::size_t n_paths, std::uint64_t seed, const SimOptions& opts = {});

// Same, but consuming pre-drawn innovations from make_noise (common-random-
// number evaluations re-use one buffer across many parameter points).
PathSet simulate_with_noise(const ModelSpec& spec, const ForwardVarianceCurve& xi0,
                            const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                            const std::vector<double>& noise, const SimOptions& opts = {});

// Binary dump: JSON header (spec, grid, seed, layout) + raw little-endian
// doubles for dw, x, v, log_s.
void save_paths(std::ostream& out, const PathSet& ps);
PathSet load_paths(std::istream& in);
void save_paths_file(const std::string& path, const PathSet& ps);
PathSet load_paths_file(const std::string& path);

}  // namespace vsmile
