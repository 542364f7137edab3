#pragma once

namespace gpr3d {

/// Command-line entry point (gen / train-denoiser / train-inverter /
/// fine-tune / infer / eval / gradcheck / report). Returns the process
/// exit status: 0 on success, nonzero with a diagnostic on stderr.
int cli_main(int argc, const char* const* argv);

/// The gradcheck subcommand's suite: finite-difference checks for every
/// differentiable op plus tiny end-to-end networks. Prints one line per
/// check; returns the number of failures.
int run_gradcheck_suite(double step);

}  // namespace gpr3d
