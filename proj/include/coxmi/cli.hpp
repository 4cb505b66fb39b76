#pragma once

namespace coxmi {

// Entry point for the `coxmi` executable (analyze / simulate / impute).
int run_cli(int argc, const char* const* argv);

}  // namespace coxmi
