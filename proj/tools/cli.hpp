#pragma once

namespace hoif::cli {

// Exit codes: 0 success, 1 usage/configuration error, 2 runtime failure.
int cli_main(int argc, char** argv);

} // namespace hoif::cli
