// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(anisoflow_cli::execute(std::env::args_os()))
}
