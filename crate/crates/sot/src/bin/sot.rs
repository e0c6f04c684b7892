//! Command-line entry point.

fn main() {
    std::process::exit(sot::cli::main_entry());
}
