fn main() { let out = kelly_support::cli::run_from_args(std::env::args_os()); print!("{}", out.stdout); eprint!("{}", out.stderr); std::process::exit(out.code); }
