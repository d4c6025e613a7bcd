fn main() -> std::process::ExitCode {
    svdd::pipeline::cli::main_with_args(std::env::args_os())
}
