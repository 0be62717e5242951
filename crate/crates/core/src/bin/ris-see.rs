fn main() -> std::process::ExitCode {
    ris_see::expcli::main_with_args(std::env::args_os())
}
