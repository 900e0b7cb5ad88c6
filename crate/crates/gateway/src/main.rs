fn main() -> std::process::ExitCode {
    interplan_gateway::cli::main()
}
