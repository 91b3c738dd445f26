fn main() {
    std::process::exit(dhd_sddp_cli::main_with(std::env::args_os()));
}
