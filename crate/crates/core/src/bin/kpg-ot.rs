fn main() {
    std::process::exit(kpg_ot::cli::run(std::env::args_os()));
}
