fn main() {
    std::process::exit(sqp_bench::cli::run(std::env::args_os()));
}
