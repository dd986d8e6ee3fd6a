fn main() {
    std::process::exit(replaystat_bench::cli::run(std::env::args_os()));
}
