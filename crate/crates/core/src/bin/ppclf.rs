fn main() {
    std::process::exit(ppclf_core::cli::run(std::env::args_os()));
}
