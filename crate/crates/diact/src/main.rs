fn main() {
    // default SIGPIPE disposition so `diact ... | head` exits quietly
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(diact::cli::run(std::env::args_os()));
}
