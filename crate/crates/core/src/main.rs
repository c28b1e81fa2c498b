use std::io::Write;

fn main() {
    // Deeply recursive specifications need more than the default stack.
    let code = std::thread::Builder::new()
        .stack_size(512 << 20)
        .spawn(|| {
            let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
            let code = slamkit::cli::main_with(std::env::args_os(), &mut out, &mut err);
            let _ = out.flush();
            code
        })
        .expect("spawn main thread")
        .join()
        .unwrap_or(3);
    std::process::exit(code);
}
