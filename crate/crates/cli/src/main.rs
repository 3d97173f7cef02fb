use std::io::{self, Write};

/// Stdout that ends the process quietly when the reader goes away
/// (`elan dump x.mc | head`).
struct Stdout<'a>(io::StdoutLock<'a>);

impl Write for Stdout<'_> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.write(buf).inspect_err(quit_on_pipe)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.0.flush().inspect_err(quit_on_pipe)
    }
}

fn quit_on_pipe(e: &io::Error) {
    if e.kind() == io::ErrorKind::BrokenPipe {
        std::process::exit(0);
    }
}

fn main() {
    let stderr = io::stderr();
    let mut out = Stdout(io::stdout().lock());
    let code = elan_cli::run(std::env::args_os(), &mut out, &mut stderr.lock());
    let _ = out.flush();
    std::process::exit(code);
}
