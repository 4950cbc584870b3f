use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use prunecoal::error::{Error, Result};

pub struct Sink {
    inner: Box<dyn Write>,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> Result<Sink> {
        let inner: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Sink { inner })
    }

    pub fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.inner, "{s}").map_err(io_error)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(io_error)
    }
}

fn io_error(e: io::Error) -> Error {
    Error::InvalidArgument(format!("write failed: {e}"))
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Quotes a CSV field when it contains a separator or a quote.
pub fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `# key=value ...` comment line opening every CSV output.
pub fn csv_header(pairs: &[(&str, String)]) -> String {
    let body: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("# {}", body.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(3.0), "3");
        assert_eq!(num(1.5e-12), "1.5e-12");
        assert_eq!(num(0.0), "0");
    }

    #[test]
    fn csv_fields() {
        assert_eq!(field("1|2"), "1|2");
        assert_eq!(field("1,2|3"), "\"1,2|3\"");
    }
}
