//! Plain-text grid format shared by maps and rasters.
//!
//! ```text
//! W H r_M
//! v(0,0) v(1,0) ... v(W-1,0)
//! v(0,1) ...
//! ```
//!
//! Values are whitespace separated and row-major; row 0 is the southern
//! edge and column 0 the western edge. Line breaks inside the value block
//! are not significant, only the total count is.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TextGrid {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub values: Vec<f64>,
}

pub fn read_text_grid<R: BufRead>(reader: R) -> Result<TextGrid> {
    let mut header: Option<(usize, usize, f64)> = None;
    let mut values = Vec::new();
    let mut last_line = 0;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace().peekable();
        if tokens.peek().is_none() {
            continue;
        }
        match header {
            None => {
                let parts: Vec<&str> = tokens.collect();
                if parts.len() != 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("header must be `W H r_M`, got {} fields", parts.len()),
                    });
                }
                let dim = |s: &str, what: &str| -> Result<usize> {
                    match s.parse::<usize>() {
                        Ok(v) if v > 0 => Ok(v),
                        _ => Err(Error::Parse {
                            line: line_no,
                            message: format!("{what} must be a positive integer, got {s:?}"),
                        }),
                    }
                };
                let width = dim(parts[0], "width")?;
                let height = dim(parts[1], "height")?;
                let resolution = match parts[2].parse::<f64>() {
                    Ok(r) if r.is_finite() && r > 0.0 => r,
                    _ => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("resolution must be positive, got {:?}", parts[2]),
                        })
                    }
                };
                header = Some((width, height, resolution));
                values.reserve(width * height);
            }
            Some((width, height, _)) => {
                for tok in tokens {
                    if values.len() == width * height {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("more than {} values", width * height),
                        });
                    }
                    let v = tok.parse::<f64>().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("not a number: {tok:?}"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Data(format!(
                            "non-finite value {tok:?} on line {line_no}"
                        )));
                    }
                    values.push(v);
                }
            }
        }
    }
    let Some((width, height, resolution)) = header else {
        return Err(Error::Parse {
            line: last_line.max(1),
            message: "missing header".into(),
        });
    };
    if values.len() != width * height {
        return Err(Error::Parse {
            line: last_line,
            message: format!("expected {} values, found {}", width * height, values.len()),
        });
    }
    Ok(TextGrid {
        width,
        height,
        resolution,
        values,
    })
}

pub fn write_text_grid<W: Write, T: std::fmt::Display>(
    w: &mut W,
    width: usize,
    height: usize,
    resolution: f64,
    values: &[T],
) -> std::io::Result<()> {
    writeln!(w, "{width} {height} {resolution}")?;
    for row in values.chunks(width).take(height) {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b" ")?;
            }
            write!(w, "{v}")?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Binary 8-bit PGM with north at the top.
pub fn write_pgm<W: Write>(w: &mut W, width: usize, height: usize, bytes: &[u8]) -> std::io::Result<()> {
    write!(w, "P5\n{width} {height}\n255\n")?;
    for row in (0..height).rev() {
        w.write_all(&bytes[row * width..(row + 1) * width])?;
    }
    Ok(())
}
