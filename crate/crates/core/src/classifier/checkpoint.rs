//! Plain-text checkpoints.
//!
//! ```text
//! mer-checkpoint 1
//! input_dim 32
//! hidden_dim 80            (or "hidden_dim none" for a linear model)
//! class_count 20
//! seed 7
//! epoch 120
//! hidden.weights 80 32
//! <80 lines of 32 values>
//! hidden.bias 80
//! <1 line of 80 values>
//! output.weights 20 80
//! <20 lines of 80 values>
//! output.bias 20
//! <1 line of 20 values>
//! ```
//!
//! Values are space-separated and printed in Rust's shortest round-trip
//! form, so loading restores every `f64` bit for bit. The `hidden.*`
//! sections are absent for linear models.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::model::{Dense, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &str = "mer-checkpoint";
const VERSION: u32 = 1;

/// Parameters plus the run metadata stored alongside them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub seed: u64,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {VERSION}");
        let _ = writeln!(out, "input_dim {}", p.input_dim());
        match p.hidden_dim() {
            Some(h) => {
                let _ = writeln!(out, "hidden_dim {h}");
            }
            None => out.push_str("hidden_dim none\n"),
        }
        let _ = writeln!(out, "class_count {}", p.class_count());
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "epoch {}", self.epoch);
        if let Some(hidden) = &p.hidden {
            write_layer(&mut out, "hidden", hidden);
        }
        write_layer(&mut out, "output", &p.output);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        let (line, header) = lines.next_nonempty()?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(parse_err(line, "missing checkpoint header"));
        }
        let version: u32 = parse_field(line, parts.next())?;
        if version != VERSION {
            return Err(parse_err(
                line,
                &format!("unsupported checkpoint version {version}"),
            ));
        }
        let input_dim: usize = lines.keyed("input_dim")?;
        let hidden_dim = {
            let (line, raw) = lines.keyed_raw("hidden_dim")?;
            if raw == "none" {
                None
            } else {
                Some(parse_field::<usize>(line, Some(raw))?)
            }
        };
        let class_count: usize = lines.keyed("class_count")?;
        let seed: u64 = lines.keyed("seed")?;
        let epoch: usize = lines.keyed("epoch")?;

        let hidden = match hidden_dim {
            Some(h) => Some(read_layer(&mut lines, "hidden", h, input_dim)?),
            None => None,
        };
        let output = read_layer(
            &mut lines,
            "output",
            class_count,
            hidden_dim.unwrap_or(input_dim),
        )?;
        if let Ok((line, extra)) = lines.next_nonempty() {
            return Err(parse_err(
                line,
                &format!("unexpected trailing content {extra:?}"),
            ));
        }
        Ok(Checkpoint {
            params: ModelParams { hidden, output },
            seed,
            epoch,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn write_layer(out: &mut String, name: &str, layer: &Dense) {
    let (rows, cols) = layer.weights.dim();
    let _ = writeln!(out, "{name}.weights {rows} {cols}");
    for row in layer.weights.rows() {
        write_values(out, row.iter());
    }
    let _ = writeln!(out, "{name}.bias {}", layer.bias.len());
    write_values(out, layer.bias.iter());
}

fn write_values<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    for (i, v) in values.enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:?}");
    }
    out.push('\n');
}

fn read_layer(lines: &mut Lines<'_>, name: &str, rows: usize, cols: usize) -> Result<Dense> {
    let (line, raw) = lines.keyed_raw(&format!("{name}.weights"))?;
    let dims: Vec<usize> = raw
        .split_whitespace()
        .map(|d| parse_field(line, Some(d)))
        .collect::<Result<_>>()?;
    if dims != [rows, cols] {
        return Err(parse_err(
            line,
            &format!("{name}.weights has shape {dims:?}, expected [{rows}, {cols}]"),
        ));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        values.extend(lines.values(cols)?);
    }
    let weights = Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| parse_err(line, &e.to_string()))?;
    let (line, raw) = lines.keyed_raw(&format!("{name}.bias"))?;
    let len: usize = parse_field(line, Some(raw))?;
    if len != rows {
        return Err(parse_err(
            line,
            &format!("{name}.bias has {len} entries, expected {rows}"),
        ));
    }
    let bias = Array1::from(lines.values(rows)?);
    Ok(Dense { weights, bias })
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, raw: Option<&str>) -> Result<T> {
    let raw = raw.ok_or_else(|| parse_err(line, "missing value"))?;
    raw.parse()
        .map_err(|_| parse_err(line, &format!("cannot parse {raw:?}")))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
        }
    }

    fn next_nonempty(&mut self) -> Result<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if !l.is_empty() {
                return Ok((i + 1, l));
            }
        }
        Err(parse_err(0, "unexpected end of checkpoint"))
    }

    fn keyed_raw(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, l) = self.next_nonempty()?;
        match l.split_once(char::is_whitespace) {
            Some((k, rest)) if k == key => Ok((line, rest.trim())),
            _ => Err(parse_err(line, &format!("expected {key:?}"))),
        }
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, raw) = self.keyed_raw(key)?;
        parse_field(line, Some(raw))
    }

    fn values(&mut self, count: usize) -> Result<Vec<f64>> {
        let (line, l) = self.next_nonempty()?;
        let values: Vec<f64> = l
            .split_whitespace()
            .map(|v| parse_field::<f64>(line, Some(v)))
            .collect::<Result<_>>()?;
        if values.len() != count {
            return Err(parse_err(
                line,
                &format!("expected {count} values, found {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(line, "non-finite parameter"));
        }
        Ok(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn text_round_trip_is_bit_exact(
            input in 1usize..6,
            hidden in prop::option::of(1usize..6),
            classes in 2usize..6,
            seed in any::<u64>(),
            epoch in 0usize..1000,
        ) {
            let mut params = ModelParams::init(input, hidden, classes, seed).unwrap();
            // Exercise awkward magnitudes too.
            for (i, v) in params.iter_mut().enumerate() {
                if i % 3 == 0 {
                    *v *= 1e-300;
                } else if i % 3 == 1 {
                    *v = *v * 1e200 + 1.0 / 3.0;
                }
            }
            let ck = Checkpoint { params, seed, epoch };
            let back = Checkpoint::from_text(&ck.to_text()).unwrap();
            prop_assert_eq!(back.seed, ck.seed);
            prop_assert_eq!(back.epoch, ck.epoch);
            let a: Vec<u64> = ck.params.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.params.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn malformed_checkpoints_are_rejected() {
        let ck = Checkpoint {
            params: ModelParams::init(2, Some(3), 2, 1).unwrap(),
            seed: 1,
            epoch: 4,
        };
        let text = ck.to_text();
        assert!(Checkpoint::from_text("").is_err());
        assert!(Checkpoint::from_text(&text.replace(MAGIC, "other")).is_err());
        assert!(Checkpoint::from_text(&text.replace("hidden_dim 3", "hidden_dim 4")).is_err());
        assert!(Checkpoint::from_text(&format!("{text}1 2 3\n")).is_err());
        let truncated: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(Checkpoint::from_text(&truncated).is_err());
    }

    #[test]
    fn linear_checkpoint_layout() {
        let ck = Checkpoint {
            params: ModelParams::zeros(2, None, 2),
            seed: 9,
            epoch: 0,
        };
        let text = ck.to_text();
        assert_eq!(
            text,
            "mer-checkpoint 1\ninput_dim 2\nhidden_dim none\nclass_count 2\nseed 9\nepoch 0\n\
             output.weights 2 2\n0.0 0.0\n0.0 0.0\noutput.bias 2\n0.0 0.0\n"
        );
        assert_eq!(Checkpoint::from_text(&text).unwrap(), ck);
    }
}
