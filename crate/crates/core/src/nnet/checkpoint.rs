//! Plain-text parameter checkpoints.
//!
//! Layout (line oriented, LF endings):
//!
//! ```text
//! sarclab-checkpoint v1
//! meta <key> <value>
//! net <name>
//! layers <n0> <n1> ...
//! hidden <relu|tanh|identity>
//! output <relu|tanh|identity>
//! params <count>
//! <count lines, one f64 per line as 16 lower-case hex digits of its IEEE-754 bits>
//! ```
//!
//! `meta` lines may appear once each before the first `net`; `net` sections
//! repeat. Parameters are stored in flat order (per layer: weights row-major,
//! then biases), and the hex-bit encoding makes save/load round trips
//! bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::matrix::Matrix;
use super::mlp::{Activation, Mlp};

pub const FORMAT_HEADER: &str = "sarclab-checkpoint v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> CheckpointError {
    CheckpointError::Parse {
        line,
        message: message.into(),
    }
}

pub fn save_checkpoint(
    path: &Path,
    meta: &[(String, String)],
    nets: &[(&str, &Mlp)],
) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{FORMAT_HEADER}")?;
    for (key, value) in meta {
        assert!(
            !key.contains(char::is_whitespace) && !value.contains('\n'),
            "malformed meta entry {key:?}"
        );
        writeln!(w, "meta {key} {value}")?;
    }
    for (name, mlp) in nets {
        assert!(!name.contains(char::is_whitespace), "malformed net name {name:?}");
        writeln!(w, "net {name}")?;
        write!(w, "layers")?;
        for s in mlp.layer_sizes() {
            write!(w, " {s}")?;
        }
        writeln!(w)?;
        writeln!(w, "hidden {}", mlp.hidden_activation().name())?;
        writeln!(w, "output {}", mlp.output_activation().name())?;
        writeln!(w, "params {}", mlp.param_count())?;
        for k in 0..mlp.num_layers() {
            for &x in mlp.weight(k).as_slice() {
                writeln!(w, "{:016x}", x.to_bits())?;
            }
            for &x in mlp.bias(k) {
                writeln!(w, "{:016x}", x.to_bits())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Returns the meta entries and the nets in file order.
#[allow(clippy::type_complexity)]
pub fn load_checkpoint(path: &Path) -> Result<(Vec<(String, String)>, Vec<(String, Mlp)>), CheckpointError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let mut next = || -> Result<Option<(usize, String)>, CheckpointError> {
        match lines.next() {
            Some((i, line)) => Ok(Some((i + 1, line?))),
            None => Ok(None),
        }
    };

    let (line_no, header) = next()?.ok_or_else(|| parse_err(1, "empty file"))?;
    if header != FORMAT_HEADER {
        return Err(parse_err(line_no, format!("expected header {FORMAT_HEADER:?}")));
    }

    let mut meta = Vec::new();
    let mut nets = Vec::new();
    let mut pending: Option<(usize, String)> = next()?;
    while let Some((line_no, line)) = pending.take() {
        if let Some(rest) = line.strip_prefix("meta ") {
            if !nets.is_empty() {
                return Err(parse_err(line_no, "meta after first net section"));
            }
            let (key, value) = rest
                .split_once(' ')
                .ok_or_else(|| parse_err(line_no, "meta needs a key and a value"))?;
            meta.push((key.to_string(), value.to_string()));
            pending = next()?;
            continue;
        }
        let name = line
            .strip_prefix("net ")
            .ok_or_else(|| parse_err(line_no, format!("expected `net <name>`, got {line:?}")))?
            .to_string();

        let (ln, layers_line) = next()?.ok_or_else(|| parse_err(line_no, "truncated net section"))?;
        let sizes: Vec<usize> = layers_line
            .strip_prefix("layers ")
            .ok_or_else(|| parse_err(ln, "expected `layers ...`"))?
            .split(' ')
            .map(|t| t.parse::<usize>().map_err(|_| parse_err(ln, format!("bad layer size {t:?}"))))
            .collect::<Result<_, _>>()?;
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(parse_err(ln, "layer list must have >= 2 positive entries"));
        }

        let (ln, hidden_line) = next()?.ok_or_else(|| parse_err(ln, "truncated net section"))?;
        let hidden = hidden_line
            .strip_prefix("hidden ")
            .and_then(Activation::from_name)
            .ok_or_else(|| parse_err(ln, "expected `hidden <activation>`"))?;

        let (ln, output_line) = next()?.ok_or_else(|| parse_err(ln, "truncated net section"))?;
        let output = output_line
            .strip_prefix("output ")
            .and_then(Activation::from_name)
            .ok_or_else(|| parse_err(ln, "expected `output <activation>`"))?;

        let (ln, params_line) = next()?.ok_or_else(|| parse_err(ln, "truncated net section"))?;
        let count: usize = params_line
            .strip_prefix("params ")
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(ln, "expected `params <count>`"))?;
        let expected: usize = (0..sizes.len() - 1)
            .map(|k| sizes[k + 1] * sizes[k] + sizes[k + 1])
            .sum();
        if count != expected {
            return Err(parse_err(ln, format!("params {count} but shapes imply {expected}")));
        }

        let mut values = Vec::with_capacity(count);
        let mut last_ln = ln;
        for _ in 0..count {
            let (ln, value_line) = next()?.ok_or_else(|| parse_err(last_ln, "truncated parameter block"))?;
            last_ln = ln;
            let bits = u64::from_str_radix(value_line.trim(), 16)
                .map_err(|_| parse_err(ln, format!("bad parameter encoding {value_line:?}")))?;
            values.push(f64::from_bits(bits));
        }

        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut offset = 0;
        for k in 0..sizes.len() - 1 {
            let wn = sizes[k + 1] * sizes[k];
            weights.push(Matrix::from_vec(sizes[k + 1], sizes[k], values[offset..offset + wn].to_vec()));
            offset += wn;
            biases.push(values[offset..offset + sizes[k + 1]].to_vec());
            offset += sizes[k + 1];
        }
        nets.push((name, Mlp::from_parts(sizes, weights, biases, hidden, output)));
        pending = next()?;
    }
    Ok((meta, nets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut a = Mlp::new(&[3, 16, 2], Activation::Relu, Activation::Identity, &mut rng);
        let mut b = Mlp::new(&[2, 4, 4, 1], Activation::Relu, Activation::Tanh, &mut rng);
        // Exercise awkward values: subnormals, negative zero, huge magnitudes.
        a.set_param(0, 5e-324);
        a.set_param(1, -0.0);
        b.set_param(0, -1.797e308);
        b.set_param(1, 1.0 + f64::EPSILON);

        let dir = std::env::temp_dir().join(format!("sarclab-ckpt-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.txt");
        let meta = vec![("algorithm".to_string(), "sac".to_string()), ("env_step".to_string(), "12000".to_string())];
        save_checkpoint(&path, &meta, &[("q1", &a), ("actor", &b)]).unwrap();
        let (meta_back, nets) = load_checkpoint(&path).unwrap();
        std::fs::remove_dir_all(&dir).ok();

        assert_eq!(meta_back, meta);
        assert_eq!(nets.len(), 2);
        assert_eq!(nets[0].0, "q1");
        assert_eq!(nets[0].1, a);
        assert_eq!(nets[1].0, "actor");
        assert_eq!(nets[1].1, b);
    }

    #[test]
    fn truncated_file_reports_parse_error() {
        let dir = std::env::temp_dir().join(format!("sarclab-ckpt-trunc-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("truncated.txt");
        std::fs::write(
            &path,
            format!("{FORMAT_HEADER}\nnet q1\nlayers 2 1\nhidden relu\noutput identity\nparams 3\n0000000000000000\n"),
        )
        .unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        std::fs::remove_dir_all(&dir).ok();
        assert!(matches!(err, CheckpointError::Parse { .. }), "{err}");
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = std::env::temp_dir().join(format!("sarclab-ckpt-hdr-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("header.txt");
        std::fs::write(&path, "something else\n").unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        std::fs::remove_dir_all(&dir).ok();
        assert!(matches!(err, CheckpointError::Parse { line: 1, .. }));
    }
}
