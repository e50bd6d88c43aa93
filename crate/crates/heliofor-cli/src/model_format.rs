//! On-disk model format.
//!
//! Plain text, line oriented, versioned by its first line. Floats are
//! written with Rust's shortest round-trip formatting and read back with the
//! standard parser, so save-then-load reproduces every parameter bit for
//! bit: a forecast from a reloaded model is identical to one from the
//! original in memory.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use heliofor_core::data::{Column, MinMaxScaler};
use heliofor_core::hybrid::HybridModel;
use heliofor_core::lstm::{HeadActivation, LstmCellParams, LstmStack};
use heliofor_core::narx::{NarxConfig, NarxNetwork};
use heliofor_core::Matrix;

pub const MAGIC: &str = "heliofor-model v1";

fn head_name(head: HeadActivation) -> &'static str {
    match head {
        HeadActivation::Linear => "linear",
        HeadActivation::Sigmoid => "sigmoid",
    }
}

fn join_floats(values: &[f64]) -> String {
    let mut line = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        write!(line, "{v}").expect("string write");
    }
    line
}

fn write_vector(out: &mut String, label: &str, values: &[f64]) {
    writeln!(out, "{label} {}", values.len()).expect("string write");
    writeln!(out, "{}", join_floats(values)).expect("string write");
}

fn write_matrix(out: &mut String, label: &str, m: &Matrix) {
    writeln!(out, "{label} {} {}", m.rows(), m.cols()).expect("string write");
    for row in m.iter_rows() {
        writeln!(out, "{}", join_floats(row)).expect("string write");
    }
}

pub fn to_text(model: &HybridModel) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").expect("string write");

    writeln!(out, "scaler").expect("string write");
    for col in Column::ALL {
        let (lo, hi) = model.scaler.range(col);
        writeln!(out, "{lo} {hi}").expect("string write");
    }

    writeln!(out, "features {}", model.feature_names.len()).expect("string write");
    for name in &model.feature_names {
        writeln!(out, "{name}").expect("string write");
    }

    let net = &model.narx;
    let c = &net.config;
    writeln!(
        out,
        "narx {} {} {} {} {} {} {} {}",
        c.d_u, c.d_y, c.hidden_units, c.learning_rate, c.epochs, c.batch_size, c.seed, net.n_features
    )
    .expect("string write");
    write_matrix(&mut out, "input_weights", &net.input_weights);
    write_vector(&mut out, "input_bias", &net.input_bias);
    write_vector(&mut out, "output_weights", &net.output_weights);
    writeln!(out, "output_bias {}", net.output_bias).expect("string write");

    let stack = &model.lstm;
    writeln!(out, "lstm {} {} {}", stack.layers.len(), head_name(stack.head), stack.seed)
        .expect("string write");
    for (i, layer) in stack.layers.iter().enumerate() {
        writeln!(out, "layer {i} {} {}", layer.input_size, layer.hidden_size)
            .expect("string write");
        write_matrix(&mut out, "w_i", &layer.w_i);
        write_matrix(&mut out, "w_f", &layer.w_f);
        write_matrix(&mut out, "w_o", &layer.w_o);
        write_matrix(&mut out, "w_g", &layer.w_g);
        write_vector(&mut out, "b_i", &layer.b_i);
        write_vector(&mut out, "b_f", &layer.b_f);
        write_vector(&mut out, "b_o", &layer.b_o);
        write_vector(&mut out, "b_g", &layer.b_g);
    }
    write_vector(&mut out, "head_weights", &stack.head_weights);
    writeln!(out, "head_bias {}", stack.head_bias).expect("string write");
    writeln!(out, "end").expect("string write");
    out
}

struct Cursor<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor {
            lines: text.lines().enumerate(),
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .ok_or_else(|| anyhow!("model file truncated"))
    }

    /// Next line split into tokens, with the first required to be `tag`.
    fn tagged(&mut self, tag: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.next()?;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some(t) if t == tag => Ok((n, tokens.collect())),
            _ => bail!("model line {n}: expected `{tag}`, got `{line}`"),
        }
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f64>> {
        let (n, line) = self.next()?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| parse_f64(t, n))
            .collect::<Result<_>>()?;
        if values.len() != count {
            bail!("model line {n}: expected {count} values, got {}", values.len());
        }
        Ok(values)
    }
}

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token
        .parse()
        .map_err(|_| anyhow!("model line {line}: cannot parse `{token}` as a number"))
}

fn parse_usize(token: &str, line: usize) -> Result<usize> {
    token
        .parse()
        .map_err(|_| anyhow!("model line {line}: cannot parse `{token}` as a count"))
}

fn parse_u64(token: &str, line: usize) -> Result<u64> {
    token
        .parse()
        .map_err(|_| anyhow!("model line {line}: cannot parse `{token}` as a seed"))
}

fn arity(n: usize, tokens: &[&str], want: usize) -> Result<()> {
    if tokens.len() != want {
        bail!("model line {n}: expected {want} fields, got {}", tokens.len());
    }
    Ok(())
}

fn read_vector(cur: &mut Cursor, tag: &str) -> Result<Vec<f64>> {
    let (n, tokens) = cur.tagged(tag)?;
    arity(n, &tokens, 1)?;
    let len = parse_usize(tokens[0], n)?;
    cur.floats(len)
}

fn read_matrix(cur: &mut Cursor, tag: &str) -> Result<Matrix> {
    let (n, tokens) = cur.tagged(tag)?;
    arity(n, &tokens, 2)?;
    let rows = parse_usize(tokens[0], n)?;
    let cols = parse_usize(tokens[1], n)?;
    let mut flat = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        flat.extend(cur.floats(cols)?);
    }
    Matrix::from_vec(flat, rows, cols).map_err(|e| anyhow!("model line {n}: {e}"))
}

pub fn from_text(text: &str) -> Result<HybridModel> {
    let mut cur = Cursor::new(text);
    let (n, magic) = cur.next()?;
    if magic != MAGIC {
        bail!("model line {n}: unsupported format `{magic}`, expected `{MAGIC}`");
    }

    let (n, tokens) = cur.tagged("scaler")?;
    arity(n, &tokens, 0)?;
    let mut ranges = [(0.0, 0.0); 5];
    for slot in ranges.iter_mut() {
        let pair = cur.floats(2)?;
        *slot = (pair[0], pair[1]);
    }
    let scaler = MinMaxScaler::from_ranges(ranges);

    let (n, tokens) = cur.tagged("features")?;
    arity(n, &tokens, 1)?;
    let n_names = parse_usize(tokens[0], n)?;
    let mut feature_names = Vec::with_capacity(n_names);
    for _ in 0..n_names {
        let (n, name) = cur.next()?;
        if name.trim().is_empty() {
            bail!("model line {n}: empty feature name");
        }
        feature_names.push(name.trim().to_string());
    }

    let (n, tokens) = cur.tagged("narx")?;
    arity(n, &tokens, 8)?;
    let config = NarxConfig {
        d_u: parse_usize(tokens[0], n)?,
        d_y: parse_usize(tokens[1], n)?,
        hidden_units: parse_usize(tokens[2], n)?,
        learning_rate: parse_f64(tokens[3], n)?,
        epochs: parse_usize(tokens[4], n)?,
        batch_size: parse_usize(tokens[5], n)?,
        seed: parse_u64(tokens[6], n)?,
    };
    let n_features = parse_usize(tokens[7], n)?;
    let input_weights = read_matrix(&mut cur, "input_weights")?;
    let input_bias = read_vector(&mut cur, "input_bias")?;
    let output_weights = read_vector(&mut cur, "output_weights")?;
    let (n, tokens) = cur.tagged("output_bias")?;
    arity(n, &tokens, 1)?;
    let output_bias = parse_f64(tokens[0], n)?;
    let narx = NarxNetwork {
        config,
        n_features,
        input_weights,
        input_bias,
        output_weights,
        output_bias,
    };
    let hidden = narx.config.hidden_units;
    if narx.input_weights.rows() != hidden
        || narx.input_weights.cols() != narx.regressor_len()
        || narx.input_bias.len() != hidden
        || narx.output_weights.len() != hidden
    {
        bail!("model line {n}: inconsistent narx dimensions");
    }

    let (n, tokens) = cur.tagged("lstm")?;
    arity(n, &tokens, 3)?;
    let n_layers = parse_usize(tokens[0], n)?;
    let head = match tokens[1] {
        "linear" => HeadActivation::Linear,
        "sigmoid" => HeadActivation::Sigmoid,
        other => bail!("model line {n}: unknown head `{other}`"),
    };
    let seed = parse_u64(tokens[2], n)?;
    let mut layers: Vec<LstmCellParams> = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let (n, tokens) = cur.tagged("layer")?;
        arity(n, &tokens, 3)?;
        let index = parse_usize(tokens[0], n)?;
        if index != i {
            bail!("model line {n}: layer index {index}, expected {i}");
        }
        let input_size = parse_usize(tokens[1], n)?;
        let hidden_size = parse_usize(tokens[2], n)?;
        let expected_input = if i == 0 {
            feature_names.len()
        } else {
            layers[i - 1].hidden_size
        };
        if input_size != expected_input {
            bail!("model line {n}: layer {i} input size {input_size}, expected {expected_input}");
        }
        let layer = LstmCellParams {
            hidden_size,
            input_size,
            w_i: read_matrix(&mut cur, "w_i")?,
            w_f: read_matrix(&mut cur, "w_f")?,
            w_o: read_matrix(&mut cur, "w_o")?,
            w_g: read_matrix(&mut cur, "w_g")?,
            b_i: read_vector(&mut cur, "b_i")?,
            b_f: read_vector(&mut cur, "b_f")?,
            b_o: read_vector(&mut cur, "b_o")?,
            b_g: read_vector(&mut cur, "b_g")?,
        };
        let width = hidden_size + input_size;
        let gates_ok = [&layer.w_i, &layer.w_f, &layer.w_o, &layer.w_g]
            .iter()
            .all(|w| w.rows() == hidden_size && w.cols() == width)
            && [&layer.b_i, &layer.b_f, &layer.b_o, &layer.b_g]
                .iter()
                .all(|b| b.len() == hidden_size);
        if !gates_ok {
            bail!("model line {n}: inconsistent gate dimensions in layer {i}");
        }
        layers.push(layer);
    }
    let head_weights = read_vector(&mut cur, "head_weights")?;
    let (n, tokens) = cur.tagged("head_bias")?;
    arity(n, &tokens, 1)?;
    let head_bias = parse_f64(tokens[0], n)?;
    let (n, tokens) = cur.tagged("end")?;
    arity(n, &tokens, 0)?;
    while let Some((i, line)) = cur.lines.next() {
        if !line.trim().is_empty() {
            bail!("model line {}: trailing content after `end`", i + 1);
        }
    }

    let last_hidden = layers.last().map(|l| l.hidden_size).unwrap_or(0);
    if n_layers == 0 || head_weights.len() != last_hidden {
        bail!("model line {n}: inconsistent head dimensions");
    }
    if feature_names.len() != n_features + 1 {
        bail!(
            "model line {n}: {} feature names for {} exogenous features",
            feature_names.len(),
            n_features
        );
    }

    Ok(HybridModel {
        narx,
        lstm: LstmStack {
            layers,
            head_weights,
            head_bias,
            head,
            seed,
        },
        scaler,
        feature_names,
    })
}

pub fn load(path: &Path) -> Result<HybridModel> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading model {}", path.display()))?;
    from_text(&text).with_context(|| format!("in {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use heliofor_core::hybrid::{train_hybrid, PipelineConfig};
    use heliofor_core::lstm::LstmConfig;
    use heliofor_core::synth::{generate, PlantSpec, SynthConfig};

    fn tiny_model() -> HybridModel {
        let data = generate(
            &PlantSpec::default(),
            &SynthConfig {
                days: 2,
                step_seconds: 1800,
                ..SynthConfig::default()
            },
        )
        .unwrap();
        let cfg = PipelineConfig {
            narx: heliofor_core::narx::NarxConfig {
                d_u: 2,
                d_y: 1,
                hidden_units: 3,
                epochs: 2,
                batch_size: 8,
                ..Default::default()
            },
            lstm: LstmConfig {
                hidden_size: 3,
                layers: 2,
                epochs: 2,
                batch_size: 2,
                sequence_length: 12,
                ..Default::default()
            },
            train_fraction: 0.8,
        };
        train_hybrid(&data, &cfg).unwrap().0
    }

    #[test]
    fn round_trip_is_exact() {
        let model = tiny_model();
        let text = to_text(&model);
        let back = from_text(&text).unwrap();
        assert_eq!(model, back);
        // The writer is deterministic, so a second pass is byte-identical.
        assert_eq!(text, to_text(&back));
    }

    #[test]
    fn version_line_is_enforced() {
        let text = to_text(&tiny_model()).replace(MAGIC, "heliofor-model v9");
        let err = from_text(&text).unwrap_err().to_string();
        assert!(err.contains("unsupported format"), "{err}");
    }

    #[test]
    fn truncated_file_is_rejected() {
        let text = to_text(&tiny_model());
        let half: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        let err = from_text(&half).unwrap_err().to_string();
        assert!(err.contains("truncated") || err.contains("expected"), "{err}");
    }

    #[test]
    fn tampered_dimensions_are_rejected() {
        let model = tiny_model();
        let text = to_text(&model);
        let hidden = model.narx.config.hidden_units;
        let tampered = text.replace(
            &format!("input_bias {hidden}"),
            &format!("input_bias {}", hidden + 1),
        );
        assert!(from_text(&tampered).is_err());
        let trailing = format!("{text}stray\n");
        let err = from_text(&trailing).unwrap_err().to_string();
        assert!(err.contains("trailing content"), "{err}");
    }
}
