//! Versioned plain-text forecaster files. Floats are written in shortest
//! round-trip form, so a save/load cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::{Architecture, LossKind, ModelConfig, ModelError, Normalizer, TrainedForecaster};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "coinfactor-forecaster";

pub fn to_text<T: Scalar>(model: &TrainedForecaster<T>) -> String {
    let c = &model.config;
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(s, "architecture {}", c.architecture.label().to_lowercase());
    let _ = writeln!(s, "hidden_size {}", c.hidden_size);
    let _ = writeln!(s, "input_size {}", c.input_size);
    let _ = writeln!(s, "window_len {}", c.window_len);
    match &c.loss {
        LossKind::Quantile { quantiles } => {
            let qs: Vec<String> = quantiles.iter().map(f64::to_string).collect();
            let _ = writeln!(s, "loss quantile {}", qs.join(" "));
        }
        LossKind::Rmse => s.push_str("loss rmse\n"),
    }
    let _ = writeln!(s, "learning_rate {}", c.learning_rate);
    let _ = writeln!(s, "epochs {}", c.epochs);
    let _ = writeln!(s, "batch_size {}", c.batch_size);
    let _ = writeln!(s, "seed {}", c.seed);
    match c.grad_clip {
        Some(v) => writeln!(s, "grad_clip {v}"),
        None => writeln!(s, "grad_clip none"),
    }
    .ok();
    for (lo, hi) in &model.normalizer.features {
        let _ = writeln!(s, "feature_range {lo} {hi}");
    }
    let (lo, hi) = model.normalizer.target;
    let _ = writeln!(s, "target_range {lo} {hi}");
    for (name, values) in [("loss_history", &model.training_loss_history), ("weights", &model.weights)] {
        let _ = writeln!(s, "{name} {}", values.len());
        for v in values.iter() {
            let _ = writeln!(s, "{v}");
        }
    }
    s
}

struct Reader<'a> {
    path: &'a Path,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: impl Into<String>) -> ModelError {
        ModelError::Format { path: self.path.to_path_buf(), line: self.line, reason: reason.into() }
    }

    fn next_line(&mut self) -> Result<&'a str, ModelError> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim_end())
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    /// Reads `key v1 v2 ...` and returns the values.
    fn field(&mut self, key: &str) -> Result<Vec<&'a str>, ModelError> {
        let line = self.next_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(parts.collect())
    }

    fn parse<V: std::str::FromStr>(&self, s: &str) -> Result<V, ModelError> {
        s.parse().map_err(|_| self.err(format!("cannot parse `{s}`")))
    }

    fn single<V: std::str::FromStr>(&mut self, key: &str) -> Result<V, ModelError> {
        let v = self.field(key)?;
        match v.as_slice() {
            [x] => self.parse(x),
            _ => Err(self.err(format!("`{key}` takes one value"))),
        }
    }

    fn pair<T: Scalar>(&mut self, key: &str) -> Result<(T, T), ModelError> {
        let v = self.field(key)?;
        match v.as_slice() {
            [a, b] => Ok((self.parse(a)?, self.parse(b)?)),
            _ => Err(self.err(format!("`{key}` takes two values"))),
        }
    }

    fn vector<T: Scalar>(&mut self, key: &str) -> Result<Vec<T>, ModelError> {
        let n: usize = self.single(key)?;
        (0..n).map(|_| {
            let l = self.next_line()?;
            self.parse(l)
        })
        .collect()
    }
}

pub fn from_text<T: Scalar>(text: &str, path: &Path) -> Result<TrainedForecaster<T>, ModelError> {
    let mut r = Reader { path, lines: text.lines().enumerate(), line: 0 };
    let version: u32 = r.single(MAGIC)?;
    if version != FORMAT_VERSION {
        return Err(r.err(format!("unsupported format version {version}")));
    }
    let arch: String = r.single("architecture")?;
    let architecture = Architecture::parse(&arch).ok_or_else(|| r.err(format!("unknown architecture `{arch}`")))?;
    let hidden_size = r.single("hidden_size")?;
    let input_size = r.single("input_size")?;
    let window_len = r.single("window_len")?;
    let loss_fields = r.field("loss")?;
    let loss = match loss_fields.split_first() {
        Some((&"rmse", [])) => LossKind::Rmse,
        Some((&"quantile", qs)) => LossKind::Quantile {
            quantiles: qs.iter().map(|q| r.parse(q)).collect::<Result<_, _>>()?,
        },
        _ => return Err(r.err("unknown loss")),
    };
    let learning_rate = r.single("learning_rate")?;
    let epochs = r.single("epochs")?;
    let batch_size = r.single("batch_size")?;
    let seed = r.single("seed")?;
    let clip: String = r.single("grad_clip")?;
    let grad_clip = if clip == "none" { None } else { Some(r.parse(&clip)?) };
    let config = ModelConfig {
        architecture,
        hidden_size,
        input_size,
        loss,
        learning_rate,
        epochs,
        batch_size,
        seed,
        window_len,
        grad_clip,
    };
    config.validate()?;
    let features = (0..input_size).map(|_| r.pair("feature_range")).collect::<Result<Vec<_>, _>>()?;
    let target = r.pair("target_range")?;
    let training_loss_history = r.vector("loss_history")?;
    let weights: Vec<T> = r.vector("weights")?;
    if weights.len() != config.layout().len() {
        return Err(r.err(format!("expected {} weights, found {}", config.layout().len(), weights.len())));
    }
    if features.iter().chain([&target]).any(|(lo, hi)| !(lo < hi)) {
        return Err(r.err("normalizer range with min >= max"));
    }
    Ok(TrainedForecaster { config, weights, normalizer: Normalizer { features, target }, training_loss_history })
}

pub fn save_forecaster<T: Scalar>(model: &TrainedForecaster<T>, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    std::fs::write(path, to_text(model)).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })
}

pub fn load_forecaster<T: Scalar>(path: impl AsRef<Path>) -> Result<TrainedForecaster<T>, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
    from_text(&text, path)
}
