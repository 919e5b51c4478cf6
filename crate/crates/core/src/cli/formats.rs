//! On-disk text formats: weights TSV, CSV logs, run manifests and the flat
//! `key = value` configuration grammar.
//!
//! Every TSV/CSV file starts with a header comment `# listtune <version> <kind>`.
//! TSV/CSV floats use Rust's shortest round-trip formatting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::decoder::GeneratorConfig;
use crate::error::{Error, Result};
use crate::features::{FeatureSpace, WeightVector};
use crate::optimizer::EpochRecord;
use crate::tuning::{CompareReport, IterationRecord};

pub fn header(kind: &str) -> String {
    format!("# listtune {} {kind}\n", crate::VERSION)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `feature<TAB>value` for every feature in the space, sorted by name.
pub fn format_weights(w: &WeightVector, space: &FeatureSpace) -> String {
    let mut out = header("weights");
    let mut names: Vec<_> = space.names().collect();
    names.sort_by(|a, b| a.1.cmp(b.1));
    for (id, name) in names {
        let _ = writeln!(out, "{name}\t{}", w.get(id));
    }
    out
}

pub fn parse_weights(text: &str, space: &mut FeatureSpace) -> Result<WeightVector> {
    let mut w = WeightVector::zeros();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let (name, value) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(format!("line {}", i + 1), "expected feature<TAB>value"))?;
        let v: f64 = value
            .parse()
            .map_err(|_| Error::parse(format!("line {}", i + 1), format!("bad weight '{value}'")))?;
        if !v.is_finite() {
            return Err(Error::parse(format!("line {}", i + 1), "non-finite weight"));
        }
        w.set(space.intern(name), v);
    }
    Ok(w)
}

pub fn read_weights(path: &Path, space: &mut FeatureSpace) -> Result<WeightVector> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_weights(&text, space)
}

pub const ITERATION_COLUMNS: &str = "iteration,pool_size,dev_bleu,loss_name,wall_time_ms";

pub fn format_iterations(records: &[IterationRecord]) -> String {
    let mut out = header("iterations");
    out.push_str(ITERATION_COLUMNS);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration, r.pool_size, r.dev_bleu, r.loss_name, r.wall_time_ms
        );
    }
    out
}

pub const REPORT_COLUMNS: &str = "method,seed,dev_bleu,test_bleu,p_value";

/// One row per (method, seed) followed by one `mean` row per method.
pub fn format_report(report: &CompareReport) -> String {
    let mut out = header("report");
    out.push_str(REPORT_COLUMNS);
    out.push('\n');
    for row in &report.rows {
        for (i, r) in row.per_seed.iter().enumerate() {
            let p = row.p_values.as_ref().map(|p| p[i].to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{p}", row.label, r.seed, r.dev_bleu, r.test_bleu);
        }
    }
    for row in &report.rows {
        let _ = writeln!(out, "{},mean,{},{},", row.label, row.mean_dev, row.mean_test);
    }
    out
}

/// Fixed-width table with BLEU in percent, two decimals.
pub fn format_table(report: &CompareReport) -> String {
    let width = report.rows.iter().map(|r| r.label.len()).max().unwrap_or(6).max(6);
    let seeds: Vec<u64> = report
        .rows
        .first()
        .map(|r| r.per_seed.iter().map(|s| s.seed).collect())
        .unwrap_or_default();
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "method");
    for s in &seeds {
        let _ = write!(out, " {:>10}", format!("test@{s}"));
    }
    let _ = writeln!(out, " {:>9} {:>9}", "mean-dev", "mean-test");
    for row in &report.rows {
        let _ = write!(out, "{:<width$}", row.label);
        for (i, s) in row.per_seed.iter().enumerate() {
            let mark = match &row.p_values {
                Some(p) if p[i] < 0.05 && Some(&row.label) != report.baseline.as_ref() => "*",
                _ => " ",
            };
            let _ = write!(out, " {:>9.2}{mark}", 100.0 * s.test_bleu);
        }
        let _ = writeln!(out, " {:>9.2} {:>9.2}", 100.0 * row.mean_dev, 100.0 * row.mean_test);
    }
    if let Some(base) = &report.baseline {
        let _ = writeln!(out, "* paired bootstrap p < 0.05 against {base}");
    }
    out
}

pub const LOSSCURVE_COLUMNS: &str = "epoch,loss,top1_bleu";

pub fn format_losscurve(trace: &[EpochRecord]) -> String {
    let mut out = header("losscurve");
    out.push_str(LOSSCURVE_COLUMNS);
    out.push('\n');
    for r in trace {
        let _ = writeln!(out, "{},{},{}", r.epoch, r.loss.unwrap_or(f64::NAN), r.top1_bleu);
    }
    out
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("line {}", i + 1), "expected key = value"))?;
        let key = k.trim().to_owned();
        if key.is_empty() {
            return Err(Error::parse(format!("line {}", i + 1), "empty key"));
        }
        if map.insert(key.clone(), v.trim().to_owned()).is_some() {
            return Err(Error::parse(format!("line {}", i + 1), format!("duplicate key '{key}'")));
        }
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

/// Generator configuration from `key = value` text; missing keys keep defaults.
pub fn parse_generator_config(text: &str) -> Result<GeneratorConfig> {
    let mut cfg = GeneratorConfig::default();
    for (key, value) in parse_key_values(text)? {
        let v = value.as_str();
        match key.as_str() {
            "dev_sentences" => cfg.dev_sentences = parse_value(&key, v)?,
            "test_sentences" => cfg.test_sentences = parse_value(&key, v)?,
            "pool_size" => cfg.pool_size = parse_value(&key, v)?,
            "ref_len_min" => cfg.ref_len_min = parse_value(&key, v)?,
            "ref_len_max" => cfg.ref_len_max = parse_value(&key, v)?,
            "vocab_size" => cfg.vocab_size = parse_value(&key, v)?,
            "dense_features" => cfg.dense_features = parse_value(&key, v)?,
            "sparse_features" => cfg.sparse_features = parse_value(&key, v)?,
            "noise_features" => cfg.noise_features = parse_value(&key, v)?,
            "planted_magnitude" => cfg.planted_magnitude = parse_value(&key, v)?,
            "noise" => cfg.noise = parse_value(&key, v)?,
            "lm_noise_ratio" => cfg.lm_noise_ratio = parse_value(&key, v)?,
            "lm_saturation" => cfg.lm_saturation = parse_value(&key, v)?,
            "lm_tail_noise" => cfg.lm_tail_noise = parse_value(&key, v)?,
            "lm_tail_slope" => cfg.lm_tail_slope = parse_value(&key, v)?,
            "min_corruption" => cfg.min_corruption = parse_value(&key, v)?,
            "max_corruption" => cfg.max_corruption = parse_value(&key, v)?,
            "seed" => cfg.seed = parse_value(&key, v)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn format_generator_config(cfg: &GeneratorConfig) -> String {
    let mut out = String::new();
    let pairs: [(&str, String); 18] = [
        ("dev_sentences", cfg.dev_sentences.to_string()),
        ("test_sentences", cfg.test_sentences.to_string()),
        ("pool_size", cfg.pool_size.to_string()),
        ("ref_len_min", cfg.ref_len_min.to_string()),
        ("ref_len_max", cfg.ref_len_max.to_string()),
        ("vocab_size", cfg.vocab_size.to_string()),
        ("dense_features", cfg.dense_features.to_string()),
        ("sparse_features", cfg.sparse_features.to_string()),
        ("noise_features", cfg.noise_features.to_string()),
        ("planted_magnitude", cfg.planted_magnitude.to_string()),
        ("noise", cfg.noise.to_string()),
        ("lm_noise_ratio", cfg.lm_noise_ratio.to_string()),
        ("lm_saturation", cfg.lm_saturation.to_string()),
        ("lm_tail_noise", cfg.lm_tail_noise.to_string()),
        ("lm_tail_slope", cfg.lm_tail_slope.to_string()),
        ("min_corruption", cfg.min_corruption.to_string()),
        ("max_corruption", cfg.max_corruption.to_string()),
        ("seed", cfg.seed.to_string()),
    ];
    for (k, v) in pairs {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// Run manifest: configuration snapshot written before any result.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub command: String,
    pub entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_owned(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_owned(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = format!("# listtune {} manifest\ntoolkit_version = {}\ncommand = {}\n", crate::VERSION, crate::VERSION, self.command);
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn key_values_grammar() {
        let m = parse_key_values("# c\n a = 1 \n\nb=two # trailing\n").unwrap();
        assert_eq!(m["a"], "1");
        assert_eq!(m["b"], "two");
        assert!(parse_key_values("novalue\n").is_err());
        assert!(parse_key_values("a=1\na=2\n").is_err());
    }

    #[test]
    fn generator_config_round_trip() {
        let cfg = GeneratorConfig {
            pool_size: 17,
            noise: 0.125,
            seed: 99,
            ..Default::default()
        };
        assert_eq!(parse_generator_config(&format_generator_config(&cfg)).unwrap(), cfg);
        assert_eq!(parse_generator_config("bogus = 1").unwrap_err().class(), "config");
        assert_eq!(parse_generator_config("pool_size = x").unwrap_err().class(), "config");
    }

    proptest! {
        #[test]
        fn weights_tsv_round_trips(values in proptest::collection::vec(-1e6f64..1e6, 1..30)) {
            let mut space = FeatureSpace::new();
            for i in 0..values.len() {
                space.intern(&format!("f{i}"));
            }
            let w = WeightVector::from_dense(values);
            let text = format_weights(&w, &space);
            let mut space2 = space.clone();
            let back = parse_weights(&text, &mut space2).unwrap();
            prop_assert_eq!(space2.len(), space.len());
            for (id, _) in space.names() {
                prop_assert_eq!(back.get(id).to_bits(), w.get(id).to_bits());
            }
        }
    }
}
