//! Embedded critical-value and response-surface tables.
//!
//! The tables live in `data/critical_values.txt`; the file documents its own
//! schema. Parsing verifies the CRC-32 checksum record before any value is
//! used.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use super::{Deterministic, RegressionKind};

const EMBEDDED: &str = include_str!("../../data/critical_values.txt");

/// p-values interpolated from the trace table are clamped to this range.
pub const TRACE_P_MIN: f64 = 0.001;
pub const TRACE_P_MAX: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("table checksum mismatch: recorded {recorded:08x}, computed {computed:08x}")]
    Checksum { recorded: u32, computed: u32 },
    #[error("table has no checksum record")]
    MissingChecksum,
    #[error("malformed table record on line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("no {table} entry for {key}")]
    Missing { table: &'static str, key: String },
}

#[derive(Debug, Clone, Default)]
struct AdfSurface {
    max: f64,
    min: f64,
    star: f64,
    smallp: Vec<f64>,
    largep: Vec<f64>,
    /// (significance, [b0, b1, b2, b3])
    crit: Vec<(f64, [f64; 4])>,
}

/// Parsed statistical tables.
#[derive(Debug, Clone, Default)]
pub struct Tables {
    /// (kind, n − r) → [(significance, critical value)] sorted by critical value.
    trace: BTreeMap<(&'static str, usize), Vec<(f64, f64)>>,
    adf: BTreeMap<&'static str, AdfSurface>,
}

fn kind_key(kind: &str, line: usize) -> Result<&'static str, TableError> {
    [
        "none",
        "constant",
        "constant_trend",
        "restricted_constant",
        "unrestricted_constant",
    ]
    .into_iter()
    .find(|k| *k == kind)
    .ok_or_else(|| TableError::Malformed { line, reason: format!("unknown kind {kind:?}") })
}

fn numbers(fields: &[&str], line: usize) -> Result<Vec<f64>, TableError> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>().map_err(|e| TableError::Malformed { line, reason: format!("{f:?}: {e}") })
        })
        .collect()
}

impl Tables {
    /// The tables compiled into the crate, parsed and verified once.
    pub fn embedded() -> Result<&'static Tables, TableError> {
        static CELL: OnceLock<Result<Tables, TableError>> = OnceLock::new();
        CELL.get_or_init(|| Tables::parse(EMBEDDED)).as_ref().map_err(Clone::clone)
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut hasher = crc32fast::Hasher::new();
        let mut recorded = None;
        let mut tables = Tables::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields[0] == "checksum" {
                let hex = fields.get(1).ok_or(TableError::MissingChecksum)?;
                recorded = Some(u32::from_str_radix(hex.trim(), 16).map_err(|e| {
                    TableError::Malformed { line, reason: e.to_string() }
                })?);
                continue;
            }
            hasher.update(raw.as_bytes());
            hasher.update(b"\n");
            let bad = |reason: &str| TableError::Malformed { line, reason: reason.to_string() };
            match fields[0] {
                "johansen_trace" => {
                    if fields.len() != 5 {
                        return Err(bad("expected 5 fields"));
                    }
                    let kind = kind_key(fields[1], line)?;
                    let dim: usize = fields[2].parse().map_err(|_| bad("bad dimension"))?;
                    let v = numbers(&fields[3..], line)?;
                    tables.trace.entry((kind, dim)).or_default().push((v[0], v[1]));
                }
                "adf_bound" => {
                    let kind = kind_key(fields[1], line)?;
                    let v = numbers(&fields[3..4], line)?[0];
                    let s = tables.adf.entry(kind).or_default();
                    match fields[2] {
                        "max" => s.max = v,
                        "min" => s.min = v,
                        "star" => s.star = v,
                        _ => return Err(bad("unknown bound")),
                    }
                }
                "adf_smallp" => {
                    let kind = kind_key(fields[1], line)?;
                    tables.adf.entry(kind).or_default().smallp = numbers(&fields[2..], line)?;
                }
                "adf_largep" => {
                    let kind = kind_key(fields[1], line)?;
                    tables.adf.entry(kind).or_default().largep = numbers(&fields[2..], line)?;
                }
                "adf_crit" => {
                    let kind = kind_key(fields[1], line)?;
                    let v = numbers(&fields[2..], line)?;
                    if v.len() != 5 {
                        return Err(bad("expected significance and 4 coefficients"));
                    }
                    tables.adf.entry(kind).or_default().crit.push((v[0], [v[1], v[2], v[3], v[4]]));
                }
                other => return Err(bad(&format!("unknown record type {other:?}"))),
            }
        }
        let recorded = recorded.ok_or(TableError::MissingChecksum)?;
        let computed = hasher.finalize();
        if recorded != computed {
            return Err(TableError::Checksum { recorded, computed });
        }
        for rows in tables.trace.values_mut() {
            rows.sort_by(|a, b| a.1.total_cmp(&b.1));
        }
        Ok(tables)
    }

    fn trace_rows(&self, kind: Deterministic, dim: usize) -> Result<&[(f64, f64)], TableError> {
        self.trace
            .get(&(kind.table_key(), dim))
            .filter(|rows| rows.len() >= 2)
            .map(Vec::as_slice)
            .ok_or_else(|| TableError::Missing {
                table: "johansen_trace",
                key: format!("{} n-r={dim}", kind.table_key()),
            })
    }

    /// Trace critical value at `significance` for `dim = n − r`.
    pub fn trace_critical_value(
        &self,
        kind: Deterministic,
        dim: usize,
        significance: f64,
    ) -> Result<f64, TableError> {
        self.trace_rows(kind, dim)?
            .iter()
            .find(|(s, _)| (s - significance).abs() < 1e-12)
            .map(|&(_, cv)| cv)
            .ok_or_else(|| TableError::Missing {
                table: "johansen_trace",
                key: format!("{} n-r={dim} at {significance}", kind.table_key()),
            })
    }

    /// p-value of a trace statistic: ln p is interpolated linearly in the
    /// statistic between tabulated levels, extrapolated from the nearest
    /// segment outside them, then clamped to [`TRACE_P_MIN`], [`TRACE_P_MAX`].
    pub fn trace_p_value(&self, kind: Deterministic, dim: usize, stat: f64) -> Result<f64, TableError> {
        let rows = self.trace_rows(kind, dim)?;
        let seg = rows
            .windows(2)
            .position(|w| stat <= w[1].1)
            .unwrap_or(rows.len() - 2);
        let (p0, c0) = rows[seg];
        let (p1, c1) = rows[seg + 1];
        let w = (stat - c0) / (c1 - c0);
        let lnp = p0.ln() + w * (p1.ln() - p0.ln());
        Ok(lnp.exp().clamp(TRACE_P_MIN, TRACE_P_MAX))
    }

    fn adf_surface(&self, kind: RegressionKind) -> Result<&AdfSurface, TableError> {
        self.adf.get(kind.table_key()).ok_or_else(|| TableError::Missing {
            table: "adf",
            key: kind.table_key().to_string(),
        })
    }

    /// MacKinnon (1994) approximate p-value of an ADF t-statistic (N = 1).
    pub fn adf_p_value(&self, kind: RegressionKind, stat: f64) -> Result<f64, TableError> {
        let s = self.adf_surface(kind)?;
        if stat > s.max {
            return Ok(1.0);
        }
        if stat < s.min {
            return Ok(0.0);
        }
        let coef = if stat <= s.star { &s.smallp } else { &s.largep };
        let z = coef.iter().rev().fold(0.0, |acc, c| acc * stat + c);
        Ok(Normal::standard().cdf(z))
    }

    /// MacKinnon (2010) finite-sample critical values, as (significance, value).
    pub fn adf_critical_values(&self, kind: RegressionKind, n_obs: usize) -> Result<Vec<(f64, f64)>, TableError> {
        let s = self.adf_surface(kind)?;
        let inv = 1.0 / n_obs as f64;
        Ok(s.crit
            .iter()
            .map(|(lvl, b)| (*lvl, b[0] + inv * (b[1] + inv * (b[2] + inv * b[3]))))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_tables_verify() {
        let t = Tables::embedded().unwrap();
        let cv = t.trace_critical_value(Deterministic::RestrictedConstant, 2, 0.05).unwrap();
        assert!((cv - 20.2318).abs() < 1e-12);
        let cv = t.trace_critical_value(Deterministic::UnrestrictedConstant, 1, 0.05).unwrap();
        assert_eq!(cv, 3.8415);
    }

    #[test]
    fn corrupted_value_fails_checksum() {
        let tampered = EMBEDDED.replacen("20.2318", "20.2319", 1);
        assert!(matches!(Tables::parse(&tampered), Err(TableError::Checksum { .. })));
    }

    #[test]
    fn missing_checksum_is_rejected() {
        let stripped: String = EMBEDDED
            .lines()
            .filter(|l| !l.starts_with("checksum"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert_eq!(Tables::parse(&stripped).unwrap_err(), TableError::MissingChecksum);
    }

    #[test]
    fn trace_p_value_hits_tabulated_levels() {
        let t = Tables::embedded().unwrap();
        let k = Deterministic::RestrictedConstant;
        for &(lvl, cv) in t.trace_rows(k, 2).unwrap() {
            let p = t.trace_p_value(k, 2, cv).unwrap();
            assert!((p - lvl).abs() < 1e-12, "{p} vs {lvl}");
        }
        // Log-linear between 0.05 (20.2318) and 0.025 (22.3668).
        let mid = (20.2318 + 22.3668) / 2.0;
        let expect = (0.05f64.ln() * 0.5 + 0.025f64.ln() * 0.5).exp();
        assert!((t.trace_p_value(k, 2, mid).unwrap() - expect).abs() < 1e-12);
        assert_eq!(t.trace_p_value(k, 2, 1000.0).unwrap(), TRACE_P_MIN);
        assert_eq!(t.trace_p_value(k, 2, 0.0).unwrap(), TRACE_P_MAX);
    }

    #[test]
    fn trace_p_value_is_monotone() {
        let t = Tables::embedded().unwrap();
        let mut prev = 1.0;
        for i in 0..400 {
            let p = t.trace_p_value(Deterministic::RestrictedConstant, 2, i as f64 * 0.1).unwrap();
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn adf_p_value_matches_reference_points() {
        // Reference values from statsmodels.tsa.adfvalues.mackinnonp.
        let t = Tables::embedded().unwrap();
        let cases = [
            (RegressionKind::Constant, -2.8622, 0.04992350579313313),
            (RegressionKind::Constant, -1.0, 0.7532643012005655),
            (RegressionKind::ConstantTrend, -4.0, 0.008793701231094677),
            (RegressionKind::NoConstant, -1.5, 0.1252400584846753),
        ];
        for (kind, stat, expect) in cases {
            let p = t.adf_p_value(kind, stat).unwrap();
            assert!((p - expect).abs() < 1e-10, "{kind:?} {stat}: {p}");
        }
        assert_eq!(t.adf_p_value(RegressionKind::Constant, 3.0).unwrap(), 1.0);
        assert_eq!(t.adf_p_value(RegressionKind::Constant, -20.0).unwrap(), 0.0);
        let cv = t.adf_critical_values(RegressionKind::Constant, 100).unwrap();
        assert!((cv[0].1 - -3.49750103).abs() < 1e-8);
        assert!((cv[1].1 - -2.89090644).abs() < 1e-8);
    }
}
