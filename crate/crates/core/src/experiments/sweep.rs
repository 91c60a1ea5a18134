use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::{ExperimentConfig, Model, OutputFormat};
use super::runner::{run_replicas, summarize};
use super::ExperimentError;
use crate::weights::WeightSpec;

/// `sqrt(f (1 - f) / n)`.
pub fn binomial_se(freq: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (freq * (1.0 - freq) / n as f64).sqrt()
}

/// True when the frequencies do not increase from one entry to the next,
/// except for at most one rise no larger than `sigmas` combined standard
/// errors. Entries are `(freq, se)`.
pub fn non_increasing_within(points: &[(f64, f64)], sigmas: f64) -> bool {
    let mut inversions = 0;
    for w in points.windows(2) {
        let ((f0, se0), (f1, se1)) = (w[0], w[1]);
        if f1 > f0 {
            inversions += 1;
            if inversions > 1 || f1 - f0 > sigmas * (se0 * se0 + se1 * se1).sqrt() {
                return false;
            }
        }
    }
    true
}

/// `(p, q, r)` of one grid cell.
pub type Coordinates = (f64, Option<f64>, Option<f64>);

/// Grid over the exponents; every other setting comes from `base`.
///
/// For the zero-range process the axes are `p`, `q`, `r` directly. For the
/// ant walk `W1 = family1(p)` and `W2 = family2(q)`; for balls-in-bins the
/// feedback is `family1(p)`. Family names are those of [`WeightSpec`]
/// (`pow+1`, `pow`, `logpow1`, `logpow2`, `exp`).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub base: ExperimentConfig,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub family1: String,
    pub family2: String,
}

fn family_spec(family: &str, value: f64) -> Result<WeightSpec, ExperimentError> {
    let param = match family {
        "pow+1" | "logpow1" => "p",
        "pow" => "s",
        "logpow2" => "q",
        "exp" => "beta",
        other => return Err(ExperimentError::Validation(vec![format!("family: unknown family `{other}`")])),
    };
    Ok(format!("{family}:{param}={value}").parse()?)
}

impl SweepGrid {
    pub fn new(base: ExperimentConfig, p: Vec<f64>, q: Vec<f64>, r: Vec<f64>) -> Self {
        SweepGrid { base, p, q, r, family1: "pow+1".into(), family2: "pow+1".into() }
    }

    /// Grid file: the experiment keys plus `p_values`, `q_values`,
    /// `r_values` (comma lists) and `family`, `family1`, `family2`. An axis
    /// left out holds the base value.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut axes: [Option<Vec<f64>>; 3] = [None, None, None];
        let mut families = (None::<String>, None::<String>, None::<String>);
        let base = ExperimentConfig::parse_with(text, |key, value| {
            let list = || -> Result<Vec<f64>, String> {
                value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad number `{}`", s.trim())))
                    .collect()
            };
            match key {
                "p_values" => axes[0] = Some(list()?),
                "q_values" => axes[1] = Some(list()?),
                "r_values" => axes[2] = Some(list()?),
                "family" => families.0 = Some(value.to_string()),
                "family1" => families.1 = Some(value.to_string()),
                "family2" => families.2 = Some(value.to_string()),
                _ => return Ok(false),
            }
            Ok(true)
        })?;
        let [p, q, r] = axes;
        let default_family = families.0.unwrap_or_else(|| "pow+1".into());
        let grid = SweepGrid {
            p: p.unwrap_or_else(|| vec![base.p]),
            q: q.unwrap_or_else(|| vec![base.q]),
            r: r.unwrap_or_else(|| vec![base.r]),
            family1: families.1.unwrap_or_else(|| default_family.clone()),
            family2: families.2.unwrap_or(default_family),
            base,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let mut problems = Vec::new();
        for (name, axis) in [("p_values", &self.p), ("q_values", &self.q), ("r_values", &self.r)] {
            if axis.is_empty() || axis.iter().any(|x| !x.is_finite()) {
                problems.push(format!("{name}: must be a non-empty list of finite numbers"));
            }
        }
        if problems.is_empty() {
            for cell in self.cells() {
                if let Err(ExperimentError::Validation(mut p)) = cell.and_then(|(_, c)| c.validate()) {
                    problems.append(&mut p);
                    break;
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Validation(problems))
        }
    }

    /// `(p, q, r)` coordinates in row-major order (`p` outermost). Axes that
    /// do not apply to the model are `None` and not iterated.
    pub fn coordinates(&self) -> Vec<Coordinates> {
        let q_axis: Vec<Option<f64>> = match self.base.model {
            Model::Bins => vec![None],
            _ => self.q.iter().copied().map(Some).collect(),
        };
        let r_axis: Vec<Option<f64>> = match self.base.model {
            Model::Nczr => self.r.iter().copied().map(Some).collect(),
            _ => vec![None],
        };
        let mut coords = Vec::new();
        for &p in &self.p {
            for &q in &q_axis {
                for &r in &r_axis {
                    coords.push((p, q, r));
                }
            }
        }
        coords
    }

    /// Every cell's coordinates and full configuration, in enumeration order.
    pub fn cells(&self) -> impl Iterator<Item = Result<(Coordinates, ExperimentConfig), ExperimentError>> + '_ {
        self.coordinates().into_iter().map(move |(p, q, r)| {
            let mut config = self.base.clone();
            config.trace = None;
            match config.model {
                Model::Nczr => {
                    config.p = p;
                    config.q = q.expect("q axis");
                    config.r = r.expect("r axis");
                }
                Model::Ant => {
                    config.w1 = family_spec(&self.family1, p)?;
                    config.w2 = family_spec(&self.family2, q.expect("q axis"))?;
                }
                Model::Bins => config.feedback = family_spec(&self.family1, p)?,
            }
            Ok(((p, q, r), config))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub q: Option<f64>,
    pub r: Option<f64>,
    pub event: String,
    pub freq: f64,
    pub se: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "R")]
    pub replicas: usize,
    pub seed: u64,
}

/// Event frequencies per cell. Every cell uses the base master seed, so a
/// one-cell grid reproduces [`run_replicas`] exactly.
pub fn phase_sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>, ExperimentError> {
    let mut rows = Vec::new();
    for cell in grid.cells() {
        let ((p, q, r), config) = cell?;
        let results = run_replicas(&config)?;
        for summary in summarize(&results) {
            rows.push(SweepRow {
                p,
                q,
                r,
                event: summary.event,
                freq: summary.freq,
                se: summary.se,
                horizon: config.horizon,
                replicas: config.replicas,
                seed: config.seed,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], format: OutputFormat, out: W) -> Result<(), ExperimentError> {
    match format {
        OutputFormat::Csv => {
            let mut writer = csv::Writer::from_writer(out);
            for row in rows {
                writer.serialize(row)?;
            }
            writer.flush()?;
        }
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_helper() {
        assert!(non_increasing_within(&[(0.9, 0.02), (0.5, 0.03), (0.1, 0.02)], 2.0));
        assert!(non_increasing_within(&[(0.5, 0.05), (0.52, 0.05), (0.1, 0.02)], 2.0));
        assert!(!non_increasing_within(&[(0.5, 0.01), (0.7, 0.01)], 2.0));
        assert!(!non_increasing_within(&[(0.5, 0.05), (0.52, 0.05), (0.4, 0.05), (0.42, 0.05)], 2.0));
        assert!(non_increasing_within(&[], 2.0));
    }

    #[test]
    fn binomial_se_values() {
        assert_eq!(binomial_se(0.0, 10), 0.0);
        assert!((binomial_se(0.5, 100) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn grid_cells_enumerate_in_order() {
        let grid = SweepGrid::parse("model = nczr\np_values = 1, 2\nq_values = 0\nr_values = 0, 0.5\nhorizon = 10\nreplicas = 2").unwrap();
        let coords = grid.coordinates();
        assert_eq!(
            coords,
            vec![(1.0, Some(0.0), Some(0.0)), (1.0, Some(0.0), Some(0.5)), (2.0, Some(0.0), Some(0.0)), (2.0, Some(0.0), Some(0.5))]
        );

        let ant = SweepGrid::parse("model = ant\ngraph = figure3\np_values = 3\nq_values = 0, 1\nfamily2 = pow").unwrap();
        let cells: Vec<_> = ant.cells().map(Result::unwrap).collect();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[1].1.w1, WeightSpec::PowerPlusOne { p: 3.0 });
        assert_eq!(cells[1].1.w2, WeightSpec::Power { s: 1.0 });
        assert_eq!(cells[1].0 .2, None);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(SweepGrid::parse("p_values = 1, x").is_err());
        assert!(SweepGrid::parse("model = ant\ngraph = figure3\nfamily = weird").is_err());
        assert!(SweepGrid::parse("horizon = 0").is_err());
    }

    #[test]
    fn sweep_rows_have_expected_columns() {
        let grid = SweepGrid::parse("model = bins\nfamily = exp\np_values = 0.7\nhorizon = 50\nreplicas = 3\nwindow = 10").unwrap();
        let rows = phase_sweep(&grid).unwrap();
        assert_eq!(rows.len(), 1);
        let mut buf = Vec::new();
        write_sweep(&rows, OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "p,q,r,event,freq,se,T,R,seed");
    }
}
