use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, TargetFunction};
use super::experiment::run_summary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Horizon `T`.
    T,
    /// Scale `l` of the scaled target `f(l x)`.
    L,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::T => "T",
            SweepAxis::L => "l",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" | "t" => Ok(SweepAxis::T),
            "L" | "l" => Ok(SweepAxis::L),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        }
    }
}

/// Mean and spread of the final regret at one grid value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub algo: String,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub n_seeds: usize,
}

/// Runs `template` at every grid value with seeds `template.seed + i`,
/// `i < n_seeds`. On the `L` axis the target becomes `scaled:<value>` of the
/// template's base function (sincos).
pub fn sweep(template: &ExperimentConfig, axis: SweepAxis, grid: &[f64], n_seeds: usize) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    if n_seeds == 0 {
        return Err(Error::Config("need at least one seed".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut config = template.clone();
        match axis {
            SweepAxis::T => {
                if !(value >= 0.0 && value.fract() == 0.0) {
                    return Err(Error::Config(format!(
                        "horizon must be a non-negative integer, got {value}"
                    )));
                }
                config.horizon = value as u64;
            }
            SweepAxis::L => config.function = TargetFunction::Scaled { l: value },
        }
        let mut regrets = Vec::with_capacity(n_seeds);
        for i in 0..n_seeds {
            config.seed = template.seed.wrapping_add(i as u64);
            let s = run_summary(&config)?;
            log::info!(
                "{} {}={} seed={} regret={:.3} ({:.2}s)",
                config.algo,
                axis,
                value,
                config.seed,
                s.final_regret,
                s.wall_time_s
            );
            regrets.push(s.final_regret);
        }
        let (mean, std) = mean_std(&regrets);
        rows.push(SweepRow {
            axis_value: value,
            algo: template.algo.to_string(),
            mean_regret: mean,
            std_regret: std,
            n_seeds,
        });
    }
    Ok(rows)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `ln(regret)` against `ln(T)`. Points with a
/// non-positive regret are dropped with a warning; at least three must
/// remain.
pub fn slope_fit(points: &[(f64, f64)]) -> Result<f64> {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(t, r)| {
            let ok = r > 0.0 && t > 0.0;
            if !ok {
                log::warn!("dropping point (T={t}, regret={r}) from the slope fit");
            }
            ok
        })
        .map(|&(t, r)| (t.ln(), r.ln()))
        .collect();
    if kept.len() < 3 {
        return Err(Error::Fit(format!("{} usable points, need at least 3", kept.len())));
    }
    let n = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all horizons are equal".into()));
    }
    Ok(sxy / sxx)
}

/// Twenty equally spaced scales in `[2^-6, 2^5]`.
pub fn scale_grid() -> Vec<f64> {
    let (lo, hi) = (2f64.powi(-6), 2f64.powi(5));
    (0..20).map(|i| lo + (hi - lo) * i as f64 / 19.0).collect()
}

/// Powers of two `2^lo..=2^hi`.
pub fn horizon_grid(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|e| (1u64 << e) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn slope_of_exact_power_laws() {
        let pts: Vec<(f64, f64)> = [256.0, 1024.0, 4096.0].iter().map(|&t: &f64| (t, t.sqrt())).collect();
        assert_relative_eq!(slope_fit(&pts).unwrap(), 0.5, epsilon = 1e-12);
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0, 5000.0]
            .iter()
            .map(|&t: &f64| (t, 3.0 * t.cbrt()))
            .collect();
        assert_relative_eq!(slope_fit(&pts).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        assert!(matches!(
            slope_fit(&[(1.0, 1.0), (2.0, -1.0), (4.0, 2.0)]),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn grids() {
        let g = scale_grid();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 1.0 / 64.0);
        assert_relative_eq!(g[19], 32.0, epsilon = 1e-12);
        assert_eq!(horizon_grid(9, 11), vec![512.0, 1024.0, 2048.0]);
    }

    #[test]
    fn mean_and_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn identical_invocations_give_identical_csv() {
        let template = ExperimentConfig {
            horizon: 200,
            ..ExperimentConfig::default()
        };
        let render = || {
            let rows = sweep(&template, SweepAxis::T, &[100.0, 200.0], 2).unwrap();
            let mut buf = Vec::new();
            write_sweep_csv(&rows, &mut buf).unwrap();
            buf
        };
        let a = render();
        assert_eq!(a, render());
        assert!(String::from_utf8(a)
            .unwrap()
            .starts_with("axis_value,algo,mean_regret,std_regret,n_seeds"));
        assert!(sweep(&template, SweepAxis::T, &[], 1).is_err());
    }
}
