use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::dataset::{atomic_write, DatasetError};

pub const HISTOGRAM_BINS: usize = 50;

/// Metric values for one candidate frame against its reference.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PairMetrics {
    pub candidate_frame: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_frame: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hausdorff_p95: Option<f64>,
    /// raw max Hausdorff; only kept in verbose reports
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hausdorff_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jsd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2m_mean: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricMeans {
    pub hausdorff_p95: Option<f64>,
    pub jsd: Option<f64>,
    pub p2m_mean: Option<f64>,
}

impl MetricMeans {
    pub fn of(pairs: &[PairMetrics]) -> MetricMeans {
        fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
            let v: Vec<f64> = values.flatten().collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        }
        MetricMeans {
            hausdorff_p95: mean(pairs.iter().map(|p| p.hausdorff_p95)),
            jsd: mean(pairs.iter().map(|p| p.jsd)),
            p2m_mean: mean(pairs.iter().map(|p| p.p2m_mean)),
        }
    }
}

/// Distance populations behind the histograms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricDistributions {
    /// pooled bidirectional nearest-neighbour distances, all pairs
    pub hausdorff: Vec<f64>,
    /// one JSD value per pair
    pub jsd: Vec<f64>,
    /// point-to-mesh distances, all points
    pub p2m: Vec<f64>,
}

/// Output of evaluating one candidate dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub candidate: String,
    pub reference: String,
    pub voxel_size: f64,
    pub pairs: Vec<PairMetrics>,
    pub means: MetricMeans,
    pub distributions: MetricDistributions,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Reductions {
    pub hausdorff_p95: Option<f64>,
    pub jsd: Option<f64>,
    pub p2m_mean: Option<f64>,
}

/// Side-by-side comparison of a digital-twin dataset against another one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub dt_pairs: usize,
    pub other_pairs: usize,
    pub dt_means: MetricMeans,
    pub other_means: MetricMeans,
    /// percent reduction of the DT mean relative to the other, one decimal
    pub reduction_percent: Reductions,
}

/// `(1 − a/b)·100`, rounded to one decimal. Equal means give 0 even when
/// both are zero.
pub fn percent_reduction(a: f64, b: f64, metric: &'static str) -> Result<f64, MetricsError> {
    if a == b && b.is_finite() {
        return Ok(0.0);
    }
    if b == 0.0 || !b.is_finite() {
        return Err(MetricsError::DegenerateBaseline(metric));
    }
    let r = ((1.0 - a / b) * 100.0 * 10.0).round() / 10.0;
    // normalise -0.0 so identical inputs print as 0.0
    Ok(if r == 0.0 { 0.0 } else { r })
}

pub fn aggregate(dt: &[PairMetrics], other: &[PairMetrics]) -> Result<FidelityReport, MetricsError> {
    if dt.is_empty() || other.is_empty() {
        return Err(MetricsError::NoPairs);
    }
    let (x, y) = (MetricMeans::of(dt), MetricMeans::of(other));
    let reduce = |a: Option<f64>, b: Option<f64>, name| match (a, b) {
        (Some(a), Some(b)) => percent_reduction(a, b, name).map(Some),
        _ => Ok(None),
    };
    Ok(FidelityReport {
        dt_pairs: dt.len(),
        other_pairs: other.len(),
        dt_means: x,
        other_means: y,
        reduction_percent: Reductions {
            hausdorff_p95: reduce(x.hausdorff_p95, y.hausdorff_p95, "P95 Hausdorff")?,
            jsd: reduce(x.jsd, y.jsd, "JS divergence")?,
            p2m_mean: reduce(x.p2m_mean, y.p2m_mean, "P2M")?,
        },
    })
}

/// Fixed-width histogram over the pooled range of both samples.
/// A zero-width range is widened to one unit so every value lands in bin 0.
pub fn histogram_csv(dt: &[f64], other: &[f64]) -> String {
    let mut out = String::from("bin_left,bin_right,count_dt,count_other\n");
    let pooled = dt.iter().chain(other);
    let lo = pooled.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = pooled.copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return out;
    }
    let hi = if hi > lo { hi } else { lo + 1.0 };
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let bin = |v: f64| (((v - lo) / width).floor() as usize).min(HISTOGRAM_BINS - 1);
    let mut counts = [[0usize; 2]; HISTOGRAM_BINS];
    for &v in dt {
        counts[bin(v)][0] += 1;
    }
    for &v in other {
        counts[bin(v)][1] += 1;
    }
    for (i, [a, b]) in counts.iter().enumerate() {
        let left = lo + width * i as f64;
        let right = if i + 1 == HISTOGRAM_BINS { hi } else { lo + width * (i + 1) as f64 };
        let _ = writeln!(out, "{left},{right},{a},{b}");
    }
    out
}

/// Writes `hausdorff_p95.csv`, `jsd.csv` and `p2m.csv` into `dir`.
pub fn emit_histograms(
    dt: &MetricDistributions,
    other: Option<&MetricDistributions>,
    dir: &Path,
) -> Result<Vec<PathBuf>, DatasetError> {
    std::fs::create_dir_all(dir).map_err(|e| DatasetError::Io { path: dir.to_path_buf(), source: e })?;
    let empty = MetricDistributions::default();
    let other = other.unwrap_or(&empty);
    let mut written = Vec::new();
    for (name, a, b) in [
        ("hausdorff_p95.csv", &dt.hausdorff, &other.hausdorff),
        ("jsd.csv", &dt.jsd, &other.jsd),
        ("p2m.csv", &dt.p2m, &other.p2m),
    ] {
        let path = dir.join(name);
        atomic_write(&path, histogram_csv(a, b).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
