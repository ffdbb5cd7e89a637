//! Run-set summaries and the base-versus-best comparison pipeline:
//! Kolmogorov-Smirnov normality, Levene variance equality, and Student or
//! Welch mean equality, all two-sided.
//!
//! Distribution tail functions come from `statrs`; the test statistics are
//! computed here.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` for a single run.
    pub std: Option<f64>,
    pub best: f64,
    pub worst: f64,
}

impl RunSummary {
    /// Summary of a single value, with no standard deviation.
    pub fn single(value: f64) -> Self {
        RunSummary {
            n: 1,
            mean: value,
            std: None,
            best: value,
            worst: value,
        }
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.std {
            Some(s) => write!(f, "{:.4} / {:.4} / {:.4} / {:.4}", self.mean, s, self.best, self.worst),
            None => write!(f, "{:.4} / - / {:.4} / {:.4}", self.mean, self.best, self.worst),
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (`n - 1` denominator).
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

pub fn summarize(values: &[f64]) -> Result<RunSummary> {
    if values.len() < 2 {
        return Err(Error::precondition(format!(
            "summary needs at least 2 values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::precondition("summary values must be finite"));
    }
    let m = mean(values);
    Ok(RunSummary {
        n: values.len(),
        mean: m,
        std: Some(sample_variance(values).sqrt()),
        best: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        worst: values.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    /// Degrees of freedom where the reference distribution has them (for
    /// Levene this is the denominator df; the numerator df is 1).
    pub df: Option<f64>,
    pub p_value: f64,
    pub significant_05: bool,
    pub significant_01: bool,
}

impl TestOutcome {
    fn new(statistic: f64, df: Option<f64>, p_value: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestOutcome {
            statistic,
            df,
            p_value,
            significant_05: p_value < 0.05,
            significant_01: p_value < 0.01,
        }
    }
}

/// Survival function of the Kolmogorov distribution,
/// `P(K > lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
/// Small arguments use the Jacobi-transformed series, which converges
/// quickly there.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let cdf: f64 = (1..=20)
            .map(|k| {
                let j = (2 * k - 1) as f64;
                (-j * j * c).exp()
            })
            .sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / lambda;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample K-S test against a normal with the sample mean and sample
/// standard deviation. The p-value is the asymptotic Kolmogorov one; with
/// estimated parameters it overstates p (no Lilliefors correction).
pub fn ks_normality(sample: &[f64]) -> Result<TestOutcome> {
    let n = sample.len();
    if n < 5 {
        return Err(Error::precondition(format!("K-S test needs n >= 5, got {n}")));
    }
    let sd = sample_variance(sample).sqrt();
    if !(sd > 0.0) {
        return Err(Error::precondition("K-S test on a constant sample"));
    }
    let normal = Normal::new(mean(sample), sd).expect("positive sd");
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = normal.cdf(x);
            ((i + 1) as f64 / nf - cdf).max(cdf - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    Ok(TestOutcome::new(d, None, kolmogorov_sf(nf.sqrt() * d)))
}

/// Two-group Levene test on absolute deviations from the group means.
pub fn levene(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    if a.len() < 3 || b.len() < 3 {
        return Err(Error::precondition("Levene test needs at least 3 values per group"));
    }
    let za: Vec<f64> = {
        let m = mean(a);
        a.iter().map(|x| (x - m).abs()).collect()
    };
    let zb: Vec<f64> = {
        let m = mean(b);
        b.iter().map(|x| (x - m).abs()).collect()
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;
    let (ma, mb) = (mean(&za), mean(&zb));
    let grand = (za.iter().sum::<f64>() + zb.iter().sum::<f64>()) / total;
    let between = na * (ma - grand).powi(2) + nb * (mb - grand).powi(2);
    let within: f64 =
        za.iter().map(|z| (z - ma).powi(2)).sum::<f64>() + zb.iter().map(|z| (z - mb).powi(2)).sum::<f64>();
    if !(within > 0.0) {
        return Err(Error::precondition(
            "Levene test is degenerate: absolute deviations are constant within both groups",
        ));
    }
    let df2 = total - 2.0;
    let w = df2 * between / within;
    let f = FisherSnedecor::new(1.0, df2).expect("valid degrees of freedom");
    Ok(TestOutcome::new(w, Some(df2), f.sf(w)))
}

/// Independent two-sample t test; pooled variance when `equal_variances`,
/// Welch-Satterthwaite otherwise.
pub fn t_test(a: &[f64], b: &[f64], equal_variances: bool) -> Result<TestOutcome> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::precondition("t test needs at least 2 values per group"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a), sample_variance(b));
    let diff = mean(a) - mean(b);
    let (se, df) = if equal_variances {
        let df = na + nb - 2.0;
        let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
        ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), df)
    } else {
        let (qa, qb) = (va / na, vb / nb);
        let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
        ((qa + qb).sqrt(), df)
    };
    if !(se > 0.0) {
        return Err(Error::precondition("t test is degenerate: both groups are constant"));
    }
    let t = diff / se;
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid degrees of freedom");
    Ok(TestOutcome::new(t, Some(df), 2.0 * dist.sf(t.abs())))
}

/// Per-run outcomes of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSet {
    pub dataset: String,
    pub label: String,
    pub ccr: Vec<f64>,
    pub connections: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub base_summary: RunSummary,
    pub best_summary: RunSummary,
    /// `None` when the group is constant.
    pub ks_base: Option<TestOutcome>,
    pub ks_best: Option<TestOutcome>,
    /// `None` when deviations are constant in both groups.
    pub levene: Option<TestOutcome>,
    pub equal_variances: bool,
    pub t: TestOutcome,
    pub notes: Vec<String>,
}

impl MetricComparison {
    pub fn variances_differ(&self) -> bool {
        !self.equal_variances
    }

    pub fn means_differ(&self) -> bool {
        self.t.significant_05
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub dataset: String,
    pub base_label: String,
    pub best_label: String,
    pub ccr: MetricComparison,
    pub connections: MetricComparison,
}

fn compare_metric(metric: &str, base: &[f64], best: &[f64]) -> Result<MetricComparison> {
    let mut notes = Vec::new();
    let ks = |x: &[f64], who: &str, notes: &mut Vec<String>| match ks_normality(x) {
        Ok(o) => Ok(Some(o)),
        Err(Error::Precondition(m)) if m.contains("constant") => {
            notes.push(format!("{who} {metric} is constant; K-S not applicable"));
            Ok(None)
        }
        Err(e) => Err(e),
    };
    let ks_base = ks(base, "base", &mut notes)?;
    let ks_best = ks(best, "best", &mut notes)?;
    let levene = match levene(base, best) {
        Ok(o) => Some(o),
        Err(Error::Precondition(m)) if m.contains("degenerate") => {
            notes.push("Levene test degenerate; variances compared directly".into());
            None
        }
        Err(e) => return Err(e),
    };
    let equal_variances = match &levene {
        Some(o) => !o.significant_05,
        None => sample_variance(base) == sample_variance(best),
    };
    let t = match t_test(base, best, equal_variances) {
        Ok(o) => o,
        Err(Error::Precondition(m)) if m.contains("constant") => {
            notes.push("both groups constant; means compared directly".into());
            let diff = mean(base) - mean(best);
            if diff == 0.0 {
                TestOutcome::new(0.0, None, 1.0)
            } else {
                TestOutcome::new(diff.signum() * f64::INFINITY, None, 0.0)
            }
        }
        Err(e) => return Err(e),
    };
    Ok(MetricComparison {
        metric: metric.to_string(),
        base_summary: summarize(base)?,
        best_summary: summarize(best)?,
        ks_base,
        ks_best,
        levene,
        equal_variances,
        t,
        notes,
    })
}

/// Compares the base configuration's runs with the best configuration's,
/// separately for CCR and connection counts.
pub fn compare_configs(base: &RunSet, best: &RunSet) -> Result<ComparisonReport> {
    if !base.dataset.eq_ignore_ascii_case(&best.dataset) {
        return Err(Error::precondition(format!(
            "cannot compare runs of {:?} with runs of {:?}",
            base.dataset, best.dataset
        )));
    }
    for set in [base, best] {
        if set.ccr.len() != set.connections.len() {
            return Err(Error::precondition(format!(
                "run set {:?} has ragged columns",
                set.label
            )));
        }
    }
    Ok(ComparisonReport {
        dataset: base.dataset.clone(),
        base_label: base.label.clone(),
        best_label: best.label.clone(),
        ccr: compare_metric("CCR", &base.ccr, &best.ccr)?,
        connections: compare_metric("connections", &base.connections, &best.connections)?,
    })
}

fn sig(p: f64) -> String {
    format!("Sig = {p:.3}")
}

impl ComparisonReport {
    pub fn metrics(&self) -> [&MetricComparison; 2] {
        [&self.ccr, &self.connections]
    }

    /// True when no Levene or t test found a difference at 0.05.
    pub fn no_significant_differences(&self) -> bool {
        self.metrics()
            .iter()
            .all(|m| !m.variances_differ() && !m.means_differ())
    }

    /// Plain-text narrative: normality, then variance and mean equality
    /// for each metric.
    pub fn narrative(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{}: base configuration ({}) versus best configuration ({})",
            self.dataset, self.base_label, self.best_label
        );
        for m in self.metrics() {
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "{}: base {}, best {} (mean / std / best / worst)",
                m.metric, m.base_summary, m.best_summary
            );
            let normal = |o: &Option<TestOutcome>| match o {
                Some(o) if !o.significant_05 => format!("normal at 0.05 ({})", sig(o.p_value)),
                Some(o) if !o.significant_01 => format!("normal at 0.01 only ({})", sig(o.p_value)),
                Some(o) => format!("not normal ({})", sig(o.p_value)),
                None => "not testable (constant)".into(),
            };
            let _ = writeln!(
                out,
                "  a) K-S normality: base {}; best {}",
                normal(&m.ks_base),
                normal(&m.ks_best)
            );
            let variances = match &m.levene {
                Some(o) if o.significant_05 => format!("significant differences in the variances ({})", sig(o.p_value)),
                Some(o) => format!("no significant differences in the variances ({})", sig(o.p_value)),
                None if m.equal_variances => "equal variances (degenerate Levene)".into(),
                None => "different variances (degenerate Levene)".into(),
            };
            let _ = writeln!(out, "  b) Levene: {variances}");
            let kind = if m.equal_variances { "Student" } else { "Welch" };
            let means = if m.t.significant_05 {
                let level = if m.t.significant_01 { "0.01" } else { "0.05" };
                format!("significant differences in the means at {level} ({})", sig(m.t.p_value))
            } else {
                format!("no significant differences in the means ({})", sig(m.t.p_value))
            };
            let _ = writeln!(out, "  c) {kind} t test: {means}");
            for note in &m.notes {
                let _ = writeln!(out, "  note: {note}");
            }
        }
        let _ = writeln!(out);
        if self.no_significant_differences() {
            let _ = writeln!(out, "Conclusion: no significant differences.");
        } else {
            let better = self.ccr.means_differ() && self.ccr.best_summary.mean > self.ccr.base_summary.mean;
            let _ = writeln!(
                out,
                "Conclusion: significant differences found{}.",
                if better {
                    "; the best configuration has the higher mean CCR"
                } else {
                    ""
                }
            );
        }
        let _ = writeln!(
            out,
            "(K-S p-values are asymptotic with estimated parameters; Levene is mean-centred; all tests two-sided.)"
        );
        out
    }

    /// Machine-readable rows: `metric,test,group,statistic,df,p_value,sig_05,sig_01`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,test,group,statistic,df,p_value,sig_05,sig_01\n");
        let mut row = |metric: &str, test: &str, group: &str, o: &TestOutcome| {
            let df = o.df.map(|d| format!("{d}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{metric},{test},{group},{},{df},{},{},{}",
                o.statistic, o.p_value, o.significant_05, o.significant_01
            );
        };
        for m in self.metrics() {
            if let Some(o) = &m.ks_base {
                row(&m.metric, "ks", "base", o);
            }
            if let Some(o) = &m.ks_best {
                row(&m.metric, "ks", "best", o);
            }
            if let Some(o) = &m.levene {
                row(&m.metric, "levene", "both", o);
            }
            row(
                &m.metric,
                if m.equal_variances { "student_t" } else { "welch_t" },
                "both",
                &m.t,
            );
        }
        out
    }
}
