//! Disparity metrics over rank-one and 1-to-1 score populations.
//!
//! Three views of how close a group is to producing false positive
//! identifications (FPI):
//!
//! * d′ between the mated and non-mated distributions,
//!   `|μa − μb| / sqrt((σa² + σb²) / 2)` with population standard deviations;
//! * Δ, the low tail quantile of the mated scores minus the high tail quantile
//!   of the non-mated scores (nearest-rank, tail mass 0.001 by default);
//! * the per-probe `mated − nonmated` difference, whose non-positive share is
//!   the rank-one FPIR. A tie counts as an FPI.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data_model::{DemographicGroup, DistributionStats};
use crate::error::{Error, Result};
use crate::matching::{OneToOneScores, RankOneResult};
use crate::REPORT_SCHEMA;

pub const DEFAULT_TAIL_MASS: f64 = 0.001;

pub fn d_prime(a: &DistributionStats, b: &DistributionStats) -> Result<f64> {
    for s in [a, b] {
        if s.n < 2 {
            return Err(Error::InsufficientSamples { need: 2, have: s.n });
        }
    }
    if a.std_dev == 0.0 && b.std_dev == 0.0 {
        return Err(Error::DegenerateDistributions);
    }
    let pooled = ((a.std_dev * a.std_dev + b.std_dev * b.std_dev) / 2.0).sqrt();
    Ok((a.mean - b.mean).abs() / pooled)
}

/// 1-based nearest rank `ceil(q·n)`, clamped to `[1, n]`.
///
/// Products that land within a few ulps of an integer are snapped to it, so
/// that e.g. `0.07 × 100` yields rank 7 rather than 8.
fn nearest_rank(q: f64, n: usize) -> usize {
    let r = q * n as f64;
    let nearest = r.round();
    let rank = if (r - nearest).abs() <= 1e-9 * r.abs().max(1.0) {
        nearest
    } else {
        r.ceil()
    };
    (rank as usize).clamp(1, n)
}

fn sorted(scores: &[f64]) -> Vec<f64> {
    let mut v = scores.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Nearest-rank quantile without interpolation: the element at index
/// `ceil(q·n) − 1` of the ascending sort.
pub fn empirical_quantile(scores: &[f64], q: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile {q} not in (0, 1)")));
    }
    Ok(sorted(scores)[nearest_rank(q, scores.len()) - 1])
}

/// Low-tail mated quantile minus high-tail non-mated quantile. Negative values
/// mean the tails overlap.
pub fn delta_tail(mated: &[f64], nonmated: &[f64], tail_mass: f64) -> Result<f64> {
    if mated.is_empty() || nonmated.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(empirical_quantile(mated, tail_mass)? - empirical_quantile(nonmated, 1.0 - tail_mass)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffDistribution {
    /// `mated − nonmated` per probe with both scores, in input order.
    pub diffs: Vec<f64>,
    pub n_fpi: usize,
    pub fpir: f64,
    /// Probes lacking a mated or a non-mated score.
    pub n_excluded: usize,
}

pub fn diff_distribution(results: &[RankOneResult]) -> Result<DiffDistribution> {
    let diffs: Vec<f64> = results.iter().filter_map(|r| r.pair()).map(|(m, n)| m - n).collect();
    if diffs.is_empty() {
        return Err(Error::NoMatedProbes);
    }
    let n_fpi = diffs.iter().filter(|&&d| d <= 0.0).count();
    Ok(DiffDistribution {
        n_fpi,
        fpir: n_fpi as f64 / diffs.len() as f64,
        n_excluded: results.len() - diffs.len(),
        diffs,
    })
}

/// Rank-one FPIR by direct comparison of each probe's scores.
pub fn fpir_direct(results: &[RankOneResult]) -> Result<f64> {
    let (mut both, mut fpi) = (0usize, 0usize);
    for (m, n) in results.iter().filter_map(RankOneResult::pair) {
        both += 1;
        if n >= m {
            fpi += 1;
        }
    }
    if both == 0 {
        return Err(Error::NoMatedProbes);
    }
    Ok(fpi as f64 / both as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub fmr: f64,
    pub fnmr: f64,
}

/// FMR = share of impostor scores ≥ threshold; FNMR = share of genuine < threshold.
pub fn fixed_threshold_rates(genuine: &[f64], impostor: &[f64], threshold: f64) -> Result<Rates> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::EmptyInput);
    }
    let fm = impostor.iter().filter(|&&s| s >= threshold).count();
    let fnm = genuine.iter().filter(|&&s| s < threshold).count();
    Ok(Rates {
        fmr: fm as f64 / impostor.len() as f64,
        fnmr: fnm as f64 / genuine.len() as f64,
    })
}

/// Smallest observed impostor score `t` with `share(impostor ≥ t) ≤ target_fmr`.
pub fn threshold_for_fmr(impostor: &[f64], target_fmr: f64) -> Result<f64> {
    if impostor.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(target_fmr > 0.0 && target_fmr < 1.0) {
        return Err(Error::InvalidArgument(format!("target FMR {target_fmr} not in (0, 1)")));
    }
    let s = sorted(impostor);
    let n = s.len();
    // Candidates are distinct values; at the first occurrence of a value at
    // index i, n - i scores are >= it. That count only shrinks as i grows.
    let mut i = 0;
    while i < n {
        if (n - i) as f64 / n as f64 <= target_fmr {
            return Ok(s[i]);
        }
        let v = s[i];
        while i < n && s[i] == v {
            i += 1;
        }
    }
    Err(Error::Unachievable { target: target_fmr })
}

/// Share of non-mated rank-one scores at or above `threshold`: how often an
/// open-set search for an unenrolled person would raise a candidate.
pub fn open_set_fpir(nonmated: &[f64], threshold: f64) -> Result<f64> {
    if nonmated.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(nonmated.iter().filter(|&&s| s >= threshold).count() as f64 / nonmated.len() as f64)
}

/// Fixed-width histogram over `[low, high]`. Values outside the range are
/// counted in the first or last bin so that counts always sum to the input size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub low: f64,
    pub high: f64,
    pub bins: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            low: -1.0,
            high: 1.0,
            bins: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 || !self.low.is_finite() || !self.high.is_finite() || self.low >= self.high {
            return Err(Error::InvalidArgument(format!("bad histogram spec {self:?}")));
        }
        Ok(())
    }

    fn edge(&self, i: usize) -> f64 {
        if i == self.bins {
            self.high
        } else {
            self.low + (self.high - self.low) * i as f64 / self.bins as f64
        }
    }

    pub fn histogram(&self, values: &[f64]) -> Vec<HistogramBin> {
        let mut counts = vec![0usize; self.bins];
        let width = (self.high - self.low) / self.bins as f64;
        for &v in values {
            let i = ((v - self.low) / width).floor();
            // `as usize` saturates negatives and NaN to 0.
            let mut i = (i as usize).min(self.bins - 1);
            // Settle rounding at the edges against the published bin bounds.
            while i > 0 && v < self.edge(i) {
                i -= 1;
            }
            while i + 1 < self.bins && v >= self.edge(i + 1) {
                i += 1;
            }
            counts[i] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| HistogramBin {
                low: self.edge(i),
                high: self.edge(i + 1),
                count,
            })
            .collect()
    }
}

/// Tunables for [`build_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub tail_mass: f64,
    pub histogram: HistogramSpec,
    /// Fixed similarity threshold for FMR / FNMR and open-set FPIR.
    pub threshold: Option<f64>,
    pub target_fmr: Option<f64>,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            tail_mass: DEFAULT_TAIL_MASS,
            histogram: HistogramSpec::default(),
            threshold: None,
            target_fmr: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenSetReport {
    pub threshold: f64,
    pub fpir: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneToOneReport {
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub genuine_stats: Option<DistributionStats>,
    pub impostor_stats: Option<DistributionStats>,
    pub d_prime: Option<f64>,
    pub threshold: Option<f64>,
    pub rates: Option<Rates>,
    pub target_fmr: Option<f64>,
    pub threshold_at_target_fmr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema: String,
    pub group: DemographicGroup,
    pub group_key: String,
    pub n_probes: usize,
    /// Probes with both a mated and a non-mated score.
    pub n_compared: usize,
    pub n_singletons: usize,
    pub n_degenerate: usize,
    pub d_prime: Option<f64>,
    pub tail_mass: f64,
    pub delta_tail: Option<f64>,
    pub fpir_rank_one: Option<f64>,
    pub n_fpi: usize,
    pub mated_stats: Option<DistributionStats>,
    pub nonmated_stats: Option<DistributionStats>,
    pub diff_stats: Option<DistributionStats>,
    pub diff_histogram: Vec<HistogramBin>,
    /// e.g. `mated_q0.001`, `nonmated_q0.999`
    pub thresholds: BTreeMap<String, f64>,
    pub open_set: Option<OpenSetReport>,
    pub one_to_one: Option<OneToOneReport>,
    /// Metrics that could not be computed and why.
    pub notes: Vec<String>,
}

fn note<T>(notes: &mut Vec<String>, what: &str, r: Result<T>) -> Option<T> {
    r.map_err(|e| notes.push(format!("{what}: {} ({})", e.kind(), e))).ok()
}

fn stats_or_empty(scores: &[f64]) -> Result<DistributionStats> {
    DistributionStats::from_samples(scores).ok_or(Error::EmptyInput)
}

fn one_to_one_report(scores: &OneToOneScores, params: &MetricParams, notes: &mut Vec<String>) -> OneToOneReport {
    let genuine = scores.genuine_scores();
    let impostor = scores.impostor_scores();
    let genuine_stats = DistributionStats::from_samples(&genuine);
    let impostor_stats = DistributionStats::from_samples(&impostor);
    let d = match (&genuine_stats, &impostor_stats) {
        (Some(g), Some(i)) => note(notes, "one_to_one.d_prime", d_prime(g, i)),
        _ => note::<f64>(notes, "one_to_one.d_prime", Err(Error::EmptyInput)),
    };
    let rates = params
        .threshold
        .and_then(|t| note(notes, "one_to_one.rates", fixed_threshold_rates(&genuine, &impostor, t)));
    let threshold_at_target_fmr = params
        .target_fmr
        .and_then(|f| note(notes, "one_to_one.threshold_for_fmr", threshold_for_fmr(&impostor, f)));
    OneToOneReport {
        n_genuine: genuine.len(),
        n_impostor: impostor.len(),
        genuine_stats,
        impostor_stats,
        d_prime: d,
        threshold: params.threshold,
        rates,
        target_fmr: params.target_fmr,
        threshold_at_target_fmr,
    }
}

/// Assembles the per-group report from the rank-one results of that group
/// (results of other groups are ignored). Metrics that cannot be computed are
/// left empty and explained in `notes`; only invalid parameters and a group
/// without probes are errors.
pub fn build_report(
    results: &[RankOneResult],
    one_to_one: Option<&OneToOneScores>,
    group: &DemographicGroup,
    params: &MetricParams,
) -> Result<MetricReport> {
    params.histogram.validate()?;
    if !(params.tail_mass > 0.0 && params.tail_mass < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "tail mass {} not in (0, 0.5)",
            params.tail_mass
        )));
    }
    let results: Vec<RankOneResult> = results.iter().filter(|r| r.group == *group).cloned().collect();
    if results.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut notes = Vec::new();
    let mated: Vec<f64> = results.iter().filter_map(|r| r.mated_score).collect();
    let nonmated: Vec<f64> = results.iter().filter_map(|r| r.nonmated_score).collect();
    let mated_stats = DistributionStats::from_samples(&mated);
    let nonmated_stats = DistributionStats::from_samples(&nonmated);

    let d = note(
        &mut notes,
        "d_prime",
        stats_or_empty(&mated).and_then(|m| d_prime(&m, &stats_or_empty(&nonmated)?)),
    );
    let delta = note(
        &mut notes,
        "delta_tail",
        delta_tail(&mated, &nonmated, params.tail_mass),
    );
    let diffs = note(&mut notes, "diff_distribution", diff_distribution(&results));

    let mut thresholds = BTreeMap::new();
    if let Ok(q) = empirical_quantile(&mated, params.tail_mass) {
        thresholds.insert(format!("mated_q{}", params.tail_mass), q);
    }
    if let Ok(q) = empirical_quantile(&nonmated, 1.0 - params.tail_mass) {
        thresholds.insert(format!("nonmated_q{}", 1.0 - params.tail_mass), q);
    }

    let open_set = params.threshold.and_then(|t| {
        note(&mut notes, "open_set_fpir", open_set_fpir(&nonmated, t)).map(|fpir| OpenSetReport { threshold: t, fpir })
    });
    let one_to_one = one_to_one.map(|s| one_to_one_report(s, params, &mut notes));

    let (diff_values, n_fpi, fpir) = match &diffs {
        Some(d) => (d.diffs.as_slice(), d.n_fpi, Some(d.fpir)),
        None => (&[][..], 0, None),
    };
    Ok(MetricReport {
        schema: REPORT_SCHEMA.to_string(),
        group: group.clone(),
        group_key: group.key(),
        n_probes: results.len(),
        n_compared: diff_values.len(),
        n_singletons: results.iter().filter(|r| r.mated_score.is_none()).count(),
        n_degenerate: results.iter().filter(|r| r.nonmated_score.is_none()).count(),
        d_prime: d,
        tail_mass: params.tail_mass,
        delta_tail: delta,
        fpir_rank_one: fpir,
        n_fpi,
        mated_stats,
        nonmated_stats,
        diff_stats: DistributionStats::from_samples(diff_values),
        diff_histogram: params.histogram.histogram(diff_values),
        thresholds,
        open_set,
        one_to_one,
        notes,
    })
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub const REPORT_CSV_HEADER: &str = "schema,group,race,gender,n_probes,n_compared,n_singletons,n_degenerate,\
d_prime,tail_mass,delta_tail,fpir_rank_one,n_fpi,mated_mean,mated_std,nonmated_mean,nonmated_std,\
diff_mean,diff_std,open_set_threshold,open_set_fpir,one_to_one_d_prime,fmr,fnmr,target_fmr,threshold_at_target_fmr";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// The report flattened into one CSV row matching [`REPORT_CSV_HEADER`].
pub fn report_csv_row(r: &MetricReport) -> String {
    let o = r.one_to_one.as_ref();
    [
        r.schema.clone(),
        r.group_key.clone(),
        r.group.race.clone(),
        r.group.gender.clone(),
        r.n_probes.to_string(),
        r.n_compared.to_string(),
        r.n_singletons.to_string(),
        r.n_degenerate.to_string(),
        cell(r.d_prime),
        r.tail_mass.to_string(),
        cell(r.delta_tail),
        cell(r.fpir_rank_one),
        r.n_fpi.to_string(),
        cell(r.mated_stats.map(|s| s.mean)),
        cell(r.mated_stats.map(|s| s.std_dev)),
        cell(r.nonmated_stats.map(|s| s.mean)),
        cell(r.nonmated_stats.map(|s| s.std_dev)),
        cell(r.diff_stats.map(|s| s.mean)),
        cell(r.diff_stats.map(|s| s.std_dev)),
        cell(r.open_set.as_ref().map(|s| s.threshold)),
        cell(r.open_set.as_ref().map(|s| s.fpir)),
        cell(o.and_then(|o| o.d_prime)),
        cell(o.and_then(|o| o.rates).map(|r| r.fmr)),
        cell(o.and_then(|o| o.rates).map(|r| r.fnmr)),
        cell(o.and_then(|o| o.target_fmr)),
        cell(o.and_then(|o| o.threshold_at_target_fmr)),
    ]
    .join(",")
}

pub fn write_reports_csv<W: Write>(reports: &[MetricReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{REPORT_CSV_HEADER}")?;
    for r in reports {
        writeln!(w, "{}", report_csv_row(r))?;
    }
    w.flush()
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], mut w: W) -> std::io::Result<()> {
    writeln!(w, "bin_low,bin_high,count")?;
    for b in bins {
        writeln!(w, "{},{},{}", b.low, b.high, b.count)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(mean: f64, std_dev: f64) -> DistributionStats {
        DistributionStats {
            n: 100,
            mean,
            std_dev,
            min: mean - 1.0,
            max: mean + 1.0,
        }
    }

    fn result(mated: Option<f64>, nonmated: Option<f64>) -> RankOneResult {
        RankOneResult {
            probe_image_id: "p".into(),
            subject_id: "s".into(),
            group: DemographicGroup::new("C", "M"),
            mated_score: mated,
            mated_argmax_image: mated.map(|_| "m".into()),
            nonmated_score: nonmated,
            nonmated_argmax_image: nonmated.map(|_| "n".into()),
        }
    }

    #[test]
    fn d_prime_examples() {
        assert!((d_prime(&stats(0.8, 0.1), &stats(0.2, 0.1)).unwrap() - 6.0).abs() < 1e-12);
        assert_eq!(d_prime(&stats(0.5, 0.2), &stats(0.5, 0.2)).unwrap(), 0.0);
        assert_eq!(d_prime(&stats(1.0, 1.0), &stats(0.0, 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn d_prime_errors() {
        assert!(matches!(
            d_prime(&stats(0.9, 0.0), &stats(0.5, 0.0)),
            Err(Error::DegenerateDistributions)
        ));
        let tiny = DistributionStats {
            n: 1,
            ..stats(0.5, 0.1)
        };
        assert!(matches!(
            d_prime(&tiny, &stats(0.5, 0.1)),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn quantile_examples() {
        let scores: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(empirical_quantile(&scores, 0.001).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&scores, 0.999).unwrap(), 999.0);
        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(empirical_quantile(&hundred, 0.07).unwrap(), 7.0);
        assert!(matches!(empirical_quantile(&[], 0.5), Err(Error::EmptyInput)));
        assert!(empirical_quantile(&[1.0], 1.0).is_err());
    }

    #[test]
    fn delta_examples() {
        assert!((delta_tail(&[0.9; 10], &[0.5; 10], 0.001).unwrap() - 0.4).abs() < 1e-12);
        assert!((delta_tail(&[0.5; 10], &[0.9; 10], 0.001).unwrap() + 0.4).abs() < 1e-12);
        let same = [0.1, 0.4, 0.2, 0.9];
        assert!(delta_tail(&same, &same, 0.001).unwrap() <= 0.0);
        assert!(matches!(delta_tail(&[], &[0.1], 0.001), Err(Error::EmptyInput)));
    }

    #[test]
    fn fpir_from_diffs() {
        let rs: Vec<RankOneResult> = [-0.1, 0.2, 0.3, -0.05]
            .iter()
            .map(|&d| result(Some(0.5 + d), Some(0.5)))
            .collect();
        let d = diff_distribution(&rs).unwrap();
        assert_eq!(d.fpir, 0.5);
        assert_eq!(d.n_fpi, 2);
        let positive: Vec<_> = (0..4).map(|_| result(Some(0.9), Some(0.3))).collect();
        assert_eq!(diff_distribution(&positive).unwrap().fpir, 0.0);
    }

    #[test]
    fn ties_count_as_fpi_and_singletons_are_excluded() {
        let rs = vec![
            result(Some(0.5), Some(0.5)),
            result(Some(0.9), Some(0.1)),
            result(None, Some(0.2)),
        ];
        let d = diff_distribution(&rs).unwrap();
        assert_eq!((d.n_fpi, d.n_excluded), (1, 1));
        assert_eq!(d.fpir, 0.5);
        assert_eq!(fpir_direct(&rs).unwrap(), 0.5);
        assert!(matches!(
            diff_distribution(&[result(None, Some(0.1))]),
            Err(Error::NoMatedProbes)
        ));
    }

    #[test]
    fn fixed_threshold_examples() {
        assert_eq!(
            fixed_threshold_rates(&[0.9; 3], &[0.1; 3], 0.5).unwrap(),
            Rates { fmr: 0.0, fnmr: 0.0 }
        );
        let r = fixed_threshold_rates(&[0.4, 0.6], &[0.5, 0.2, 0.7, 0.1], 0.5).unwrap();
        assert_eq!(r, Rates { fmr: 0.5, fnmr: 0.5 });
        assert!(fixed_threshold_rates(&[], &[0.1], 0.5).is_err());
    }

    #[test]
    fn threshold_for_fmr_examples() {
        let scores: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(threshold_for_fmr(&scores, 0.001).unwrap(), 1000.0);
        // share(>= 501) = 500/1000 meets a 0.5 target exactly.
        assert_eq!(threshold_for_fmr(&scores, 0.5).unwrap(), 501.0);
        assert!(matches!(
            threshold_for_fmr(&[0.3; 10], 0.1),
            Err(Error::Unachievable { .. })
        ));
    }

    #[test]
    fn open_set_examples() {
        let s = [0.1, 0.2, 0.3];
        assert_eq!(open_set_fpir(&s, 0.5).unwrap(), 0.0);
        assert_eq!(open_set_fpir(&s, 0.0).unwrap(), 1.0);
        assert!(open_set_fpir(&[], 0.0).is_err());
    }

    #[test]
    fn histogram_counts_and_edges() {
        let spec = HistogramSpec::default();
        let bins = spec.histogram(&[-1.0, -0.99, 0.0, 0.999, 1.0, 1.7, -2.0]);
        assert_eq!(bins.len(), 100);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 7);
        assert_eq!(bins[0].low, -1.0);
        assert_eq!(bins[99].high, 1.0);
        // -1.0, -0.99 and the clamped -2.0
        assert_eq!(bins[0].count, 3);
        assert_eq!(bins[50].count, 1);
        assert_eq!(bins[99].count, 3);
    }

    #[test]
    fn degenerate_report_records_note() {
        let rs: Vec<_> = (0..5).map(|_| result(Some(0.9), Some(0.5))).collect();
        let report = build_report(&rs, None, &DemographicGroup::new("C", "M"), &MetricParams::default()).unwrap();
        assert!(report.d_prime.is_none());
        assert!(report.notes.iter().any(|n| n.contains("DegenerateDistributions")));
        assert_eq!(report.fpir_rank_one, Some(0.0));
        assert!((report.delta_tail.unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn report_for_missing_group_is_error() {
        let rs = vec![result(Some(0.9), Some(0.5))];
        assert!(build_report(&rs, None, &DemographicGroup::new("X", "Y"), &MetricParams::default()).is_err());
    }

    #[test]
    fn csv_row_matches_header_width() {
        let rs: Vec<_> = [0.9, 0.8, 0.7].iter().map(|&m| result(Some(m), Some(0.5))).collect();
        let report = build_report(&rs, None, &DemographicGroup::new("C", "M"), &MetricParams::default()).unwrap();
        let row = report_csv_row(&report);
        assert_eq!(row.split(',').count(), REPORT_CSV_HEADER.split(',').count());
        assert!(row.starts_with("identik-report/1,C M,C,M,3,3,0,0,"));
    }
}
