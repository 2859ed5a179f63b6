//! Streaming metrics with mergeable accumulators.

use serde::{Deserialize, Serialize};

use ibpa_core::outcome::MechanismOutcome;

/// Running mean and variance (Welford), mergeable across workers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64);
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 { 0.0 } else { self.m2 / (self.n - 1) as f64 }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 { 0.0 } else { (self.variance() / self.n as f64).sqrt() }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate { mean: self.mean, stderr: self.stderr() }
    }
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsAccumulator {
    pub revenue: Welford,
    pub adv_welfare: Welford,
    pub total_welfare: Welford,
    pub sold: Welford,
}

impl MetricsAccumulator {
    pub fn push(&mut self, o: &MechanismOutcome) {
        let adv = o.advertiser_welfare();
        self.revenue.push(o.revenue);
        self.adv_welfare.push(adv);
        self.total_welfare.push(o.revenue + adv);
        self.sold.push(if o.any_sold() { 1.0 } else { 0.0 });
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        self.revenue.merge(&other.revenue);
        self.adv_welfare.merge(&other.adv_welfare);
        self.total_welfare.merge(&other.total_welfare);
        self.sold.merge(&other.sold);
    }

    pub fn finish(&self, mechanism: &str, regime: &str) -> MechanismMetrics {
        MechanismMetrics {
            mechanism: mechanism.to_string(),
            regime: regime.to_string(),
            n: self.revenue.n,
            revenue: self.revenue.estimate(),
            adv_welfare: self.adv_welfare.estimate(),
            total_welfare: self.total_welfare.estimate(),
            alloc_rate: self.sold.estimate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismMetrics {
    pub mechanism: String,
    pub regime: String,
    pub n: u64,
    pub revenue: Estimate,
    pub adv_welfare: Estimate,
    pub total_welfare: Estimate,
    /// Share of auctions with at least one slot sold.
    pub alloc_rate: Estimate,
}

/// Aggregates a complete outcome stream.
pub fn welfare_metrics(outcomes: &[MechanismOutcome], mechanism: &str, regime: &str) -> MechanismMetrics {
    let mut acc = MetricsAccumulator::default();
    outcomes.iter().for_each(|o| acc.push(o));
    acc.finish(mechanism, regime)
}

/// Change relative to a baseline: ratios for money, points for rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub mechanism: String,
    pub revenue_pct: f64,
    pub adv_welfare_pct: f64,
    pub total_welfare_pct: f64,
    pub alloc_rate_pp: f64,
}

impl Delta {
    pub fn between(m: &MechanismMetrics, base: &MechanismMetrics) -> Self {
        let pct = |x: f64, b: f64| if b != 0.0 { 100.0 * (x / b - 1.0) } else { f64::NAN };
        Self {
            mechanism: m.mechanism.clone(),
            revenue_pct: pct(m.revenue.mean, base.revenue.mean),
            adv_welfare_pct: pct(m.adv_welfare.mean, base.adv_welfare.mean),
            total_welfare_pct: pct(m.total_welfare.mean, base.total_welfare.mean),
            alloc_rate_pp: 100.0 * (m.alloc_rate.mean - base.alloc_rate.mean),
        }
    }
}

/// `+68%`, `-36%`, `+0%`.
pub fn format_pct(p: f64) -> String {
    if p.is_nan() {
        return "n/a".into();
    }
    let r = p.round();
    format!("{}{}%", if r < 0.0 { "-" } else { "+" }, r.abs())
}

/// `+19pp`.
pub fn format_pp(p: f64) -> String {
    let r = p.round();
    format!("{}{}pp", if r < 0.0 { "-" } else { "+" }, r.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_auctions: usize,
    pub rows: Vec<MechanismMetrics>,
    pub baseline: Option<String>,
    pub deltas: Vec<Delta>,
}

impl MetricsReport {
    pub fn new(n_auctions: usize, rows: Vec<MechanismMetrics>, baseline: Option<&str>) -> Self {
        let base = baseline.and_then(|b| rows.iter().find(|r| r.mechanism.eq_ignore_ascii_case(b)));
        let deltas = base.map_or_else(Vec::new, |b| rows.iter().map(|r| Delta::between(r, b)).collect());
        Self { n_auctions, baseline: base.map(|b| b.mechanism.clone()), rows, deltas }
    }

    pub fn get(&self, mechanism: &str) -> Option<&MechanismMetrics> {
        self.rows.iter().find(|r| r.mechanism.eq_ignore_ascii_case(mechanism))
    }

    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut s = format!("{:<22} {:>12} {:>12} {:>12} {:>8}", "mechanism", "revenue", "adv_welfare", "total", "alloc");
        if self.baseline.is_some() {
            s += &format!(" {:>8} {:>8} {:>8} {:>8}", "d_rev", "d_adv", "d_total", "d_alloc");
        }
        s.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            s += &format!(
                "{:<22} {:>12.6} {:>12.6} {:>12.6} {:>8.4}",
                r.mechanism, r.revenue.mean, r.adv_welfare.mean, r.total_welfare.mean, r.alloc_rate.mean
            );
            if let Some(d) = self.deltas.get(i) {
                s += &format!(
                    " {:>8} {:>8} {:>8} {:>8}",
                    format_pct(d.revenue_pct),
                    format_pct(d.adv_welfare_pct),
                    format_pct(d.total_welfare_pct),
                    format_pp(d.alloc_rate_pp)
                );
            }
            s.push('\n');
        }
        s
    }
}
