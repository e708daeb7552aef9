//! Two-party matching protocols over shared randomness and their lower
//! bounds on the conditional matching probability.
//!
//! Both parties read the same trial stream. Outputs are compared through
//! their indices: with continuous proposals two different indices carry
//! different values almost surely.

use std::fmt;
use std::str::FromStr;

use crate::dist::{d2, ratio_bound, total_variation, DistributionSpec, Ratio};
use crate::error::{invalid, Error, Result};
use crate::randomness::{CommonRandomness, MAX_SLOT};
use crate::samplers::{ers_select_with, gumbel_select, pml_select_with, rs_select_with};
use crate::stats::{binomial_se, mean_se, quantile_bins, run_trials, variance_se};

/// One protocol round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchTrial {
    pub y_a: f64,
    pub y_b: f64,
    pub matched: bool,
    pub k_a: u64,
    pub k_b: u64,
    pub proposals_a: u64,
    pub proposals_b: u64,
    pub comm_bits: u64,
}

/// Both parties run rejection sampling with a shared bound `omega`.
pub fn match_rs(
    cr: &CommonRandomness,
    trial: u64,
    pa: &DistributionSpec,
    pb: &DistributionSpec,
    q: &DistributionSpec,
    omega: f64,
) -> Result<MatchTrial> {
    let ts = cr.trial(trial);
    let a = rs_select_with(&ts, q, &Ratio::new(pa, q), omega)?;
    let b = rs_select_with(&ts, q, &Ratio::new(pb, q), omega)?;
    Ok(MatchTrial {
        y_a: a.y[0],
        y_b: b.y[0],
        matched: a.k == b.k,
        k_a: a.k,
        k_b: b.k,
        proposals_a: a.k,
        proposals_b: b.k,
        comm_bits: 0,
    })
}

/// Both parties run unscaled ensemble rejection sampling, each with its own
/// ratio bound.
#[allow(clippy::too_many_arguments)]
pub fn match_ers_nocomm(
    cr: &CommonRandomness,
    trial: u64,
    pa: &DistributionSpec,
    pb: &DistributionSpec,
    q: &DistributionSpec,
    omega_a: f64,
    omega_b: f64,
    n: u64,
) -> Result<MatchTrial> {
    let ts = cr.trial(trial);
    let a = ers_select_with(&ts, q, &Ratio::new(pa, q), omega_a, n, 1.0)?;
    let b = ers_select_with(&ts, q, &Ratio::new(pb, q), omega_b, n, 1.0)?;
    Ok(MatchTrial {
        y_a: a.y[0],
        y_b: b.y[0],
        matched: a.k == b.k,
        k_a: a.k,
        k_b: b.k,
        proposals_a: a.n_proposals_consumed,
        proposals_b: b.n_proposals_consumed,
        comm_bits: 0,
    })
}

/// Party A runs ensemble rejection sampling and sends its batch index in
/// unary; party B runs Gumbel-max inside that batch with its own weights.
/// B needs no ratio bound.
pub fn match_ers_batchcomm(
    cr: &CommonRandomness,
    trial: u64,
    pa: &DistributionSpec,
    pb: &DistributionSpec,
    q: &DistributionSpec,
    omega: f64,
    n: u64,
) -> Result<MatchTrial> {
    let ts = cr.trial(trial);
    let a = ers_select_with(&ts, q, &Ratio::new(pa, q), omega, n, 1.0)?;
    let rb = Ratio::new(pb, q);
    let mut sc = ts.scan(a.k1, 1);
    let mut weights = Vec::with_capacity(n as usize);
    let mut exps = Vec::with_capacity(n as usize);
    let mut ys = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let s = sc.next_slot();
        let y = q.sample(s.components(1)[0]);
        weights.push(rb.weight(y));
        exps.push(s.exponential());
        ys.push(y);
    }
    let (k2b, _) = gumbel_select(&weights, &exps)?;
    let k_b = crate::samplers::global_index(n, a.k1, k2b as u64);
    Ok(MatchTrial {
        y_a: a.y[0],
        y_b: ys[k2b - 1],
        matched: a.k == k_b,
        k_a: a.k,
        k_b,
        proposals_a: a.n_proposals_consumed,
        proposals_b: n,
        comm_bits: a.k1,
    })
}

/// Both parties pick by Gumbel-max from the same single batch of `n`
/// proposals. The outputs are biased towards the proposal.
pub fn match_iml(
    cr: &CommonRandomness,
    trial: u64,
    pa: &DistributionSpec,
    pb: &DistributionSpec,
    q: &DistributionSpec,
    n: u64,
) -> Result<MatchTrial> {
    if n == 0 || n > MAX_SLOT {
        return invalid(format!("batch size {n} outside 1..={MAX_SLOT}"));
    }
    let ts = cr.trial(trial);
    let (ra, rb) = (Ratio::new(pa, q), Ratio::new(pb, q));
    let mut sc = ts.scan(1, 1);
    let (mut ya, mut yb) = (0.0, 0.0);
    let (mut ka, mut kb) = (0u64, 0u64);
    let (mut best_a, mut best_b) = (f64::INFINITY, f64::INFINITY);
    for j in 1..=n {
        let s = sc.next_slot();
        let y = q.sample(s.components(1)[0]);
        let ln_s = s.exponential().ln();
        let sa = ln_s - ra.ln_weight(y);
        let sb = ln_s - rb.ln_weight(y);
        if sa < best_a {
            (best_a, ka, ya) = (sa, j, y);
        }
        if sb < best_b {
            (best_b, kb, yb) = (sb, j, y);
        }
    }
    if ka == 0 || kb == 0 {
        return invalid("every proposal in the batch has zero weight");
    }
    Ok(MatchTrial { y_a: ya, y_b: yb, matched: ka == kb, k_a: ka, k_b: kb, proposals_a: n, proposals_b: n, comm_bits: 0 })
}

/// Both parties run the Poisson race on the same arrivals.
pub fn match_pml(
    cr: &CommonRandomness,
    trial: u64,
    pa: &DistributionSpec,
    pb: &DistributionSpec,
    q: &DistributionSpec,
    omega: f64,
) -> Result<MatchTrial> {
    let ts = cr.trial(trial);
    let a = pml_select_with(&ts, q, &Ratio::new(pa, q), omega)?;
    let b = pml_select_with(&ts, q, &Ratio::new(pb, q), omega)?;
    Ok(MatchTrial {
        y_a: a.y[0],
        y_b: b.y[0],
        matched: a.k == b.k,
        k_a: a.k,
        k_b: b.k,
        proposals_a: a.proposals,
        proposals_b: b.proposals,
        comm_bits: 0,
    })
}

/// Which matching bound a coefficient pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    NoComm,
    /// Same formulas as [`BoundKind::NoComm`] with conditional targets.
    Cond,
    BatchComm,
}

/// Decay coefficients of the ensemble matching bounds; `+inf` when the
/// relevant `d2` diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCoefficients {
    pub mu1: f64,
    pub mu2: f64,
    pub kind: BoundKind,
}

/// `2 [N > i] + omega [N = i]`.
pub fn indicator(n: u64, omega: f64, i: u64) -> f64 {
    if n > i {
        2.0
    } else if n == i {
        omega
    } else {
        0.0
    }
}

/// Evaluates the coefficients. `d2_qa = d2(Q || P_A)`, `d2_qb = d2(Q || P_B)`.
pub fn bound_coefficients(kind: BoundKind, n: u64, omega: f64, d2_qa: f64, d2_qb: f64) -> Result<BoundCoefficients> {
    if n < 2 {
        return invalid(format!("matching bounds need N >= 2, got {n}"));
    }
    let nf = n as f64;
    let ind = indicator(n, omega, 2);
    let mu = |d: f64| (omega + omega * ind * d + omega * omega / (nf - 1.0) * d) / nf;
    let (mu1, mu2) = match kind {
        BoundKind::NoComm | BoundKind::Cond => (mu(d2_qb), mu(d2_qa)),
        BoundKind::BatchComm => (3.0 * omega / nf, omega / nf * ind * d2_qa),
    };
    Ok(BoundCoefficients { mu1, mu2, kind })
}

fn density_ratio(pa: &DistributionSpec, pb: &DistributionSpec, y: f64) -> f64 {
    (pa.ln_pdf(y) - pb.ln_pdf(y)).exp()
}

/// Conditional match probability of rejection sampling,
/// `min(1, P_B/P_A) / (1 + TV)`.
pub fn bound_rs(pa: &DistributionSpec, pb: &DistributionSpec, y: f64) -> f64 {
    bound_rs_with_tv(pa, pb, y, total_variation(pa, pb))
}

pub fn bound_rs_with_tv(pa: &DistributionSpec, pb: &DistributionSpec, y: f64, tv: f64) -> f64 {
    (1.0 / density_ratio(pa, pb, y)).min(1.0) / (1.0 + tv)
}

/// `1 / (1 + P_A/P_B)`.
pub fn bound_pml(pa: &DistributionSpec, pb: &DistributionSpec, y: f64) -> f64 {
    1.0 / (1.0 + density_ratio(pa, pb, y))
}

/// `1 / (1 + (1 + eps) P_A/P_B)`.
pub fn bound_iml(pa: &DistributionSpec, pb: &DistributionSpec, y: f64, eps: f64) -> f64 {
    1.0 / (1.0 + (1.0 + eps) * density_ratio(pa, pb, y))
}

/// `1 / (1 + mu1 + (P_A/P_B)(1 + mu2))`; zero when a coefficient is infinite.
pub fn bound_ers(c: &BoundCoefficients, pa: &DistributionSpec, pb: &DistributionSpec, y: f64) -> f64 {
    1.0 / (1.0 + c.mu1 + density_ratio(pa, pb, y) * (1.0 + c.mu2))
}

/// Matching protocol selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Rs,
    ErsNoComm,
    ErsBatchComm,
    Iml,
    Pml,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [Protocol::Rs, Protocol::ErsNoComm, Protocol::ErsBatchComm, Protocol::Iml, Protocol::Pml];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Rs => "rs",
            Protocol::ErsNoComm => "ers-nocomm",
            Protocol::ErsBatchComm => "ers-batchcomm",
            Protocol::Iml => "iml",
            Protocol::Pml => "pml",
        }
    }

    /// Whether the outcome depends on the batch size.
    pub fn uses_batch(self) -> bool {
        matches!(self, Protocol::ErsNoComm | Protocol::ErsBatchComm | Protocol::Iml)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown protocol {s:?}")))
    }
}

/// Parameters of a matching sweep.
#[derive(Debug, Clone)]
pub struct MatchingConfig {
    pub party_a: DistributionSpec,
    pub party_b: DistributionSpec,
    pub proposal: DistributionSpec,
    pub n_grid: Vec<u64>,
    pub protocols: Vec<Protocol>,
    pub trials: u64,
    /// Quantile bins of `Y_A` for conditional estimates; 0 disables them.
    pub bins: usize,
}

/// Aggregate of one `(protocol, N)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub protocol: Protocol,
    pub n: u64,
    /// Mean proposals consumed by party A (the batch size for the
    /// importance batch, which is matched to the batch-communication cost).
    pub n_star: f64,
    pub trials: u64,
    pub match_rate: f64,
    pub std_err: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Mean of the conditional lower bound over the observed `Y_A`.
    pub bound_value: Option<f64>,
    pub comm_bits: f64,
    /// Sample variance of `Y_A`.
    pub variance_estimate: f64,
    pub variance_se: f64,
}

/// Conditional estimate over one quantile bin of `Y_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinRow {
    pub protocol: Protocol,
    pub n: u64,
    pub bin: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    pub count: u64,
    pub match_rate: f64,
    pub std_err: f64,
    pub bound_value: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub bins: Vec<BinRow>,
}

/// Shared quantities of a sweep configuration.
#[derive(Debug, Clone)]
pub struct MatchingSetup {
    pub omega_a: f64,
    pub omega_b: f64,
    /// Common bound `max(omega_a, omega_b)`.
    pub omega: f64,
    pub tv: f64,
    pub d2_qa: f64,
    pub d2_qb: f64,
}

impl MatchingSetup {
    pub fn new(pa: &DistributionSpec, pb: &DistributionSpec, q: &DistributionSpec) -> Result<Self> {
        let omega_a = ratio_bound(pa, q)?;
        let omega_b = ratio_bound(pb, q)?;
        Ok(MatchingSetup {
            omega_a,
            omega_b,
            omega: omega_a.max(omega_b),
            tv: total_variation(pa, pb),
            d2_qa: d2(q, pa),
            d2_qb: d2(q, pb),
        })
    }

    /// Coefficients of the ensemble bound for `protocol` at batch size `n`,
    /// `None` when the bound does not apply or is infinite.
    pub fn coefficients(&self, protocol: Protocol, n: u64) -> Option<BoundCoefficients> {
        let c = match protocol {
            Protocol::ErsNoComm => bound_coefficients(BoundKind::NoComm, n, self.omega, self.d2_qa, self.d2_qb).ok()?,
            Protocol::ErsBatchComm => bound_coefficients(BoundKind::BatchComm, n, self.omega_a, self.d2_qa, self.d2_qb).ok()?,
            _ => return None,
        };
        (c.mu1.is_finite() && c.mu2.is_finite()).then_some(c)
    }
}

fn run_protocol(
    cfg: &MatchingConfig,
    setup: &MatchingSetup,
    cr: &CommonRandomness,
    protocol: Protocol,
    n: u64,
) -> Result<Vec<MatchTrial>> {
    let (pa, pb, q) = (&cfg.party_a, &cfg.party_b, &cfg.proposal);
    run_trials(cfg.trials, |t| match protocol {
        Protocol::Rs => match_rs(cr, t, pa, pb, q, setup.omega),
        Protocol::ErsNoComm => match_ers_nocomm(cr, t, pa, pb, q, setup.omega_a, setup.omega_b, n),
        Protocol::ErsBatchComm => match_ers_batchcomm(cr, t, pa, pb, q, setup.omega_a, n),
        Protocol::Iml => match_iml(cr, t, pa, pb, q, n),
        Protocol::Pml => match_pml(cr, t, pa, pb, q, setup.omega),
    })
}

fn trial_bound<'a>(setup: &'a MatchingSetup, cfg: &'a MatchingConfig, protocol: Protocol, n: u64) -> Option<Box<dyn Fn(f64) -> f64 + 'a>> {
    let (pa, pb) = (&cfg.party_a, &cfg.party_b);
    match protocol {
        Protocol::Rs => Some(Box::new(move |y| bound_rs_with_tv(pa, pb, y, setup.tv))),
        Protocol::Pml => Some(Box::new(move |y| bound_pml(pa, pb, y))),
        Protocol::Iml => None,
        _ => {
            let c = setup.coefficients(protocol, n)?;
            Some(Box::new(move |y| bound_ers(&c, pa, pb, y)))
        }
    }
}

/// Summarizes a set of trials into a row and its conditional bins.
pub fn summarize(
    protocol: Protocol,
    n: u64,
    n_star: Option<f64>,
    trials: &[MatchTrial],
    bound: Option<&dyn Fn(f64) -> f64>,
    bins: usize,
) -> (SweepRow, Vec<BinRow>) {
    let m = trials.len() as u64;
    let hits = trials.iter().filter(|t| t.matched).count() as f64;
    let rate = hits / m as f64;
    let se = binomial_se(rate, m);
    let bvals: Option<Vec<f64>> = bound.map(|b| trials.iter().map(|t| b(t.y_a)).collect());
    let ya: Vec<f64> = trials.iter().map(|t| t.y_a).collect();
    let var = variance_se(&ya);
    let props: Vec<f64> = trials.iter().map(|t| t.proposals_a as f64).collect();
    let comm: Vec<f64> = trials.iter().map(|t| t.comm_bits as f64).collect();
    let row = SweepRow {
        protocol,
        n,
        n_star: n_star.unwrap_or_else(|| mean_se(&props).mean),
        trials: m,
        match_rate: rate,
        std_err: se,
        ci_lo: (rate - 1.96 * se).max(0.0),
        ci_hi: (rate + 1.96 * se).min(1.0),
        bound_value: bvals.as_ref().map(|v| mean_se(v).mean),
        comm_bits: mean_se(&comm).mean,
        variance_estimate: var.mean,
        variance_se: var.se,
    };
    let mut out = Vec::new();
    if bins > 0 {
        for (b, idx) in quantile_bins(&ya, bins).into_iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            let c = idx.len() as u64;
            let r = idx.iter().filter(|i| trials[**i].matched).count() as f64 / c as f64;
            out.push(BinRow {
                protocol,
                n,
                bin: b + 1,
                y_lo: ya[idx[0]],
                y_hi: ya[*idx.last().unwrap()],
                count: c,
                match_rate: r,
                std_err: binomial_se(r, c),
                bound_value: bvals.as_ref().map(|v| idx.iter().map(|i| v[*i]).sum::<f64>() / c as f64),
            });
        }
    }
    (row, out)
}

/// Runs every protocol over the batch-size grid on paired trials.
///
/// Protocols without batching are simulated once and repeated on every grid
/// row. The importance batch at grid point `N` uses the rounded mean
/// proposal count of the batch-communication protocol at `N` when that
/// protocol is part of the sweep, and `N` otherwise.
pub fn matching_sweep(cfg: &MatchingConfig, cr: &CommonRandomness, progress: &dyn Fn(&str)) -> Result<SweepOutput> {
    if cfg.trials < 2 {
        return invalid("a sweep needs at least two trials");
    }
    let setup = MatchingSetup::new(&cfg.party_a, &cfg.party_b, &cfg.proposal)?;
    let mut out = SweepOutput::default();
    let mut fixed: Vec<(Protocol, Vec<MatchTrial>)> = Vec::new();
    for &n in &cfg.n_grid {
        let mut batchcomm_cost = None;
        let mut order: Vec<Protocol> = cfg.protocols.clone();
        // The importance batch size depends on the batch-communication cost.
        order.sort_by_key(|p| *p == Protocol::Iml);
        let mut cell = Vec::new();
        for &p in &order {
            progress(&format!("matching {p} N={n}"));
            let (n_eff, n_star) = match p {
                Protocol::Iml => {
                    let ns = batchcomm_cost.map_or(n, |c: f64| c.round().max(1.0) as u64);
                    (ns, Some(ns as f64))
                }
                _ => (n, None),
            };
            let trials = if p.uses_batch() {
                run_protocol(cfg, &setup, cr, p, n_eff)?
            } else if let Some((_, t)) = fixed.iter().find(|(q, _)| *q == p) {
                t.clone()
            } else {
                let t = run_protocol(cfg, &setup, cr, p, n_eff)?;
                fixed.push((p, t.clone()));
                t
            };
            let bound = trial_bound(&setup, cfg, p, n);
            let (row, bins) = summarize(p, n, n_star, &trials, bound.as_deref(), cfg.bins);
            if p == Protocol::ErsBatchComm {
                batchcomm_cost = Some(row.n_star);
            }
            cell.push((p, row, bins));
        }
        for &p in &cfg.protocols {
            let (_, row, bins) = cell.iter().find(|(q, _, _)| *q == p).unwrap().clone();
            out.rows.push(row);
            out.bins.extend(bins);
        }
    }
    Ok(out)
}
