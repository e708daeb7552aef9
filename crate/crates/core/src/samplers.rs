//! Sample-selection procedures over the shared randomness.
//!
//! Index conventions: a plain rejection sampler looks at proposal `i` in
//! `(batch i, slot 1)` with its accept uniform in `(batch i, slot 0)`, which
//! makes it coincide with ensemble rejection sampling at `N = 1`. Batched
//! procedures use slots `1..=N` of batch `i`; the Poisson race and the single
//! importance batch use slots `1, 2, ...` of batch 1.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::dist::{DistributionSpec, Ratio};
use crate::error::{invalid, Error, Result};
use crate::randomness::{CommonRandomness, TrialStream, MAX_COMPONENTS, MAX_SLOT};

/// Safety cap on batches examined by ensemble rejection sampling.
pub const ERS_BATCH_CAP: u64 = 1_000_000;
/// Safety cap on arrivals examined by the Poisson race.
pub const PML_PROPOSAL_CAP: u64 = 10_000_000;
/// Monte Carlo size of the cached batch acceptance estimate.
pub const DELTA_MC_SAMPLES: u64 = 100_000;

/// Relative slack tolerated when checking `P/Q <= omega` on the fly.
const BOUND_SLACK: f64 = 1e-7;

/// A proposal distribution over tuples of `dim()` reals.
pub trait Proposal: Sync {
    fn dim(&self) -> usize;
    /// Maps `dim()` uniforms to a proposal value.
    fn draw(&self, u: &[f64], y: &mut [f64]);
}

/// Log importance weight `ln P(y) - ln Q(y)` of a target against its proposal.
pub trait Target: Sync {
    fn ln_weight(&self, y: &[f64]) -> f64;
}

impl Proposal for DistributionSpec {
    fn dim(&self) -> usize {
        1
    }

    #[inline]
    fn draw(&self, u: &[f64], y: &mut [f64]) {
        y[0] = self.sample(u[0]);
    }
}

impl Target for Ratio {
    #[inline]
    fn ln_weight(&self, y: &[f64]) -> f64 {
        Ratio::ln_weight(self, y[0])
    }
}

/// `n` i.i.d. copies of a 1-D proposal.
#[derive(Debug, Clone)]
pub struct IidProposal {
    pub spec: DistributionSpec,
    pub n: usize,
}

impl Proposal for IidProposal {
    fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn draw(&self, u: &[f64], y: &mut [f64]) {
        for (yi, ui) in y.iter_mut().zip(u) {
            *yi = self.spec.sample(*ui);
        }
    }
}

/// Product of per-component ratios.
#[derive(Debug, Clone)]
pub struct ProductRatio(pub Vec<Ratio>);

impl Target for ProductRatio {
    #[inline]
    fn ln_weight(&self, y: &[f64]) -> f64 {
        self.0.iter().zip(y).map(|(r, yi)| r.ln_weight(*yi)).sum()
    }
}

fn check_dim(d: usize) -> Result<usize> {
    if d == 0 || d > MAX_COMPONENTS {
        return invalid(format!("proposal dimension {d} outside 1..={MAX_COMPONENTS}"));
    }
    Ok(d)
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega.is_finite() && omega > 0.0) {
        return invalid(format!("ratio bound must be finite and positive, got {omega}"));
    }
    Ok(())
}

#[inline]
fn check_bound(w: f64, omega: f64) -> Result<()> {
    if w > omega * (1.0 + BOUND_SLACK) {
        return invalid(format!("bounding condition violated: weight {w} exceeds omega {omega}"));
    }
    Ok(())
}

/// Gumbel-max selection: `argmin_j S_j / lambda_j` with a zero weight scoring
/// `+inf` and ties going to the smallest index. Returns the 1-based index and
/// the minimal score.
pub fn gumbel_select(weights: &[f64], exponentials: &[f64]) -> Result<(usize, f64)> {
    if weights.len() != exponentials.len() {
        return invalid("weights and exponentials differ in length");
    }
    let mut best = None;
    let mut best_score = f64::INFINITY;
    for (j, (w, s)) in weights.iter().zip(exponentials).enumerate() {
        if !(*w >= 0.0) {
            return invalid(format!("negative or NaN weight {w}"));
        }
        if *w == 0.0 {
            continue;
        }
        let score = s / w;
        if best.is_none() || score < best_score {
            best = Some(j + 1);
            best_score = score;
        }
    }
    match best {
        Some(k) => Ok((k, best_score)),
        None => invalid("all weights are zero"),
    }
}

/// Log-domain Gumbel-max: `argmin_j ln S_j - ln lambda_j` over the entries with
/// `keep[j]`, ties to the smallest index. Returns `None` when nothing is kept
/// or every kept weight is zero.
pub fn gumbel_select_ln(ln_weights: &[f64], exponentials: &[f64], keep: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best = None;
    let mut best_score = f64::INFINITY;
    for (j, (lw, s)) in ln_weights.iter().zip(exponentials).enumerate() {
        if !keep(j) || *lw == f64::NEG_INFINITY {
            continue;
        }
        let score = s.ln() - lw;
        if best.is_none() || score < best_score {
            best = Some(j + 1);
            best_score = score;
        }
    }
    best
}

/// Outcome of a plain rejection sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct RsSelection {
    /// 1-based index of the accepted proposal (= proposals consumed).
    pub k: u64,
    pub y: Vec<f64>,
}

/// First `i` with `U_i <= P(Y_i) / (omega Q(Y_i))`.
pub fn rs_select_with<Q: Proposal + ?Sized, P: Target + ?Sized>(
    ts: &TrialStream,
    q: &Q,
    p: &P,
    omega: f64,
) -> Result<RsSelection> {
    check_omega(omega)?;
    let dim = check_dim(q.dim())?;
    let cap = (1e6 * omega.max(1.0)).ceil() as u64;
    let mut y = vec![0.0; dim];
    for i in 1..=cap {
        let mut sc = ts.scan(i, 0);
        let u = sc.next_slot().batch_uniform();
        let slot = sc.next_slot();
        q.draw(slot.components(dim), &mut y);
        let w = p.ln_weight(&y).exp();
        check_bound(w, omega)?;
        if u <= w / omega {
            return Ok(RsSelection { k: i, y });
        }
    }
    Err(Error::NonTermination { what: "rejection sampling", cap })
}

/// Rejection sampling of a 1-D target; returns `(K, Y_K)`.
pub fn rs_select(cr: &CommonRandomness, trial: u64, p: &DistributionSpec, q: &DistributionSpec, omega: f64) -> Result<(u64, f64)> {
    let s = rs_select_with(&cr.trial(trial), q, &Ratio::new(p, q), omega)?;
    Ok((s.k, s.y[0]))
}

/// Accepted batch of ensemble rejection sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ErsSelection {
    /// Global index `N (K1 - 1) + K2`.
    pub k: u64,
    pub k1: u64,
    pub k2: u64,
    pub y: Vec<f64>,
    /// Weights `lambda_{K1, 1..N}` of the accepted batch.
    pub batch_weights: Vec<f64>,
    pub z_hat: f64,
    pub z_bar: f64,
    pub n_proposals_consumed: u64,
}

/// Global index of slot `k2` in batch `k1`.
#[inline]
pub fn global_index(n: u64, k1: u64, k2: u64) -> u64 {
    n * (k1 - 1) + k2
}

fn check_batch(n: u64) -> Result<()> {
    if n == 0 || n > MAX_SLOT {
        return invalid(format!("batch size {n} outside 1..={MAX_SLOT}"));
    }
    Ok(())
}

/// Ensemble rejection sampling. Each batch of `n` proposals yields a
/// Gumbel-max candidate; the batch is accepted when
/// `U_i <= scale * Zhat / Zbar`.
pub fn ers_select_with<Q: Proposal + ?Sized, P: Target + ?Sized>(
    ts: &TrialStream,
    q: &Q,
    p: &P,
    omega: f64,
    n: u64,
    scale: f64,
) -> Result<ErsSelection> {
    check_omega(omega)?;
    check_batch(n)?;
    if !(scale > 0.0 && scale <= 1.0) {
        return invalid(format!("scale must lie in (0, 1], got {scale}"));
    }
    let dim = check_dim(q.dim())?;
    let nu = n as usize;
    let mut ys = vec![0.0; nu * dim];
    let mut weights = vec![0.0; nu];
    let mut exps = vec![0.0; nu];
    for i in 1..=ERS_BATCH_CAP {
        let mut sc = ts.scan(i, 0);
        let u = sc.next_slot().batch_uniform();
        let mut z_hat = 0.0;
        for j in 0..nu {
            let slot = sc.next_slot();
            let y = &mut ys[j * dim..(j + 1) * dim];
            q.draw(slot.components(dim), y);
            let w = p.ln_weight(y).exp();
            check_bound(w, omega)?;
            weights[j] = w;
            exps[j] = slot.exponential();
            z_hat += w;
        }
        if z_hat == 0.0 {
            continue;
        }
        let (c, _) = gumbel_select(&weights, &exps)?;
        let z_bar = (z_hat - weights[c - 1]) + omega;
        if u <= scale * (z_hat / z_bar) {
            let k2 = c as u64;
            return Ok(ErsSelection {
                k: global_index(n, i, k2),
                k1: i,
                k2,
                y: ys[(c - 1) * dim..c * dim].to_vec(),
                batch_weights: weights,
                z_hat,
                z_bar,
                n_proposals_consumed: i * n,
            });
        }
    }
    Err(Error::NonTermination { what: "ensemble rejection sampling", cap: ERS_BATCH_CAP })
}

/// Ensemble rejection sampling of a 1-D target.
pub fn ers_select(
    cr: &CommonRandomness,
    trial: u64,
    p: &DistributionSpec,
    q: &DistributionSpec,
    omega: f64,
    n: u64,
    scale: f64,
) -> Result<ErsSelection> {
    ers_select_with(&cr.trial(trial), q, &Ratio::new(p, q), omega, n, scale)
}

/// Target-independent batch acceptance lower bound `N / (N - 1 + omega)`.
pub fn delta_lower(omega: f64, n: u64) -> f64 {
    n as f64 / (n as f64 - 1.0 + omega)
}

/// Monte Carlo estimate of the average batch acceptance probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEstimate {
    pub delta_x: f64,
    pub delta_lower: f64,
    pub mc_samples: u64,
    pub std_err: f64,
}

impl DeltaEstimate {
    /// Acceptance scale that equalizes the batch acceptance rate to the lower
    /// bound, clamped to 1.
    pub fn scale(&self) -> f64 {
        (self.delta_lower / self.delta_x).min(1.0)
    }
}

/// Estimates `E[N / Zbar(Y_{1:N}, 1)]` with `Y_j ~ Q` from `mc` batches of
/// the auxiliary randomness.
pub fn estimate_delta_x(
    p: &DistributionSpec,
    q: &DistributionSpec,
    omega: f64,
    n: u64,
    mc: u64,
    aux: &CommonRandomness,
) -> Result<DeltaEstimate> {
    check_omega(omega)?;
    check_batch(n)?;
    if mc < 1000 {
        return invalid(format!("need at least 1000 Monte Carlo samples, got {mc}"));
    }
    let ratio = Ratio::new(p, q);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for m in 0..mc {
        let ts = aux.trial(m);
        let mut sc = ts.scan(1, 2);
        // Zbar(y, 1) replaces the first weight by omega.
        let mut z = omega;
        for _ in 2..=n {
            let y = q.sample(sc.next_slot().components(1)[0]);
            z += ratio.weight(y);
        }
        let v = n as f64 / z;
        sum += v;
        sum2 += v * v;
    }
    let mean = sum / mc as f64;
    let var = (sum2 / mc as f64 - mean * mean).max(0.0);
    Ok(DeltaEstimate {
        delta_x: mean,
        delta_lower: delta_lower(omega, n),
        mc_samples: mc,
        std_err: (var / mc as f64).sqrt(),
    })
}

fn aux_seed() -> CommonRandomness {
    CommonRandomness::from_u64(0xDE17_A5EE_D000_0001)
}

static DELTA_CACHE: Mutex<Option<HashMap<String, DeltaEstimate>>> = Mutex::new(None);

/// Cached [`estimate_delta_x`] with [`DELTA_MC_SAMPLES`] samples under a fixed
/// auxiliary seed.
pub fn cached_delta(p: &DistributionSpec, q: &DistributionSpec, omega: f64, n: u64) -> Result<DeltaEstimate> {
    let key = format!("{p}|{q}|{n}|{:016x}", omega.to_bits());
    if let Some(d) = DELTA_CACHE.lock().unwrap().as_ref().and_then(|m| m.get(&key)) {
        return Ok(*d);
    }
    let d = estimate_delta_x(p, q, omega, n, DELTA_MC_SAMPLES, &aux_seed())?;
    DELTA_CACHE.lock().unwrap().get_or_insert_with(HashMap::new).insert(key, d);
    Ok(d)
}

/// Outcome of the Poisson race.
#[derive(Debug, Clone, PartialEq)]
pub struct PmlSelection {
    /// 1-based arrival index of the winner.
    pub k: u64,
    pub y: Vec<f64>,
    pub proposals: u64,
}

/// `argmin_i T_i Q(Y_i) / P(Y_i)` over a rate-1 Poisson process, scanning
/// arrivals until `T_i / omega` exceeds the best score.
pub fn pml_select_with<Q: Proposal + ?Sized, P: Target + ?Sized>(
    ts: &TrialStream,
    q: &Q,
    p: &P,
    omega: f64,
) -> Result<PmlSelection> {
    check_omega(omega)?;
    let dim = check_dim(q.dim())?;
    let mut sc = ts.scan(1, 1);
    let mut t = 0.0;
    let mut best = f64::INFINITY;
    let mut winner: Option<(u64, Vec<f64>)> = None;
    let mut y = vec![0.0; dim];
    for i in 1..=PML_PROPOSAL_CAP {
        let slot = sc.next_slot();
        t += slot.exponential();
        if t / omega > best {
            let (k, y) = winner.expect("finite best score has a winner");
            return Ok(PmlSelection { k, y, proposals: i - 1 });
        }
        q.draw(slot.components(dim), &mut y);
        let w = p.ln_weight(&y).exp();
        check_bound(w, omega)?;
        if w > 0.0 {
            let score = t / w;
            if score < best {
                best = score;
                winner = Some((i, y.clone()));
            }
        }
    }
    Err(Error::NonTermination { what: "Poisson race", cap: PML_PROPOSAL_CAP })
}

/// Poisson-race selection of a 1-D target; returns `(K, Y_K)`.
pub fn pml_select(cr: &CommonRandomness, trial: u64, p: &DistributionSpec, q: &DistributionSpec, omega: f64) -> Result<(u64, f64)> {
    let s = pml_select_with(&cr.trial(trial), q, &Ratio::new(p, q), omega)?;
    Ok((s.k, s.y[0]))
}

/// Greedy rejection sampling for a discrete target against a discrete
/// proposal over atoms `0..n`.
///
/// Step `i` accepts atom `y` with probability `alpha_i(y) = p_i(y) / (r_i Q(y))`
/// where `r_i` is the mass not yet accepted and
/// `p_i(y) = min(P(y) - sum_{l<i} p_l(y), r_i Q(y))`.
#[derive(Debug, Clone)]
pub struct GreedyRejection {
    p: Vec<f64>,
    q: Vec<f64>,
    /// Acceptance tables for steps 1, 2, ...; the last one repeats.
    steps: Vec<Vec<f64>>,
}

impl GreedyRejection {
    const MAX_TABLES: usize = 4096;

    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.len() != q.len() || p.is_empty() {
            return invalid("target and proposal need the same non-empty atom set");
        }
        if p.iter().zip(&q).any(|(a, b)| *a > 0.0 && *b == 0.0) {
            return Err(Error::Unbounded("target atom without proposal mass".into()));
        }
        let mut cum = vec![0.0; p.len()];
        let mut steps = Vec::new();
        let mut r: f64 = 1.0;
        while steps.len() < Self::MAX_TABLES {
            let mut alpha = vec![0.0; p.len()];
            let mut taken = 0.0;
            for y in 0..p.len() {
                if q[y] == 0.0 {
                    continue;
                }
                let py = (p[y] - cum[y]).max(0.0).min(r * q[y]);
                alpha[y] = (py / (r * q[y])).min(1.0);
                cum[y] += py;
                taken += py;
            }
            let stationary = steps.last() == Some(&alpha);
            steps.push(alpha);
            r -= taken;
            if stationary || r <= 1e-15 {
                break;
            }
        }
        Ok(GreedyRejection { p, q, steps })
    }

    /// Acceptance probability of atom `y` (0-based) at step `i` (1-based).
    pub fn alpha(&self, i: u64, y: usize) -> f64 {
        let t = (i as usize).min(self.steps.len()) - 1;
        self.steps[t][y]
    }

    pub fn target(&self) -> &[f64] {
        &self.p
    }

    pub fn proposal(&self) -> &[f64] {
        &self.q
    }

    /// Runs the sampler on the shared stream; returns `(step, atom)`.
    pub fn select(&self, ts: &TrialStream) -> Result<(u64, usize)> {
        for i in 1..=ERS_BATCH_CAP {
            let mut sc = ts.scan(i, 0);
            let u = sc.next_slot().batch_uniform();
            let y = discrete_index(&self.q, sc.next_slot().components(1)[0]);
            if u <= self.alpha(i, y) {
                return Ok((i, y));
            }
        }
        Err(Error::NonTermination { what: "greedy rejection sampling", cap: ERS_BATCH_CAP })
    }
}

/// CDF inversion over probabilities indexed `0..n`.
pub fn discrete_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u <= acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// The two-party discrete construction with `n = 2k + 1` atoms (1-based
/// labels): a uniform proposal, both targets put `(k+1)/(2k+1)` on atom 1, A
/// spreads the rest over atoms `2..=k+1` and B over atoms `k+2..=2k+1`.
#[derive(Debug, Clone)]
pub struct GrsExample {
    pub k: u32,
    pub party_a: DistributionSpec,
    pub party_b: DistributionSpec,
    pub proposal: DistributionSpec,
    grs_a: GreedyRejection,
    grs_b: GreedyRejection,
}

/// One trial of the discrete construction: greedy rejection and Poisson race
/// outputs of both parties (atom labels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrsOutcome {
    pub grs_a: u32,
    pub grs_b: u32,
    pub pml_a: u32,
    pub pml_b: u32,
}

impl GrsExample {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return invalid("k must be at least 1");
        }
        let n = 2 * k as usize + 1;
        let q = 1.0 / n as f64;
        let head = (k as f64 + 1.0) / n as f64;
        let mut pa = vec![0.0; n];
        let mut pb = vec![0.0; n];
        pa[0] = head;
        pb[0] = head;
        for i in 1..=k as usize {
            pa[i] = q;
            pb[k as usize + i] = q;
        }
        let atoms = |v: &[f64]| v.iter().enumerate().map(|(i, p)| ((i + 1) as f64, *p)).collect::<Vec<_>>();
        let party_a = DistributionSpec::Discrete { atoms: atoms(&pa) };
        let party_b = DistributionSpec::Discrete { atoms: atoms(&pb) };
        let proposal = DistributionSpec::Discrete { atoms: atoms(&vec![q; n]) };
        Ok(GrsExample {
            k,
            grs_a: GreedyRejection::new(pa, vec![q; n])?,
            grs_b: GreedyRejection::new(pb, vec![q; n])?,
            party_a,
            party_b,
            proposal,
        })
    }

    pub fn trial(&self, cr: &CommonRandomness, trial: u64) -> Result<GrsOutcome> {
        let ts = cr.trial(trial);
        let (_, a) = self.grs_a.select(&ts)?;
        let (_, b) = self.grs_b.select(&ts)?;
        let omega = self.k as f64 + 1.0;
        let pa = pml_select_with(&ts, &self.proposal, &Ratio::new(&self.party_a, &self.proposal), omega)?;
        let pb = pml_select_with(&ts, &self.proposal, &Ratio::new(&self.party_b, &self.proposal), omega)?;
        Ok(GrsOutcome {
            grs_a: a as u32 + 1,
            grs_b: b as u32 + 1,
            pml_a: pa.y[0] as u32,
            pml_b: pb.y[0] as u32,
        })
    }
}

/// Runs one trial of the discrete construction with parameter `k`.
pub fn grs_example_trial(k: u32, cr: &CommonRandomness, trial: u64) -> Result<GrsOutcome> {
    GrsExample::new(k)?.trial(cr, trial)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(m: f64, v: f64) -> DistributionSpec {
        DistributionSpec::gaussian(m, v).unwrap()
    }

    #[test]
    fn gumbel_examples() {
        assert_eq!(gumbel_select(&[1.0, 0.0, 0.0], &[5.0, 0.1, 0.2]).unwrap().0, 1);
        assert_eq!(gumbel_select(&[1.0, 1.0, 1.0], &[3.0, 1.0, 2.0]).unwrap(), (2, 1.0));
        assert_eq!(gumbel_select(&[1.0, 1.0], &[2.0, 2.0]).unwrap().0, 1);
        assert!(gumbel_select(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn log_domain_gumbel_agrees() {
        let w = [0.5, 2.0, 0.0, 1.5];
        let s = [0.3, 1.9, 0.01, 1.0];
        let lw: Vec<f64> = w.iter().map(|x: &f64| x.ln()).collect();
        assert_eq!(gumbel_select_ln(&lw, &s, |_| true), Some(gumbel_select(&w, &s).unwrap().0));
        assert_eq!(gumbel_select_ln(&lw, &s, |j| j == 2), None);
    }

    #[test]
    fn identical_target_accepts_first() {
        let cr = CommonRandomness::from_u64(1);
        let q = g(0.0, 1.0);
        for t in 0..50 {
            assert_eq!(rs_select(&cr, t, &q, &q, 1.0).unwrap().0, 1);
            assert_eq!(pml_select(&cr, t, &q, &q, 1.0).unwrap().0, 1);
        }
    }

    #[test]
    fn ers_with_one_slot_is_rs() {
        let cr = CommonRandomness::from_u64(2);
        let p = g(1.0, 0.01);
        let q = g(0.0, 1.0);
        let w = crate::dist::ratio_bound(&p, &q).unwrap();
        for t in 0..1000 {
            let (k, y) = rs_select(&cr, t, &p, &q, w).unwrap();
            let e = ers_select(&cr, t, &p, &q, w, 1, 1.0).unwrap();
            assert_eq!((e.k, e.k1, e.k2), (k, k, 1));
            assert_eq!(e.y[0], y);
        }
    }

    #[test]
    fn ers_selection_invariants() {
        let cr = CommonRandomness::from_u64(3);
        let p = g(1.0, 0.05);
        let q = g(0.0, 1.0);
        let w = crate::dist::ratio_bound(&p, &q).unwrap();
        for t in 0..200 {
            let e = ers_select(&cr, t, &p, &q, w, 16, 1.0).unwrap();
            assert_eq!(e.k, 16 * (e.k1 - 1) + e.k2);
            let s: f64 = e.batch_weights.iter().sum();
            assert_eq!(s, e.z_hat);
            assert_eq!(e.z_bar, (e.z_hat - e.batch_weights[e.k2 as usize - 1]) + w);
            assert!(e.z_hat / e.z_bar > 0.0 && e.z_hat / e.z_bar <= 1.0);
            assert!(e.batch_weights.iter().all(|x| *x <= w));
            assert_eq!(e.n_proposals_consumed, 16 * e.k1);
        }
    }

    #[test]
    fn bounding_violation_is_reported() {
        let cr = CommonRandomness::from_u64(4);
        let p = g(1.0, 0.01);
        let q = g(0.0, 1.0);
        assert!(ers_select(&cr, 0, &p, &q, 2.0, 64, 1.0).is_err());
    }

    #[test]
    fn delta_examples() {
        let q = g(0.0, 1.0);
        let aux = CommonRandomness::from_u64(5);
        let d = estimate_delta_x(&q, &q, 1.0, 1, 1000, &aux).unwrap();
        assert_eq!(d.delta_x, 1.0);
        assert_eq!(d.std_err, 0.0);
        let p = g(1.0, 0.01);
        let w = crate::dist::ratio_bound(&p, &q).unwrap();
        let d = estimate_delta_x(&p, &q, w, 32, 20_000, &aux).unwrap();
        assert!((d.delta_lower - 32.0 / (31.0 + 16.5715)).abs() < 1e-3);
        assert!(d.delta_x >= d.delta_lower - 3.0 * d.std_err);
        assert!(estimate_delta_x(&p, &q, w, 32, 10, &aux).is_err());
    }

    #[test]
    fn greedy_tables_of_the_discrete_construction() {
        let ex = GrsExample::new(4).unwrap();
        // Step 1 accepts atom 1 and A's own atoms outright, nothing else.
        assert_eq!(ex.grs_a.alpha(1, 0), 1.0);
        assert_eq!(ex.grs_a.alpha(1, 1), 1.0);
        assert_eq!(ex.grs_a.alpha(1, 5), 0.0);
        // Later steps accept only atom 1.
        for i in 2..6 {
            assert!((ex.grs_a.alpha(i, 0) - 1.0).abs() < 1e-12);
            assert_eq!(ex.grs_a.alpha(i, 1), 0.0);
        }
    }

    #[test]
    fn greedy_rejection_is_exact_on_small_pmf() {
        let p = vec![0.5, 0.3, 0.2, 0.0];
        let q = vec![0.25; 4];
        let g = GreedyRejection::new(p.clone(), q).unwrap();
        let cr = CommonRandomness::from_u64(6);
        let n = 40_000;
        let mut counts = [0usize; 4];
        for t in 0..n {
            counts[g.select(&cr.trial(t)).unwrap().1] += 1;
        }
        for (c, pi) in counts.iter().zip(&p) {
            let f = *c as f64 / n as f64;
            let se = (pi * (1.0 - pi) / n as f64).sqrt().max(1e-9);
            assert!((f - pi).abs() <= 4.0 * se, "{f} vs {pi}");
        }
    }

    #[test]
    fn discrete_race_matches_brute_force_argmin() {
        // With a discrete proposal only the first arrival of each atom can
        // win, so the race reduces to an argmin over atoms.
        let ex = GrsExample::new(4).unwrap();
        let cr = CommonRandomness::from_u64(7);
        let n = 9usize;
        for t in 0..300 {
            let out = ex.trial(&cr, t).unwrap();
            let ts = cr.trial(t);
            let mut first = vec![f64::INFINITY; n];
            let mut sc = ts.scan(1, 1);
            let mut time = 0.0;
            while first.iter().any(|x| x.is_infinite()) {
                let s = sc.next_slot();
                time += s.exponential();
                let a = ex.proposal.sample(s.components(1)[0]) as usize - 1;
                if first[a].is_infinite() {
                    first[a] = time;
                }
            }
            let brute = |pmf: &DistributionSpec| {
                (0..n)
                    .filter(|a| pmf.pdf((a + 1) as f64) > 0.0)
                    .min_by(|a, b| {
                        let sa = first[*a] / pmf.pdf((a + 1) as f64);
                        let sb = first[*b] / pmf.pdf((b + 1) as f64);
                        sa.total_cmp(&sb)
                    })
                    .unwrap() as u32
                    + 1
            };
            assert_eq!(out.pml_a, brute(&ex.party_a));
            assert_eq!(out.pml_b, brute(&ex.party_b));
        }
    }
}
