//! Wyner-Ziv compression with hashed ensemble rejection sampling.
//!
//! The encoder sees a block `x` of `n_joint` samples and selects a tuple
//! `Y'` from `prod N(x_i, s)` by ensemble rejection sampling against the
//! i.i.d. proposal `N(0, sigma2_x + s)`. It sends the batch index in unary
//! and one hash of the selected slot per block. The decoder sees the side
//! information `x' = x + zeta`, keeps the slots of that batch whose hash
//! agrees and picks one by Gumbel-max under the posterior of `Y'` given `x'`.

use crate::coder::BitString;
use crate::dist::{ratio_bound, DistributionSpec, Ratio};
use crate::error::{invalid, Error, Result};
use crate::randomness::{hash_from_uniform, CommonRandomness, MAX_COMPONENTS};
use crate::samplers::{ers_select_with, gumbel_select_ln, IidProposal, ProductRatio};
use crate::stats::{binomial_se, mean_se, run_trials, MeanSe};

/// Parameters of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct WzConfig {
    pub sigma2_x: f64,
    /// Truncation of the source.
    pub trunc: (f64, f64),
    pub sigma2_xprime_given_x: f64,
    /// Target distortion variance `s`.
    pub sigma2_yprime_given_x: f64,
    /// Hash alphabet size per block.
    pub v: u64,
    /// Batch size.
    pub n: u64,
    pub n_joint: u32,
    pub eps: f64,
    /// LSB hashing plus the index-correction round.
    pub feedback: bool,
}

impl Default for WzConfig {
    fn default() -> Self {
        WzConfig {
            sigma2_x: 1.0,
            trunc: (-2.0, 2.0),
            sigma2_xprime_given_x: 0.01,
            sigma2_yprime_given_x: 0.02,
            v: 1 << 8,
            n: 1 << 12,
            n_joint: 1,
            eps: 0.0,
            feedback: false,
        }
    }
}

fn is_pow2(v: u64) -> bool {
    v != 0 && v & (v - 1) == 0
}

impl WzConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma2_x", self.sigma2_x),
            ("sigma2_xprime_given_x", self.sigma2_xprime_given_x),
            ("sigma2_yprime_given_x", self.sigma2_yprime_given_x),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.trunc.0 < self.trunc.1) {
            return invalid("truncation interval must have lo < hi");
        }
        if self.v == 0 || self.n == 0 {
            return invalid("hash alphabet and batch size must be at least 1");
        }
        if self.n_joint == 0 || self.n_joint as usize > MAX_COMPONENTS {
            return invalid(format!("n_joint must lie in 1..={MAX_COMPONENTS}"));
        }
        if !(self.eps >= 0.0) {
            return invalid("eps must be non-negative");
        }
        if self.feedback && !(is_pow2(self.v) && is_pow2(self.n) && self.v <= self.n) {
            return invalid("feedback needs power-of-two V and N with V <= N");
        }
        Ok(())
    }

    pub fn log2v(&self) -> f64 {
        (self.v as f64).log2()
    }

    pub fn source(&self) -> Result<DistributionSpec> {
        DistributionSpec::truncated_gaussian(0.0, self.sigma2_x, self.trunc.0, self.trunc.1)
    }

    /// `Q_{Y'} = N(0, sigma2_x + s)`.
    pub fn proposal(&self) -> Result<DistributionSpec> {
        DistributionSpec::gaussian(0.0, self.sigma2_x + self.sigma2_yprime_given_x)
    }

    pub fn target(&self, x: f64) -> Result<DistributionSpec> {
        DistributionSpec::gaussian(x, self.sigma2_yprime_given_x)
    }
}

/// Decoder-side law of `Y'` given `x'`, from the untruncated Gaussian model:
/// `N(x' sx / sx', sy' - sx^2 / sx')`.
pub fn posterior_spec(x_prime: f64, cfg: &WzConfig) -> Result<DistributionSpec> {
    let s_xp = cfg.sigma2_x + cfg.sigma2_xprime_given_x;
    let s_yp = cfg.sigma2_x + cfg.sigma2_yprime_given_x;
    let var = s_yp - cfg.sigma2_x * cfg.sigma2_x / s_xp;
    if !(var > 0.0) {
        return Err(Error::Domain(format!("posterior variance {var} is not positive")));
    }
    DistributionSpec::gaussian(x_prime * cfg.sigma2_x / s_xp, var)
}

/// `max_{x in trunc} max_y P(y|x)/Q(y)` by a grid over `x` refined with a
/// golden-section search around the best grid point.
pub fn per_sample_omega(cfg: &WzConfig) -> Result<f64> {
    let q = cfg.proposal()?;
    let f = |x: f64| -> Result<f64> { ratio_bound(&cfg.target(x)?, &q) };
    let (lo, hi) = cfg.trunc;
    const GRID: usize = 400;
    let step = (hi - lo) / GRID as f64;
    let mut best = (lo, f(lo)?);
    for i in 1..=GRID {
        let x = lo + step * i as f64;
        let v = f(x)?;
        if v > best.1 {
            best = (x, v);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c)? >= f(d)? {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(best.1.max(f(0.5 * (a + b))?))
}

/// Source block and side information of one trial, drawn from the trial's
/// private stream.
pub fn draw_source(cr: &CommonRandomness, trial: u64, cfg: &WzConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let src = cfg.source()?;
    let noise = DistributionSpec::gaussian(0.0, cfg.sigma2_xprime_given_x)?;
    let mut sc = cr.trial(trial).source();
    let n = cfg.n_joint as usize;
    let x: Vec<f64> = (0..n).map(|_| src.sample(sc.next_uniform())).collect();
    let xp = x.iter().map(|xi| xi + noise.sample(sc.next_uniform())).collect();
    Ok((x, xp))
}

/// Encoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct WzEncoded {
    pub k: u64,
    pub k1: u64,
    pub k2: u64,
    pub y: Vec<f64>,
    /// Block ratio bound used by the encoder, `prod_i omega(x_i)`.
    pub omega: f64,
    /// Unary length of the batch index.
    pub batch_bits: u64,
    hash_u: f64,
}

impl WzEncoded {
    /// Hash sent for alphabet size `v` (LSB form in feedback mode).
    pub fn hash(&self, v: u64, feedback: bool) -> u64 {
        if feedback {
            (self.k2 - 1) % v + 1
        } else {
            hash_from_uniform(self.hash_u, v)
        }
    }
}

/// Runs the encoder on block `x`.
pub fn wz_encode(cr: &CommonRandomness, trial: u64, x: &[f64], cfg: &WzConfig) -> Result<WzEncoded> {
    cfg.validate()?;
    if x.len() != cfg.n_joint as usize {
        return invalid("source block length differs from n_joint");
    }
    let q = cfg.proposal()?;
    let mut ratios = Vec::with_capacity(x.len());
    let mut omega = 1.0;
    for &xi in x {
        let p = cfg.target(xi)?;
        omega *= ratio_bound(&p, &q)?;
        ratios.push(Ratio::new(&p, &q));
    }
    let proposal = IidProposal { spec: q, n: x.len() };
    let ts = cr.trial(trial);
    let sel = ers_select_with(&ts, &proposal, &ProductRatio(ratios), omega, cfg.n, 1.0)?;
    let hash_u = ts.slot(sel.k1, sel.k2 as u32).hash_uniform();
    Ok(WzEncoded { k: sel.k, k1: sel.k1, k2: sel.k2, y: sel.y, omega, batch_bits: sel.k1, hash_u })
}

/// Decoder's view of one batch: posterior log-weights, exponentials, hash
/// uniforms and tuples of every slot.
#[derive(Debug, Clone)]
pub struct BatchView {
    pub ln_weights: Vec<f64>,
    pub exps: Vec<f64>,
    pub hash_u: Vec<f64>,
    pub ys: Vec<f64>,
    dim: usize,
}

impl BatchView {
    pub fn new(cr: &CommonRandomness, trial: u64, k1: u64, x_prime: &[f64], cfg: &WzConfig) -> Result<Self> {
        let q = cfg.proposal()?;
        let post = x_prime
            .iter()
            .map(|xp| Ok(Ratio::new(&posterior_spec(*xp, cfg)?, &q)))
            .collect::<Result<Vec<_>>>()?;
        let dim = x_prime.len();
        let n = cfg.n as usize;
        let mut view = BatchView {
            ln_weights: Vec::with_capacity(n),
            exps: Vec::with_capacity(n),
            hash_u: Vec::with_capacity(n),
            ys: Vec::with_capacity(n * dim),
            dim,
        };
        let ts = cr.trial(trial);
        let mut sc = ts.scan(k1, 1);
        for _ in 0..n {
            let s = sc.next_slot();
            let mut lw = 0.0;
            for (u, r) in s.components(dim).iter().zip(&post) {
                let y = q.sample(*u);
                lw += r.ln_weight(y);
                view.ys.push(y);
            }
            view.ln_weights.push(lw);
            view.exps.push(s.exponential());
            view.hash_u.push(s.hash_uniform());
        }
        Ok(view)
    }

    /// Slot picked for a received hash; `None` when every slot is filtered
    /// out.
    pub fn decode(&self, hash: u64, v: u64, feedback: bool) -> Option<u64> {
        let keep = |j: usize| {
            if feedback {
                (j as u64) % v + 1 == hash
            } else {
                hash_from_uniform(self.hash_u[j], v) == hash
            }
        };
        gumbel_select_ln(&self.ln_weights, &self.exps, keep).map(|j| j as u64)
    }

    /// Fallback for an empty filter: the slot with the largest weight.
    pub fn argmax(&self) -> u64 {
        let mut best = 0;
        for j in 1..self.ln_weights.len() {
            if self.ln_weights[j] > self.ln_weights[best] {
                best = j;
            }
        }
        best as u64 + 1
    }

    pub fn tuple(&self, k2: u64) -> &[f64] {
        let j = (k2 - 1) as usize;
        &self.ys[j * self.dim..(j + 1) * self.dim]
    }
}

/// Decodes a slot index of batch `k1`; `None` means decoding failure.
pub fn wz_decode(cr: &CommonRandomness, trial: u64, x_prime: &[f64], hash: u64, k1: u64, cfg: &WzConfig) -> Result<Option<u64>> {
    cfg.validate()?;
    Ok(BatchView::new(cr, trial, k1, x_prime, cfg)?.decode(hash, cfg.v, cfg.feedback))
}

/// Result of the index-correction round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeedbackOutcome {
    /// Slot index held by the decoder after the round.
    pub k2: u64,
    /// Forward bits spent in the round.
    pub extra_bits: u64,
}

/// The decoder returns the high bits of its slot; the encoder acknowledges
/// with one bit or sends a zero bit followed by its own high bits. Feedback
/// bits are not counted.
pub fn feedback_round(k2_a: u64, k2_b: u64, n: u64, v: u64) -> Result<FeedbackOutcome> {
    if !(is_pow2(v) && is_pow2(n) && v <= n) {
        return invalid("feedback needs power-of-two V and N with V <= N");
    }
    if k2_a == 0 || k2_b == 0 || k2_a > n || k2_b > n {
        return invalid("slot index outside 1..=N");
    }
    let lsb = v.trailing_zeros();
    let msb_bits = (n / v).trailing_zeros() as u64;
    let (msb_a, msb_b) = ((k2_a - 1) >> lsb, (k2_b - 1) >> lsb);
    // The low bits of k2_a were sent up front, so agreeing high bits pin
    // down k2_a on the decoder side.
    let extra_bits = if msb_a == msb_b { 1 } else { 1 + msb_bits };
    Ok(FeedbackOutcome { k2: k2_a, extra_bits })
}

/// One block transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct WzTrial {
    pub x: Vec<f64>,
    pub x_prime: Vec<f64>,
    pub k_a: u64,
    /// Global index output by the decoder.
    pub k_b: u64,
    pub hash_sent: u64,
    pub batch_bits: u64,
    /// Decoder agreed with the encoder before any correction.
    pub matched: bool,
    pub decode_failed: bool,
    /// Forward bits of the correction round (0 without feedback).
    pub feedback_bits: u64,
    /// `sum_i (y_out,i - x_i)^2` over the block after any correction.
    pub sq_error: f64,
    /// `sum_i (y_A,i - x_i)^2`.
    pub sq_error_encoder: f64,
    /// `log2 V + batch_bits + feedback_bits`.
    pub rate_bits: f64,
}

/// Serializes the forward messages of a block: the batch index in unary, the
/// hash minus one in `log2 V` bits, and the correction bits. Needs a
/// power-of-two `V`.
pub fn wz_message(t: &WzTrial, cfg: &WzConfig) -> Result<BitString> {
    if !is_pow2(cfg.v) {
        return invalid("serialization needs a power-of-two hash alphabet");
    }
    let mut b = BitString::new();
    for _ in 1..t.batch_bits {
        b.push(true);
    }
    b.push(false);
    b.push_bits(t.hash_sent - 1, cfg.v.trailing_zeros());
    if cfg.feedback {
        if t.feedback_bits == 1 {
            b.push(true);
        } else {
            b.push(false);
            let lsb = cfg.v.trailing_zeros();
            let k2_a = t.k_a - (t.k_a - 1) / cfg.n * cfg.n;
            b.push_bits((k2_a - 1) >> lsb, (t.feedback_bits - 1) as u32);
        }
    }
    Ok(b)
}

fn sq_err(y: &[f64], x: &[f64]) -> f64 {
    y.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum()
}

fn finish_trial(cfg: &WzConfig, view: &BatchView, enc: &WzEncoded, x: &[f64], xp: &[f64]) -> Result<WzTrial> {
    let hash = enc.hash(cfg.v, cfg.feedback);
    let decoded = view.decode(hash, cfg.v, cfg.feedback);
    let k2_b = decoded.unwrap_or_else(|| view.argmax());
    let matched = decoded == Some(enc.k2);
    let (k2_out, fb_bits) = if cfg.feedback {
        let fb = feedback_round(enc.k2, k2_b, cfg.n, cfg.v)?;
        (fb.k2, fb.extra_bits)
    } else {
        (k2_b, 0)
    };
    Ok(WzTrial {
        x: x.to_vec(),
        x_prime: xp.to_vec(),
        k_a: enc.k,
        k_b: cfg.n * (enc.k1 - 1) + k2_out,
        hash_sent: hash,
        batch_bits: enc.batch_bits,
        matched,
        decode_failed: decoded.is_none(),
        feedback_bits: fb_bits,
        sq_error: sq_err(view.tuple(k2_out), x),
        sq_error_encoder: sq_err(&enc.y, x),
        rate_bits: cfg.log2v() + (enc.batch_bits + fb_bits) as f64,
    })
}

/// Runs one block end to end.
pub fn wz_trial(cr: &CommonRandomness, trial: u64, cfg: &WzConfig) -> Result<WzTrial> {
    let (x, xp) = draw_source(cr, trial, cfg)?;
    let enc = wz_encode(cr, trial, &x, cfg)?;
    let view = BatchView::new(cr, trial, enc.k1, &xp, cfg)?;
    finish_trial(cfg, &view, &enc, &x, &xp)
}

/// Monte Carlo value of the mismatch bound
/// `E[1 - (1 + eps + (1 + eps) / V * 2^(sum_i i(Y';X) - i(Y';X')))^-1]`
/// for each `v`, sharing the samples. Draws use trial streams of `aux`.
pub fn wz_error_bounds(cfg: &WzConfig, vs: &[u64], samples: u64, aux: &CommonRandomness) -> Result<Vec<MeanSe>> {
    cfg.validate()?;
    if samples < 1000 {
        return invalid("need at least 1000 Monte Carlo samples");
    }
    let s = cfg.sigma2_yprime_given_x;
    let unit = DistributionSpec::gaussian(0.0, 1.0)?;
    // The marginal of Y' cancels in the difference of information densities.
    let deltas = run_trials(samples, |m| {
        let (x, xp) = draw_source(aux, m, cfg)?;
        let mut sc = aux.trial(m).scan(1, 1);
        let mut d = 0.0;
        for (xi, xpi) in x.iter().zip(&xp) {
            let y = xi + s.sqrt() * unit.sample(sc.next_uniform());
            d += cfg.target(*xi)?.ln_pdf(y) - posterior_spec(*xpi, cfg)?.ln_pdf(y);
        }
        Ok(d)
    })?;
    Ok(vs
        .iter()
        .map(|&v| {
            let vals: Vec<f64> = deltas
                .iter()
                .map(|d| {
                    let t = ((1.0 + cfg.eps) / v as f64).ln() + d;
                    1.0 - 1.0 / (1.0 + cfg.eps + t.exp())
                })
                .collect();
            mean_se(&vals)
        })
        .collect())
}

/// Single-`V` form of [`wz_error_bounds`] with `cfg.v`.
pub fn wz_error_bound(cfg: &WzConfig, samples: u64, aux: &CommonRandomness) -> Result<MeanSe> {
    Ok(wz_error_bounds(cfg, &[cfg.v], samples, aux)?[0])
}

/// Aggregate of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct RdPoint {
    pub n_joint: u32,
    pub n: u64,
    pub v: u64,
    pub log2v: f64,
    pub eps: f64,
    pub feedback: bool,
    pub sigma2_yprime_given_x: f64,
    pub trials: u64,
    pub rate_per_sample: f64,
    pub batch_bits: f64,
    pub feedback_bits: f64,
    /// `10 log10` of the per-sample mean squared error of the output.
    pub distortion_db: f64,
    /// Same over the trials where the decoder matched.
    pub matched_distortion_db: f64,
    /// Same for the encoder's selection on every trial.
    pub encoder_distortion_db: f64,
    pub mismatch_rate: f64,
    pub mismatch_se: f64,
    /// Mismatch after the correction round.
    pub final_mismatch_rate: f64,
    pub decode_failures: u64,
    /// Trials whose correction cost is outside `{1, 1 + log2(N / V)}`
    /// (always 0 without feedback).
    pub feedback_bits_out_of_set: u64,
    pub bound_value: f64,
    pub bound_se: f64,
    /// `3 * mean(omega_x) / N`.
    pub mu1_realized: f64,
    /// `(per-sample omega)^n_joint`.
    pub block_omega: f64,
}

/// Options of a grid run sharing the encoder across hash sizes.
#[derive(Debug, Clone)]
pub struct WzGrid {
    pub base: WzConfig,
    pub vs: Vec<u64>,
    pub feedback_modes: Vec<bool>,
    pub trials: u64,
    pub bound_samples: u64,
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Runs the encoder once per trial and decodes every `(V, feedback)`
/// combination from the same batch. Points come out ordered by feedback
/// mode, then `V`.
pub fn run_wz_grid(grid: &WzGrid, cr: &CommonRandomness, aux: &CommonRandomness) -> Result<Vec<RdPoint>> {
    let combos: Vec<WzConfig> = grid
        .feedback_modes
        .iter()
        .flat_map(|&fb| grid.vs.iter().map(move |&v| WzConfig { v, feedback: fb, ..grid.base.clone() }))
        .collect();
    for c in &combos {
        c.validate()?;
    }
    if grid.trials < 2 {
        return invalid("need at least two trials");
    }
    let per_trial = run_trials(grid.trials, |t| {
        let (x, xp) = draw_source(cr, t, &grid.base)?;
        let enc = wz_encode(cr, t, &x, &grid.base)?;
        let view = BatchView::new(cr, t, enc.k1, &xp, &grid.base)?;
        let trials = combos.iter().map(|c| finish_trial(c, &view, &enc, &x, &xp)).collect::<Result<Vec<_>>>()?;
        Ok((enc.omega, trials))
    })?;
    let block_omega = per_sample_omega(&grid.base)?.powi(grid.base.n_joint as i32);
    let mean_omega = per_trial.iter().map(|(w, _)| w).sum::<f64>() / grid.trials as f64;
    let bounds = wz_error_bounds(&grid.base, &grid.vs, grid.bound_samples, aux)?;
    let nj = grid.base.n_joint as f64;
    let m = grid.trials as f64;
    let mut out = Vec::with_capacity(combos.len());
    for (ci, c) in combos.iter().enumerate() {
        let ts: Vec<&WzTrial> = per_trial.iter().map(|(_, v)| &v[ci]).collect();
        let mismatches = ts.iter().filter(|t| !t.matched).count() as f64;
        let final_mismatch = ts.iter().filter(|t| t.k_b != t.k_a).count() as f64;
        let matched: Vec<&&WzTrial> = ts.iter().filter(|t| t.matched).collect();
        let vi = grid.vs.iter().position(|v| *v == c.v).unwrap();
        let rate = mismatches / m;
        let full = 1 + (c.n / c.v.max(1)).max(1).trailing_zeros() as u64;
        let out_of_set = if c.feedback {
            ts.iter().filter(|t| t.feedback_bits != 1 && t.feedback_bits != full).count() as u64
        } else {
            0
        };
        out.push(RdPoint {
            n_joint: c.n_joint,
            n: c.n,
            v: c.v,
            log2v: c.log2v(),
            eps: c.eps,
            feedback: c.feedback,
            sigma2_yprime_given_x: c.sigma2_yprime_given_x,
            trials: grid.trials,
            rate_per_sample: ts.iter().map(|t| t.rate_bits).sum::<f64>() / m / nj,
            batch_bits: ts.iter().map(|t| t.batch_bits as f64).sum::<f64>() / m,
            feedback_bits: ts.iter().map(|t| t.feedback_bits as f64).sum::<f64>() / m,
            distortion_db: db(ts.iter().map(|t| t.sq_error).sum::<f64>() / (m * nj)),
            matched_distortion_db: db(matched.iter().map(|t| t.sq_error).sum::<f64>() / (matched.len() as f64 * nj)),
            encoder_distortion_db: db(ts.iter().map(|t| t.sq_error_encoder).sum::<f64>() / (m * nj)),
            mismatch_rate: rate,
            mismatch_se: binomial_se(rate, grid.trials),
            final_mismatch_rate: final_mismatch / m,
            decode_failures: ts.iter().filter(|t| t.decode_failed).count() as u64,
            feedback_bits_out_of_set: out_of_set,
            bound_value: bounds[vi].mean,
            bound_se: bounds[vi].se,
            mu1_realized: 3.0 * mean_omega / c.n as f64,
            block_omega,
        });
    }
    Ok(out)
}

/// One operating point with the hash size and feedback mode of `cfg`.
pub fn run_wz_experiment(cfg: &WzConfig, trials: u64, cr: &CommonRandomness, aux: &CommonRandomness) -> Result<RdPoint> {
    if trials < 1000 {
        return invalid("an operating point needs at least 1000 trials");
    }
    let grid = WzGrid { base: cfg.clone(), vs: vec![cfg.v], feedback_modes: vec![cfg.feedback], trials, bound_samples: 100_000 };
    Ok(run_wz_grid(&grid, cr, aux)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn posterior_examples() {
        let cfg = WzConfig::default();
        let p = posterior_spec(0.0, &cfg).unwrap();
        assert_eq!(p, DistributionSpec::gaussian(0.0, 1.02 - 1.0 / 1.01).unwrap());
        let cfg5 = WzConfig { sigma2_yprime_given_x: 5e-3, ..cfg.clone() };
        match posterior_spec(1.0, &cfg5).unwrap() {
            DistributionSpec::Gaussian { mean, var } => {
                assert!((mean - 1.0 / 1.01).abs() < 1e-15);
                assert!((var - 0.014_900_990_099).abs() < 1e-9);
            }
            _ => unreachable!(),
        }
        let bad = WzConfig { sigma2_yprime_given_x: -0.5, ..cfg };
        assert!(posterior_spec(0.0, &bad).is_err());
    }

    #[test]
    fn per_sample_omega_closed_form() {
        // max over x of sqrt(sy/s) exp(x^2 / (2 (sy - s))) sits at the edge.
        for s in [0.02, 0.05] {
            let cfg = WzConfig { sigma2_yprime_given_x: s, ..WzConfig::default() };
            let exact = ((1.0 + s) / s).sqrt() * (2.0f64).exp();
            let w = per_sample_omega(&cfg).unwrap();
            assert!((w / exact - 1.0).abs() < 1e-8, "{w} vs {exact}");
        }
    }

    #[test]
    fn feedback_examples() {
        assert_eq!(feedback_round(5, 5, 1 << 20, 1 << 10).unwrap().extra_bits, 1);
        let fb = feedback_round(5, 5 + 1024, 1 << 20, 1 << 10).unwrap();
        assert_eq!((fb.k2, fb.extra_bits), (5, 11));
        assert!(feedback_round(1, 1, 12, 4).is_err());
    }

    #[test]
    fn unit_hash_passes_everything() {
        let cfg = WzConfig { v: 1, n: 64, ..WzConfig::default() };
        let cr = CommonRandomness::from_u64(31);
        for t in 0..50 {
            let (x, xp) = draw_source(&cr, t, &cfg).unwrap();
            let enc = wz_encode(&cr, t, &x, &cfg).unwrap();
            assert_eq!(enc.hash(1, false), 1);
            let view = BatchView::new(&cr, t, enc.k1, &xp, &cfg).unwrap();
            let all = gumbel_select_ln(&view.ln_weights, &view.exps, |_| true).map(|j| j as u64);
            assert_eq!(view.decode(1, 1, false), all);
        }
    }

    #[test]
    fn huge_hash_matches() {
        let cfg = WzConfig { v: 1 << 60, n: 256, ..WzConfig::default() };
        let cr = CommonRandomness::from_u64(32);
        let hits = (0..300).filter(|t| wz_trial(&cr, *t, &cfg).unwrap().matched).count();
        assert_eq!(hits, 300);
    }

    #[test]
    fn bound_limits() {
        let cfg = WzConfig { eps: 0.25, ..WzConfig::default() };
        let aux = CommonRandomness::from_u64(33);
        let b = wz_error_bounds(&cfg, &[1, u64::MAX], 2000, &aux).unwrap();
        assert!((b[1].mean - (1.0 - 1.0 / 1.25)).abs() < 1e-6);
        assert!(b[0].mean > b[1].mean);
    }

    #[test]
    fn rate_accounting_matches_serialization() {
        let cr = CommonRandomness::from_u64(34);
        for fb in [false, true] {
            let cfg = WzConfig { v: 16, n: 128, n_joint: 2, feedback: fb, ..WzConfig::default() };
            for t in 0..100 {
                let tr = wz_trial(&cr, t, &cfg).unwrap();
                let bits = wz_message(&tr, &cfg).unwrap();
                assert_eq!(bits.len() as f64, tr.rate_bits);
                if fb {
                    assert_eq!(tr.k_a, tr.k_b);
                }
            }
        }
    }
}
