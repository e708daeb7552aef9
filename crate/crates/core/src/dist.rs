//! One-dimensional parametric densities, density ratios and divergences.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{invalid, Error, Result};
use crate::quad::{integrate_split, ABS_TOL};

/// Relative margin added to every computed ratio bound.
pub const OMEGA_MARGIN: f64 = 1e-9;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// A parametric 1-D distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    Gaussian { mean: f64, var: f64 },
    /// Gaussian restricted to `[lo, hi]` and renormalized.
    TruncatedGaussian { mean: f64, var: f64, lo: f64, hi: f64 },
    /// Finitely many `(value, probability)` atoms.
    Discrete { atoms: Vec<(f64, f64)> },
}

impl DistributionSpec {
    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        let d = DistributionSpec::Gaussian { mean, var };
        d.validate()?;
        Ok(d)
    }

    pub fn truncated_gaussian(mean: f64, var: f64, lo: f64, hi: f64) -> Result<Self> {
        let d = DistributionSpec::TruncatedGaussian { mean, var, lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let d = DistributionSpec::Discrete { atoms };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::Gaussian { mean, var } => {
                if !mean.is_finite() || !(var.is_finite() && *var > 0.0) {
                    return invalid(format!("gaussian needs finite mean and var > 0, got {mean}, {var}"));
                }
            }
            DistributionSpec::TruncatedGaussian { mean, var, lo, hi } => {
                if !mean.is_finite() || !(var.is_finite() && *var > 0.0) {
                    return invalid(format!("gaussian needs finite mean and var > 0, got {mean}, {var}"));
                }
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return invalid(format!("truncation needs finite lo < hi, got [{lo}, {hi}]"));
                }
                if self.trunc_mass() <= 0.0 {
                    return invalid("truncation interval carries no mass");
                }
            }
            DistributionSpec::Discrete { atoms } => {
                if atoms.is_empty() {
                    return invalid("discrete distribution needs at least one atom");
                }
                let mut total = 0.0;
                for (i, (v, p)) in atoms.iter().enumerate() {
                    if !v.is_finite() || !(*p >= 0.0) {
                        return invalid(format!("bad atom ({v}, {p})"));
                    }
                    if atoms[..i].iter().any(|(w, _)| w == v) {
                        return invalid(format!("duplicate atom {v}"));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return invalid(format!("atom probabilities sum to {total}"));
                }
            }
        }
        Ok(())
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, DistributionSpec::Discrete { .. })
    }

    /// Support interval; discrete specs report the hull of their atoms.
    pub fn support(&self) -> (f64, f64) {
        match self {
            DistributionSpec::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            DistributionSpec::TruncatedGaussian { lo, hi, .. } => (*lo, *hi),
            DistributionSpec::Discrete { atoms } => atoms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (v, _)| {
                (a.min(*v), b.max(*v))
            }),
        }
    }

    fn trunc_mass(&self) -> f64 {
        match self {
            DistributionSpec::TruncatedGaussian { mean, var, lo, hi } => {
                let sd = var.sqrt();
                normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd)
            }
            _ => 1.0,
        }
    }

    /// Natural-log density (log-pmf for discrete); `-inf` outside the support.
    pub fn ln_pdf(&self, y: f64) -> f64 {
        match self {
            DistributionSpec::Gaussian { mean, var } => {
                let d = y - mean;
                -LN_SQRT_2PI - 0.5 * var.ln() - d * d / (2.0 * var)
            }
            DistributionSpec::TruncatedGaussian { mean, var, lo, hi } => {
                if y < *lo || y > *hi {
                    return f64::NEG_INFINITY;
                }
                let d = y - mean;
                -LN_SQRT_2PI - 0.5 * var.ln() - d * d / (2.0 * var) - self.trunc_mass().ln()
            }
            DistributionSpec::Discrete { atoms } => match atoms.iter().find(|(v, _)| *v == y) {
                Some((_, p)) => p.ln(),
                None => f64::NEG_INFINITY,
            },
        }
    }

    /// Density (pmf for discrete); zero outside the support.
    pub fn pdf(&self, y: f64) -> f64 {
        self.ln_pdf(y).exp()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            DistributionSpec::Gaussian { mean, var } => normal_cdf((y - mean) / var.sqrt()),
            DistributionSpec::TruncatedGaussian { mean, var, lo, hi } => {
                if y <= *lo {
                    return 0.0;
                }
                if y >= *hi {
                    return 1.0;
                }
                let sd = var.sqrt();
                let a = normal_cdf((lo - mean) / sd);
                (normal_cdf((y - mean) / sd) - a) / self.trunc_mass()
            }
            DistributionSpec::Discrete { atoms } => atoms.iter().filter(|(v, _)| *v <= y).map(|(_, p)| p).sum(),
        }
    }

    /// Inverse-CDF transform of `u` in (0, 1).
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            DistributionSpec::Gaussian { mean, var } => mean + var.sqrt() * normal_quantile(u),
            DistributionSpec::TruncatedGaussian { mean, var, lo, hi } => {
                let sd = var.sqrt();
                let a = normal_cdf((lo - mean) / sd);
                let b = normal_cdf((hi - mean) / sd);
                let y = mean + sd * normal_quantile(a + u * (b - a));
                y.clamp(*lo, *hi)
            }
            DistributionSpec::Discrete { atoms } => {
                let mut acc = 0.0;
                for (v, p) in atoms {
                    acc += p;
                    if u <= acc {
                        return *v;
                    }
                }
                // Rounding left the total slightly below one.
                atoms.iter().rev().find(|(_, p)| *p > 0.0).map(|(v, _)| *v).unwrap_or(atoms[0].0)
            }
        }
    }

    fn gauss_params(&self) -> Option<(f64, f64)> {
        match self {
            DistributionSpec::Gaussian { mean, var } | DistributionSpec::TruncatedGaussian { mean, var, .. } => {
                Some((*mean, *var))
            }
            DistributionSpec::Discrete { .. } => None,
        }
    }

    /// Break points for quadrature: means and a ladder of standard deviations.
    fn quad_breaks(&self, out: &mut Vec<f64>) {
        if let Some((m, v)) = self.gauss_params() {
            let sd = v.sqrt();
            for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
                out.push(m + k * sd);
            }
        }
        if let DistributionSpec::TruncatedGaussian { lo, hi, .. } = self {
            out.push(*lo);
            out.push(*hi);
        }
    }

    /// `mean ± 10 sd`, clipped to the support.
    fn quad_range(&self) -> (f64, f64) {
        let (m, v) = self.gauss_params().expect("continuous");
        let sd = v.sqrt();
        let (lo, hi) = self.support();
        ((m - 10.0 * sd).max(lo), (m + 10.0 * sd).min(hi))
    }
}

/// Log density in bits. Errors outside the support.
pub fn log_density(spec: &DistributionSpec, y: f64) -> Result<f64> {
    let l = spec.ln_pdf(y);
    if l == f64::NEG_INFINITY {
        return Err(Error::Domain(format!("{y} is outside the support of {spec}")));
    }
    Ok(l / LN_2)
}

/// Inverse-CDF sample; same `(spec, u)` gives the same bits.
pub fn sample(spec: &DistributionSpec, u: f64) -> f64 {
    spec.sample(u)
}

/// `max_y P(y)/Q(y)`, inflated by [`OMEGA_MARGIN`].
pub fn ratio_bound(p: &DistributionSpec, q: &DistributionSpec) -> Result<f64> {
    if p == q {
        return Ok(1.0);
    }
    let raw = match (p, q) {
        (DistributionSpec::Discrete { atoms: pa }, DistributionSpec::Discrete { .. }) => {
            let mut best: f64 = 0.0;
            for (v, pv) in pa {
                if *pv == 0.0 {
                    continue;
                }
                let qv = q.pdf(*v);
                if qv == 0.0 {
                    return Err(Error::Unbounded(format!("target atom {v} has no proposal mass")));
                }
                best = best.max(pv / qv);
            }
            best
        }
        (DistributionSpec::Discrete { .. }, _) | (_, DistributionSpec::Discrete { .. }) => {
            return invalid("ratio bound between a discrete and a continuous distribution");
        }
        _ => {
            let (mp, vp) = p.gauss_params().unwrap();
            let (mq, vq) = q.gauss_params().unwrap();
            let (plo, phi) = p.support();
            let (qlo, qhi) = q.support();
            if plo < qlo || phi > qhi {
                return Err(Error::Unbounded("target support extends beyond the proposal support".into()));
            }
            let mut cands = Vec::with_capacity(3);
            if vp < vq {
                let ys = (mp * vq - mq * vp) / (vq - vp);
                cands.push(ys.clamp(plo, phi));
            } else if plo.is_infinite() || phi.is_infinite() {
                if vp == vq && mp == mq {
                    cands.push(mp);
                } else {
                    return Err(Error::Unbounded(format!(
                        "target variance {vp} is not below proposal variance {vq}"
                    )));
                }
            }
            for e in [plo, phi] {
                if e.is_finite() {
                    cands.push(e);
                }
            }
            cands.iter().map(|&y| (p.ln_pdf(y) - q.ln_pdf(y)).exp()).fold(0.0, f64::max)
        }
    };
    Ok(raw * (1.0 + OMEGA_MARGIN))
}

/// Divergences between a target `P` and a proposal `Q`. Infinite values are
/// reported as `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceReport {
    /// `D(P || Q)` in bits.
    pub kl_bits: f64,
    pub tv: f64,
    /// `E_Q[Q/P]`.
    pub d2: f64,
    pub omega: f64,
}

pub fn divergences(p: &DistributionSpec, q: &DistributionSpec) -> DivergenceReport {
    DivergenceReport {
        kl_bits: kl_bits(p, q),
        tv: total_variation(p, q),
        d2: d2(q, p),
        omega: ratio_bound(p, q).unwrap_or(f64::INFINITY),
    }
}

fn union_atoms(p: &[(f64, f64)], q: &[(f64, f64)]) -> Vec<f64> {
    let mut v: Vec<f64> = p.iter().chain(q).map(|(x, _)| *x).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// `D(P || Q)` in bits.
pub fn kl_bits(p: &DistributionSpec, q: &DistributionSpec) -> f64 {
    match (p, q) {
        (DistributionSpec::Gaussian { mean: mp, var: vp }, DistributionSpec::Gaussian { mean: mq, var: vq }) => {
            let d = mp - mq;
            0.5 * ((vq / vp).ln() + (vp + d * d) / vq - 1.0) / LN_2
        }
        (DistributionSpec::Discrete { atoms }, DistributionSpec::Discrete { .. }) => {
            let mut s = 0.0;
            for (v, pv) in atoms {
                if *pv == 0.0 {
                    continue;
                }
                let qv = q.pdf(*v);
                if qv == 0.0 {
                    return f64::INFINITY;
                }
                s += pv * (pv / qv).log2();
            }
            s
        }
        (DistributionSpec::Discrete { .. }, _) | (_, DistributionSpec::Discrete { .. }) => f64::INFINITY,
        _ => kl_bits_quadrature(p, q),
    }
}

/// KL by adaptive quadrature over the target's effective range.
pub fn kl_bits_quadrature(p: &DistributionSpec, q: &DistributionSpec) -> f64 {
    let (plo, phi) = p.support();
    let (qlo, qhi) = q.support();
    if plo < qlo || phi > qhi {
        return f64::INFINITY;
    }
    let (a, b) = p.quad_range();
    let mut br = Vec::new();
    p.quad_breaks(&mut br);
    q.quad_breaks(&mut br);
    let f = |y: f64| {
        let lp = p.ln_pdf(y);
        if lp == f64::NEG_INFINITY {
            return 0.0;
        }
        lp.exp() * (lp - q.ln_pdf(y))
    };
    integrate_split(&f, a, b, &br, ABS_TOL) / LN_2
}

/// Total variation distance.
pub fn total_variation(p: &DistributionSpec, q: &DistributionSpec) -> f64 {
    match (p, q) {
        (DistributionSpec::Discrete { atoms: pa }, DistributionSpec::Discrete { atoms: qa }) => {
            0.5 * union_atoms(pa, qa).iter().map(|&v| (p.pdf(v) - q.pdf(v)).abs()).sum::<f64>()
        }
        (DistributionSpec::Discrete { .. }, _) | (_, DistributionSpec::Discrete { .. }) => 1.0,
        _ => {
            let (pa, pb) = p.quad_range();
            let (qa, qb) = q.quad_range();
            let mut br = Vec::new();
            p.quad_breaks(&mut br);
            q.quad_breaks(&mut br);
            let f = |y: f64| (p.pdf(y) - q.pdf(y)).abs();
            let tv = 0.5 * integrate_split(&f, pa.min(qa), pb.max(qb), &br, ABS_TOL);
            tv.clamp(0.0, 1.0)
        }
    }
}

/// `d2(Q || P) = E_Q[Q/P]`, argument order as written.
pub fn d2(q: &DistributionSpec, p: &DistributionSpec) -> f64 {
    match (q, p) {
        (DistributionSpec::Gaussian { mean: mq, var: vq }, DistributionSpec::Gaussian { mean: mp, var: vp }) => {
            // Integral of exp(-a y^2 + b y + c) scaled by the normalizers.
            let a = 1.0 / vq - 0.5 / vp;
            if !(a > 0.0) {
                return f64::INFINITY;
            }
            let b = 2.0 * mq / vq - mp / vp;
            let c = -mq * mq / vq + mp * mp / (2.0 * vp);
            let ln_pref = 0.5 * (2.0 * PI * vp).ln() - (2.0 * PI * vq).ln();
            (ln_pref + 0.5 * (PI / a).ln() + b * b / (4.0 * a) + c).exp()
        }
        (DistributionSpec::Discrete { atoms }, DistributionSpec::Discrete { .. }) => {
            let mut s = 0.0;
            for (v, qv) in atoms {
                if *qv == 0.0 {
                    continue;
                }
                let pv = p.pdf(*v);
                if pv == 0.0 {
                    return f64::INFINITY;
                }
                s += qv * qv / pv;
            }
            s
        }
        (DistributionSpec::Discrete { .. }, _) | (_, DistributionSpec::Discrete { .. }) => f64::INFINITY,
        _ => d2_quadrature(q, p),
    }
}

/// `E_Q[Q/P]` by quadrature; infinite when `Q` puts mass where `P` has none
/// or the integrand does not decay.
pub fn d2_quadrature(q: &DistributionSpec, p: &DistributionSpec) -> f64 {
    let (plo, phi) = p.support();
    let (qlo, qhi) = q.support();
    if qlo < plo || qhi > phi {
        return f64::INFINITY;
    }
    if let (Some((_, vq)), Some((_, vp))) = (q.gauss_params(), p.gauss_params()) {
        if qlo.is_infinite() && 2.0 * vp <= vq {
            return f64::INFINITY;
        }
    }
    let (a, b) = q.quad_range();
    let mut br = Vec::new();
    p.quad_breaks(&mut br);
    q.quad_breaks(&mut br);
    let f = |y: f64| (2.0 * q.ln_pdf(y) - p.ln_pdf(y)).exp();
    integrate_split(&f, a, b, &br, ABS_TOL)
}

/// `log2 P_cond(y) - log2 P_marg(y)`.
pub fn information_density(p_cond: &DistributionSpec, p_marg: &DistributionSpec, y: f64) -> Result<f64> {
    let m = p_marg.ln_pdf(y);
    if m == f64::NEG_INFINITY {
        return Err(Error::Domain(format!("marginal density is zero at {y}")));
    }
    Ok(log_density(p_cond, y)? - m / LN_2)
}

/// Log importance weight `ln P(y) - ln Q(y)` for a target/proposal pair.
#[derive(Debug, Clone)]
pub struct Ratio {
    p: DistributionSpec,
    q: DistributionSpec,
    gauss: Option<GaussRatio>,
}

#[derive(Debug, Clone, Copy)]
struct GaussRatio {
    mp: f64,
    inv2vp: f64,
    mq: f64,
    inv2vq: f64,
    c: f64,
    lo: f64,
    hi: f64,
}

impl Ratio {
    pub fn new(p: &DistributionSpec, q: &DistributionSpec) -> Self {
        let gauss = match (p, q) {
            (
                DistributionSpec::Gaussian { mean: mp, var: vp } | DistributionSpec::TruncatedGaussian { mean: mp, var: vp, .. },
                DistributionSpec::Gaussian { mean: mq, var: vq },
            ) => {
                let (lo, hi) = p.support();
                Some(GaussRatio {
                    mp: *mp,
                    inv2vp: 0.5 / vp,
                    mq: *mq,
                    inv2vq: 0.5 / vq,
                    c: 0.5 * (vq / vp).ln() - p.trunc_mass().ln(),
                    lo,
                    hi,
                })
            }
            _ => None,
        };
        Ratio { p: p.clone(), q: q.clone(), gauss }
    }

    pub fn target(&self) -> &DistributionSpec {
        &self.p
    }

    pub fn proposal(&self) -> &DistributionSpec {
        &self.q
    }

    #[inline]
    pub fn ln_weight(&self, y: f64) -> f64 {
        match &self.gauss {
            Some(g) => {
                if y < g.lo || y > g.hi {
                    return f64::NEG_INFINITY;
                }
                let dp = y - g.mp;
                let dq = y - g.mq;
                g.c - dp * dp * g.inv2vp + dq * dq * g.inv2vq
            }
            None => {
                let lp = self.p.ln_pdf(y);
                if lp == f64::NEG_INFINITY {
                    return lp;
                }
                lp - self.q.ln_pdf(y)
            }
        }
    }

    #[inline]
    pub fn weight(&self, y: f64) -> f64 {
        self.ln_weight(y).exp()
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionSpec::Gaussian { mean, var } => write!(f, "kind=gaussian mean={mean} var={var}"),
            DistributionSpec::TruncatedGaussian { mean, var, lo, hi } => {
                write!(f, "kind=truncated-gaussian mean={mean} var={var} lo={lo} hi={hi}")
            }
            DistributionSpec::Discrete { atoms } => {
                write!(f, "kind=discrete atoms=")?;
                for (i, (v, p)) in atoms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}:{p}")?;
                }
                Ok(())
            }
        }
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse(format!("{key}: not a number: {s:?}")))
}

impl FromStr for DistributionSpec {
    type Err = Error;

    /// Parses the flat `key=value` form, e.g. `kind=gaussian mean=0 var=1`.
    fn from_str(s: &str) -> Result<Self> {
        let mut kind = None;
        let (mut mean, mut var, mut lo, mut hi, mut atoms) = (None, None, None, None, None);
        for tok in s.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {tok:?}")))?;
            match k {
                "kind" => kind = Some(v.to_string()),
                "mean" => mean = Some(parse_f64(k, v)?),
                "var" => var = Some(parse_f64(k, v)?),
                "lo" => lo = Some(parse_f64(k, v)?),
                "hi" => hi = Some(parse_f64(k, v)?),
                "atoms" => {
                    let mut list = Vec::new();
                    for a in v.split(',') {
                        let (x, p) = a
                            .split_once(':')
                            .ok_or_else(|| Error::Parse(format!("atom {a:?} is not value:prob")))?;
                        list.push((parse_f64(k, x)?, parse_f64(k, p)?));
                    }
                    atoms = Some(list);
                }
                _ => return Err(Error::Parse(format!("unknown key {k:?}"))),
            }
        }
        let need = |o: Option<f64>, k: &str| o.ok_or_else(|| Error::Parse(format!("missing {k}")));
        let spec = match kind.as_deref() {
            Some("gaussian") => DistributionSpec::Gaussian { mean: need(mean, "mean")?, var: need(var, "var")? },
            Some("truncated-gaussian") => DistributionSpec::TruncatedGaussian {
                mean: need(mean, "mean")?,
                var: need(var, "var")?,
                lo: need(lo, "lo")?,
                hi: need(hi, "hi")?,
            },
            Some("discrete") => DistributionSpec::Discrete {
                atoms: atoms.ok_or_else(|| Error::Parse("missing atoms".into()))?,
            },
            Some(other) => return Err(Error::Parse(format!("unknown kind {other:?}"))),
            None => return Err(Error::Parse("missing kind".into())),
        };
        spec.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(m: f64, v: f64) -> DistributionSpec {
        DistributionSpec::gaussian(m, v).unwrap()
    }

    #[test]
    fn standard_normal_mode() {
        let l = log_density(&g(0.0, 1.0), 0.0).unwrap();
        assert!((l - (1.0 / (2.0 * PI).sqrt()).log2()).abs() < 1e-12);
        assert!((l + 1.3257).abs() < 1e-4);
    }

    #[test]
    fn discrete_log_pmf() {
        let d = DistributionSpec::discrete(vec![(1.0, 0.5), (2.0, 0.5)]).unwrap();
        assert_eq!(log_density(&d, 1.0).unwrap(), -1.0);
        assert!(log_density(&d, 3.0).is_err());
    }

    #[test]
    fn truncated_normalizer_matches_quadrature() {
        let t = DistributionSpec::truncated_gaussian(0.0, 1.0, -2.0, 2.0).unwrap();
        let mass = crate::quad::adaptive_simpson(&|y: f64| (-0.5 * y * y).exp() / (2.0 * PI).sqrt(), -2.0, 2.0, 1e-13);
        let expect = (1.0 / (2.0 * PI).sqrt()).log2() - mass.log2();
        assert!((log_density(&t, 0.0).unwrap() - expect).abs() < 1e-9);
        assert!(log_density(&t, 2.5).is_err());
    }

    #[test]
    fn sampling_examples() {
        assert_eq!(sample(&g(0.0, 1.0), 0.5), 0.0);
        let d = DistributionSpec::discrete(vec![(1.0, 0.25), (2.0, 0.75)]).unwrap();
        assert_eq!(sample(&d, 0.1), 1.0);
        assert_eq!(sample(&d, 0.3), 2.0);
        // u = Phi(1) lands one standard deviation above the mean.
        let y = sample(&g(1.0, 0.01), normal_cdf(1.0));
        assert!((y - 1.1).abs() < 1e-9);
        assert!((sample(&g(1.0, 0.01), 0.8413) - 1.1).abs() < 1e-4);
    }

    #[test]
    fn ratio_bound_examples() {
        assert_eq!(ratio_bound(&g(0.0, 1.0), &g(0.0, 1.0)).unwrap(), 1.0);
        let w = ratio_bound(&g(1.0, 0.01), &g(0.0, 1.0)).unwrap();
        // Dense grid oracle over [-10, 10].
        let grid = (0..=2_000_000)
            .map(|i| -10.0 + 20.0 * i as f64 / 2e6)
            .map(|y| g(1.0, 0.01).pdf(y) / g(0.0, 1.0).pdf(y))
            .fold(0.0, f64::max);
        assert!(w >= grid);
        assert!((w - grid).abs() / grid < 1e-6);
        assert!((w - 16.57).abs() < 0.01);
        assert!(matches!(ratio_bound(&g(0.0, 2.0), &g(0.0, 1.0)), Err(Error::Unbounded(_))));
    }

    #[test]
    fn truncated_target_ratio_uses_its_support() {
        let p = DistributionSpec::truncated_gaussian(0.0, 2.0, -2.0, 2.0).unwrap();
        let q = g(0.0, 1.0);
        let w = ratio_bound(&p, &q).unwrap();
        let grid = (0..=40_000)
            .map(|i| -2.0 + 4.0 * i as f64 / 4e4)
            .map(|y| p.pdf(y) / q.pdf(y))
            .fold(0.0, f64::max);
        assert!(w >= grid && (w - grid) / grid < 1e-6);
    }

    #[test]
    fn divergence_examples() {
        let r = divergences(&g(0.3, 0.5), &g(0.3, 0.5));
        assert_eq!((r.kl_bits, r.tv, r.d2), (0.0, 0.0, 1.0));
        let kl = kl_bits(&g(1.0, 0.01), &g(0.0, 1.0));
        let nats = 0.5 * (0.01 + 1.0 - 1.0 - 0.01f64.ln());
        assert!((kl - nats / LN_2).abs() < 1e-12);
        assert!((kl - 3.329).abs() < 1e-3);
        assert!((kl - kl_bits_quadrature(&g(1.0, 0.01), &g(0.0, 1.0))).abs() < 1e-6);
        assert_eq!(d2(&g(0.0, 100.0), &g(0.5, 0.7)), f64::INFINITY);
        assert_eq!(d2_quadrature(&g(0.0, 100.0), &g(0.5, 0.7)), f64::INFINITY);
    }

    #[test]
    fn d2_closed_form_matches_quadrature() {
        let q = g(0.0, 1.0);
        let p = g(0.5, 0.7);
        let closed = d2(&q, &p);
        let quad = d2_quadrature(&q, &p);
        assert!(closed.is_finite() && closed >= 1.0);
        assert!((closed - quad).abs() < 1e-8, "{closed} vs {quad}");
    }

    #[test]
    fn tv_of_shifted_gaussians() {
        // Equal variances: TV = 2 Phi(|dm| / (2 sd)) - 1.
        let tv = total_variation(&g(0.5, 0.7), &g(-0.5, 0.7));
        let expect = 2.0 * normal_cdf(0.5 / 0.7f64.sqrt()) - 1.0;
        assert!((tv - expect).abs() < 1e-8);
    }

    #[test]
    fn information_density_examples() {
        let p = g(1.0, 0.01);
        let m = g(0.0, 1.0);
        assert_eq!(information_density(&m, &m, 0.7).unwrap(), 0.0);
        let direct = (1.0 / (0.1 * (2.0 * PI).sqrt())).log2() - ((-0.5f64).exp() / (2.0 * PI).sqrt()).log2();
        let v = information_density(&p, &m, 1.0).unwrap();
        assert!((v - direct).abs() < 1e-12);
        assert!((v - 4.0433).abs() < 1e-4);
        // At the maximizer of the ratio the density equals log2 omega.
        let ys = 1.0 / 0.99;
        let w = ratio_bound(&p, &m).unwrap();
        assert!((information_density(&p, &m, ys).unwrap() - w.log2()).abs() < 1e-8);
        let t = DistributionSpec::truncated_gaussian(0.0, 1.0, -1.0, 1.0).unwrap();
        assert!(information_density(&m, &t, 3.0).is_err());
    }

    #[test]
    fn parse_roundtrip() {
        for s in [
            "kind=gaussian mean=0 var=1",
            "kind=truncated-gaussian mean=0 var=1 lo=-2 hi=2",
            "kind=discrete atoms=1:0.25,2:0.75",
        ] {
            let d: DistributionSpec = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert!("kind=gaussian mean=0 var=-1".parse::<DistributionSpec>().is_err());
        assert!("kind=gaussian mean=0 var=1 colour=red".parse::<DistributionSpec>().is_err());
    }

    #[test]
    fn ratio_weight_matches_densities() {
        let p = DistributionSpec::truncated_gaussian(0.3, 0.2, -1.0, 1.5).unwrap();
        let q = g(0.0, 1.0);
        let r = Ratio::new(&p, &q);
        for y in [-0.9, 0.0, 0.4, 1.4] {
            assert!((r.weight(y) - p.pdf(y) / q.pdf(y)).abs() < 1e-12);
        }
        assert_eq!(r.weight(2.0), 0.0);
    }
}
