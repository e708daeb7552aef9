//! Experiment drivers. Each produces one or more [`Table`]s; bound checks are
//! evaluated from the tables alone (see [`crate::checks`]).

use std::f64::consts::LOG2_E;

use anyhow::{Context, Result};
use chansim::coder::{
    ers_decode, ers_encode, rs_bin_decode, rs_bin_encode, rs_sort_decode, rs_sort_encode, CodedMessage, Part,
    RateModel,
};
use chansim::dist::{kl_bits, ratio_bound, DistributionSpec};
use chansim::matching::{
    bound_ers, bound_iml, bound_pml, bound_rs, matching_sweep, MatchingConfig, MatchingSetup, Protocol,
};
use chansim::samplers::{cached_delta, ers_select, rs_select, GrsExample};
use chansim::stats::{binomial_se, mean_se, run_trials};
use chansim::wynerziv::{run_wz_grid, WzConfig, WzGrid};

use crate::config::{Experiment, ExperimentConfig};
use crate::table::{fmt_f64, fmt_opt, Table};

/// A table together with the file-name suffix it is written under
/// (empty for the main table).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub suffix: &'static str,
    pub table: Table,
}

pub const RS_CODING_COLUMNS: &[&str] = &[
    "experiment",
    "seed",
    "sigma2",
    "trials",
    "omega",
    "kl_bits",
    "e_log2_l",
    "e_log2_l_se",
    "e_log2_khat",
    "e_log2_khat_se",
    "khat_bound",
    "mean_k",
    "ideal_bits",
    "wire_bits",
    "prop1_bound",
    "bin_ideal_bits",
    "bin_wire_bits",
    "sort_failures",
    "bin_failures",
    "wire_failures",
];

pub const ERS_CODING_COLUMNS: &[&str] = &[
    "experiment",
    "seed",
    "sigma2",
    "N",
    "trials",
    "omega",
    "delta_lower",
    "delta_x",
    "scale",
    "kl_bits",
    "e_log2_l",
    "e_log2_l_se",
    "e_log2_k1hat",
    "e_log2_k1hat_se",
    "e_log2_k2hat",
    "e_log2_k2hat_se",
    "e_log2_sum",
    "e_log2_sum_se",
    "sum_bound",
    "mean_proposals",
    "ideal_bits",
    "wire_bits",
    "prop2_bound",
    "decode_failures",
    "wire_failures",
];

pub const MATCHING_COLUMNS: &[&str] = &[
    "experiment",
    "seed",
    "protocol",
    "N",
    "N_star",
    "trials",
    "match_rate",
    "std_err",
    "ci_lo",
    "ci_hi",
    "bound_value",
    "comm_bits",
    "variance_estimate",
    "variance_se",
];

pub const MATCHING_BIN_COLUMNS: &[&str] =
    &["experiment", "seed", "protocol", "N", "bin", "y_lo", "y_hi", "count", "match_rate", "std_err", "bound_value"];

pub const WZ_COLUMNS: &[&str] = &[
    "experiment",
    "seed",
    "sigma2_yprime_given_x",
    "n_joint",
    "N",
    "V",
    "log2V",
    "eps",
    "feedback",
    "trials",
    "rate_per_sample",
    "batch_bits",
    "feedback_bits",
    "distortion_db",
    "matched_distortion_db",
    "encoder_distortion_db",
    "target_db",
    "mismatch_rate",
    "mismatch_se",
    "final_mismatch_rate",
    "decode_failures",
    "feedback_bits_out_of_set",
    "bound_value",
    "bound_se",
    "mu1_realized",
    "block_omega",
];

pub const GRS_COLUMNS: &[&str] = &[
    "experiment",
    "seed",
    "k",
    "trials",
    "grs_count",
    "grs_match_rate",
    "grs_se",
    "grs_expected",
    "pml_count",
    "pml_match_rate",
    "pml_se",
    "pml_claimed",
    "pml_closed_form",
];

pub const BOUNDS_COLUMNS: &[&str] = &[
    "experiment",
    "seed",
    "N",
    "y",
    "p_a",
    "p_b",
    "rs_bound",
    "rs_lower_form",
    "pml_bound",
    "iml_bound",
    "ers_nocomm_bound",
    "ers_batchcomm_bound",
];

/// Runs the configured experiment, on a dedicated thread pool when
/// `threads` is set.
pub fn run(cfg: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<Vec<Output>> {
    cfg.validate()?;
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .context("building thread pool")?
            .install(|| dispatch(cfg, progress)),
        None => dispatch(cfg, progress),
    }
}

fn dispatch(cfg: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<Vec<Output>> {
    let main = |table| vec![Output { suffix: "", table }];
    Ok(match cfg.experiment {
        Experiment::RsCoding => main(rs_coding(cfg, progress)?),
        Experiment::ErsCoding => main(ers_coding(cfg, progress)?),
        Experiment::Matching => matching(cfg, progress)?,
        Experiment::Wz => main(wz(cfg, progress)?),
        Experiment::GrsExample => main(grs(cfg, progress)?),
        Experiment::Bounds => main(bounds(cfg)?),
    })
}

fn head(cfg: &ExperimentConfig) -> Vec<String> {
    vec![cfg.experiment.to_string(), cfg.seed.clone()]
}

fn log2(k: u64) -> f64 {
    (k as f64).log2()
}

/// Target and proposal of the coding experiments.
fn coding_pair(sigma2: f64) -> Result<(DistributionSpec, DistributionSpec)> {
    Ok((DistributionSpec::gaussian(1.0, sigma2)?, DistributionSpec::gaussian(0.0, 1.0)?))
}

struct RsCodingTrial {
    k: u64,
    sort: CodedMessage,
    bin: CodedMessage,
    sort_ok: bool,
    bin_ok: bool,
    wire_ok: bool,
}

fn wire_roundtrip(m: &CodedMessage) -> bool {
    let labels: Vec<Part> = m.parts.iter().map(|(p, _)| *p).collect();
    CodedMessage::from_bits(&m.to_bits(), &labels).is_ok_and(|b| &b == m)
}

fn mean_rate(model: &RateModel, msgs: &[CodedMessage]) -> (f64, f64) {
    let n = msgs.len() as f64;
    msgs.iter().map(|m| model.rate(m)).fold((0.0, 0.0), |(i, w), r| (i + r.ideal_bits / n, w + r.wire_bits / n))
}

/// Rejection sampling with the sorting and binning codecs.
pub fn rs_coding(cfg: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<Table> {
    let cr = cfg.randomness()?;
    let mut table = Table::new(RS_CODING_COLUMNS);
    for &s2 in &cfg.sigma2 {
        progress(&format!("rs-coding sigma2={s2}"));
        let (p, q) = coding_pair(s2)?;
        let omega = ratio_bound(&p, &q)?;
        let trials = run_trials(cfg.trials, |t| {
            let (k, y) = rs_select(&cr, t, &p, &q, omega)?;
            let (l, k_hat) = rs_sort_encode(&cr, t, k, omega)?;
            let sort_ok = rs_sort_decode(&cr, t, l, k_hat, omega)? == k;
            let (tb, g) = rs_bin_encode(&cr, t, k, omega)?;
            let (kb, yb) = rs_bin_decode(&cr, t, tb, g, &q, omega)?;
            let sort = CodedMessage::new(vec![(Part::L, l), (Part::K1Hat, k_hat)])?;
            let bin = CodedMessage::new(vec![(Part::T, tb), (Part::G, g)])?;
            let wire_ok = wire_roundtrip(&sort) && wire_roundtrip(&bin);
            Ok(RsCodingTrial { k, sort, bin, sort_ok, bin_ok: kb == k && yb[0] == y, wire_ok })
        })?;
        let sort: Vec<CodedMessage> = trials.iter().map(|t| t.sort.clone()).collect();
        let bin: Vec<CodedMessage> = trials.iter().map(|t| t.bin.clone()).collect();
        let (ideal, wire) = mean_rate(&RateModel::fit(&sort)?, &sort);
        let (bin_ideal, bin_wire) = mean_rate(&RateModel::fit(&bin)?, &bin);
        let log_l = mean_se(&sort.iter().map(|m| log2(m.value(Part::L).unwrap())).collect::<Vec<_>>());
        let log_kh = mean_se(&sort.iter().map(|m| log2(m.value(Part::K1Hat).unwrap())).collect::<Vec<_>>());
        let kl = kl_bits(&p, &q);
        let count = |f: &dyn Fn(&RsCodingTrial) -> bool| trials.iter().filter(|t| !f(t)).count().to_string();
        let mut row = head(cfg);
        row.extend([
            fmt_f64(s2),
            cfg.trials.to_string(),
            fmt_f64(omega),
            fmt_f64(kl),
            fmt_f64(log_l.mean),
            fmt_f64(log_l.se),
            fmt_f64(log_kh.mean),
            fmt_f64(log_kh.se),
            fmt_f64(kl + LOG2_E),
            fmt_f64(trials.iter().map(|t| t.k as f64).sum::<f64>() / cfg.trials as f64),
            fmt_f64(ideal),
            fmt_f64(wire),
            fmt_f64(kl + (kl + 1.0).log2() + 9.0),
            fmt_f64(bin_ideal),
            fmt_f64(bin_wire),
            count(&|t| t.sort_ok),
            count(&|t| t.bin_ok),
            count(&|t| t.wire_ok),
        ]);
        table.push(row);
    }
    Ok(table)
}

struct ErsCodingTrial {
    msg: CodedMessage,
    proposals: u64,
    decode_ok: bool,
    wire_ok: bool,
}

/// Scaled ensemble rejection sampling with the three-part codec.
pub fn ers_coding(cfg: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<Table> {
    let cr = cfg.randomness()?;
    let mut table = Table::new(ERS_CODING_COLUMNS);
    for (s2, n) in cfg.coding_points() {
        progress(&format!("ers-coding sigma2={s2} N={n}"));
        let (p, q) = coding_pair(s2)?;
        let omega = ratio_bound(&p, &q)?;
        let delta = cached_delta(&p, &q, omega, n)?;
        let scale = delta.scale();
        let trials = run_trials(cfg.trials, |t| {
            let sel = ers_select(&cr, t, &p, &q, omega, n, scale)?;
            let (l, k1h, k2h) = ers_encode(&cr, t, &sel, omega, n)?;
            let dec = ers_decode(&cr, t, l, k1h, k2h, omega, n, &q)?;
            let msg = CodedMessage::new(vec![(Part::L, l), (Part::K1Hat, k1h), (Part::K2Hat, k2h)])?;
            Ok(ErsCodingTrial {
                wire_ok: wire_roundtrip(&msg),
                msg,
                proposals: sel.n_proposals_consumed,
                decode_ok: dec.k == sel.k && dec.y == sel.y,
            })
        })?;
        let msgs: Vec<CodedMessage> = trials.iter().map(|t| t.msg.clone()).collect();
        let (ideal, wire) = mean_rate(&RateModel::fit(&msgs)?, &msgs);
        let part = |p: Part| msgs.iter().map(|m| log2(m.value(p).unwrap())).collect::<Vec<f64>>();
        let (l, k1, k2) = (part(Part::L), part(Part::K1Hat), part(Part::K2Hat));
        let sum: Vec<f64> = k1.iter().zip(&k2).map(|(a, b)| a + b).collect();
        let (l, k1, k2, sum) = (mean_se(&l), mean_se(&k1), mean_se(&k2), mean_se(&sum));
        let kl = kl_bits(&p, &q);
        let mut row = head(cfg);
        row.extend([
            fmt_f64(s2),
            n.to_string(),
            cfg.trials.to_string(),
            fmt_f64(omega),
            fmt_f64(delta.delta_lower),
            fmt_f64(delta.delta_x),
            fmt_f64(scale),
            fmt_f64(kl),
            fmt_f64(l.mean),
            fmt_f64(l.se),
            fmt_f64(k1.mean),
            fmt_f64(k1.se),
            fmt_f64(k2.mean),
            fmt_f64(k2.se),
            fmt_f64(sum.mean),
            fmt_f64(sum.se),
            fmt_f64(kl + 2.0 * LOG2_E + 3.0),
            fmt_f64(trials.iter().map(|t| t.proposals as f64).sum::<f64>() / cfg.trials as f64),
            fmt_f64(ideal),
            fmt_f64(wire),
            fmt_f64(kl + 2.0 * (kl + 8.0).log2() + 12.0),
            trials.iter().filter(|t| !t.decode_ok).count().to_string(),
            trials.iter().filter(|t| !t.wire_ok).count().to_string(),
        ]);
        table.push(row);
    }
    Ok(table)
}

/// Matching sweep: one aggregate table and one table of conditional bins.
pub fn matching(cfg: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<Vec<Output>> {
    let cr = cfg.randomness()?;
    let mc = MatchingConfig {
        party_a: cfg.party_a.clone(),
        party_b: cfg.party_b.clone(),
        proposal: cfg.proposal.clone(),
        n_grid: cfg.n.clone(),
        protocols: cfg.protocols.clone(),
        trials: cfg.trials,
        bins: cfg.bins,
    };
    let setup = MatchingSetup::new(&mc.party_a, &mc.party_b, &mc.proposal)?;
    let sweep = matching_sweep(&mc, &cr, progress)?;
    // The unconditional rejection-sampling rate is known exactly.
    let rs_exact = (1.0 - setup.tv) / (1.0 + setup.tv);
    let mut rows = Table::new(MATCHING_COLUMNS);
    for r in &sweep.rows {
        let bound = if r.protocol == Protocol::Rs { Some(rs_exact) } else { r.bound_value };
        let mut row = head(cfg);
        row.extend([
            r.protocol.to_string(),
            r.n.to_string(),
            fmt_f64(r.n_star),
            r.trials.to_string(),
            fmt_f64(r.match_rate),
            fmt_f64(r.std_err),
            fmt_f64(r.ci_lo),
            fmt_f64(r.ci_hi),
            fmt_opt(bound),
            fmt_f64(r.comm_bits),
            fmt_f64(r.variance_estimate),
            fmt_f64(r.variance_se),
        ]);
        rows.push(row);
    }
    let mut bins = Table::new(MATCHING_BIN_COLUMNS);
    for b in &sweep.bins {
        let mut row = head(cfg);
        row.extend([
            b.protocol.to_string(),
            b.n.to_string(),
            b.bin.to_string(),
            fmt_f64(b.y_lo),
            fmt_f64(b.y_hi),
            b.count.to_string(),
            fmt_f64(b.match_rate),
            fmt_f64(b.std_err),
            fmt_opt(b.bound_value),
        ]);
        bins.push(row);
    }
    let mut out = vec![Output { suffix: "", table: rows }];
    if cfg.bins > 0 {
        out.push(Output { suffix: "bins", table: bins });
    }
    Ok(out)
}

/// Hash size used for a requested `log2 V`.
pub fn hash_size(log2v: f64) -> u64 {
    (2f64.powf(log2v).round() as u64).max(1)
}

/// Wyner-Ziv rate-distortion grid.
pub fn wz(cfg: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<Table> {
    let cr = cfg.randomness()?;
    let aux = cr.derive(1);
    let vs: Vec<u64> = cfg.log2v.iter().map(|l| hash_size(*l)).collect();
    let mut table = Table::new(WZ_COLUMNS);
    for &s2 in &cfg.sigma2 {
        for &nj in &cfg.n_joint {
            for &n in &cfg.n {
                progress(&format!("wz sigma2={s2} n_joint={nj} N={n}"));
                let base = WzConfig {
                    sigma2_yprime_given_x: s2,
                    sigma2_xprime_given_x: cfg.sigma2_xprime,
                    n,
                    n_joint: nj,
                    eps: cfg.eps,
                    v: vs[0],
                    feedback: false,
                    ..WzConfig::default()
                };
                let grid = WzGrid {
                    base,
                    vs: vs.clone(),
                    feedback_modes: cfg.feedback.clone(),
                    trials: cfg.trials,
                    bound_samples: cfg.bound_samples,
                };
                for pt in run_wz_grid(&grid, &cr, &aux)? {
                    let mut row = head(cfg);
                    row.extend([
                        fmt_f64(pt.sigma2_yprime_given_x),
                        pt.n_joint.to_string(),
                        pt.n.to_string(),
                        pt.v.to_string(),
                        fmt_f64(pt.log2v),
                        fmt_f64(pt.eps),
                        if pt.feedback { "on" } else { "off" }.to_string(),
                        pt.trials.to_string(),
                        fmt_f64(pt.rate_per_sample),
                        fmt_f64(pt.batch_bits),
                        fmt_f64(pt.feedback_bits),
                        fmt_f64(pt.distortion_db),
                        fmt_f64(pt.matched_distortion_db),
                        fmt_f64(pt.encoder_distortion_db),
                        fmt_f64(10.0 * s2.log10()),
                        fmt_f64(pt.mismatch_rate),
                        fmt_f64(pt.mismatch_se),
                        fmt_f64(pt.final_mismatch_rate),
                        pt.decode_failures.to_string(),
                        pt.feedback_bits_out_of_set.to_string(),
                        fmt_f64(pt.bound_value),
                        fmt_f64(pt.bound_se),
                        fmt_f64(pt.mu1_realized),
                        fmt_f64(pt.block_omega),
                    ]);
                    table.push(row);
                }
            }
        }
    }
    Ok(table)
}

/// Discrete greedy-rejection construction and its Poisson-race counterpart.
pub fn grs(cfg: &ExperimentConfig, progress: &(dyn Fn(&str) + Sync)) -> Result<Table> {
    let cr = cfg.randomness()?;
    let mut table = Table::new(GRS_COLUMNS);
    for &k in &cfg.k {
        progress(&format!("grs-example k={k}"));
        let ex = GrsExample::new(k)?;
        let outcomes = run_trials(cfg.trials, |t| ex.trial(&cr, t))?;
        let cond = |a: &dyn Fn(usize) -> (u32, u32)| {
            let sel: Vec<(u32, u32)> = (0..outcomes.len()).map(a).filter(|(ya, _)| *ya == 1).collect();
            let hits = sel.iter().filter(|(ya, yb)| ya == yb).count() as f64;
            let n = sel.len() as u64;
            let r = hits / n as f64;
            (n, r, binomial_se(r, n))
        };
        let (gn, gr, gse) = cond(&|i| (outcomes[i].grs_a, outcomes[i].grs_b));
        let (pn, pr, pse) = cond(&|i| (outcomes[i].pml_a, outcomes[i].pml_b));
        let kf = k as f64;
        let mut row = head(cfg);
        row.extend([
            k.to_string(),
            cfg.trials.to_string(),
            gn.to_string(),
            fmt_f64(gr),
            fmt_f64(gse),
            fmt_f64(1.0 / (kf + 1.0)),
            pn.to_string(),
            fmt_f64(pr),
            fmt_f64(pse),
            fmt_f64(1.0),
            fmt_f64((2.0 * kf + 1.0) / (3.0 * kf + 1.0)),
        ]);
        table.push(row);
    }
    Ok(table)
}

/// Closed-form conditional matching bounds on a grid of `y`.
pub fn bounds(cfg: &ExperimentConfig) -> Result<Table> {
    let (pa, pb) = (&cfg.party_a, &cfg.party_b);
    let setup = MatchingSetup::new(pa, pb, &cfg.proposal)?;
    let mut table = Table::new(BOUNDS_COLUMNS);
    for &n in &cfg.n {
        let nocomm = setup.coefficients(Protocol::ErsNoComm, n);
        let batch = setup.coefficients(Protocol::ErsBatchComm, n);
        for i in 0..cfg.y_points {
            let y = cfg.y_lo + (cfg.y_hi - cfg.y_lo) * i as f64 / (cfg.y_points - 1) as f64;
            let (a, b) = (pa.pdf(y), pb.pdf(y));
            if !(a > 0.0 && b > 0.0) {
                continue;
            }
            let mut row = head(cfg);
            row.extend([
                n.to_string(),
                fmt_f64(y),
                fmt_f64(a),
                fmt_f64(b),
                fmt_f64(bound_rs(pa, pb, y)),
                fmt_f64(1.0 / (2.0 * (1.0 + a / b))),
                fmt_f64(bound_pml(pa, pb, y)),
                fmt_f64(bound_iml(pa, pb, y, cfg.eps)),
                fmt_opt(nocomm.map(|c| bound_ers(&c, pa, pb, y))),
                fmt_opt(batch.map(|c| bound_ers(&c, pa, pb, y))),
            ]);
            table.push(row);
        }
    }
    Ok(table)
}

