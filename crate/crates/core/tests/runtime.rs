//! Monte Carlo checks of sampler runtimes and of the matching identity.

use chansim::dist::{ratio_bound, total_variation};
use chansim::matching::{match_pml, match_rs};
use chansim::samplers::{ers_select, rs_select};
use chansim::stats::{binomial_se, mean_se, run_trials};
use chansim::{CommonRandomness, DistributionSpec};

const TRIALS: u64 = 20_000;
const SE_TOL: f64 = 3.0;

fn setup() -> (CommonRandomness, DistributionSpec, DistributionSpec) {
    let cr = CommonRandomness::from_hex("0xa1").unwrap();
    (cr, DistributionSpec::gaussian(1.0, 0.05).unwrap(), DistributionSpec::gaussian(0.0, 1.0).unwrap())
}

#[test]
fn rejection_sampling_uses_omega_proposals_on_average() {
    let (cr, p, q) = setup();
    let omega = ratio_bound(&p, &q).unwrap();
    let ks = run_trials(TRIALS, |t| Ok(rs_select(&cr, t, &p, &q, omega)?.0 as f64)).unwrap();
    let m = mean_se(&ks);
    assert!((m.mean - omega).abs() <= SE_TOL * m.se, "mean K {} vs omega {omega}", m.mean);
}

#[test]
fn ensemble_runtime_is_at_most_n_minus_one_plus_omega() {
    let (cr, p, q) = setup();
    let omega = ratio_bound(&p, &q).unwrap();
    for n in [1u64, 8, 32] {
        let used = run_trials(TRIALS / 4, |t| Ok(ers_select(&cr, t, &p, &q, omega, n, 1.0)?.n_proposals_consumed as f64))
            .unwrap();
        let m = mean_se(&used);
        let limit = n as f64 - 1.0 + omega;
        assert!(m.mean <= limit + SE_TOL * m.se, "N={n}: {} > {limit}", m.mean);
    }
}

#[test]
fn shared_rejection_sampling_matches_at_the_tv_rate() {
    let cr = CommonRandomness::from_hex("0xa1").unwrap();
    let pa = DistributionSpec::gaussian(0.5, 0.7).unwrap();
    let pb = DistributionSpec::gaussian(-0.5, 0.7).unwrap();
    let q = DistributionSpec::gaussian(0.0, 100.0).unwrap();
    let omega = ratio_bound(&pa, &q).unwrap().max(ratio_bound(&pb, &q).unwrap());
    let hits = run_trials(TRIALS, |t| Ok(match_rs(&cr, t, &pa, &pb, &q, omega)?.matched)).unwrap();
    let rate = hits.iter().filter(|m| **m).count() as f64 / TRIALS as f64;
    let tv = total_variation(&pa, &pb);
    let exact = (1.0 - tv) / (1.0 + tv);
    assert!((rate - exact).abs() <= SE_TOL * binomial_se(rate, TRIALS), "{rate} vs {exact}");

    // The Poisson race does at least as well.
    let hits = run_trials(TRIALS, |t| Ok(match_pml(&cr, t, &pa, &pb, &q, omega)?.matched)).unwrap();
    let pml = hits.iter().filter(|m| **m).count() as f64 / TRIALS as f64;
    assert!(pml > rate);
}
