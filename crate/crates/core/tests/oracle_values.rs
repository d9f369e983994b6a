//! Reference values computed independently with 50-digit mpmath and frozen here.

#![allow(clippy::excessive_precision)]

use futurerand::audit::{all_sign_vectors, audit_randomizer};
use futurerand::baselines::{bns19_config, naive_config, BaselineKind};
use futurerand::precision::inv_pow2;
use futurerand::randomizer::{gap_lower_bound_expr, RandomizerConfig};
use futurerand::Float;

fn close(actual: f64, expected: f64, rel: f64) -> bool {
    ((actual - expected) / expected).abs() <= rel
}

#[test]
fn futurerand_annulus_and_gap() {
    let table: &[(usize, f64, usize, usize, f64)] = &[
        (1, 1.0, 0, 0, 0.099667994624955817),
        (2, 0.25, 0, 0, 0.011888030526388924),
        (2, 1.0, 0, 0, 0.048723168287391516),
        (3, 1.0, 0, 1, 0.051269600722862153),
        (4, 1.0, 0, 1, 0.036379932663819481),
        (10, 1.0, 0, 4, 0.024213514062294308),
        (10, 0.25, 0, 4, 0.0059197527135373492),
        (16, 1.0, 0, 7, 0.019504438752020569),
        (64, 1.0, 16, 31, 0.010100653778356969),
        (256, 1.0, 96, 127, 0.0051392474035542128),
        (1024, 1.0, 447, 511, 0.0025926925452403904),
    ];
    for &(k, eps, lb, ub, gap) in table {
        let cfg = RandomizerConfig::future_rand(k, eps).unwrap();
        assert_eq!((cfg.lb(), cfg.ub()), (lb, ub), "k = {k}, eps = {eps}");
        assert!(close(cfg.gap().to_f64(), gap, 1e-14), "k = {k}: {}", cfg.gap().to_f64());
    }
}

#[test]
fn k4_flip_probability_and_outside_mass() {
    let cfg = RandomizerConfig::future_rand(4, 1.0).unwrap();
    assert!(close(cfg.p().to_f64(), 0.47502081252106, 1e-13));
    let scaled = Float::with_val(128, cfg.q_star().unwrap() / inv_pow2(4));
    assert!(close(scaled.to_f64(), 0.9441856277, 1e-9));
}

#[test]
fn exact_privacy_ratios() {
    for &(k, eps, ratio) in &[
        (4usize, 1.0, 1.28715528071),
        (10, 1.0, 1.45740359598),
        (10, 0.25, 1.0991550786),
    ] {
        let cfg = RandomizerConfig::future_rand(k, eps).unwrap();
        let report = audit_randomizer(&cfg, &all_sign_vectors(k)).unwrap();
        assert!(close(report.max_ratio.to_f64(), ratio, 1e-10), "k = {k}");
    }
}

#[test]
fn bns19_parameters_and_gap() {
    let table: &[(usize, usize, usize, f64, f64, f64)] = &[
        (64, 17, 47, 0.0040312723966849768557, 0.0012820512820512820513, 0.0080731806533839866418),
        (256, 95, 161, 0.0018366109517322066115, 0.00032425421530479896239, 0.0036750505734845922415),
        (1024, 440, 583, 0.00084847967798443216498, 0.000081300813008130081301, 0.0016972050324771600404),
    ];
    for &(k, lb, ub, gap, lambda_ref, eps_tilde) in table {
        let BaselineKind::Bns19 { lambda, config } = bns19_config(k, 1.0).unwrap() else {
            panic!("wrong kind")
        };
        assert_eq!((config.lb(), config.ub()), (lb, ub), "k = {k}");
        assert!(close(config.gap().to_f64(), gap, 1e-14), "k = {k}");
        assert!(close(lambda.to_f64(), lambda_ref, 1e-14));
        assert!(close(config.eps_tilde().to_f64(), eps_tilde, 1e-14));
    }
}

#[test]
fn naive_gaps() {
    for &(k, gap) in &[
        (64usize, 0.0078123410581610138214),
        (256, 0.0019531225164769239141),
        (512, 0.00097656218955926021858),
    ] {
        assert!(close(naive_config(k, 1.0).unwrap().gap().to_f64(), gap, 1e-14));
    }
}

#[test]
fn lower_bound_sums() {
    for &(k, value) in &[
        (16usize, 0.0089390374396378266742),
        (64, 0.0049134476154999052007),
        (256, 0.0025576179853691283158),
        (1024, 0.001303005334269303576),
    ] {
        let cfg = RandomizerConfig::future_rand(k, 1.0).unwrap();
        let lb = gap_lower_bound_expr(&cfg).unwrap();
        assert!(close(lb.to_f64(), value, 1e-14), "k = {k}: {}", lb.to_f64());
    }
}
