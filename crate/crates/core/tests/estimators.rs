use ifelab_core::dgp::{generate, structure, DgpSpec};
use ifelab_core::estimator::EstimatorSpec;
use ifelab_core::ife::{fit_static, IfeConfig};
use ifelab_core::inference::placebo_test;
use ifelab_core::scfamily::fit_gsc;

#[test]
fn gsc_equals_ife_without_noise_or_heterogeneity() {
    for (n, t) in [(20, 16), (30, 12), (50, 50)] {
        for seed in 1..4 {
            let spec = DgpSpec {
                noise_sd: 0.0,
                ..DgpSpec::hom(n, t).with_seeds(seed, 1)
            };
            let g = generate(&spec, 1).unwrap();
            let ife = fit_static(&g.panel, &IfeConfig::with_k(1)).unwrap();
            let gsc = fit_gsc(&g.panel, 1).unwrap();
            assert!((ife.att() - gsc.att()).abs() < 1e-6, "{n}x{t}: {} vs {}", ife.att(), gsc.att());
            assert!((gsc.att() - 2.0).abs() < 1e-6);
        }
    }
}

#[test]
fn structure_is_bitwise_fixed_while_noise_moves() {
    for spec in [DgpSpec::het(20, 10), DgpSpec::inv(20, 10, 3), DgpSpec::dyn_design(10, 5, 6, 4)] {
        let spec = spec.with_seeds(9, 3);
        let s = structure(&spec).unwrap();
        let first = generate(&spec, 1).unwrap();
        for rep in 2..6 {
            assert_eq!(structure(&spec).unwrap(), s);
            let g = generate(&spec, rep).unwrap();
            assert_ne!(g.panel.outcomes(), first.panel.outcomes());
        }
    }
}

/// Kolmogorov distance between the empirical law of `p` and U(0, 1).
fn ks_uniform(p: &mut [f64]) -> f64 {
    p.sort_by(|a, b| a.total_cmp(b));
    let m = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(j, &x)| ((j + 1) as f64 / m - x).abs().max((x - j as f64 / m).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn null_p_values_are_roughly_uniform() {
    let spec = DgpSpec::null(20, 12, 4, 8).with_seeds(5, 5);
    let est = EstimatorSpec::gsc(1);
    let mut p: Vec<f64> = (1..=500)
        .map(|rep| {
            let g = generate(&spec, rep).unwrap();
            placebo_test(&g.panel, &est, est.default_statistic(), 99, rep).unwrap().p_value
        })
        .collect();
    let d = ks_uniform(&mut p);
    eprintln!("KS distance {d:.4}");
    assert!(d < 0.08, "KS distance {d}");
}
