use ifelab_core::dgp::DgpSpec;
use ifelab_core::estimator::EstimatorSpec;
use ifelab_harness::appendix_c::{run_appendix_c, AppendixCConfig};
use ifelab_harness::appendix_d::{run_appendix_d, AppendixDConfig};
use ifelab_harness::table1::{run_table1, Table1Config};
use ifelab_harness::{run_sweep, EstimatorEntry, ExperimentConfig};

fn five(dgp: &DgpSpec) -> Vec<EstimatorEntry> {
    ifelab_harness::table1::table1_estimators(dgp)
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let dgp = DgpSpec::het(16, 12).with_seeds(2, 3);
    let mut cfg = ExperimentConfig::new(dgp.clone(), five(&dgp), 12);
    cfg.workers = 1;
    let one = run_sweep(&cfg).unwrap();
    cfg.workers = 8;
    let eight = run_sweep(&cfg).unwrap();
    assert_eq!(one.render_text(), eight.render_text());
    assert_eq!(one.render_csv().unwrap(), eight.render_csv().unwrap());

    let t1 = |workers| {
        run_table1(&Table1Config {
            replications: Some(3),
            sizes: Some(vec![(10, 12)]),
            workers,
            ..Table1Config::default()
        })
        .unwrap()
        .render_wide()
    };
    assert_eq!(t1(1), t1(8));
}

#[test]
fn single_replication_smoke() {
    let dgp = DgpSpec::hom(12, 10).with_seeds(1, 1);
    let report = run_sweep(&ExperimentConfig::new(dgp.clone(), five(&dgp), 1)).unwrap();
    assert_eq!(report.cells.len(), 5);
    for c in &report.cells {
        assert_eq!(c.replications, 1, "{}", c.estimator);
        assert!(c.sd.is_nan());
    }
}

#[test]
fn bias_is_mean_minus_truth() {
    let dgp = DgpSpec::inv(20, 14, 2).with_seeds(1, 1);
    let est = vec![EstimatorEntry::new(EstimatorSpec::ife(3)), EstimatorEntry::new(EstimatorSpec::sc())];
    let report = run_sweep(&ExperimentConfig::new(dgp, est, 20)).unwrap();
    for c in &report.cells {
        assert!((c.bias - (c.mean - c.true_att)).abs() < 1e-12);
    }
}

#[test]
fn config_validation_aborts() {
    let dgp = DgpSpec::hom(12, 10);
    assert!(run_sweep(&ExperimentConfig::new(dgp.clone(), vec![], 5)).is_err());
    assert!(run_sweep(&ExperimentConfig::new(dgp.clone(), five(&dgp), 0)).is_err());
    let bad = DgpSpec { n1: 12, ..dgp };
    assert!(run_sweep(&ExperimentConfig::new(bad.clone(), five(&bad), 1)).is_err());
}

#[test]
fn appendix_c_control_is_unimodal_at_two() {
    let cfg = AppendixCConfig {
        k_alpha: 0,
        replications: 1000,
        bins: 15,
        ..AppendixCConfig::default()
    };
    let out = run_appendix_c(&cfg).unwrap();
    assert_eq!(out.reference_att, 2.0);
    assert_eq!(out.alpha_hist.peak_count(3, 0.25), 1, "{:?}", out.alpha_hist.counts);
    let c = &out.report.cells[0];
    assert!((c.mean - 2.0).abs() < 3.0 * c.sd / (c.replications as f64).sqrt() + 0.01, "mean {}", c.mean);
    let mode = (0..out.alpha_hist.counts.len()).max_by_key(|&j| out.alpha_hist.counts[j]).unwrap();
    let centre = out.alpha_hist.lo + (mode as f64 + 0.5) * out.alpha_hist.width();
    assert!((centre - 2.0).abs() < 3.0 * out.alpha_hist.width() + 0.05, "mode at {centre}");
}

#[test]
fn appendix_d_smallest_row_end_to_end() {
    let cfg = AppendixDConfig {
        rows: vec![[40, 20, 15, 10]],
        replications: 200,
        ..AppendixDConfig::default()
    };
    let out = run_appendix_d(&cfg).unwrap();
    let row = &out.rows[0];
    for c in [&row.dynamic_att, &row.dynamic_psi, &row.static_att] {
        assert_eq!(c.replications + c.nonconverged + c.failed, 200);
        assert!(c.bias.is_finite() && c.sd.is_finite());
    }
    assert_eq!(row.dynamic_psi.true_att, 10.0);
    assert_eq!(out.report.render_csv().unwrap().lines().count(), 4);
}

#[test]
fn homogeneous_ife_is_centred_and_tightens() {
    let mut spreads = Vec::new();
    for size in [25, 50, 100] {
        let dgp = DgpSpec::hom(size, size).with_seeds(1, 1);
        let report = run_sweep(&ExperimentConfig::new(dgp, vec![EstimatorEntry::new(EstimatorSpec::ife(1))], 200)).unwrap();
        let c = &report.cells[0];
        let se = c.sd / (c.replications as f64).sqrt();
        assert!((c.mean - 2.0).abs() < 3.0 * se, "N=T={size}: mean {} se {se}", c.mean);
        spreads.push(c.sd);
    }
    assert!(spreads.windows(2).all(|w| w[1] < w[0]), "{spreads:?}");
}

#[test]
fn dynamic_fit_recovers_att_and_path() {
    let cfg = AppendixDConfig {
        rows: vec![[200, 200, 15, 10]],
        replications: 40,
        ..AppendixDConfig::default()
    };
    let out = run_appendix_d(&cfg).unwrap();
    let row = &out.rows[0];
    let se = |c: &ifelab_harness::CellSummary| c.sd / (c.replications as f64).sqrt();
    assert!(row.dynamic_att.bias.abs() < 4.0 * se(&row.dynamic_att), "att bias {}", row.dynamic_att.bias);
    assert!(row.dynamic_psi.bias.abs() < 4.0 * se(&row.dynamic_psi), "psi bias {}", row.dynamic_psi.bias);
}
