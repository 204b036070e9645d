use qdarwin::experiments::config::ExperimentConfig;
use qdarwin::experiments::csv::{parse, strip_comments};
use qdarwin::experiments::oracle::run_oracle;
use qdarwin::experiments::{run_partial_info, run_redundancy, run_sweep};

const TOY: &str = "
n_osc = 16
kappa = 0.05
squeezing_r = 3
omega_s_min = 0.35
omega_s_max = 0.65
omega_s_points = 3
t_max = 8
dt = 0.1
redundancy_dt = 2
fraction_step = 0.125
n_samples = 4
master_seed = 11
";

fn toy() -> ExperimentConfig {
    ExperimentConfig::parse(TOY).unwrap()
}

#[test]
fn written_files_round_trip() {
    let dir = std::env::temp_dir().join(format!("qdarwin-core-it-{}", std::process::id()));
    let out = run_sweep(&toy(), 2).unwrap();
    let path = dir.join("sweep.csv");
    out.table.write(&path, "sweep").unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with('#'));
    assert_eq!(strip_comments(&text), out.table.body());
    assert_eq!(parse(&text).unwrap().rows().len(), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn runs_are_reproducible_and_seeded() {
    let cfg = toy();
    assert_eq!(
        run_redundancy(&cfg, 1).unwrap().table.body(),
        run_redundancy(&cfg, 3).unwrap().table.body()
    );
    let a = run_partial_info(&cfg, 1).unwrap().table.body();
    assert_eq!(a, run_partial_info(&cfg, 2).unwrap().table.body());
    let reseeded = ExperimentConfig::from_sources(TOY, &[("master_seed".into(), "12".into())]).unwrap();
    assert_ne!(a, run_partial_info(&reseeded, 1).unwrap().table.body());
}

#[test]
fn partial_info_rows_respect_information_bounds() {
    let out = run_partial_info(&toy(), 1).unwrap();
    for r in out.table.rows() {
        let (f, mi, h) = (r[1], r[2], r[4]);
        assert!(mi >= -1e-9 && mi <= 2.0 * h + 1e-8, "{r:?}");
        if f == 1.0 {
            assert!((mi - 2.0 * h).abs() < 1e-8, "{r:?}");
        }
    }
}

#[test]
fn oracle_runs_on_small_configs() {
    let cfg = ExperimentConfig::parse("n_osc = 2\nomega_s = 0.4, 0.8\nsqueezing_r = 1\nt_max = 10\ndt = 0.5\nredundancy_dt = 5").unwrap();
    let reports = run_oracle(&cfg).unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| r.passed && r.checkpoints.len() == 5));
}
