use cvxnn::LossKind;
use cvxnn_cli::config::{Builtin, ConfigError, ExperimentConfig, ModelKind, PatternSource};

const FULL: &str = r#"
seed = 3
trials = 4
beta = 0.01
loss = "hinge"
threads = 2
out = "runs/x"

[dataset]
builtin = "anomaly"
n = 40
append_ones = true

[model]
kind = "relu"

[patterns]
source = "alg3"
quantile = 0.2

[solver]
max_iter = 500
gap_tol = 1e-8

[sgd]
learning_rate = 0.05
batch_size = 10
epochs = 300
m = 12
init_scale = 0.2

[gauge]
beta_small = 1e-5
polar_samples = 100
"#;

#[test]
fn full_schema_parses() {
    let cfg = ExperimentConfig::from_toml(FULL).unwrap();
    assert_eq!(cfg.seed, 3);
    assert_eq!(cfg.trials, 4);
    assert_eq!(cfg.loss, LossKind::Hinge);
    assert_eq!(cfg.dataset.builtin, Some(Builtin::Anomaly));
    assert_eq!(cfg.dataset.n, Some(40));
    assert!(cfg.dataset.append_ones);
    assert_eq!(cfg.model.kind, ModelKind::Relu);
    assert_eq!(cfg.patterns, PatternSource::Alg3 { quantile: 0.2 });
    assert_eq!(cfg.solver.max_iter, 500);
    assert_eq!(cfg.solver.gap_tol, 1e-8);
    assert_eq!(cfg.sgd.m, 12);
    assert_eq!(cfg.gauge.beta_small, Some(1e-5));
    assert_eq!(cfg.trial_seed(0), 4);
}

#[test]
fn minimal_config_uses_defaults() {
    let cfg = ExperimentConfig::from_toml("[dataset]\nbuiltin = \"paper-1d\"\n").unwrap();
    assert_eq!(cfg.trials, 1);
    assert_eq!(cfg.patterns, PatternSource::Exact);
    assert_eq!(cfg.loss, LossKind::Squared);
    assert!(cfg.out.is_none());
}

#[test]
fn pattern_sources_parse() {
    for (text, expected) in [
        ("source = \"exact\"", PatternSource::Exact),
        ("source = \"sample\"\ncount = 7", PatternSource::Sample { count: 7 }),
        ("source = \"alg1\"", PatternSource::Alg1),
        ("source = \"alg2\"", PatternSource::Alg2),
    ] {
        let cfg = ExperimentConfig::from_toml(&format!("[dataset]\nbuiltin = \"paper-1d\"\n[patterns]\n{text}\n")).unwrap();
        assert_eq!(cfg.patterns, expected);
    }
}

fn rejected(text: &str) -> ConfigError {
    ExperimentConfig::from_toml(text).expect_err(text)
}

#[test]
fn invalid_configs_are_rejected() {
    let base = "[dataset]\nbuiltin = \"paper-1d\"\n";
    assert!(matches!(rejected(&format!("trials = 0\n{base}")), ConfigError::Invalid(_)));
    assert!(matches!(rejected(&format!("beta = -1.0\n{base}")), ConfigError::Invalid(_)));
    assert!(matches!(rejected("[dataset]\nbuiltin = \"paper-1d\"\ncsv = \"a.csv\"\nlabel = \"y\"\n"), ConfigError::Invalid(_)));
    assert!(matches!(rejected("[dataset]\n"), ConfigError::Invalid(_)));
    assert!(matches!(rejected("[dataset]\ncsv = \"a.csv\"\n"), ConfigError::Invalid(_)));
    assert!(matches!(rejected("[dataset]\nbuiltin = \"clusters\"\n"), ConfigError::Invalid(_)));
    assert!(matches!(rejected("[dataset]\nbuiltin = \"clusters\"\nn = 3\n"), ConfigError::Invalid(_)));
    assert!(matches!(rejected(&format!("{base}[patterns]\nsource = \"sample\"\ncount = 0\n")), ConfigError::Invalid(_)));
    assert!(matches!(rejected(&format!("{base}[patterns]\nsource = \"alg3\"\nquantile = 1.5\n")), ConfigError::Invalid(_)));
    assert!(matches!(rejected(&format!("{base}[model]\nkind = \"linear-cnn\"\n")), ConfigError::Invalid(_)));
    assert!(matches!(rejected(&format!("loss = \"hinge\"\n{base}[model]\nkind = \"circular-cnn\"\n")), ConfigError::Invalid(_)));
    assert!(matches!(rejected(&format!("{base}[solver]\nmax_iter = 0\n")), ConfigError::Invalid(_)));
    assert!(matches!(rejected(&format!("{base}[sgd]\nm = 0\n")), ConfigError::Invalid(_)));
}

#[test]
fn malformed_and_unknown_keys_are_parse_errors() {
    assert!(matches!(rejected("trials = \n"), ConfigError::Parse(_)));
    assert!(matches!(rejected("colour = 1\n[dataset]\nbuiltin = \"paper-1d\"\n"), ConfigError::Parse(_)));
    assert!(matches!(rejected("[dataset]\nbuiltin = \"paper-1d\"\n[solver]\nrhoo = 1.0\n"), ConfigError::Parse(_)));
    assert!(matches!(rejected("[dataset]\nbuiltin = \"mnist\"\n"), ConfigError::Parse(_)));
}

#[test]
fn csv_paths_are_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, "[dataset]\ncsv = \"data.csv\"\nlabel = \"y\"\n").unwrap();
    let cfg = ExperimentConfig::from_path(&path).unwrap();
    assert_eq!(cfg.dataset.csv, Some(dir.path().join("data.csv")));
    assert!(matches!(
        ExperimentConfig::from_path(&dir.path().join("missing.toml")),
        Err(ConfigError::Io { .. })
    ));
}
