use arps::env::EnvRegistry;
use arps::{describe, parse_results, render_results, run, ExperimentConfig, OutputLine};
use arps_core::mdp::io::{write_mdp, write_policy_class};
use arps_core::mdp::{Policy, PolicyClass, RewardNoise, TabularMdp};

fn low_rank_config(reps: usize, mode: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        r#"
seed = 17
repetitions = {reps}
timing = false

[env]
kind = "random_low_rank"
num_observations = 4
num_actions = 2
rank = 1
horizon = 8

[search]
mode = "{mode}"
rank = 1
episodes = 2000
class_size = 4
"#
    ))
    .unwrap()
}

#[test]
fn repeated_runs_are_bit_identical() {
    let cfg = low_rank_config(3, "adaptive");
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.len(), 3);
    assert_eq!(a, b);
    assert_eq!(render_results(&cfg, &a), render_results(&cfg, &b));
    for r in &a {
        assert_eq!(r.suboptimality, r.recomputed_suboptimality());
        assert!(r.suboptimality >= 0.0);
    }
}

#[test]
fn results_render_and_parse_back() {
    let cfg = low_rank_config(2, "basic");
    let recs = run(&cfg).unwrap();
    let text = render_results(&cfg, &recs);
    let lines = parse_results(&text).unwrap();
    assert!(matches!(lines[0], OutputLine::Config { .. }));
    let parsed: Vec<_> = lines
        .into_iter()
        .filter_map(|l| match l {
            OutputLine::Result(r) => Some(r),
            _ => None,
        })
        .collect();
    assert_eq!(parsed, recs);
}

#[test]
fn zero_reward_environment_has_no_suboptimality() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = TabularMdp::new(
        2,
        2,
        6,
        vec![0.5; 8],
        vec![0.0; 4],
        RewardNoise::Bernoulli,
        vec![1.0, 0.0],
    )
    .unwrap();
    let class = PolicyClass::new(vec![
        Policy::constant(2, 0),
        Policy::constant(2, 1),
        Policy::Deterministic(vec![0, 1]),
    ])
    .unwrap();
    let mdp_path = dir.path().join("zero.mdp");
    let class_path = dir.path().join("zero.class");
    std::fs::write(&mdp_path, write_mdp(&mdp)).unwrap();
    std::fs::write(&class_path, write_policy_class(&class, 2).unwrap()).unwrap();
    let cfg = ExperimentConfig::from_toml(&format!(
        r#"
seed = 3
repetitions = 3
timing = false

[env]
kind = "file"
path = {:?}
class = {:?}

[search]
mode = "basic"
rank = 2
episodes = 500
class_size = 3
"#,
        mdp_path.display().to_string(),
        class_path.display().to_string()
    ))
    .unwrap();
    let recs = run(&cfg).unwrap();
    assert_eq!(recs.len(), 3);
    for r in recs {
        assert_eq!(r.suboptimality, 0.0);
        assert_eq!(r.v_tilde, 0.0);
    }
}

#[test]
fn rank_one_description_has_trivial_tail_spectrum() {
    let cfg = low_rank_config(1, "basic");
    let env = EnvRegistry::default().generate(&cfg.env, 5, 1).unwrap();
    let desc = describe(&env).unwrap();
    assert_eq!(desc.policies.len(), 5);
    for p in &desc.policies {
        assert_eq!(p.rank, 1);
        assert!((p.spectrum[0].re - 1.0).abs() <= 1e-9);
        assert!(p.spectrum[1..].iter().all(|z| z.norm() <= 1e-9));
    }
}

#[test]
fn lock_description_matches_closed_form() {
    let cfg = ExperimentConfig::from_toml(
        r#"
seed = 0

[env]
kind = "lock"
d = 3
horizon = 12
epsilon = 0.2
cells_per_state = 4
progress_probs = [0.3, 0.55]

[search]
mode = "basic"
class_size = 4
"#,
    )
    .unwrap();
    let env = EnvRegistry::default().generate(&cfg.env, 4, 9).unwrap();
    let desc = describe(&env).unwrap();
    assert_eq!(desc.lock_rank_bound, Some(5));
    for p in &desc.policies {
        assert!(p.lock_match_error.unwrap() <= 1e-8);
        assert!(p.lock_nonzero_eigenvalues.unwrap() <= 5);
    }
}
