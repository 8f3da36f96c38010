use anyhow::{bail, Context, Result};
use arps::config::ExperimentConfig;
use arps::env::{load_class, load_mdp, load_sidecar, EnvRegistry, Environment};
use arps::runner::{append_results, describe, render_results, run};
use arps_core::estimator::{
    estimate_policy_value, write_report_jsonl, FitConfig, Objective, SearchConfig, SearchData,
    SearchRegistry,
};
use arps_core::lock::{
    build_lock_mdp, build_null_lock, gv_policy_class, suboptimality_gap, verify_lock_spectrum,
    write_sidecar, LatentMap, LockParams, LockSidecar,
};
use arps_core::mdp::io::{parse_dataset, write_dataset, write_mdp, write_policy_class};
use arps_core::mdp::{episode_seed, random_policy_class, sample_uniform_dataset, PolicyClass};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "arps",
    version,
    about = "Policy search in low-rank MDPs by autoregressive reward extrapolation"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an environment and its policy class from a config's [env] section.
    GenEnv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "ARPS_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        class_out: Option<PathBuf>,
        #[arg(long)]
        sidecar_out: Option<PathBuf>,
    },
    /// Print per-policy rank, spectrum and exact value.
    Describe {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        class: Option<PathBuf>,
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Size of the random class drawn when no class file is given.
        #[arg(long, default_value_t = 10)]
        class_size: usize,
        #[arg(long, env = "ARPS_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Collect episodes with uniformly random actions.
    Collect {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long, env = "ARPS_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict the value of every policy from a dataset.
    Estimate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        class: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select the policy with the best predicted value.
    Search {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        class: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a combination-lock instance.
    LockBuild {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = arps_core::lock::DEFAULT_CELLS_PER_STATE)]
        cells_per_state: usize,
        /// Comma-separated progress probabilities (default d/H each).
        #[arg(long, value_delimiter = ',')]
        progress_probs: Option<Vec<f64>>,
        #[arg(long, default_value_t = 4)]
        class_size: usize,
        /// Build the action-independent variant.
        #[arg(long)]
        null: bool,
        #[arg(long, env = "ARPS_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_mdp: PathBuf,
        #[arg(long)]
        out_sidecar: PathBuf,
        #[arg(long)]
        out_class: PathBuf,
    },
    /// Check a lock instance's spectra and suboptimality gaps.
    LockVerify {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        sidecar: PathBuf,
        #[arg(long)]
        class: Option<PathBuf>,
    },
    /// Run an experiment config and append result records.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "ARPS_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMode {
    Basic,
    Adaptive,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    rank: usize,
    /// Prediction horizon (defaults to the dataset's episode length).
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_enum, default_value = "basic")]
    mode: FitMode,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 400)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    fit_seed: u64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    residual_cap: Option<f64>,
}

impl FitArgs {
    fn objective(&self) -> Objective {
        match self.mode {
            FitMode::Basic => Objective::BasicMinimaxResidual,
            FitMode::Adaptive => Objective::AdaptiveGeometricProduct,
        }
    }

    fn search_config(&self, default_horizon: usize) -> SearchConfig {
        SearchConfig {
            rank: self.rank,
            horizon: self.horizon.unwrap_or(default_horizon),
            restarts: self.restarts,
            iterations: self.iterations,
            fit_seed: self.fit_seed,
            delta: self.delta,
            residual_cap: self.residual_cap,
            inner: Objective::BasicMinimaxResidual,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct EstimateLine {
    policy_index: usize,
    v_hat: f64,
    estimates: Vec<f64>,
    predicted: Vec<f64>,
    delta_hat: Option<f64>,
    infeasible_fallback: bool,
}

fn estimate(dataset: &Path, class: &Path, fit: &FitArgs) -> Result<String> {
    let ds =
        parse_dataset(&read(dataset)?).with_context(|| format!("parsing {}", dataset.display()))?;
    let class = load_class(class)?;
    let search = fit.search_config(ds.horizon());
    let mut cfg = FitConfig::basic(fit.rank);
    cfg.restarts = fit.restarts;
    cfg.iterations = fit.iterations;
    cfg.seed = fit.fit_seed;
    if let Objective::AdaptiveGeometricProduct = fit.objective() {
        cfg = FitConfig {
            objective: Objective::AdaptiveGeometricProduct,
            horizon: search.horizon,
            residual_cap: fit.residual_cap.unwrap_or_else(|| {
                arps_core::estimator::adaptive_residual_cap(
                    ds.num_actions(),
                    fit.rank,
                    class.len(),
                    fit.delta,
                    ds.len(),
                )
            }),
            ..cfg
        };
    }
    let mut out = String::new();
    for (i, pi) in class.iter().enumerate() {
        let v = estimate_policy_value(&ds, pi, search.horizon, &cfg)?;
        let line = EstimateLine {
            policy_index: i,
            v_hat: v.value,
            estimates: v.estimates.values,
            predicted: v.predicted.values,
            delta_hat: v.fit.map(|f| f.delta_hat),
            infeasible_fallback: v.infeasible_fallback,
        };
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    Ok(out)
}

fn search(dataset: &Path, class: &Path, fit: &FitArgs) -> Result<String> {
    let ds =
        parse_dataset(&read(dataset)?).with_context(|| format!("parsing {}", dataset.display()))?;
    let class = load_class(class)?;
    let cfg = fit.search_config(ds.horizon());
    let registry = SearchRegistry::default();
    let strategy = registry.get(fit.objective().name())?;
    let start = Instant::now();
    let report = strategy.search(SearchData::Fixed(&ds), &class, &cfg)?;
    Ok(write_report_jsonl(&report, start.elapsed().as_secs_f64()))
}

fn write_env(
    env: &Environment,
    out: &Path,
    class_out: &Option<PathBuf>,
    sidecar_out: &Option<PathBuf>,
) -> Result<()> {
    write(out, &write_mdp(&env.mdp))?;
    if let Some(p) = class_out {
        write(p, &write_policy_class(&env.class, env.mdp.num_actions())?)?;
    }
    match (sidecar_out, &env.lock) {
        (Some(p), Some(sc)) => write(p, &write_sidecar(sc))?,
        (Some(_), None) => bail!("--sidecar-out given but the environment is not a lock"),
        _ => {}
    }
    Ok(())
}

fn lock_verify(mdp: &Path, sidecar: &Path, class: &Option<PathBuf>) -> Result<bool> {
    let mdp = load_mdp(mdp)?;
    let sc = load_sidecar(sidecar)?;
    let phi = sc.latent_map()?;
    let star = sc.pi_star_policy();
    let class = match class {
        Some(p) => load_class(p)?,
        None => match &star {
            Some(s) => PolicyClass::new(vec![s.clone()])?,
            None => bail!("the null lock needs a --class to verify"),
        },
    };
    let mut ok = true;
    for (i, pi) in class.iter().enumerate() {
        let r = verify_lock_spectrum(&mdp, pi, star.as_ref(), &phi, &sc.params)?;
        println!(
            "policy {i}: spectrum {} (max error {:.2e}), numerical rank {} (bound {}), nonzero eigenvalues {}",
            if r.spectrum_ok() { "ok" } else { "MISMATCH" },
            r.max_error,
            r.numerical_rank,
            r.rank_bound,
            r.nonzero_eigenvalues
        );
        if !r.spectrum_ok() {
            print!("{}", r.diff());
            ok = false;
        }
        if let Some(s) = &star {
            let g = suboptimality_gap(&mdp, pi, s, &phi, &sc.params)?;
            let holds = g.difference <= 1e-8;
            ok &= holds;
            println!(
                "    gap: dp {:.12} latent {:.12} (diff {:.1e}, {}); independent-product form {:.12}",
                g.dp_gap,
                g.latent_gap,
                g.difference,
                if holds { "ok" } else { "MISMATCH" },
                g.product_form
            );
        }
    }
    Ok(ok)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::GenEnv {
            config,
            seed,
            out,
            class_out,
            sidecar_out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seed = seed.unwrap_or(cfg.seed);
            let env = EnvRegistry::default().generate(&cfg.env, cfg.search.class_size, seed)?;
            write_env(&env, &out, &class_out, &sidecar_out)?;
        }
        Command::Describe {
            env,
            class,
            sidecar,
            class_size,
            seed,
        } => {
            let mdp = load_mdp(&env)?;
            let class = match class {
                Some(p) => load_class(&p)?,
                None => random_policy_class(
                    mdp.num_observations(),
                    mdp.num_actions(),
                    class_size,
                    seed,
                )?,
            };
            let lock = sidecar.map(|p| load_sidecar(&p)).transpose()?;
            let env = Environment { mdp, class, lock };
            print!("{}", describe(&env)?.render());
        }
        Command::Collect {
            env,
            episodes,
            seed,
            out,
        } => {
            let mdp = load_mdp(&env)?;
            let ds = sample_uniform_dataset(&mdp, episodes, seed)?;
            write(&out, &write_dataset(&ds))?;
        }
        Command::Estimate {
            dataset,
            class,
            fit,
            out,
        } => emit(&out, &estimate(&dataset, &class, &fit)?)?,
        Command::Search {
            dataset,
            class,
            fit,
            out,
        } => emit(&out, &search(&dataset, &class, &fit)?)?,
        Command::LockBuild {
            d,
            horizon,
            epsilon,
            cells_per_state,
            progress_probs,
            class_size,
            null,
            seed,
            out_mdp,
            out_sidecar,
            out_class,
        } => {
            let mut params = LockParams::new(d, horizon, epsilon)?;
            params.cells_per_state = cells_per_state;
            if let Some(p) = progress_probs {
                params.progress_probs = p;
            }
            params.validate()?;
            let phi = LatentMap::random(d, cells_per_state, episode_seed(seed, 0))?;
            let class =
                gv_policy_class(params.num_observations(), class_size, episode_seed(seed, 1))?;
            let star = (!null).then(|| class.get(0).clone());
            let mdp = match &star {
                Some(s) => build_lock_mdp(s, &phi, &params)?,
                None => build_null_lock(&phi, &params)?,
            };
            write(&out_mdp, &write_mdp(&mdp))?;
            write(
                &out_sidecar,
                &write_sidecar(&LockSidecar::new(&params, &phi, star.as_ref())?),
            )?;
            write(&out_class, &write_policy_class(&class, 2)?)?;
        }
        Command::LockVerify {
            mdp,
            sidecar,
            class,
        } => {
            if !lock_verify(&mdp, &sidecar, &class)? {
                bail!("lock verification failed");
            }
        }
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.output = out;
            }
            let records = run(&cfg)?;
            match &cfg.output {
                Some(p) => append_results(p, &cfg, &records)?,
                None => print!("{}", render_results(&cfg, &records)),
            }
        }
    }
    Ok(())
}
