use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rangewalk_harness::config::{ExperimentConfig, Model};
use rangewalk_harness::error::{HarnessError, Result};
use rangewalk_harness::report::write_bytes;
use rangewalk_harness::verbs::{self, Tables};

#[derive(Parser)]
#[command(name = "rangewalk", version, about = "Biased random walks on random-walk ranges")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Trajectory and jump process of one biased walk.
    Simulate(Common),
    /// Deviation probabilities on simple-random-walk environments.
    Localize(Common),
    /// Deviation probabilities on loop-erased environments.
    LerwLocalize(Common),
    /// KS distances between laws of the rescaled localization site.
    BetaInvariance(Common),
    /// Hitting, confinement and hitting-time frequencies.
    LemmaChecks(Common),
    /// Valleys and event flags per environment.
    Valleys(Common),
    /// Cut-times of one two-sided walk.
    CutTimes(Common),
    /// One two-sided loop-erased walk.
    LerwSample(Common),
    /// Potential and jump probabilities of one environment.
    Potential(Common),
    /// Identity and oracle checks; exits 2 if any fails.
    Validate(Common),
    /// Raw two-sided simple random walk.
    DumpPath(Common),
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// Flat key=value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short = 'd')]
    dimension: Option<String>,
    #[arg(long)]
    beta: Vec<String>,
    #[arg(long = "n", visible_alias = "steps")]
    n: Vec<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    walks: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    epsilon: Vec<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long = "K")]
    k: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    max_window: Option<String>,
    #[arg(long)]
    guard: Option<String>,
    #[arg(long)]
    horizon_factor: Option<String>,
    #[arg(long)]
    max_attempts: Option<String>,
    #[arg(long)]
    permutations: Option<String>,
    #[arg(long)]
    cut_steps: Option<String>,
    /// Environment model, `srw` or `lerw`.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    threads: Option<String>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        let single = [
            ("dimension", &self.dimension),
            ("trials", &self.trials),
            ("walks", &self.walks),
            ("seed", &self.seed),
            ("delta", &self.delta),
            ("K", &self.k),
            ("window", &self.window),
            ("max-window", &self.max_window),
            ("guard", &self.guard),
            ("horizon-factor", &self.horizon_factor),
            ("max-attempts", &self.max_attempts),
            ("permutations", &self.permutations),
            ("cut-steps", &self.cut_steps),
            ("model", &self.model),
            ("format", &self.format),
            ("threads", &self.threads),
        ];
        for (key, value) in single {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for (key, values) in [("beta", &self.beta), ("n", &self.n), ("epsilon", &self.epsilon)] {
            if !values.is_empty() {
                cfg.set(key, &values.join(","))?;
            }
        }
        if let Some(p) = &self.output {
            cfg.output = Some(p.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `out.csv` with name `trials` becomes `out.trials.csv`.
fn sibling(path: &Path, name: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let file = match path.extension() {
        Some(ext) => format!("{stem}.{name}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{name}"),
    };
    path.with_file_name(file)
}

fn emit(cfg: &ExperimentConfig, tables: &Tables) -> Result<()> {
    let hash = cfg.hash();
    for (name, table) in tables {
        let bytes = table.render(cfg.format, &hash)?;
        match (&cfg.output, name) {
            (Some(p), None) => write_bytes(Some(p), &bytes)?,
            (Some(p), Some(n)) => write_bytes(Some(&sibling(p, n)), &bytes)?,
            (None, _) => write_bytes(None, &bytes)?,
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let (common, verb): (&Common, fn(&ExperimentConfig) -> Result<Tables>) = match &cli.verb {
        Verb::Simulate(c) => (c, verbs::simulate),
        Verb::Localize(c) => (c, |cfg| verbs::localize(cfg, Model::Srw)),
        Verb::LerwLocalize(c) => (c, |cfg| verbs::localize(cfg, Model::Lerw)),
        Verb::BetaInvariance(c) => (c, verbs::beta_invariance),
        Verb::LemmaChecks(c) => (c, verbs::lemma_checks),
        Verb::Valleys(c) => (c, verbs::valleys),
        Verb::CutTimes(c) => (c, verbs::cut_times),
        Verb::LerwSample(c) => (c, verbs::lerw_sample),
        Verb::Potential(c) => (c, verbs::potential),
        Verb::Validate(c) => (c, verbs::validate),
        Verb::DumpPath(c) => (c, verbs::dump_path),
    };
    let mut cfg = common.config()?;
    if matches!(cli.verb, Verb::LerwLocalize(_)) {
        cfg.model = Model::Lerw;
    }
    let tables = verb(&cfg)?;
    emit(&cfg, &tables)?;
    if matches!(cli.verb, Verb::Validate(_)) {
        let failed = verbs::failed_checks(&tables[0].1);
        if !failed.is_empty() {
            return Err(HarnessError::Validation(failed.join(", ")));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rangewalk_harness::config::Format;

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("/tmp/out.csv"), "trials"), PathBuf::from("/tmp/out.trials.csv"));
        assert_eq!(sibling(Path::new("out"), "jumps"), PathBuf::from("out.jumps"));
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("rangewalk-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("c.txt");
        std::fs::write(&file, "beta=3\ntrials=7\n").unwrap();
        let c = Common { config: Some(file), beta: vec!["2".into(), "4".into()], ..Default::default() };
        let cfg = c.config().unwrap();
        assert_eq!(cfg.betas, vec![2.0, 4.0]);
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.format, Format::Csv);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
