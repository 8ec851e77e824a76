//! The `tra` command line.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tra_core::baselines::{cf_attack, dualcf_attack, pathfinding_extract, AttackBudget, LeafIdOracle, SurrogateSpec};
use tra_core::bounds::{bound_report, measured_ratio, BoundReport};
use tra_core::cart::{prune, train_forest, train_tree_with_stats, TrainConfig};
use tra_core::eval::{agreement, anytime_fidelity, fidelity, fidelity_on, functional_equivalence, DEFAULT_PIECE_CAP};
use tra_core::generate::{gen_adversarial, gen_chessboard, gen_random_forest, gen_random_tree, uniform_points, AdversarialSpec};
use tra_core::oracle::{CfOracle, CounterfactualOracle, Distance, HeuristicParams, OracleConfig};
use tra_core::tra::{tra_extract, QueueOrder, TraConfig};
use tra_core::{FeatureSchema, Label, Model, Point};

use crate::dataset::{ingest_csv, DatasetConfig};
use crate::io::{read_curve, read_json, read_model, read_schema, write_curve, write_json, write_mean_curve, write_model, write_trace, CurveRow};

/// Failure with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Contract(anyhow::Error),
    #[error("{0}")]
    Capacity(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Contract(_) => 2,
            CliError::Capacity(_) => 3,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<tra_core::Error>() {
            Some(tra_core::Error::Capacity(m)) => CliError::Capacity(m.clone()),
            Some(tra_core::Error::Unsupported(m)) => CliError::Usage(m.clone()),
            _ => CliError::Contract(e),
        }
    }
}

impl From<tra_core::Error> for CliError {
    fn from(e: tra_core::Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

#[derive(Debug, Parser)]
#[command(name = "tra", version, about = "Counterfactual-driven extraction of tree-based classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic target model.
    Gen(GenArgs),
    /// Train a tree or forest on a CSV dataset.
    Train(TrainArgs),
    /// Run an extraction attack against a target model.
    Attack(AttackArgs),
    /// Check equivalence, measure fidelity or compute query bounds.
    Eval(EvalArgs),
    /// Average anytime curves over runs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GenKind {
    Random,
    Forest,
    Chessboard,
    Adversarial,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    /// Schema JSON (random, forest, chessboard).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub depth: u32,
    #[arg(long, default_value_t = 2)]
    pub classes: u32,
    #[arg(long, default_value_t = 5)]
    pub trees: usize,
    /// Split levels per feature, comma separated (chessboard, adversarial).
    #[arg(long, value_delimiter = ',')]
    pub s: Vec<u32>,
    /// Grid steps per unit interval (adversarial).
    #[arg(long, default_value_t = 1024)]
    pub grid: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelKind {
    Tree,
    Forest,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Dataset configuration JSON (label column and features).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value = "tree")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 5)]
    pub trees: usize,
    #[arg(long)]
    pub max_depth: Option<u32>,
    /// Skip cost-complexity pruning of single trees.
    #[arg(long)]
    pub no_prune: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Tra,
    Pathfinding,
    Cf,
    Dualcf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderKind {
    Fifo,
    Lifo,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DistanceKind {
    L2,
    L1,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long, value_enum, default_value = "exact")]
    pub oracle: OracleKind,
    #[arg(long)]
    pub target: PathBuf,
    /// Schema JSON, when the target file has none.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Query budget (CF and DualCF default to 50 times the target's node count).
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long, default_value_t = 20)]
    pub snapshot_every: u64,
    #[arg(long, value_enum, default_value = "fifo")]
    pub order: OrderKind,
    #[arg(long, value_enum, default_value = "l2")]
    pub distance: DistanceKind,
    /// Uniform samples per heuristic oracle call.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Labelled uniform points handed to the heuristic oracle.
    #[arg(long, default_value_t = 500)]
    pub training_points: usize,
    /// Boundary precision of PathFinding on numeric features.
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 2)]
    pub classes: u32,
    /// Uniform points for the anytime fidelity column.
    #[arg(long, default_value_t = 3000)]
    pub eval_samples: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub cell_cap: u128,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
#[group(id = "mode", required = true, multiple = false)]
pub struct EvalMode {
    /// Exact functional equivalence of two models.
    #[arg(long, num_args = 2, value_names = ["A", "B"], group = "mode")]
    pub equivalence: Option<Vec<PathBuf>>,
    /// Fidelity of the second model to the first.
    #[arg(long, num_args = 2, value_names = ["TARGET", "SURROGATE"], group = "mode")]
    pub fidelity: Option<Vec<PathBuf>>,
    /// Query bounds of one model.
    #[arg(long, value_name = "MODEL", group = "mode")]
    pub bounds: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub mode: EvalMode,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value_t = 3000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evaluate fidelity on the test split of this dataset instead of uniform samples.
    #[arg(long, requires = "config")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Billed queries of a certified run, for the measured ratio.
    #[arg(long)]
    pub queries: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_PIECE_CAP)]
    pub cap: usize,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Anytime CSV files, one per run.
    #[arg(required = true)]
    pub curves: Vec<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub every: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string().trim_start_matches("error: ").trim_end().to_owned())),
    };
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Attack(a) => attack(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
    }
}

fn need_schema(path: &Option<PathBuf>, what: &str) -> Result<FeatureSchema, CliError> {
    let path = path.as_ref().ok_or_else(|| CliError::Usage(format!("--schema is required for {what}")))?;
    Ok(read_schema(path)?)
}

fn gen(a: GenArgs) -> Result<(), CliError> {
    let (schema, model): (FeatureSchema, Model) = match a.kind {
        GenKind::Random => {
            let schema = need_schema(&a.schema, "random trees")?;
            let t = gen_random_tree(&schema, a.depth, a.classes, a.seed)?;
            (schema, t.into())
        }
        GenKind::Forest => {
            let schema = need_schema(&a.schema, "random forests")?;
            let f = gen_random_forest(&schema, a.trees, a.depth, a.classes, a.seed)?;
            (schema, f.into())
        }
        GenKind::Chessboard => {
            let schema = need_schema(&a.schema, "chessboards")?;
            let t = gen_chessboard(&schema, &a.s)?;
            (schema, t.into())
        }
        GenKind::Adversarial => {
            if a.s.is_empty() {
                return Err(CliError::Usage("--s is required for adversarial instances".into()));
            }
            let spec = AdversarialSpec { s: a.s.clone(), grid: a.grid, eps_steps: 2 };
            (spec.schema()?, gen_adversarial(&spec)?.into())
        }
    };
    write_model(&a.out, &schema, &model, None, None)?;
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let config: DatasetConfig = read_json(&a.config)?;
    let bundle = ingest_csv(&a.data, &config, a.seed).map_err(anyhow::Error::from)?;
    let (xs, ys) = bundle.part(&bundle.train);
    let (vx, vy) = bundle.part(&bundle.val);
    let model: Model = match a.model {
        ModelKind::Tree => {
            let cfg = TrainConfig { max_depth: a.max_depth, seed: a.seed, ..TrainConfig::default() };
            let trained = train_tree_with_stats(&xs, &ys, &cfg)?;
            if a.no_prune || vx.is_empty() {
                trained.tree.into()
            } else {
                prune(&trained, &vx, &vy, &cfg.ccp_grid)?.into()
            }
        }
        ModelKind::Forest => {
            let cfg = TrainConfig { max_depth: a.max_depth, ..TrainConfig::forest(a.trees, a.seed) };
            train_forest(&xs, &ys, &cfg)?.into()
        }
    };
    let (tx, ty) = bundle.part(&bundle.test);
    let hits = tx.iter().zip(&ty).filter(|(p, l)| model.predict(p) == **l).count();
    let mut file = crate::io::ModelFile::from_model(&bundle.schema, &model);
    file.schema = Some(bundle.schema_file());
    write_json(&a.out, &file)?;
    eprintln!("test accuracy {:.4} on {} rows", if tx.is_empty() { 1.0 } else { hits as f64 / tx.len() as f64 }, tx.len());
    Ok(())
}

fn curve_rows(items: impl Iterator<Item = (u64, f64, Vec<Option<Label>>)>, truth: &[Label]) -> Vec<CurveRow> {
    items
        .map(|(queries, certified_fraction, preds)| {
            let hits = preds.iter().zip(truth).filter(|(p, t)| **p == Some(**t)).count();
            CurveRow {
                queries,
                certified_fraction,
                fidelity_uniform: if truth.is_empty() { 1.0 } else { hits as f64 / truth.len() as f64 },
            }
        })
        .collect()
}

fn attack(a: AttackArgs) -> Result<(), CliError> {
    let schema_arg = a.schema.as_deref().map(read_schema).transpose()?;
    let (schema, target) = read_model(&a.target, schema_arg.as_ref())?;
    if a.method == Method::Pathfinding {
        if matches!(target, Model::Forest(_)) {
            return Err(CliError::Usage("pathfinding needs a single-tree target, not a forest".into()));
        }
        if a.oracle == OracleKind::Heuristic {
            return Err(CliError::Usage("pathfinding queries a leaf-identifier API; --oracle does not apply".into()));
        }
    }
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let eval_points: Vec<Point> = uniform_points(&schema, a.eval_samples, &mut rng);
    let truth: Vec<Label> = eval_points.iter().map(|p| target.predict(p)).collect();
    let distance = match a.distance {
        DistanceKind::L2 => Distance::L2,
        DistanceKind::L1 => Distance::L1,
    };
    let oracle_config = match a.oracle {
        OracleKind::Exact => OracleConfig { distance, cell_cap: a.cell_cap, ..OracleConfig::exact() },
        OracleKind::Heuristic => {
            let training_data = uniform_points(&schema, a.training_points, &mut rng);
            let params = HeuristicParams { samples: a.samples, training_data, seed: a.seed };
            OracleConfig { distance, cell_cap: a.cell_cap, ..OracleConfig::heuristic(params) }
        }
    };
    let method_name = format!("{:?}", a.method).to_lowercase();
    let extracted = a.out_dir.join("extracted.json");
    let summary = match a.method {
        Method::Tra => {
            let mut oracle = CfOracle::new(&schema, &target, oracle_config)?;
            let order = match a.order {
                OrderKind::Fifo => QueueOrder::Fifo,
                OrderKind::Lifo => QueueOrder::Lifo,
                OrderKind::Random => QueueOrder::Random(a.seed),
            };
            let config = TraConfig { order, snapshot_every: a.snapshot_every, max_queries: a.budget, n_classes: a.classes, ..TraConfig::default() };
            let run = tra_extract(&mut oracle, config)?;
            let model: Model = run.model.to_tree(Label(0)).into();
            write_model(&extracted, &schema, &model, Some(&method_name), Some(run.certified))?;
            write_trace(&a.out_dir.join("trace.jsonl"), &schema, oracle.meter().records())?;
            let rows = curve_rows(
                run.snapshots.iter().map(|s| {
                    let preds = eval_points.iter().map(|p| tra_core::Classifier::classify(&s.model, p)).collect();
                    (s.queries, s.certified_fraction, preds)
                }),
                &truth,
            );
            write_curve(&a.out_dir.join("anytime.csv"), &rows)?;
            let ratio = measured_ratio(&run, &target.stats()).ok().map(|r| r.to_string());
            json!({"method": method_name, "queries": run.queries, "complete": run.complete, "certified": run.certified,
                   "certified_fraction": run.certified_fraction(), "measured_ratio": ratio,
                   "fidelity_uniform": agreement(&target, &run.model, &eval_points)})
        }
        Method::Pathfinding => {
            let mut oracle = LeafIdOracle::new(&schema, &target)?;
            let run = pathfinding_extract(&mut oracle, a.epsilon)?;
            let model: Model = run.tree.clone().into();
            let exact = run.steps.iter().all(|&s| s == 1);
            write_model(&extracted, &schema, &model, Some(&method_name), Some(exact))?;
            let rows = vec![CurveRow { queries: run.queries, certified_fraction: 0.0, fidelity_uniform: agreement(&target, &model, &eval_points) }];
            write_curve(&a.out_dir.join("anytime.csv"), &rows)?;
            json!({"method": method_name, "queries": run.queries, "boxes": run.boxes.len(), "certified": exact,
                   "fidelity_uniform": rows[0].fidelity_uniform})
        }
        Method::Cf | Method::Dualcf => {
            let mut oracle = CfOracle::new(&schema, &target, oracle_config)?;
            let budget = AttackBudget { max_queries: a.budget.unwrap_or(AttackBudget::for_target(&target.stats()).max_queries) };
            let spec = SurrogateSpec::default();
            let run = if a.method == Method::Cf {
                cf_attack(&mut oracle, budget, &spec, a.classes, a.snapshot_every, a.seed)?
            } else {
                dualcf_attack(&mut oracle, budget, &spec, a.classes, a.snapshot_every, a.seed)?
            };
            write_model(&extracted, &schema, &run.model, Some(&method_name), Some(false))?;
            write_trace(&a.out_dir.join("trace.jsonl"), &schema, oracle.meter().records())?;
            let rows = curve_rows(
                run.snapshots.iter().map(|s| (s.queries, 0.0, eval_points.iter().map(|p| Some(s.model.predict(p))).collect())),
                &truth,
            );
            write_curve(&a.out_dir.join("anytime.csv"), &rows)?;
            json!({"method": method_name, "queries": run.queries, "certified": false,
                   "fidelity_uniform": agreement(&target, &run.model, &eval_points)})
        }
    };
    write_json(&a.out_dir.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string(&summary).expect("serializable"));
    Ok(())
}

fn bound_json(r: &BoundReport) -> serde_json::Value {
    json!({
        "n": r.n, "m": r.m, "s": r.s,
        "prop1_bound": r.prop1_bound.to_string(),
        "cor1_bound": r.cor1_bound.to_string(),
        "worst_case_queries": r.worst_case_queries.to_string(),
        "opt_queries_lower": r.opt_queries_lower.to_string(),
        "c_tra": r.c_tra.to_string(),
    })
}

fn load_pair(paths: &[PathBuf], schema: Option<&FeatureSchema>) -> Result<(FeatureSchema, Model, Model)> {
    let (sa, a) = read_model(&paths[0], schema)?;
    let (sb, b) = read_model(&paths[1], Some(&sa))?;
    if sa != sb {
        anyhow::bail!("the two models use different schemas");
    }
    Ok((sa, a, b))
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let schema_arg = a.schema.as_deref().map(read_schema).transpose()?;
    let report = if let Some(paths) = &a.mode.equivalence {
        let (schema, f, g) = load_pair(paths, schema_arg.as_ref())?;
        let e = functional_equivalence(&schema, &f, &g, a.cap)?;
        let witness = e.witness.as_ref().map(|w| crate::io::point_values(&schema, w));
        json!({"equivalent": e.equivalent, "witness": witness, "pieces": e.pieces})
    } else if let Some(paths) = &a.mode.fidelity {
        let (schema, f, g) = load_pair(paths, schema_arg.as_ref())?;
        let r = match (&a.data, &a.config) {
            (Some(data), Some(config)) => {
                let cfg: DatasetConfig = read_json(config)?;
                let bundle = ingest_csv(data, &cfg, a.seed).map_err(anyhow::Error::from)?;
                if bundle.schema != schema {
                    return Err(CliError::Usage("the dataset does not match the models' schema".into()));
                }
                let (points, _) = bundle.part(&bundle.test);
                fidelity_on(&f, &g, &points)
            }
            _ => fidelity(&schema, &f, &g, a.samples, a.seed),
        };
        json!({"fidelity": r.fidelity, "sample_count": r.sample_count, "seed": r.seed, "kind": format!("{:?}", r.kind)})
    } else if let Some(path) = &a.mode.bounds {
        let (_, m) = read_model(path, schema_arg.as_ref())?;
        let stats = m.stats();
        let r = bound_report(&stats.s);
        let mut v = bound_json(&r);
        v["node_count"] = json!(stats.node_count);
        v["leaf_count"] = json!(stats.leaf_count);
        v["depth"] = json!(stats.depth);
        if let Some(q) = a.queries {
            let ratio = num_rational::BigRational::new(q.into(), (stats.n + 1).into());
            v["measured_ratio"] = json!(ratio.to_string());
        }
        v
    } else {
        unreachable!("clap enforces one mode")
    };
    match &a.out {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("serializable")),
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let runs: Vec<Vec<(u64, f64)>> = a
        .curves
        .iter()
        .map(|p| Ok(read_curve(p)?.into_iter().map(|r| (r.queries, r.fidelity_uniform)).collect()))
        .collect::<Result<_>>()?;
    write_mean_curve(&a.out, &anytime_fidelity(&runs, a.every))?;
    Ok(())
}
