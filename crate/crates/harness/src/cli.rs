//! The `ambc` command line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ambc_core::config::{ForwardFading, SourceKind, SystemConfig};
use ambc_core::detectors::GaussianLrtMode;
use ambc_learned::chanestnet::PoolMode;
use clap::{Args, Parser, Subcommand};

use crate::method::{parse_methods, Method};
use crate::models::{self, TrainingBudget};
use crate::profile::{DetectorOptions, EdVariance, Profile};
use crate::recipes::{self, FIGURE_IDS};
use crate::report::{fmt_sig6, read_csv, write_csv, write_plot_data, CSV_HEADER};
use crate::sweep::{run_sweep, threads_from_env, Delta0, ModelSet, SweepAxis, SweepSpec};
use crate::throughput::{compute_throughput, Scheme, SchemeParams, REFERENCE_SNR_DB, REFERENCE_THROUGHPUT_N2, REFERENCE_THROUGHPUT_N3};
use crate::{HarnessError, Result};

#[derive(Debug, Parser)]
#[command(name = "ambc", version, about = "Multi-tag ambient backscatter detection lab")]
struct Cli {
    /// Flat TOML file of flag values; command-line flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo BER sweep over one axis.
    BerSweep(BerSweepArgs),
    /// Episodic training of an EmbedNet model.
    TrainEmbednet(TrainEmbedArgs),
    /// Supervised training of a ChanEstNet model.
    TrainChanestnet(TrainChanArgs),
    /// Union and Chernoff bounds over SNR.
    PepBound(PepArgs),
    /// Adds normalized per-tag throughput to a BER CSV.
    Throughput(ThroughputArgs),
    /// Reproduces one published figure at desk scale.
    Repro(ReproArgs),
}

/// Scenario flags shared by every simulation subcommand.
#[derive(Debug, Args, Clone)]
struct ScenarioArgs {
    /// Number of tags N.
    #[arg(long)]
    tags: Option<usize>,
    /// Reader antennas M.
    #[arg(long)]
    antennas: Option<usize>,
    /// Ambient samples per tag symbol K.
    #[arg(long = "str")]
    str_samples: Option<usize>,
    /// Tag symbols per frame T.
    #[arg(long)]
    frame_len: Option<usize>,
    /// Pilot symbols per frame P.
    #[arg(long)]
    pilots: Option<usize>,
    /// Backscatter-to-direct ratio per tag in dB; one value applies to all.
    #[arg(long, allow_hyphen_values = true)]
    zeta_db: Option<String>,
    /// Ambient source: gaussian, qpsk or qam16.
    #[arg(long)]
    source: Option<String>,
    /// Ambient source power.
    #[arg(long)]
    sigma_s_sq: Option<f64>,
    /// Modelling profile: literal or calibrated.
    #[arg(long)]
    profile: Option<String>,
    /// Forward-link model, overriding the profile: rayleigh or phase-only.
    #[arg(long)]
    fading: Option<String>,
    /// Gaussian-source LRT, overriding the profile: covariance or known-symbols.
    #[arg(long)]
    gaussian_lrt: Option<String>,
    /// Energy-detector variance, overriding the profile: stated or source-matched.
    #[arg(long)]
    ed_variance: Option<String>,
}

#[derive(Debug, Args)]
struct BerSweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// SNR in dB; a list sweeps SNR.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Swept axis: snr, zeta, k, n or p.
    #[arg(long)]
    axis: Option<String>,
    /// Axis values when --axis is not snr.
    #[arg(long, allow_hyphen_values = true)]
    values: Option<String>,
    #[arg(long, default_value = "lrt,ed")]
    methods: String,
    /// Frames per point.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Gnuplot data file.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    /// EmbedNet checkpoint(s), one per tag count.
    #[arg(long)]
    embednet: Vec<PathBuf>,
    /// ChanEstNet checkpoint(s), one per tag count.
    #[arg(long)]
    chanestnet: Vec<PathBuf>,
    /// Per-tag channel separation for the bounds.
    #[arg(long)]
    delta0: Option<f64>,
    /// Worker threads (default: AMBC_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainEmbedArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = models::TRAIN_SNR_DB, allow_hyphen_values = true)]
    snr_db: f64,
    #[arg(long, default_value_t = 20_000)]
    episodes: usize,
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainChanArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = models::TRAIN_SNR_DB, allow_hyphen_values = true)]
    snr_db: f64,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = TrainingBudget::default().chan_epochs)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Pooling stage: 4x4 or native.
    #[arg(long, default_value = "4x4")]
    pool: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, allow_hyphen_values = true, default_value = "0,2,4,6,8,10,12,14,16,18,20")]
    snr_db: String,
    /// Fixed per-tag channel separation (default M * zeta).
    #[arg(long)]
    delta0: Option<f64>,
    /// Estimate the separation from this many channel draws instead.
    #[arg(long)]
    delta0_draws: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ThroughputArgs {
    /// BER CSV produced by ber-sweep.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Preset: ours, lrt or reference.
    #[arg(long, default_value = "ours")]
    scheme: String,
    #[arg(long)]
    b_pc: Option<f64>,
    #[arg(long)]
    eta_data: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the reference scheme's published throughput instead.
    #[arg(long)]
    reference_table: bool,
}

#[derive(Debug, Args)]
struct ReproArgs {
    /// Figure id, or `list`.
    figure: String,
    #[arg(long, default_value = "repro")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Profile (default calibrated).
    #[arg(long, default_value = "calibrated")]
    profile: String,
    /// Directory caching trained models between runs.
    #[arg(long)]
    model_dir: Option<PathBuf>,
    #[arg(long)]
    embednet: Vec<PathBuf>,
    #[arg(long)]
    chanestnet: Vec<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    train_episodes: usize,
    #[arg(long, default_value_t = 20_000)]
    train_samples: usize,
    #[arg(long, default_value_t = TrainingBudget::default().chan_epochs)]
    train_epochs: usize,
    /// Also write a gnuplot data file.
    #[arg(long)]
    plot_data: bool,
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_list(field: &'static str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|_| HarnessError::invalid(field, format!("`{p}` is not a number"))))
        .collect()
}

fn parse_source(s: &str) -> Result<SourceKind> {
    match s.to_ascii_lowercase().as_str() {
        "gaussian" | "cn" => Ok(SourceKind::Gaussian),
        "qpsk" => Ok(SourceKind::Qpsk),
        "qam16" | "16qam" | "16-qam" => Ok(SourceKind::Qam16),
        other => Err(HarnessError::invalid("source", format!("unknown source `{other}` (gaussian, qpsk, qam16)"))),
    }
}

impl ScenarioArgs {
    fn profile(&self, default: Profile) -> Result<Profile> {
        self.profile.as_deref().map(str::parse).transpose().map(|p| p.unwrap_or(default))
    }

    /// Scenario and detector options, with `snr_db` as the base SNR.
    fn resolve(&self, snr_db: f64, default_profile: Profile) -> Result<(SystemConfig, DetectorOptions)> {
        let profile = self.profile(default_profile)?;
        let n = self.tags.unwrap_or(2);
        let source = self.source.as_deref().map(parse_source).transpose()?.unwrap_or(SourceKind::Qpsk);
        let mut cfg = SystemConfig::reference(n, source).with_snr_db(snr_db);
        profile.apply(&mut cfg);
        if let Some(m) = self.antennas {
            cfg.n_antennas = m;
        }
        if let Some(k) = self.str_samples {
            cfg.str_samples = k;
        }
        if let Some(t) = self.frame_len {
            cfg.frame_len = t;
        }
        if let Some(p) = self.pilots {
            cfg.n_pilots = p;
        }
        if let Some(s) = self.sigma_s_sq {
            cfg.sigma_s_sq = s;
        }
        if let Some(z) = &self.zeta_db {
            let z = parse_list("zeta-db", z)?;
            cfg.zeta_db = match z.len() {
                1 => vec![z[0]; n],
                _ => z,
            };
        }
        if let Some(f) = &self.fading {
            cfg.forward_fading = f.parse::<ForwardFading>()?;
        }
        let mut opts = profile.options();
        if let Some(g) = &self.gaussian_lrt {
            opts.gaussian_lrt = g.parse::<GaussianLrtMode>()?;
        }
        if let Some(e) = &self.ed_variance {
            opts.ed_variance = e.parse::<EdVariance>()?;
        }
        cfg.validate()?;
        Ok((cfg, opts))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| HarnessError::io(path, e))?))
}

fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w)?;
            w.flush().map_err(|e| HarnessError::io(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)
        }
    }
}

fn threads(explicit: Option<usize>) -> Result<Option<usize>> {
    Ok(explicit.or(threads_from_env()?))
}

fn load_models(embed: &[PathBuf], chan: &[PathBuf]) -> Result<ModelSet> {
    let mut models = ModelSet::default();
    for p in embed {
        models.load_embednet(p)?;
    }
    for p in chan {
        models.load_chanestnet(p)?;
    }
    Ok(models)
}

fn ber_sweep(a: &BerSweepArgs) -> Result<()> {
    let axis = a.axis.as_deref().map(str::parse).transpose()?.unwrap_or(SweepAxis::SnrDb);
    let snr = a.snr_db.as_deref().map(|s| parse_list("snr-db", s)).transpose()?;
    let (base_snr, values) = if axis == SweepAxis::SnrDb {
        let values = match (&a.values, snr) {
            (Some(v), _) => parse_list("values", v)?,
            (None, Some(s)) => s,
            (None, None) => return Err(HarnessError::invalid("snr-db", "give the SNR points to sweep")),
        };
        (values[0], values)
    } else {
        let snr = snr.unwrap_or_else(|| vec![10.0]);
        if snr.len() != 1 {
            return Err(HarnessError::invalid("snr-db", format!("a single SNR is required when sweeping {axis}")));
        }
        let values = a.values.as_deref().ok_or_else(|| HarnessError::invalid("values", format!("give the {axis} points to sweep")))?;
        (snr[0], parse_list("values", values)?)
    };
    let (cfg, options) = a.scenario.resolve(base_snr, Profile::Literal)?;
    let mut spec = SweepSpec::new(cfg, axis, values, parse_methods(&a.methods)?, a.trials, a.seed);
    spec.options = options;
    if let Some(d) = a.delta0 {
        spec.delta0 = Delta0::Fixed(d);
    }
    let models = load_models(&a.embednet, &a.chanestnet)?;
    let result = run_sweep(&spec, &models, threads(a.threads)?)?;
    with_output(a.out.as_deref(), |w| write_csv(&result.rows, w))?;
    if let Some(p) = &a.plot_data {
        let mut w = create(p)?;
        write_plot_data(&result.rows, &mut w).map_err(|e| HarnessError::io(p, e))?;
    }
    Ok(())
}

fn train_embednet(a: &TrainEmbedArgs) -> Result<()> {
    let (cfg, _) = a.scenario.resolve(a.snr_db, Profile::Literal)?;
    let budget = TrainingBudget {
        embed_episodes: a.episodes,
        embed_epochs: a.epochs,
        learning_rate: a.lr,
        seed: a.seed,
        ..TrainingBudget::default()
    };
    eprintln!("training EmbedNet: N={} M={} {} {} episodes x {} epochs at {} dB", cfg.n_tags, cfg.n_antennas, cfg.source.name(), a.episodes, a.epochs, cfg.snr_db);
    let (net, log) = models::train_embednet(&cfg, &budget)?;
    for (e, (l, v)) in log.epoch_loss.iter().zip(&log.validation_loss).enumerate() {
        eprintln!("epoch {}: loss {l:.5} validation {v:.5}", e + 1);
    }
    net.save(&a.out, models::embednet_metadata(&cfg, &budget))?;
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn train_chanestnet(a: &TrainChanArgs) -> Result<()> {
    let (cfg, _) = a.scenario.resolve(a.snr_db, Profile::Literal)?;
    let budget = TrainingBudget {
        chan_samples: a.samples,
        chan_epochs: a.epochs,
        learning_rate: a.lr,
        seed: a.seed,
        pool: a.pool.parse::<PoolMode>()?,
        ..TrainingBudget::default()
    };
    eprintln!("training ChanEstNet: N={} M={} {} {} samples x {} epochs at {} dB", cfg.n_tags, cfg.n_antennas, cfg.source.name(), a.samples, a.epochs, cfg.snr_db);
    let (net, log) = models::train_chanestnet(&cfg, &budget)?;
    for (e, (l, v)) in log.epoch_loss.iter().zip(&log.validation_loss).enumerate() {
        eprintln!("epoch {}: loss {l:.5} validation {v:.5}", e + 1);
    }
    net.save(&a.out, models::chanestnet_metadata(&cfg, &budget))?;
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn pep_bound(a: &PepArgs) -> Result<()> {
    let snr = parse_list("snr-db", &a.snr_db)?;
    let (cfg, options) = a.scenario.resolve(snr[0], Profile::Literal)?;
    let mut spec = SweepSpec::new(cfg, SweepAxis::SnrDb, snr, vec![Method::PepUnion, Method::PepChernoff], 1, a.seed);
    spec.options = options;
    spec.delta0 = match (a.delta0, a.delta0_draws) {
        (Some(d), _) => Delta0::Fixed(d),
        (None, Some(draws)) => Delta0::Estimated { draws },
        (None, None) => Delta0::Expected,
    };
    let result = run_sweep(&spec, &ModelSet::default(), Some(1))?;
    with_output(a.out.as_deref(), |w| write_csv(&result.rows, w))?;
    if let Some(p) = &a.plot_data {
        let mut w = create(p)?;
        write_plot_data(&result.rows, &mut w).map_err(|e| HarnessError::io(p, e))?;
    }
    Ok(())
}

fn throughput_cmd(a: &ThroughputArgs) -> Result<()> {
    if a.reference_table {
        return with_output(a.out.as_deref(), |w| {
            let io = |e| HarnessError::io("output", e);
            writeln!(w, "snr_db,n_tags,t_tag").map_err(io)?;
            for (table, n) in [(&REFERENCE_THROUGHPUT_N2, 2), (&REFERENCE_THROUGHPUT_N3, 3)] {
                for (s, t) in REFERENCE_SNR_DB.iter().zip(table.iter()) {
                    writeln!(w, "{},{n},{}", fmt_sig6(*s), fmt_sig6(*t)).map_err(io)?;
                }
            }
            Ok(())
        });
    }
    let input = a.input.as_deref().ok_or_else(|| HarnessError::invalid("in", "a BER CSV is required"))?;
    let rows = read_csv(File::open(input).map_err(|e| HarnessError::io(input, e))?)?;
    let preset = a.scheme.parse::<Scheme>()?.params();
    let params = SchemeParams {
        b_pc: a.b_pc.unwrap_or(preset.b_pc),
        eta_data: a.eta_data.unwrap_or(preset.eta_data),
    };
    let entries = compute_throughput(&rows, params)?;
    with_output(a.out.as_deref(), |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER.iter().copied().chain(["b_pc", "eta_data", "t_tag"]))?;
        for (r, e) in rows.iter().filter(|r| !r.method.is_bound()).zip(&entries) {
            out.write_record([
                r.method.name().to_string(),
                r.axis.name().to_string(),
                fmt_sig6(r.axis_value),
                r.n_tags.to_string(),
                fmt_sig6(r.ber),
                fmt_sig6(r.ci95),
                r.bit_count.to_string(),
                r.error_count.to_string(),
                r.trials.to_string(),
                r.seed.to_string(),
                fmt_sig6(e.b_pc),
                fmt_sig6(e.eta_data),
                fmt_sig6(e.t_tag),
            ])?;
        }
        out.flush().map_err(|e| HarnessError::io("output", e))
    })
}

fn repro(a: &ReproArgs) -> Result<()> {
    if a.figure == "list" {
        for id in FIGURE_IDS {
            let r = recipes::recipe(id, Profile::Calibrated, 1, 1)?;
            println!("{id:18} {}", r.title);
        }
        return Ok(());
    }
    let profile: Profile = a.profile.parse()?;
    let recipe = recipes::recipe(&a.figure, profile, a.trials, a.seed)?;
    eprintln!("{}: {}", recipe.id, recipe.title);
    eprintln!("{}", profile.describe());
    let budget = TrainingBudget {
        embed_episodes: a.train_episodes,
        chan_samples: a.train_samples,
        chan_epochs: a.train_epochs,
        seed: a.seed,
        ..TrainingBudget::default()
    };
    let supplied = load_models(&a.embednet, &a.chanestnet)?;
    let results = recipes::run_recipe(&recipe, &supplied, a.model_dir.as_deref(), &budget, threads(a.threads)?, &mut |m| eprintln!("{m}"))?;
    let rows: Vec<_> = results.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    let csv_path = a.out_dir.join(format!("{}.csv", recipe.id));
    let mut w = create(&csv_path)?;
    write_csv(&rows, &mut w)?;
    eprintln!("wrote {}", csv_path.display());
    if a.plot_data {
        let dat = a.out_dir.join(format!("{}.dat", recipe.id));
        let mut w = create(&dat)?;
        write_plot_data(&rows, &mut w).map_err(|e| HarnessError::io(&dat, e))?;
        eprintln!("wrote {}", dat.display());
    }
    if recipe.id == "table-throughput" {
        let txt = a.out_dir.join("table-throughput.txt");
        std::fs::write(&txt, recipes::throughput_table(&results)).map_err(|e| HarnessError::io(&txt, e))?;
        eprintln!("wrote {}", txt.display());
    }
    Ok(())
}

/// Turns a flat TOML table into `--key value` flags.
fn config_flags(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::ConfigFile(format!("{}: {e}", path.display())))?;
    let mut flags = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &toml::Value| -> Result<String> {
            Ok(match v {
                toml::Value::String(s) => s.clone(),
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                other => return Err(HarnessError::ConfigFile(format!("`{key}`: unsupported value {other}"))),
            })
        };
        match &value {
            toml::Value::Boolean(true) => flags.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>>>()?;
                flags.push(format!("{flag}={}", parts.join(",")));
            }
            toml::Value::Table(_) => return Err(HarnessError::ConfigFile(format!("`{key}`: nested tables are not supported"))),
            v => flags.push(format!("{flag}={}", scalar(v)?)),
        }
    }
    Ok(flags)
}

/// Splices flags from `--config FILE` after the subcommand, skipping any
/// the command line sets itself.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = it.next();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let flag_name = |a: &str| a.split('=').next().unwrap_or(a).to_string();
    let explicit: std::collections::BTreeSet<String> = rest.iter().filter(|a| a.starts_with("--")).map(|a| flag_name(a)).collect();
    let flags: Vec<String> = config_flags(Path::new(&path))?.into_iter().filter(|f| !explicit.contains(&flag_name(f))).collect();
    // Insert right after the subcommand (and the figure id for repro).
    let mut at = rest.iter().skip(1).position(|a| !a.starts_with('-')).map(|i| i + 2).unwrap_or(rest.len());
    if rest.get(at - 1).map(String::as_str) == Some("repro") && rest.get(at).is_some_and(|a| !a.starts_with('-')) {
        at += 1;
    }
    let at = at.min(rest.len());
    rest.splice(at..at, flags);
    Ok(rest)
}

fn execute(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::BerSweep(a) => ber_sweep(a),
        Command::TrainEmbednet(a) => train_embednet(a),
        Command::TrainChanestnet(a) => train_chanestnet(a),
        Command::PepBound(a) => pep_bound(a),
        Command::Throughput(a) => throughput_cmd(a),
        Command::Repro(a) => repro(a),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
