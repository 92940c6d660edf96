use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use modshift::crt::{conjugacy_check, split_config, CrtDecomposition};
use modshift::measure::experiment::default_n_schedule;
use modshift::measure::stats::{block_entropy, fourier, mixing_statistic, single_site_family, Budget};
use modshift::measure::CharacterSpec;
use modshift::poly::frobenius_power;
use modshift::rng::draw_rng;
use modshift::runner::{self, MeasureConfig, RunOptions};
use modshift::shifts::{coset_shift_check, probe_vectors, topological_mixing_check, KernelShiftSpec, WindowBasis};
use modshift::{Coord, LocalRule, Mode, WindowConfig, WindowSpec};

#[derive(Parser)]
#[command(name = "modshift", version, about = "Linear cellular automata over finite rings: exact checks and measurements")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Boundary handling for windows.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Directory for report files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Allow enumerations above the resource guard.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply and iterate local rules.
    #[command(subcommand)]
    Lca(LcaCmd),
    /// Kernel shifts and coset shifts.
    #[command(subcommand)]
    Shift(ShiftCmd),
    /// Fourier coefficients, mixing and entropy of measures.
    #[command(subcommand)]
    Measure(MeasureCmd),
    /// Chinese-remainder splitting.
    #[command(subcommand)]
    Crt(CrtCmd),
    /// Config-driven experiment runs.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Subcommand)]
enum LcaCmd {
    /// One application of the rule to a config file.
    Step {
        #[arg(long)]
        rule: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// `Φ^t` of a config file, by Lucas expansion or naive iteration.
    Power {
        #[arg(long)]
        rule: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        t: u64,
        #[arg(long)]
        naive: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Frobenius fast-forward against naive iteration on random tori.
    FrobeniusCheck {
        #[arg(long)]
        rule: String,
        #[arg(long)]
        k: u32,
        #[arg(long, value_delimiter = ',', default_value = "32")]
        extents: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        trials: u64,
    },
}

#[derive(Args, Clone)]
struct WindowArgs {
    /// Window extents, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    extents: Vec<usize>,
    /// Window origin, comma separated (zeros by default).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    origin: Option<Vec<i64>>,
}

impl WindowArgs {
    fn window(&self, dims: (usize, usize)) -> Result<WindowSpec> {
        Ok(match &self.origin {
            Some(o) => WindowSpec::new(dims, o, &self.extents)?,
            None => WindowSpec::at_zero(dims, &self.extents)?,
        })
    }
}

#[derive(Subcommand)]
enum ShiftCmd {
    /// Window kernel of a constraint rule.
    Kernel {
        #[arg(long)]
        kernel: String,
        #[command(flatten)]
        window: WindowArgs,
        /// Print up to this many kernel words.
        #[arg(long, default_value_t = 0)]
        enumerate: u128,
    },
    /// Whether a config spans a coset shift of the kernel shift.
    CosetCheck {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        input: PathBuf,
        /// Random probe vectors beyond the lattice generators.
        #[arg(long, default_value_t = 8)]
        probes: usize,
    },
    /// Whether single-site values at `n·h` can be glued by a kernel word.
    MixingCheck {
        #[arg(long)]
        kernel: String,
        /// Offsets `h` as `(0,0);(0,1);(1,0)`.
        #[arg(long, value_delimiter = ';', value_parser = parse_coord, required = true, allow_hyphen_values = true)]
        offsets: Vec<Coord>,
        /// One module value per offset, `;`-separated, components by `,`.
        #[arg(long)]
        values: String,
        #[arg(long)]
        n: i64,
    },
}

#[derive(Args, Clone)]
struct MeasureArgs {
    /// Inline measure description, e.g. `kind="uniform", ring="zmod:2", extents=[4]`.
    #[arg(long)]
    measure: String,
    /// Draws for sampled estimates; exact when omitted.
    #[arg(long)]
    samples: Option<u64>,
}

impl MeasureArgs {
    fn budget(&self) -> Budget {
        self.samples.map_or(Budget::Exact, Budget::Samples)
    }
}

#[derive(Subcommand)]
enum MeasureCmd {
    /// Fourier coefficients on characters based on a window.
    Fourier {
        #[command(flatten)]
        m: MeasureArgs,
        /// A character label like `(0,0):1;(1,0):1`, or `all`.
        #[arg(long, default_value = "all")]
        chi: String,
        #[arg(long, value_delimiter = ',', required = true)]
        char_extents: Vec<usize>,
    },
    /// Single-site mixing deviations.
    Mixing {
        #[command(flatten)]
        m: MeasureArgs,
        #[arg(long, value_delimiter = ';', value_parser = parse_coord, required = true, allow_hyphen_values = true)]
        offsets: Vec<Coord>,
        #[arg(long, value_delimiter = ',')]
        n_schedule: Option<Vec<i64>>,
    },
    /// Plug-in block entropy per site.
    Entropy {
        #[command(flatten)]
        m: MeasureArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        block_extents: Vec<usize>,
    },
}

#[derive(Subcommand)]
enum CrtCmd {
    /// Split a config file into one file per component.
    Split {
        #[arg(long)]
        input: PathBuf,
        /// Output prefix; files are `<prefix>.<j>.cfg`.
        #[arg(long)]
        prefix: PathBuf,
        /// Also check that a rule commutes with the splitting.
        #[arg(long)]
        rule: Option<String>,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Run an experiment file, or a bundled one as `bundled:<name>`.
    Run { file: String },
    /// List the bundled experiment files.
    List,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: modshift::Error| e.to_string())
}

/// `(0,1)` or `0,1`.
fn parse_coord(s: &str) -> Result<Coord, String> {
    let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
    inner
        .split(',')
        .map(|x| x.trim().parse::<i64>().map_err(|_| format!("bad coordinate `{x}`")))
        .collect::<Result<Vec<_>, _>>()
        .map(|v| Coord::from_slice(&v))
}

fn read_config(path: &Path) -> Result<WindowConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    WindowConfig::decode(&text).with_context(|| format!("decoding {}", path.display()))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Prints a JSON result and, with `--out`, stores it as `<name>.json`.
fn emit(cli: &Cli, name: &str, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    print!("{text}");
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{name}.json")), &text)?;
    }
    Ok(())
}

fn mode(cli: &Cli) -> Mode {
    cli.mode.unwrap_or(Mode::Exact)
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Lca(cmd) => match cmd {
            LcaCmd::Step { rule, input, output } => {
                let rule = LocalRule::parse(rule)?;
                let c = read_config(input)?;
                let c = match cli.mode {
                    Some(m) => c.with_mode(m),
                    None => c,
                };
                write_or_print(output.as_deref(), &rule.to_poly().apply(&c)?.encode())?;
                Ok(true)
            }
            LcaCmd::Power {
                rule,
                input,
                t,
                naive,
                output,
            } => {
                let rule = LocalRule::parse(rule)?;
                let c = read_config(input)?;
                let c = match cli.mode {
                    Some(m) => c.with_mode(m),
                    None => c,
                };
                let poly = rule.to_poly();
                let out = if *naive { poly.iterate(&c, *t)? } else { poly.pow_lucas(*t).apply(&c)? };
                write_or_print(output.as_deref(), &out.encode())?;
                Ok(true)
            }
            LcaCmd::FrobeniusCheck {
                rule,
                k,
                extents,
                trials,
            } => {
                let rule = LocalRule::parse(rule)?;
                let Some(p) = rule.ring().prime_characteristic() else {
                    bail!("Frobenius check needs prime characteristic, {} has {}", rule.ring(), rule.ring().characteristic());
                };
                let steps = (p as u64).pow(*k);
                let fast = frobenius_power(&rule, *k)?;
                let poly = rule.to_poly();
                let structural = fast == poly.pow(steps);
                let w = WindowSpec::at_zero(rule.dims(), extents)?;
                let mut mismatches = Vec::new();
                for trial in 0..*trials {
                    let c = WindowConfig::random(w.clone(), rule.module().clone(), Mode::Torus, &mut draw_rng(cli.seed, trial));
                    if fast.apply(&c)? != poly.iterate(&c, steps)? {
                        mismatches.push(trial);
                    }
                }
                let ok = structural && mismatches.is_empty();
                emit(
                    cli,
                    "frobenius_check",
                    &json!({
                        "rule": rule.to_text("rule"),
                        "k": k,
                        "steps": steps,
                        "fast_forward": fast.to_string(),
                        "structural": structural,
                        "trials": trials,
                        "mismatched_trials": mismatches,
                        "passed": ok,
                    }),
                )?;
                Ok(ok)
            }
        },
        Command::Shift(cmd) => match cmd {
            ShiftCmd::Kernel {
                kernel,
                window,
                enumerate,
            } => {
                let s = KernelShiftSpec::parse(kernel)?;
                let w = window.window(s.dims())?;
                let basis = WindowBasis::new(&s, &w, mode(cli))?;
                let shown = basis.solution_count().map_or(*enumerate, |n| n.min(*enumerate));
                let words: Vec<String> = (0..shown).map(|i| basis.word(i).encode()).collect();
                emit(
                    cli,
                    "kernel",
                    &json!({
                        "kernel": s.to_text(),
                        "window": w.to_string(),
                        "mode": mode(cli),
                        "constraints": basis.constraint_count(),
                        "solution_count": basis.solution_count().map(|c| c.to_string()),
                        "log2_count": basis.log2_count(),
                        "free_sites": (0..basis.components().len()).map(|j| basis.free_sites(j).iter().map(|c| c.to_vec()).collect::<Vec<_>>()).collect::<Vec<_>>(),
                        "words": words,
                    }),
                )?;
                Ok(true)
            }
            ShiftCmd::CosetCheck { kernel, input, probes } => {
                let s = KernelShiftSpec::parse(kernel)?;
                let c = read_config(input)?;
                let vs = probe_vectors(s.dims(), *probes, &mut draw_rng(cli.seed, 0));
                let r = coset_shift_check(&c, &s, &vs)?;
                emit(
                    cli,
                    "coset_check",
                    &json!({
                        "kernel": s.to_text(),
                        "holds": r.holds,
                        "in_kernel": s.contains(&c)?,
                        "probes": vs.iter().map(|v| v.to_vec()).collect::<Vec<_>>(),
                        "failure": r.failure.map(|(v, site)| json!({"vector": v.to_vec(), "site": site.to_vec()})),
                    }),
                )?;
                Ok(r.holds)
            }
            ShiftCmd::MixingCheck { kernel, offsets, values, n } => {
                let s = KernelShiftSpec::parse(kernel)?;
                let vals: Vec<Vec<u32>> = values
                    .split(';')
                    .map(|v| v.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>())
                    .collect::<Result<_, _>>()
                    .context("bad --values")?;
                if vals.len() != offsets.len() {
                    bail!("--values needs one entry per offset");
                }
                let axes = s.dims().0 + s.dims().1;
                let site = WindowSpec::at_zero(s.dims(), &vec![1; axes])?;
                let pins = offsets
                    .iter()
                    .zip(vals)
                    .map(|(h, v)| Ok((h.clone(), WindowConfig::new(site.clone(), s.module().clone(), Mode::Exact, v)?)))
                    .collect::<Result<Vec<_>>>()?;
                let ok = topological_mixing_check(&s, &pins, *n)?;
                emit(cli, "mixing_check", &json!({"kernel": s.to_text(), "n": n, "extendable": ok}))?;
                Ok(ok)
            }
        },
        Command::Measure(cmd) => {
            let margs = match cmd {
                MeasureCmd::Fourier { m, .. } | MeasureCmd::Mixing { m, .. } | MeasureCmd::Entropy { m, .. } => m,
            };
            let cfg = MeasureConfig::parse_inline(&margs.measure)?;
            let mu = runner::measure_from_config(&cfg, mode(cli), cli.seed)?;
            match cmd {
                MeasureCmd::Fourier { chi, char_extents, .. } => {
                    let b = WindowSpec::new(mu.window().dims(), mu.window().origin(), char_extents)?;
                    let limit = if cli.force { u128::MAX } else { modshift::measure::ENUMERATION_LIMIT };
                    let chars = if chi == "all" {
                        CharacterSpec::all(&b, mu.module(), limit)?
                    } else {
                        vec![CharacterSpec::parse(b.clone(), mu.module(), chi)?]
                    };
                    let rows = chars
                        .iter()
                        .map(|c| {
                            let e = fourier(&mu, c, margs.budget())?;
                            Ok(json!({"chi": c.label(), "re": e.re, "im": e.im, "modulus": e.modulus(), "stderr": e.stderr, "exact": e.exact}))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    emit(cli, "fourier", &json!({"measure": mu.label(), "char_window": b.to_string(), "coefficients": rows}))?;
                }
                MeasureCmd::Mixing { offsets, n_schedule, .. } => {
                    let family = single_site_family(offsets, &vec![0; mu.module().rank()]);
                    let ns = n_schedule.clone().unwrap_or_else(default_n_schedule);
                    let rows = ns
                        .iter()
                        .map(|&n| Ok(serde_json::to_value(mixing_statistic(&mu, &family, n, margs.budget())?)?))
                        .collect::<Result<Vec<_>>>()?;
                    emit(cli, "mixing", &json!({"measure": mu.label(), "results": rows}))?;
                }
                MeasureCmd::Entropy { block_extents, .. } => {
                    let block = WindowSpec::new(mu.window().dims(), mu.window().origin(), block_extents)?;
                    let e = block_entropy(&mu, &block, margs.budget())?;
                    emit(cli, "entropy", &json!({"measure": mu.label(), "block": block.to_string(), "estimate": e}))?;
                }
            }
            Ok(true)
        }
        Command::Crt(CrtCmd::Split { input, prefix, rule }) => {
            let c = read_config(input)?;
            let d = CrtDecomposition::new(c.ring())?;
            let parts = split_config(&c, &d)?;
            let mut files = Vec::new();
            for (j, part) in parts.iter().enumerate() {
                let path = PathBuf::from(format!("{}.{j}.cfg", prefix.display()));
                fs::write(&path, part.encode()).with_context(|| format!("writing {}", path.display()))?;
                files.push(path.display().to_string());
            }
            let mut ok = true;
            let conj = match rule {
                Some(r) => {
                    let rule = LocalRule::parse(r)?;
                    let rep = conjugacy_check(&rule, &d, c.window().extents(), 20, cli.seed, None)?;
                    ok = rep.holds;
                    Some(serde_json::to_value(rep)?)
                }
                None => None,
            };
            emit(
                cli,
                "crt_split",
                &json!({
                    "ring": c.ring().to_string(),
                    "components": d.components().iter().map(|c| json!({"prime": c.prime, "exponent": c.exponent, "ring": c.ring.to_string(), "supported": c.supported()})).collect::<Vec<_>>(),
                    "degenerate": d.is_degenerate(),
                    "files": files,
                    "conjugacy": conj,
                }),
            )?;
            Ok(ok)
        }
        Command::Experiment(ExperimentCmd::List) => {
            for (name, _) in runner::BUNDLED {
                println!("bundled:{name}");
            }
            Ok(true)
        }
        Command::Experiment(ExperimentCmd::Run { file }) => {
            let text = match file.strip_prefix("bundled:") {
                Some(name) => runner::bundled(name).with_context(|| format!("no bundled experiment `{name}`"))?.to_string(),
                None => fs::read_to_string(file).with_context(|| format!("reading {file}"))?,
            };
            let cfg = runner::load(&text)?;
            let started = runner::report::now();
            let opts = RunOptions {
                force: cli.force,
                workers: cli.workers,
                seed: None,
                mode: cli.mode,
            };
            let report = runner::run(&cfg, &opts)?;
            for c in &report.checks {
                eprintln!("{} {:<32} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.summary);
            }
            match &cli.out {
                Some(dir) => {
                    runner::write_outputs(&report, &text, dir, started, cli.workers, cli.force)?;
                    eprintln!("report written to {}", dir.display());
                }
                None => print!("{}", report.to_json()),
            }
            if !report.passed {
                eprintln!("failures: {}", serde_json::to_string(&report.failures)?);
            }
            Ok(report.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
