use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use strobe_bench::aggregate::format_table;
use strobe_bench::{aggregate, run_experiment, write_csv, write_svg, Cell, ExperimentPlan, RunOutput};
use strobe_core::baselines::Scheme;
use strobe_core::optimize::Algorithm;
use strobe_core::path::FullPathVector;
use strobe_core::pods::split_path;
use strobe_core::scenarios::{CircleGridField, ScenarioKind};

#[derive(Parser)]
#[command(name = "strobe", version, about = "Pod-parallel path optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment plan.
    Run {
        plan: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Print the pod partition of a path as JSON.
    Split {
        #[arg(long)]
        waypoints: usize,
        #[arg(long)]
        workers: usize,
        #[arg(long, default_value_t = 2)]
        ell: usize,
    },
    /// Render a 2-D path over a circle field as SVG.
    Render {
        #[arg(long)]
        path: PathBuf,
        /// TOML file with `centers`, `radius`, `falloff`; the default grid
        /// when omitted.
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Color waypoints by the pods this many workers would get.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 2)]
        ell: usize,
    },
    /// Run one scenario with default settings.
    Demo {
        #[arg(long, default_value = "circle-grid")]
        scenario: ScenarioKind,
        /// Write the optimized path as SVG (circle-grid only).
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        opts: RunOpts,
    },
}

/// Overrides applied on top of a plan (or of the demo defaults).
#[derive(Args, Default)]
struct RunOpts {
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<Scheme>,
    #[arg(long, value_delimiter = ',')]
    optimizer: Vec<Algorithm>,
    #[arg(long, value_delimiter = ',')]
    workers: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    waypoints: Vec<usize>,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Per-run time limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Write Strobe epoch traces as JSON lines.
    #[arg(long)]
    out_jsonl: Option<PathBuf>,
    /// Stream epoch traces to stderr as JSON lines.
    #[arg(long)]
    verbose: bool,
}

impl RunOpts {
    fn apply(&self, plan: &mut ExperimentPlan) -> Result<()> {
        replace(&mut plan.schemes, &self.scheme);
        replace(&mut plan.optimizers, &self.optimizer);
        replace(&mut plan.workers, &self.workers);
        replace(&mut plan.waypoints, &self.waypoints);
        if let Some(s) = self.seed {
            plan.base_seed = s;
        }
        if let Some(r) = self.reps {
            plan.repetitions = r;
        }
        if let Some(t) = self.time_limit {
            plan.time_limit = t;
        }
        plan.validate()?;
        Ok(())
    }
}

fn replace<T: Clone>(dst: &mut Vec<T>, src: &[T]) {
    if !src.is_empty() {
        *dst = src.to_vec();
    }
}

fn execute(plan: &ExperimentPlan, opts: &RunOpts, mut extra: impl FnMut(&RunOutput)) -> Result<()> {
    let mut jsonl = match &opts.out_jsonl {
        Some(p) => Some(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => None,
    };
    let mut io_error = None;
    let records = run_experiment(plan, |out| {
        let r = &out.record;
        eprintln!(
            "{} {} {} {} T={} seed={} {:.3}s converged={} quality={:.5}{}",
            r.scenario,
            r.waypoints,
            r.scheme,
            r.optimizer,
            r.workers,
            r.seed,
            r.wall_time,
            r.converged,
            r.quality,
            if r.error.is_empty() { String::new() } else { format!(" error: {}", r.error) }
        );
        for line in out.trace_lines() {
            let text = serde_json::to_string(&line).expect("traces serialize");
            if opts.verbose {
                eprintln!("{text}");
            }
            if let Some(w) = jsonl.as_mut() {
                if let Err(e) = writeln!(w, "{text}") {
                    io_error.get_or_insert(e);
                }
            }
        }
        extra(out);
    });
    if let Some(e) = io_error {
        return Err(e).context("writing traces");
    }
    if let Some(mut w) = jsonl {
        w.flush()?;
    }
    if let Some(p) = &opts.out_csv {
        let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
        write_csv(BufWriter::new(file), &records)?;
    }
    print!("{}", format_table(&aggregate(&records)?));
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { plan, opts } => {
            let text = std::fs::read_to_string(&plan).with_context(|| format!("reading {}", plan.display()))?;
            let mut plan = ExperimentPlan::from_toml(&text)?;
            opts.apply(&mut plan)?;
            execute(&plan, &opts, |_| {})
        }
        Command::Split { waypoints, workers, ell } => {
            let partition = split_path(waypoints, workers, ell)?;
            println!("{}", partition.to_json());
            Ok(())
        }
        Command::Render {
            path,
            field,
            out,
            workers,
            ell,
        } => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let path = FullPathVector::from_json(&text)?;
            let field = match field {
                Some(f) => toml::from_str(&std::fs::read_to_string(&f)?).with_context(|| format!("parsing {}", f.display()))?,
                None => CircleGridField::default(),
            };
            let partition = workers.map(|w| split_path(path.len(), w, ell)).transpose()?;
            write_svg(&path, &field, partition.as_ref(), &out)?;
            Ok(())
        }
        Command::Demo { scenario, svg, opts } => {
            if svg.is_some() && scenario != ScenarioKind::CircleGrid {
                anyhow::bail!("SVG output needs the 2-D circle-grid scenario");
            }
            let cell = Cell {
                scenario,
                waypoints: 100,
                scheme: Scheme::Strobe,
                optimizer: Algorithm::GradientDescent,
                workers: std::thread::available_parallelism().map_or(1, usize::from),
            };
            let mut plan = ExperimentPlan::single(cell, 1, 0);
            opts.apply(&mut plan)?;
            let mut last = None;
            execute(&plan, &opts, |out| last = out.path.clone())?;
            if let (Some(out), Some(path)) = (svg, last) {
                let partition = split_path(path.len(), plan.workers[0], plan.settings.ell)?;
                write_svg(&path, &plan.scenario.field.clone().unwrap_or_default(), Some(&partition), &out)?;
            }
            Ok(())
        }
    }
}
