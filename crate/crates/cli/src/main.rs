use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use msgfem::coefficient::{generate_highcontrast, Pattern};
use msgfem::pipeline::{ablate, build_local_stage, finish_run, prepare, sweep, RunOutcome, SweepAxis};
use msgfem::{Error, ResultRow, RunConfig};

#[derive(Parser)]
#[command(name = "msgfem", version, about = "Mixed multiscale spectral GFEM for Darcy flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fine-scale reference solve only.
    Fine(ConfigArgs),
    /// One multiscale run.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Write each subdomain's eigenvalues under <output_dir>/eigenvalues/.
        #[arg(long)]
        dump_eigenvalues: bool,
    },
    /// One run per value along an axis, plus a gnuplot script.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// n_loc, ell or gamma.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// The same run with and without enrichment.
    Ablate(ConfigArgs),
    /// One run with the coarse inf-sup estimate.
    Infsup(ConfigArgs),
    /// Write a generated high-contrast raster.
    GenField {
        #[arg(long, default_value = "channels")]
        pattern: String,
        #[arg(long, default_value_t = 1e3)]
        contrast: f64,
        #[arg(long, default_value_t = 64)]
        nx: usize,
        #[arg(long, default_value_t = 64)]
        ny: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Configuration: defaults, then the `--config` file, then explicit flags.
#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any config key, as key=value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    overlap: Option<String>,
    #[arg(long)]
    ell: Option<String>,
    #[arg(long, alias = "n_loc")]
    n_loc: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    bc: Option<String>,
    #[arg(long)]
    coefficient: Option<String>,
    #[arg(long)]
    source: Option<String>,
    #[arg(long, alias = "with_enrichment")]
    with_enrichment: Option<String>,
    #[arg(long, alias = "with_coarse_rt")]
    with_coarse_rt: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long, alias = "output_dir")]
    output_dir: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            c.apply_config_text(&fs::read_to_string(path)?)?;
        }
        let flags = [
            ("n", &self.n),
            ("m", &self.m),
            ("overlap", &self.overlap),
            ("ell", &self.ell),
            ("n_loc", &self.n_loc),
            ("gamma", &self.gamma),
            ("bc", &self.bc),
            ("coefficient", &self.coefficient),
            ("source", &self.source),
            ("with_enrichment", &self.with_enrichment),
            ("with_coarse_rt", &self.with_coarse_rt),
            ("tol", &self.tol),
            ("output_dir", &self.output_dir),
            ("seed", &self.seed),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                c.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("--set expects key=value, got {kv:?}")))?;
            c.set(k.trim(), v)?;
        }
        c.validate()?;
        Ok(c)
    }
}

fn write_results(dir: &Path, rows: &[&ResultRow]) -> Result<PathBuf, Error> {
    fs::create_dir_all(dir)?;
    let mut text = ResultRow::csv_header();
    text.push('\n');
    for r in rows {
        text.push_str(&r.to_csv());
        text.push('\n');
    }
    let path = dir.join("results.csv");
    fs::write(&path, text)?;
    Ok(path)
}

/// Gnuplot script drawing log2 of the three errors against the axis.
fn plot_script(axis: SweepAxis) -> String {
    let header = ResultRow::csv_header();
    let col = |name: &str| header.split(',').position(|h| h == name).expect("known column") + 1;
    let x = col(&axis.to_string());
    let xexpr = match axis {
        SweepAxis::Gamma => format!("(log10(${x} > 0 ? ${x} : 1e-12))"),
        _ => format!("{x}"),
    };
    let xlabel = match axis {
        SweepAxis::Gamma => "log10(gamma)".to_string(),
        a => a.to_string(),
    };
    let mut s = String::from("set datafile separator ','\nset terminal pngcairo size 800,600\nset output 'plot.png'\n");
    s.push_str(&format!("set xlabel '{xlabel}'\nset ylabel 'log2(relative error)'\nset key top right\n"));
    let series: Vec<String> = ["error_v", "error_p", "error_div"]
        .iter()
        .map(|e| format!("'results.csv' every ::1 using {xexpr}:(log(${})/log(2)) with linespoints title '{e}'", col(e)))
        .collect();
    s.push_str(&format!("plot {}\n", series.join(", \\\n     ")));
    s
}

fn dump_eigenvalues(dir: &Path, eigenvalues: &[Vec<f64>]) -> Result<(), Error> {
    let dir = dir.join("eigenvalues");
    fs::create_dir_all(&dir)?;
    for (i, ev) in eigenvalues.iter().enumerate() {
        let text: String = ev.iter().map(|l| format!("{l:?}\n")).collect();
        fs::write(dir.join(format!("subdomain_{i:03}.txt")), text)?;
    }
    Ok(())
}

fn summarize(r: &ResultRow) {
    let mut line = format!(
        "n_loc={} ell={} gamma={}: error_v={:.4e} error_p={:.4e} error_div={:.4e} dofs {} -> {}",
        r.config.n_loc, r.config.ell, r.config.gamma, r.error_v, r.error_p, r.error_div, r.dofs_fine, r.dofs_coarse
    );
    if let Some(b) = r.beta {
        line.push_str(&format!(" beta={b:.4e}"));
    }
    if r.status != "ok" {
        line.push_str(&format!(" [{}]", r.status));
    }
    println!("{line}");
}

fn single(config: &RunConfig, dump: bool) -> Result<RunOutcome, Error> {
    let prep = prepare(config)?;
    let stage = build_local_stage(&prep, config, config.n_loc)?;
    if dump {
        dump_eigenvalues(&config.output_dir, &stage.eigenvalues()).map_err(|e| e.in_phase("output"))?;
    }
    finish_run(&prep, &stage, config)
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Fine(args) => {
            let c = args.resolve()?;
            let prep = prepare(&c)?;
            fs::create_dir_all(&c.output_dir)?;
            let text = format!(
                "n,dofs_fine,residual,wall_ms_fine\n{},{},{:e},{:.3}\n",
                c.n,
                prep.mesh.mixed_dof_count(),
                prep.reference.report.residual,
                prep.wall_ms_fine
            );
            fs::write(c.output_dir.join("fine.csv"), text)?;
            println!(
                "fine solve: {} unknowns, residual {:.2e}, {:.1} ms",
                prep.mesh.mixed_dof_count(),
                prep.reference.report.residual,
                prep.wall_ms_fine
            );
        }
        Command::Run { config, dump_eigenvalues } => {
            let c = config.resolve()?;
            let out = single(&c, dump_eigenvalues)?;
            write_results(&c.output_dir, &[&out.row])?;
            summarize(&out.row);
        }
        Command::Infsup(args) => {
            let mut c = args.resolve()?;
            c.infsup = true;
            let out = single(&c, false)?;
            write_results(&c.output_dir, &[&out.row])?;
            summarize(&out.row);
            if out.row.beta.is_none() {
                eprintln!("coarse space too large for the inf-sup estimate");
            }
        }
        Command::Sweep { config, axis, values } => {
            let c = config.resolve()?;
            let axis: SweepAxis = axis.parse()?;
            let rows = sweep(&c, axis, &values)?;
            let refs: Vec<&ResultRow> = rows.iter().map(|r| &r.row).collect();
            write_results(&c.output_dir, &refs)?;
            fs::write(c.output_dir.join("plot.gp"), plot_script(axis))?;
            refs.iter().for_each(|r| summarize(r));
        }
        Command::Ablate(args) => {
            let c = args.resolve()?;
            let [with, without] = ablate(&c)?;
            write_results(&c.output_dir, &[&with.row, &without.row])?;
            summarize(&with.row);
            summarize(&without.row);
            let ratio = without.row.error_v / with.row.error_v;
            let beta_ratio = with.row.beta.unwrap_or(f64::NAN) / without.row.beta.unwrap_or(f64::NAN);
            println!("error_v ratio (without / with) = {ratio:.3e}, beta ratio (with / without) = {beta_ratio:.3e}");
        }
        Command::GenField { pattern, contrast, nx, ny, seed, out } => {
            let pattern: Pattern = pattern.parse()?;
            let field = generate_highcontrast(nx, ny, pattern, contrast, seed)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            field.save(&out)?;
            println!("wrote {}x{} {pattern} field, contrast {:e}, to {}", nx, ny, field.contrast(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let phase = e.phase().unwrap_or(if e.is_input_error() { "config" } else { "run" });
            eprintln!("error in {phase}: {}", e.root());
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
