use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use temq::experiments::{
    run_distribution_check, run_gamma_sweep, write_records, Branch, ExperimentConfig, OutputFormat, Pipeline,
    GAMMA_CANDIDATES,
};
use temq::numfmt::sig;
use temq::waveform::Waveform;
use temq::{Error, Result};

#[derive(Parser)]
#[command(
    name = "temq",
    version,
    about = "Time encoding, quantization and reconstruction experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one realization on the output grid (time_s,amplitude).
    Generate(Common),
    /// Write the firing instants and intervals of one realization.
    Encode(Common),
    /// Write the codebooks one branch uses at one resolution.
    Quantize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "tem-nuq")]
        branch: Branch,
    },
    /// Reconstruct one realization and report its NMSE on stderr.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "tem-nuq")]
        branch: Branch,
        /// Skip quantization and reconstruct from the exact firing times.
        #[arg(long)]
        unquantized: bool,
    },
    /// Mean NMSE for every branch and resolution.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Repeat the sweep for several compander exponents and keep the best.
        #[arg(long)]
        gamma_sweep: bool,
    },
    /// Compare the pooled interval histogram with the induced density.
    Distcheck {
        #[command(flatten)]
        common: Common,
        /// Where to write the density table; the histogram goes to --out.
        #[arg(long)]
        density_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Flat TOML file with experiment settings; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Resolution in bits; a comma-separated list for `sweep`.
    #[arg(long, value_delimiter = ',')]
    bits: Vec<u32>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if !self.bits.is_empty() {
            cfg.bits = self.bits.clone();
        }
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.realizations {
            cfg.n_realizations = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn write(&self, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
        write_to(self.out.as_deref(), body)
    }
}

fn write_to(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source,
    };
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(io_err)?);
            body(&mut w).and_then(|_| w.flush()).map_err(io_err)
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w).and_then(|_| w.flush()).map_err(io_err)
        }
    }
}

fn write_waveform(w: &Waveform, format: OutputFormat, out: &mut dyn Write) -> io::Result<()> {
    match format {
        OutputFormat::Csv => w.write_csv(out),
        OutputFormat::Json => {
            let times: Vec<f64> = (0..w.len()).map(|i| w.time(i)).collect();
            serde_json::to_writer(&mut *out, &json!({ "time_s": times, "amplitude": w.values() }))?;
            writeln!(out)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(common) => {
            let cfg = common.config()?;
            let w = cfg.realization(cfg.seed)?.evaluate_grid(cfg.output_grid_step)?;
            common.write(|out| write_waveform(&w, common.format, out))
        }
        Command::Encode(common) => {
            let cfg = common.config()?;
            let p = cfg.realization(cfg.seed)?;
            let seq = temq::tem::encode(&p, &cfg.tem_params()?, cfg.grid_step)?;
            common.write(|out| match common.format {
                OutputFormat::Csv => {
                    writeln!(out, "index,instant_s,interval_s")?;
                    for (i, t) in seq.instants().iter().enumerate() {
                        let dt = seq.intervals.get(i).map_or(String::new(), |d| sig(*d, 6));
                        writeln!(out, "{i},{},{dt}", sig(*t, 6))?;
                    }
                    Ok(())
                }
                OutputFormat::Json => {
                    serde_json::to_writer_pretty(&mut *out, &seq)?;
                    writeln!(out)
                }
            })
        }
        Command::Quantize { common, branch } => {
            let cfg = common.config()?;
            let bits = cfg.bits[0];
            let books = Pipeline::prepare(&cfg)?.codebooks(branch, bits)?;
            let mut named = vec![("interval", books.time)];
            if let Some(a) = books.amplitude {
                named.push(("amplitude", a));
            }
            let records = named
                .iter()
                .map(|(q, cb)| cb.to_record().map(|r| (*q, r)))
                .collect::<Result<Vec<_>>>()?;
            common.write(|out| match common.format {
                OutputFormat::Csv => {
                    writeln!(out, "quantity,index,lower,upper,level")?;
                    for (q, r) in &records {
                        for (i, l) in r.levels.iter().enumerate() {
                            let (lo, hi) = (r.boundaries[i], r.boundaries[i + 1]);
                            writeln!(out, "{q},{i},{},{},{}", sig(lo, 6), sig(hi, 6), sig(*l, 6))?;
                        }
                    }
                    Ok(())
                }
                OutputFormat::Json => {
                    let list: Vec<_> = records
                        .iter()
                        .map(|(q, r)| json!({ "quantity": q, "codebook": r }))
                        .collect();
                    serde_json::to_writer_pretty(&mut *out, &list)?;
                    writeln!(out)
                }
            })
        }
        Command::Reconstruct {
            common,
            branch,
            unquantized,
        } => {
            let cfg = common.config()?;
            let pipeline = Pipeline::prepare(&cfg)?;
            let enc = pipeline.encode(cfg.seed)?;
            let est = if unquantized {
                pipeline.reconstruct_unquantized(&enc)?
            } else {
                let books = pipeline.codebooks(branch, cfg.bits[0])?;
                pipeline.reconstruct(&enc, branch, &books)?
            };
            eprintln!("nmse_db={}", sig(pipeline.nmse(&enc, &est)?, 6));
            common.write(|out| write_waveform(&est, common.format, out))
        }
        Command::Sweep { common, gamma_sweep } => {
            let cfg = common.config()?;
            let records = if gamma_sweep {
                let result = run_gamma_sweep(&cfg, &GAMMA_CANDIDATES)?;
                eprintln!("best gamma={}", sig(result.best_gamma, 6));
                result
                    .runs
                    .into_iter()
                    .find(|(g, _)| *g == result.best_gamma)
                    .map(|(_, r)| r)
                    .expect("best gamma is one of the runs")
            } else {
                Pipeline::prepare(&cfg)?.sweep()?
            };
            common.write(|out| write_records(&records, common.format, out))
        }
        Command::Distcheck { common, density_out } => {
            let cfg = common.config()?;
            let report = run_distribution_check(&cfg)?;
            eprintln!(
                "tv={} certificate={} rate_weighted_tv={} intervals={}",
                sig(report.total_variation, 6),
                sig(report.certificate, 6),
                sig(report.rate_weighted_total_variation, 6),
                report.n_intervals
            );
            match common.format {
                OutputFormat::Csv => {
                    common.write(|out| report.write_histogram_csv(out))?;
                    if let Some(p) = density_out {
                        write_to(Some(&p), |out| report.write_density_csv(out))?;
                    }
                    Ok(())
                }
                OutputFormat::Json => common.write(|out| {
                    let h = &report.histogram;
                    let value = json!({
                        "total_variation": report.total_variation,
                        "rate_weighted_total_variation": report.rate_weighted_total_variation,
                        "certificate": report.certificate,
                        "n_intervals": report.n_intervals,
                        "histogram": { "edges": h.edges(), "mass": h.masses(), "density": h.heights() },
                        "density": { "interval_s": report.density.nodes(), "density": report.density.values() },
                    });
                    serde_json::to_writer_pretty(&mut *out, &value)?;
                    writeln!(out)
                }),
            }
        }
    }
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
