use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use atomgate::config::RunConfig;
use atomgate::protocols::{self, ProtocolResult};
use atomgate::Error;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "atomgate", version, about = "Atom-photon gate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; overrides --profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Bundled profile used when no --config is given.
    #[arg(long, global = true, default_value = "paper")]
    profile: String,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Trials per setting, prepared state or grid point.
    #[arg(long, global = true)]
    trials: Option<u64>,

    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,

    #[arg(long, global = true, env = "ATOMGATE_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,

    /// Override any config value, e.g. `imperfections.mode_overlap=0.9`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Skip the CSV tables.
    #[arg(long, global = true)]
    no_csv: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Analytic,
    MonteCarlo,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Output distribution for the four z/x inputs.
    TruthTable,
    /// Atom-photon Bell state tomography.
    Bell,
    /// Atom-photon-photon GHZ state tomography.
    Ghz,
    /// Photon-photon states heralded by the atom.
    Eraser,
    /// Ramsey fringe and sinusoidal fit.
    Ramsey {
        /// Phase of the second pulse in radians; defaults to the config.
        #[arg(long)]
        phase2: Option<f64>,
    },
    /// Fluorescence count histograms and threshold fidelity.
    StateDetection,
    /// Tomography self-test on random two-qubit states.
    TomoRoundtrip,
    /// Resonant branch losses, model against calibration.
    LossBudget,
}

fn config_error(path: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        reason: reason.into(),
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), Error> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| config_error(key, "empty key"))?;
    let mut table = root;
    for (i, p) in parts.iter().enumerate() {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_error(&parts[..=i].join("."), "is not a section"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)?,
        None => RunConfig::profile(&cli.profile)
            .ok_or_else(|| config_error("profile", format!("unknown profile `{}`", cli.profile)))?
            .to_toml_string(),
    };
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| config_error("", e.message().to_string()))?;
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| config_error(o, "expected KEY=VALUE"))?;
        set_path(&mut table, k.trim(), parse_value(v.trim()))?;
    }
    if let Some(s) = cli.seed {
        table.insert("seed".into(), toml::Value::Integer(s as i64));
    }
    if let Some(t) = cli.trials {
        table.insert("trials".into(), toml::Value::Integer(t as i64));
    }
    if let Some(m) = cli.mode {
        let name = match m {
            ModeArg::Analytic => "analytic",
            ModeArg::MonteCarlo => "monte-carlo",
        };
        table.insert("mode".into(), toml::Value::String(name.into()));
    }
    if let Some(dir) = &cli.output_dir {
        table.insert(
            "output_dir".into(),
            toml::Value::String(dir.display().to_string()),
        );
    }
    RunConfig::from_toml_str(&toml::to_string(&table).expect("table serializes"))
}

fn run(cmd: &Command, cfg: &RunConfig) -> Result<ProtocolResult, Error> {
    match cmd {
        Command::TruthTable => protocols::run_truth_table(cfg),
        Command::Bell => protocols::run_bell(cfg),
        Command::Ghz => protocols::run_ghz(cfg),
        Command::Eraser => protocols::run_eraser(cfg),
        Command::Ramsey { phase2 } => protocols::run_ramsey(
            cfg,
            &cfg.ramsey.grid_khz(),
            phase2.unwrap_or(cfg.ramsey.phase2),
        ),
        Command::StateDetection => protocols::run_state_detection(cfg),
        Command::TomoRoundtrip => protocols::run_tomo_roundtrip(cfg),
        Command::LossBudget => protocols::run_loss_budget(cfg),
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_csv(path: &Path, header: &[String], rows: Vec<Vec<String>>) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.write_record(&r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Writes the JSON document and CSV tables; returns the file names.
fn write_artifacts(res: &ProtocolResult, dir: &Path, csv: bool) -> Result<Vec<String>, Error> {
    fs::create_dir_all(dir)?;
    let stem = &res.label;
    let mut files = Vec::new();
    let json_name = format!("{stem}.json");
    let mut f = fs::File::create(dir.join(&json_name))?;
    serde_json::to_writer_pretty(&mut f, res)?;
    f.write_all(b"\n")?;
    files.push(json_name);
    if !csv {
        return Ok(files);
    }

    let name = format!("{stem}_settings.csv");
    let mut rows = Vec::new();
    for s in &res.settings {
        for (k, p) in s.probabilities.iter().enumerate() {
            let count = s
                .counts
                .as_ref()
                .map(|c| c[k].to_string())
                .unwrap_or_default();
            rows.push(vec![s.setting.clone(), k.to_string(), p.to_string(), count]);
        }
    }
    write_csv(
        &dir.join(&name),
        &strings(&["setting", "outcome", "probability", "count"]),
        rows,
    )?;
    files.push(name);

    for (key, t) in &res.tables {
        let name = format!("{stem}_{key}.csv");
        let labelled = !t.row_labels.is_empty();
        let mut header = Vec::new();
        if labelled {
            header.push("row".to_string());
        }
        header.extend(t.columns.iter().cloned());
        let rows = t
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut out = Vec::new();
                if labelled {
                    out.push(t.row_labels[i].clone());
                }
                out.extend(r.iter().map(|x| x.to_string()));
                out
            })
            .collect();
        write_csv(&dir.join(&name), &header, rows)?;
        files.push(name);
    }

    for (key, rho) in &res.density_matrices {
        let name = format!("{stem}_rho_{key}.csv");
        let m = rho.matrix();
        let mut rows = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                rows.push(vec![
                    i.to_string(),
                    j.to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                    z.norm().to_string(),
                ]);
            }
        }
        write_csv(
            &dir.join(&name),
            &strings(&["row", "col", "re", "im", "abs"]),
            rows,
        )?;
        files.push(name);
    }
    Ok(files)
}

fn error_kind(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Config { .. } | Error::InvalidParameter { .. } => ("config", 2),
        Error::Starvation(_) => ("starvation", 3),
        Error::Io(_) => ("io", 3),
        _ => ("runtime", 3),
    }
}

fn fail(kind: &str, message: String, path: Option<String>, code: u8) -> ExitCode {
    let mut doc = json!({ "error": kind, "message": message });
    if let Some(p) = path {
        doc["path"] = json!(p);
    }
    eprintln!("{doc}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail("usage", e.render().to_string().trim().to_string(), None, 2);
        }
    };
    let outcome = load_config(&cli).and_then(|cfg| {
        let res = run(&cli.command, &cfg)?;
        let files = write_artifacts(&res, &cfg.output_dir, !cli.no_csv)?;
        Ok((res, cfg, files))
    });
    match outcome {
        Ok((res, cfg, files)) => {
            let summary = json!({
                "label": res.label,
                "output_dir": cfg.output_dir,
                "files": files,
                "derived": res.derived,
                "flags": res.flags,
                "warnings": res.warnings,
            });
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            // a closed pipe downstream is not a failure of the run
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (kind, code) = error_kind(&e);
            let path = match &e {
                Error::Config { path, .. } => Some(path.clone()),
                Error::InvalidParameter { name, .. } => Some(name.clone()),
                _ => None,
            };
            fail(kind, e.to_string(), path, code)
        }
    }
}
