use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use stockgan_core::ingest::{fetch_remote, parse_csv, split_chronological, validate, FetchError};
use stockgan_core::numerics::Rng;
use stockgan_core::report::{compare, ComparisonReport};
use stockgan_core::trainer::{evaluate_on_test, prepare_training, train, WalkForward};
use stockgan_core::{EvalReport, PriceSeries, TrainConfig, TrainError, TrainHistory, TrainedModel};

use crate::args::{CompareArgs, EvaluateArgs, FetchArgs, Format, HyperArgs, Overrides, PlotArgs, TrainArgs};
use crate::error::{Class, Classify, CliError};

type Result<T> = std::result::Result<T, CliError>;

struct LoadedData {
    series: PriceSeries,
    input: InputRecord,
}

#[derive(Debug, Serialize)]
struct InputRecord {
    path: PathBuf,
    ticker: String,
    sha256: String,
    rows: usize,
    dropped_rows: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    created_at: String,
    rng: &'static str,
    inputs: &'a [InputRecord],
    config: &'a TrainConfig,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Keep file names portable for tickers like `^DJI`.
fn file_label(ticker: &str) -> String {
    ticker
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into())
}

fn load_data(path: &Path, ticker: Option<&str>) -> Result<LoadedData> {
    let raw = fs::read(path).or_class(Class::Data, || format!("reading {}", path.display()))?;
    let text = String::from_utf8(raw.clone()).or_class(Class::Data, || format!("decoding {}", path.display()))?;
    let ticker = ticker.map(str::to_owned).unwrap_or_else(|| stem(path));
    let parsed = parse_csv(&text, &ticker).or_class(Class::Data, || format!("parsing {}", path.display()))?;
    if parsed.dropped_rows > 0 {
        eprintln!(
            "warning: {}: dropped {} unusable row(s)",
            path.display(),
            parsed.dropped_rows
        );
    }
    let report = validate(&parsed.series);
    for v in report.violations.iter().take(5) {
        eprintln!("warning: {}: {} fails {:?}", path.display(), v.date, v.rule);
    }
    if report.violations.len() > 5 {
        eprintln!(
            "warning: {}: {} more violation(s)",
            path.display(),
            report.violations.len() - 5
        );
    }
    Ok(LoadedData {
        input: InputRecord {
            path: path.to_path_buf(),
            ticker,
            sha256: sha256_hex(&raw),
            rows: parsed.series.len(),
            dropped_rows: parsed.dropped_rows,
        },
        series: parsed.series,
    })
}

/// Defaults, then the `--config` file, then flags.
fn resolve_config(hyper: HyperArgs) -> Result<TrainConfig> {
    let file = match &hyper.config {
        Some(path) => {
            let text = fs::read_to_string(path).or_class(Class::Config, || format!("reading {}", path.display()))?;
            serde_json::from_str::<Overrides>(&text)
                .or_class(Class::Config, || format!("parsing {}", path.display()))?
        }
        None => Overrides::default(),
    };
    let mut cfg = hyper
        .flags
        .over(file)
        .apply(TrainConfig::default())
        .map_err(CliError::config)?;
    if hyper.no_timing {
        cfg.timing = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).or_class(Class::Io, || format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).or_class(Class::Io, || format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

fn write_manifest(out: &Path, command: &'static str, inputs: &[InputRecord], config: &TrainConfig) -> Result<()> {
    let manifest = Manifest {
        tool: "stockgan",
        version: env!("CARGO_PKG_VERSION"),
        command,
        created_at: chrono::Utc::now().to_rfc3339(),
        rng: Rng::ALGORITHM,
        inputs,
        config,
    };
    write(&out.join("manifest.json"), to_json(&manifest))
}

fn write_history(out: &Path, history: &TrainHistory) -> Result<()> {
    write(&out.join("history.json"), to_json(history))?;
    write(&out.join("history.csv"), history.to_csv())
}

pub fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = resolve_config(args.hyper)?;
    let data = load_data(&args.data, args.ticker.as_deref())?;
    let (train_part, _) = split_chronological(&data.series, cfg.train_fraction).map_err(TrainError::from)?;
    let prepared = prepare_training(&train_part, &cfg)?;
    let (model, history) = match train(&prepared, &cfg) {
        Ok(done) => done,
        Err(TrainError::DivergenceDetected { epoch, reason, history }) => {
            write_history(&args.out, &history)?;
            return Err(TrainError::DivergenceDetected { epoch, reason, history }.into());
        }
        Err(e) => return Err(e.into()),
    };
    write(&args.out.join("model.json"), model.to_json()?)?;
    write_history(&args.out, &history)?;
    write_manifest(&args.out, "train", std::slice::from_ref(&data.input), &cfg)?;
    let last = history.records.last().expect("epochs >= 1");
    println!(
        "trained {} on {} ({} samples, {} epochs): g_loss {:.6}, forecast {:.6}{}",
        cfg.model_kind.label(),
        data.input.ticker,
        prepared.len(),
        history.records.len(),
        last.g_loss,
        last.g_p,
        last.d_loss.map(|d| format!(", d_loss {d:.6}")).unwrap_or_default()
    );
    Ok(())
}

fn report_csv(r: &EvalReport) -> String {
    format!(
        "directional_accuracy_pct,trend_da_pct,rmse,rmsre,mrmse,processing_time_s,n_points\n{},{},{},{},{},{},{}\n",
        r.directional_accuracy_pct, r.trend_da_pct, r.rmse, r.rmsre, r.mrmse, r.processing_time_s, r.n_points
    )
}

pub fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.model).or_class(Class::Data, || format!("reading {}", args.model.display()))?;
    let mut model =
        TrainedModel::from_json(&text).map_err(|e| CliError::data(format!("{}: {e}", args.model.display())))?;
    if args.no_timing {
        model.config.timing = false;
    }
    let data = load_data(&args.data, None)?;
    let test = if args.full {
        data.series
    } else {
        split_chronological(&data.series, model.config.train_fraction)
            .map_err(TrainError::from)?
            .1
    };
    let (report, wf) = evaluate_on_test(&model, &test)?;
    write(&args.out.join("predictions.csv"), wf.to_csv())?;
    match args.format {
        Format::Text => print!("{}", report.to_table()),
        Format::Json => println!("{}", serde_json::to_string(&report).expect("plain data serializes")),
        Format::Csv => print!("{}", report_csv(&report)),
    }
    Ok(())
}

fn comparison_csv(r: &ComparisonReport) -> String {
    let mut out = String::from(
        "ticker,baseline_da_pct,baseline_time_s,baseline_mrse,proposed_da_pct,proposed_time_s,proposed_mrse\n",
    );
    for row in r.rows.iter().chain(std::iter::once(&r.averages)) {
        let (b, g) = (&row.baseline, &row.gan);
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.ticker,
            b.directional_accuracy_pct,
            b.processing_time_s,
            b.mrmse,
            g.directional_accuracy_pct,
            g.processing_time_s,
            g.mrmse
        ));
    }
    out
}

/// `date,actual,baseline,proposed` for one ticker.
fn curve_csv(baseline: &WalkForward, gan: &WalkForward) -> String {
    let mut out = String::from("date,actual,baseline,proposed\n");
    for i in 0..baseline.dates.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            baseline.dates[i].format("%Y-%m-%d"),
            baseline.actual[i],
            baseline.predicted[i],
            gan.predicted[i]
        ));
    }
    out
}

pub fn cmd_compare(args: CompareArgs) -> Result<()> {
    let cfg = resolve_config(args.hyper)?;
    let loaded = args
        .data
        .iter()
        .map(|p| load_data(p, None))
        .collect::<Result<Vec<_>>>()?;
    let series: Vec<PriceSeries> = loaded.iter().map(|l| l.series.clone()).collect();
    let (report, runs) = compare(&series, &cfg)?;
    write(&args.out.join("comparison.txt"), report.to_text())?;
    write(&args.out.join("comparison.json"), report.to_json())?;
    for run in &runs {
        let label = file_label(&run.ticker);
        write(
            &args.out.join("curves").join(format!("{label}.csv")),
            curve_csv(&run.baseline.walk_forward, &run.gan.walk_forward),
        )?;
        let models = args.out.join("models");
        write(
            &models.join(format!("{label}_lstm.json")),
            run.baseline.model.to_json()?,
        )?;
        write(&models.join(format!("{label}_gan.json")), run.gan.model.to_json()?)?;
    }
    let inputs: Vec<InputRecord> = loaded.into_iter().map(|l| l.input).collect();
    write_manifest(&args.out, "compare", &inputs, &cfg)?;
    match args.format {
        Format::Text => print!("{}", report.to_text()),
        Format::Json => println!("{}", report.to_json()),
        Format::Csv => print!("{}", comparison_csv(&report)),
    }
    Ok(())
}

pub fn cmd_plotdata(args: PlotArgs) -> Result<()> {
    let src = args.from.join("comparison.json");
    let text = fs::read_to_string(&src).or_class(Class::Data, || format!("reading {}", src.display()))?;
    let report: ComparisonReport =
        serde_json::from_str(&text).or_class(Class::Data, || format!("parsing {}", src.display()))?;
    let out = args.out.unwrap_or_else(|| args.from.join("plot"));
    write(&out.join("bar_da.csv"), report.bar_csv(|r| r.directional_accuracy_pct))?;
    write(&out.join("bar_rmse.csv"), report.bar_csv(|r| r.rmse))?;
    write(&out.join("bar_time.csv"), report.bar_csv(|r| r.processing_time_s))?;
    for row in &report.rows {
        let label = file_label(&row.ticker);
        let curve = args.from.join("curves").join(format!("{label}.csv"));
        let body = fs::read(&curve).or_class(Class::Data, || format!("reading {}", curve.display()))?;
        write(&out.join(format!("curve_{label}.csv")), body)?;
    }
    println!(
        "wrote plot data for {} ticker(s) to {}",
        report.rows.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_fetch(args: FetchArgs) -> Result<()> {
    let raw = fetch_remote(&args.ticker, args.start, args.end, &args.endpoint).map_err(|e| match e {
        FetchError::BadTemplate(_) => CliError::config(e),
        other => CliError::data(other),
    })?;
    let parsed = parse_csv(&raw, &args.ticker).or_class(Class::Data, || "parsing downloaded quotes".into())?;
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", file_label(&args.ticker))));
    write(&out, &raw)?;
    println!(
        "fetched {} bars of {} into {}",
        parsed.series.len(),
        args.ticker,
        out.display()
    );
    Ok(())
}
