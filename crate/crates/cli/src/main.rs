use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::builder::BoolishValueParser;
use clap::{Args, Parser, Subcommand};
use frs_cli::api::{self, ApiError, CounterfactualResult, ExplainOptions, ScoreResponse};
use frs_core::sweep::{self, Aggregator, RecordWriter, SweepConfig};
use frs_core::{Engine, FeatureId, MutabilityPolicy, PatientProfile, ScheduleSet, Sex, TargetRule};

/// Framingham risk scores with abductive and counterfactual explanations.
#[derive(Parser)]
#[command(name = "frs", version)]
struct Cli {
    /// Directory holding male.json and female.json; the bundled tables are used when unset.
    #[arg(long, global = true, env = "FRS_SCHEDULE_DIR", value_name = "DIR")]
    schedules: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score one profile.
    Score {
        #[command(flatten)]
        profile: ProfileArgs,
        /// Print the JSON response served by /api/score.
        #[arg(long)]
        json: bool,
    },
    /// Score one profile and explain the category.
    Explain {
        #[command(flatten)]
        profile: ProfileArgs,
        #[command(flatten)]
        options: OptionArgs,
        #[arg(long)]
        json: bool,
    },
    /// Explain every profile of the quantized grid and summarize.
    Sweep {
        /// Restrict the grid to one sex.
        #[arg(long)]
        sex: Option<Sex>,
        #[command(flatten)]
        options: OptionArgs,
        /// Output directory for records.csv, report.txt and report.json.
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    sex: Sex,
    #[arg(long, allow_negative_numbers = true)]
    age: i32,
    #[arg(long, allow_negative_numbers = true)]
    hdl: i32,
    #[arg(long, allow_negative_numbers = true)]
    total_chol: i32,
    #[arg(long, allow_negative_numbers = true)]
    sbp: i32,
    /// On blood pressure medication.
    #[arg(long, num_args = 0..=1, default_value = "false", default_missing_value = "true", value_parser = BoolishValueParser::new())]
    treated: bool,
    #[arg(long, num_args = 0..=1, default_value = "false", default_missing_value = "true", value_parser = BoolishValueParser::new())]
    smoker: bool,
    #[arg(long, num_args = 0..=1, default_value = "false", default_missing_value = "true", value_parser = BoolishValueParser::new())]
    diabetic: bool,
}

impl ProfileArgs {
    fn profile(&self) -> PatientProfile {
        PatientProfile {
            sex: self.sex,
            age: self.age,
            hdl: self.hdl,
            total_chol: self.total_chol,
            sbp: self.sbp,
            treated_sbp: self.treated,
            smoker: self.smoker,
            diabetic: self.diabetic,
        }
    }
}

#[derive(Debug, Clone)]
struct Order(Vec<FeatureId>);

fn parse_order(s: &str) -> Result<Order, String> {
    api::parse_order(s).map(Order)
}

#[derive(Args)]
struct OptionArgs {
    /// Comma-separated features tried first; the rest follow in canonical order.
    #[arg(long, value_parser = parse_order)]
    order: Option<Order>,
    /// next-lower, low or moderate.
    #[arg(long, default_value = "next-lower", value_parser = api::parse_target)]
    target: TargetRule,
    /// default or age-sex-only.
    #[arg(long, default_value = "default", value_parser = api::parse_mutability)]
    mutability: MutabilityPolicy,
}

impl OptionArgs {
    fn options(&self) -> ExplainOptions {
        ExplainOptions {
            order: self.order.clone().map_or_else(|| FeatureId::ALL.to_vec(), |o| o.0),
            policy: self.mutability,
            target: self.target,
        }
    }
}

const EXIT_INVALID: u8 = 2;
const EXIT_UNREACHABLE: u8 = 3;

fn load_engine(dir: Option<&PathBuf>) -> Result<Engine> {
    match dir {
        None => Ok(Engine::bundled()),
        Some(dir) => {
            let schedules = ScheduleSet::from_dir(dir)?;
            Ok(Engine::new(schedules)?)
        }
    }
}

fn print_assessment(r: &ScoreResponse) {
    let b = &r.breakdown;
    let rows = [
        (FeatureId::Age, b.age),
        (FeatureId::Hdl, b.hdl),
        (FeatureId::TotalChol, b.total_chol),
        (FeatureId::Sbp, b.sbp),
        (FeatureId::Smoker, b.smoker),
        (FeatureId::Diabetic, b.diabetic),
    ];
    for (f, points) in rows {
        println!("  {:<24} {:>3}", f.label(), points);
    }
    println!("total: {}, risk: {}, category: {}", b.total, r.risk_percent, r.category.as_str().to_uppercase());
}

fn print_explanation(r: &ScoreResponse) {
    println!("abductive explanation: {}", r.abductive.labels.join(", "));
    match &r.counterfactual {
        CounterfactualResult::NotNeeded => println!("counterfactual: no counterfactual needed"),
        CounterfactualResult::AlreadyAtTarget { target } => {
            println!("counterfactual: no counterfactual needed (already {target})")
        }
        CounterfactualResult::Unreachable { target } => {
            println!("counterfactual ({target}): {}", api::UNREACHABLE)
        }
        CounterfactualResult::Changed { target, changed, witness, witness_total, witness_risk_percent, witness_category } => {
            println!("counterfactual ({target}): change {}", changed.labels.join(", "));
            for f in changed.features.iter() {
                println!("  {}: {} -> {}", f.label(), r.profile.get(f), witness.get(f));
            }
            println!(
                "  then total: {witness_total}, risk: {witness_risk_percent}, category: {}",
                witness_category.as_str().to_uppercase()
            );
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run_sweep(engine: &Engine, sex: Option<Sex>, options: ExplainOptions, out: &PathBuf, json: bool) -> Result<()> {
    let sexes: Vec<Sex> = sex.map_or(Sex::ALL.to_vec(), |s| vec![s]);
    let config = SweepConfig { order: options.order, policy: options.policy, target: options.target, ..SweepConfig::default() };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let csv_path = out.join("records.csv");
    let file = File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    let mut writer = RecordWriter::new(BufWriter::new(file))?;
    let mut aggregator = Aggregator::new();
    let start = std::time::Instant::now();
    sweep::sweep(engine, sweep::generate_grid(engine, &sexes), &config, |r| {
        aggregator.push(r);
        writer.write(r)
    })?;
    writer.finish()?.flush()?;
    let report = aggregator.finish();
    let text = report.render_text();
    fs::write(out.join("report.txt"), &text)?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    if json {
        print_json(&report)?;
    } else {
        print!("{text}");
        println!(
            "\nswept in {:.2}s; wrote {}, report.txt and report.json",
            start.elapsed().as_secs_f64(),
            csv_path.display()
        );
    }
    Ok(())
}

async fn serve(engine: Engine, addr: SocketAddr) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, frs_cli::router(Arc::new(engine)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let engine = load_engine(cli.schedules.as_ref())?;
    match cli.command {
        Command::Score { profile, json } => {
            let r = api::score(&engine, &profile.profile(), &ExplainOptions::default())?;
            if json {
                print_json(&r)?;
            } else {
                print_assessment(&r);
            }
        }
        Command::Explain { profile, options, json } => {
            let r = api::score(&engine, &profile.profile(), &options.options())?;
            if json {
                print_json(&r)?;
            } else {
                print_assessment(&r);
                print_explanation(&r);
            }
            if matches!(r.counterfactual, CounterfactualResult::Unreachable { .. }) {
                eprintln!("error: {}", api::UNREACHABLE);
                return Ok(ExitCode::from(EXIT_UNREACHABLE));
            }
        }
        Command::Sweep { sex, options, out, json } => run_sweep(&engine, sex, options.options(), &out, json)?,
        Command::Serve { port, host } => {
            tracing_subscriber::fmt().with_target(false).init();
            tokio::runtime::Runtime::new()?.block_on(serve(engine, SocketAddr::new(host, port)))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    for cause in e.chain().skip(1) {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            out = format!("{out}: {msg}");
        }
    }
    out
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            if e.downcast_ref::<ApiError>().is_some() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
