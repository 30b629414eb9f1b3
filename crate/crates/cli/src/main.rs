use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use physcad::bench::{
    gen_cases, report_file, run_bench, stats_files, BackendKind, BenchConfig, ConfigOverrides, Variants,
};
use physcad::loadcase::{find_builtin, parse_load_case, LoadCase};
use physcad::render::{encode_png, encode_ppm, render_view, ViewDirection, ViewSpec, DEFAULT_VIEW_SIZE};
use physcad::validators::{evaluate_source, evaluate_stl, Evaluation, PipelineConfig};

#[derive(Parser)]
#[command(name = "physcad", version, about = "Physics-in-the-loop generative CAD benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the built-in load cases and the variant manifest
    GenCases {
        #[arg(long, default_value = "cases")]
        out: PathBuf,
    },
    /// Run the benchmark, appending to <out>/results.jsonl
    Run(RunArgs),
    /// Reliability, design-quality and efficiency tables for a results file
    Report {
        results: PathBuf,
        /// Also write the report as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Fisher, Welch and Kruskal-Wallis tests across results files
    Stats {
        #[arg(required = true, num_args = 2..)]
        results: Vec<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Validate a design against a case and print the report as JSON
    Evaluate(DesignArgs),
    /// Render views of a design with the case's regions overlaid
    Render {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value = "views")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_VIEW_SIZE)]
        size: usize,
        /// Comma list of +x,-x,+y,-y,+z,-z,iso, or `all`
        #[arg(long, default_value = "+x,+y,+z,iso")]
        views: String,
        #[arg(long)]
        png: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with the same fields as these flags; flags win
    #[arg(long)]
    config: Option<PathBuf>,
    /// `builtin`, a gen-cases directory or a case file
    #[arg(long)]
    cases: Option<String>,
    /// `all`, `base` or geom:force pairs such as 1:1,2:0.5
    #[arg(long, value_parser = Variants::parse)]
    variants: Option<Variants>,
    /// heuristic, mock, generic, anthropic or openai
    #[arg(long, value_parser = parse_backend)]
    backend: Option<BackendKind>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    /// Environment variable holding the API key
    #[arg(long)]
    api_key_env: Option<String>,
    /// Replies for the mock backend
    #[arg(long)]
    mock_script: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    parallel: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    disable_fea_feedback: bool,
    #[arg(long)]
    single_agent: bool,
    /// Skip per-run programs, views and transcripts
    #[arg(long)]
    no_artifacts: bool,
    /// Print the resolved configuration and exit
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct DesignArgs {
    /// Built-in problem id or case file
    #[arg(long)]
    case: String,
    /// Geometry program (.json) or mesh (.stl)
    #[arg(long)]
    design: PathBuf,
    #[arg(long)]
    resolution: Option<usize>,
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    BackendKind::parse(s).ok_or_else(|| format!("unknown backend `{s}`"))
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenCases { out } => {
            let m = gen_cases(&out)?;
            println!(
                "wrote {} cases and {} configurations to {}",
                m.cases.len(),
                m.total_configurations,
                out.display()
            );
        }
        Command::Run(args) => run(args)?,
        Command::Report { results, json } => {
            let r = report_file(&results)?;
            print!("{}", r.text());
            if let Some(p) = json {
                write_file(&p, r.json().as_bytes())?;
            }
        }
        Command::Stats { results, json } => {
            let s = stats_files(&results)?;
            print!("{}", s.text());
            if let Some(p) = json {
                write_file(&p, serde_json::to_string_pretty(&s)?.as_bytes())?;
            }
        }
        Command::Evaluate(d) => {
            let (_, eval) = evaluate(&d)?;
            println!("{}", serde_json::to_string_pretty(&eval.report)?);
        }
        Command::Render {
            design,
            out,
            size,
            views,
            png,
        } => render(&design, &out, size, &views, png)?,
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let overrides = ConfigOverrides {
        cases: a.cases,
        variants: a.variants,
        backend: a.backend,
        model: a.model,
        endpoint: a.endpoint,
        api_key_env: a.api_key_env,
        mock_script: a.mock_script,
        runs: a.runs,
        max_iters: a.max_iters,
        resolution: a.resolution,
        out: a.out,
        parallel: a.parallel,
        seed: a.seed,
        disable_fea_feedback: a.disable_fea_feedback.then_some(true),
        single_agent: a.single_agent.then_some(true),
        artifacts: a.no_artifacts.then_some(false),
    };
    let config = BenchConfig::load(a.config.as_deref(), overrides)?;
    if a.dry_run {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(());
    }
    let summary = run_bench(&config, |r| {
        eprintln!(
            "{} {} run {}: {:?}",
            r.problem_id, r.variant, r.run_index, r.final_status
        );
    })?;
    println!(
        "{} planned, {} skipped, {} executed ({} valid, {} infrastructure); results in {}",
        summary.planned,
        summary.skipped,
        summary.executed,
        summary.valid,
        summary.infrastructure,
        summary.results.display()
    );
    Ok(())
}

fn load_case(spec: &str) -> Result<LoadCase> {
    if let Some(c) = find_builtin(spec) {
        return Ok(c);
    }
    let text = std::fs::read_to_string(spec)
        .with_context(|| format!("`{spec}` is neither a built-in case nor a readable file"))?;
    parse_load_case(&text).with_context(|| spec.to_string())
}

fn evaluate(d: &DesignArgs) -> Result<(LoadCase, Evaluation)> {
    let case = load_case(&d.case)?;
    let mut config = PipelineConfig::default();
    if let Some(r) = d.resolution {
        if r < 2 {
            bail!("resolution must be at least 2");
        }
        config.resolution = r;
    }
    let bytes = std::fs::read(&d.design).with_context(|| d.design.display().to_string())?;
    let is_stl = d.design.extension().is_some_and(|e| e.eq_ignore_ascii_case("stl"));
    let eval = if is_stl {
        evaluate_stl(&bytes, &case, &config)
    } else {
        evaluate_source(&String::from_utf8_lossy(&bytes), &case, &config)
    };
    Ok((case, eval))
}

fn render(d: &DesignArgs, out: &Path, size: usize, views: &str, png: bool) -> Result<()> {
    let directions: Vec<ViewDirection> = if views == "all" {
        ViewDirection::ALL.to_vec()
    } else {
        views
            .split(',')
            .map(|v| ViewDirection::parse(v.trim()).with_context(|| format!("unknown view `{v}`")))
            .collect::<Result<_>>()?
    };
    if size < physcad::render::MIN_VIEW_SIZE {
        bail!("views must be at least {} pixels", physcad::render::MIN_VIEW_SIZE);
    }
    let (case, eval) = evaluate(d)?;
    let Some(surface) = &eval.surface else {
        bail!(
            "design did not produce a surface: {}",
            eval.report.compile_error.as_deref().unwrap_or("no material")
        );
    };
    std::fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    for dir in directions {
        let img = render_view(surface, &case, &ViewSpec::new(dir).with_size(size, size));
        let (bytes, ext) = if png {
            (encode_png(&img), "png")
        } else {
            (encode_ppm(&img), "ppm")
        };
        let path = out.join(format!("view_{}.{ext}", dir.tag()));
        write_file(&path, &bytes)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| path.display().to_string())
}
