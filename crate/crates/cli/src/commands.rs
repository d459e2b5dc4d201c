use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fxvg_core::analytics::{chi_square_gof, chi_square_p_value, ecdf_epdf, nrmse, Ecdf, Reference};
use fxvg_core::engine::{convergence_study, io as path_io, simulate, PathSet};
use fxvg_core::market_data::{build_comparison, load_chain_csv, load_price_ladder};
use fxvg_core::model::SubordinatorParams;
use fxvg_core::pricing::{
    moments_of_terminal, price_american_lsm, price_european, OptionContract, OptionStyle, PriceResult,
};
use fxvg_core::subordinator::{standard_normals, RngStream};
use serde::Serialize;
use serde_json::json;

use crate::config::{GofReference, OutputFormat, RunConfig, StyleChoice};
use crate::error::ConfigError;
use crate::manifest::{CommandKind, RunManifest};

/// Collects the files written by one run.
struct Outputs<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir,
            names: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(name.to_string());
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
        let path = self.path(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        self.write(name, serde_json::to_string_pretty(value)? + "\n")
    }
}

/// Runs `command` with a resolved configuration, writing its outputs and
/// manifest to `out_dir`.
pub fn run(command: CommandKind, cfg: RunConfig, out_dir: &Path) -> anyhow::Result<RunManifest> {
    let sub = cfg.subordinator.resolve()?;
    let mut out = Outputs::new(out_dir)?;
    let summary = match command {
        CommandKind::Simulate => simulate_cmd(&cfg, &sub, &mut out)?,
        CommandKind::Price => price_cmd(&cfg, &sub, &mut out)?,
        CommandKind::Converge => converge_cmd(&cfg, &sub, &mut out)?,
        CommandKind::Gof => gof_cmd(&cfg, &sub, &mut out)?,
        CommandKind::Compare => compare_cmd(&cfg, &sub, &mut out)?,
    };
    let mut manifest = RunManifest::new(command, cfg, sub);
    manifest.outputs = out.names;
    manifest.summary = summary;
    manifest.write(out_dir)?;
    Ok(manifest)
}

fn simulate_paths(cfg: &RunConfig, sub: &SubordinatorParams) -> anyhow::Result<PathSet<f64>> {
    let p = cfg.model()?;
    let corr = cfg.correlation()?;
    let grid = cfg.grid()?;
    let sim = cfg.sim_config()?;
    Ok(simulate(&p, &corr, sub, &grid, &sim)?)
}

fn table_format(cfg: &RunConfig) -> Result<OutputFormat, ConfigError> {
    match cfg.simulation.format {
        OutputFormat::Bin => Err(ConfigError::new("binary output is only available for simulate")),
        f => Ok(f),
    }
}

#[derive(Serialize)]
struct JsonPaths<'a> {
    seed: u64,
    times: Vec<f64>,
    exit_step: &'a [Option<usize>],
    /// `[S, V, rd, rf]` per grid point, one array per path.
    paths: Vec<Vec<[f64; 4]>>,
}

fn simulate_cmd(cfg: &RunConfig, sub: &SubordinatorParams, out: &mut Outputs) -> anyhow::Result<serde_json::Value> {
    let paths = simulate_paths(cfg, sub)?;
    match cfg.simulation.format {
        OutputFormat::Csv => {
            let path = out.path("paths.csv");
            let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            path_io::write_csv(&paths, BufWriter::new(file))?;
        }
        OutputFormat::Bin => {
            let path = out.path("paths.bin");
            let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            path_io::write_binary(&paths, BufWriter::new(file))?;
        }
        OutputFormat::Json => {
            let doc = JsonPaths {
                seed: cfg.seed()?,
                times: (0..=paths.n_steps()).map(|j| paths.grid.time(j)).collect(),
                exit_step: &paths.exit_step,
                paths: paths.paths().map(|p| p.iter().map(|x| x.to_array()).collect()).collect(),
            };
            out.json("paths.json", &doc)?;
        }
    }
    let exited = paths.exit_step.iter().filter(|e| e.is_some()).count();
    println!("simulated {} paths x {} steps", paths.n_paths, paths.n_steps());
    if cfg.simulation.localize.is_some() {
        println!("{exited} path(s) left the localization box");
    }
    Ok(json!({
        "paths": paths.n_paths,
        "steps": paths.n_steps(),
        "exited_paths": exited,
        "non_finite": paths.has_nan(),
    }))
}

#[derive(Serialize)]
struct PriceRow {
    strike: f64,
    style: OptionStyle,
    #[serde(flatten)]
    result: PriceResult,
}

fn style_name(s: OptionStyle) -> &'static str {
    match s {
        OptionStyle::American => "american",
        OptionStyle::European => "european",
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn price_cmd(cfg: &RunConfig, sub: &SubordinatorParams, out: &mut Outputs) -> anyhow::Result<serde_json::Value> {
    let c = &cfg.contract;
    if c.strikes.is_empty() {
        return Err(ConfigError::new("the strike ladder is empty").into());
    }
    let format = table_format(cfg)?;
    let lsm = c.lsm();
    lsm.validate().map_err(|e| ConfigError::new(e.to_string()))?;
    let maturity = cfg.simulation.horizon;
    for k in &c.strikes {
        OptionContract::new(OptionStyle::European, c.right, *k, maturity).map_err(|e| ConfigError::new(e.to_string()))?;
    }
    let paths = simulate_paths(cfg, sub)?;
    let styles: &[OptionStyle] = match c.style {
        StyleChoice::American => &[OptionStyle::American],
        StyleChoice::European => &[OptionStyle::European],
        StyleChoice::Both => &[OptionStyle::European, OptionStyle::American],
    };
    let mut rows = Vec::new();
    let mut dominance = Vec::new();
    for &strike in &c.strikes {
        let mut by_style = Vec::new();
        for &style in styles {
            let contract = OptionContract::new(style, c.right, strike, maturity)?;
            let result = match style {
                OptionStyle::European => price_european(&paths, &contract)?,
                OptionStyle::American => price_american_lsm(&paths, &contract, &lsm)?,
            };
            by_style.push(result.clone());
            rows.push(PriceRow { strike, style, result });
        }
        if let [eu, am] = by_style.as_slice() {
            let se = eu.std_error.hypot(am.std_error);
            dominance.push(json!({"strike": strike, "american_ge_european": am.price >= eu.price - 3.0 * se}));
        }
    }
    let moments = moments_of_terminal(&paths)?;

    match format {
        OutputFormat::Json => {
            out.json("prices.json", &json!({"prices": rows, "terminal_moments": moments}))?;
        }
        _ => {
            let mut csv = String::from("strike,style,right,price,std_error,n_paths\n");
            for r in &rows {
                let right = serde_json::to_value(c.right)?;
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    r.strike,
                    style_name(r.style),
                    right.as_str().unwrap_or_default(),
                    r.result.price,
                    r.result.std_error,
                    r.result.n_paths
                );
            }
            out.write("prices.csv", csv)?;
            out.write(
                "moments.csv",
                format!(
                    "n,mean,variance,skewness,kurtosis\n{},{},{},{},{}\n",
                    moments.n,
                    moments.mean,
                    moments.variance,
                    opt(moments.skewness),
                    opt(moments.kurtosis)
                ),
            )?;
        }
    }
    for r in &rows {
        println!(
            "E={:<10} {:<9} {:.6} ± {:.6}",
            r.strike,
            style_name(r.style),
            r.result.price,
            r.result.std_error
        );
    }
    println!(
        "terminal spot: kurtosis {} skewness {}",
        opt(moments.kurtosis),
        opt(moments.skewness)
    );
    Ok(json!({"dominance": dominance, "terminal_moments": moments}))
}

fn converge_cmd(cfg: &RunConfig, sub: &SubordinatorParams, out: &mut Outputs) -> anyhow::Result<serde_json::Value> {
    let format = table_format(cfg)?;
    let p = cfg.model()?;
    let corr = cfg.correlation()?;
    let grid = cfg.grid()?;
    let sim = cfg.sim_config()?;
    let report = convergence_study(
        &p,
        &corr,
        sub,
        grid.span(),
        &sim,
        &cfg.converge.levels,
        cfg.converge.reference_level,
    )?;
    match format {
        OutputFormat::Json => out.json("convergence.json", &report)?,
        _ => {
            let mut csv = String::from("m,n_steps,mean_sup_error,censored_paths\n");
            for r in &report.rows {
                let _ = writeln!(csv, "{},{},{},{}", r.m, r.n_steps, r.mean_sup_error, r.censored_paths);
            }
            out.write("convergence.csv", csv)?;
        }
    }
    for r in &report.rows {
        println!("m={:<4} N={:<6} error {:.6e}", r.m, r.n_steps, r.mean_sup_error);
    }
    match report.slope {
        Some(s) => println!("log-log slope {s:.4} (reference level {})", report.reference_level),
        None => println!("log-log slope undefined"),
    }
    Ok(json!({"slope": report.slope, "reference_level": report.reference_level}))
}

fn read_sample(path: &Path) -> anyhow::Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading sample {}", path.display()))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if values.is_empty() && i == 0 => continue,
            Err(_) => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: invalid number {field:?}", path.display(), i + 1),
                )
                .into())
            }
        }
    }
    Ok(values)
}

/// Terminal log returns. The Euler spot step can cross zero on a large clock
/// increment; such paths have no log return and are dropped and counted.
fn log_returns(paths: &PathSet<f64>, s0: f64) -> (Vec<f64>, usize) {
    let spots = paths.terminal_spots();
    let returns: Vec<f64> = spots.iter().filter(|s| **s > 0.0).map(|s| (s / s0).ln()).collect();
    let dropped = spots.len() - returns.len();
    if dropped > 0 {
        eprintln!("warning: {dropped} of {} paths end at a non-positive spot and are excluded", spots.len());
    }
    (returns, dropped)
}

fn gof_cmd(cfg: &RunConfig, sub: &SubordinatorParams, out: &mut Outputs) -> anyhow::Result<serde_json::Value> {
    let g = &cfg.gof;
    let format = table_format(cfg)?;
    if g.bins < 2 {
        return Err(ConfigError::new("at least 2 bins are required").into());
    }
    let mut dropped = 0;
    let sample = match (&g.sample, g.synthetic) {
        (Some(_), Some(_)) => return Err(ConfigError::new("give either a sample file or --synthetic, not both").into()),
        (Some(path), None) => read_sample(path)?,
        (None, Some(n)) => standard_normals(n, RngStream::new(cfg.seed()?, 0)),
        (None, None) => {
            let (returns, n) = log_returns(&simulate_paths(cfg, sub)?, cfg.model.s0);
            dropped = n;
            returns
        }
    };
    let mut reference_dropped = 0;
    let reference = match g.reference {
        GofReference::Normal => Reference::FittedNormal,
        GofReference::Model => {
            let mut ref_cfg = cfg.clone();
            ref_cfg.simulation.paths = g.reference_paths;
            ref_cfg.simulation.seed = Some(cfg.seed()?.wrapping_add(1));
            let (returns, n) = log_returns(&simulate_paths(&ref_cfg, sub)?, cfg.model.s0);
            reference_dropped = n;
            Reference::Empirical(Ecdf::new(&returns))
        }
    };
    let gof = chi_square_gof(&sample, &reference, g.bins)?;
    let p_value = chi_square_p_value(gof.statistic, gof.dof as f64);
    let (ecdf, hist) = ecdf_epdf(&sample, None)?;

    match format {
        OutputFormat::Json => out.json(
            "gof.json",
            &json!({"gof": gof, "p_value": p_value, "ecdf": ecdf.steps(), "histogram": hist}),
        )?,
        _ => {
            let mut csv = String::from("bin,lower,upper,observed,expected\n");
            for i in 0..gof.bins.observed.len() {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    i,
                    gof.bins.edges[i],
                    gof.bins.edges[i + 1],
                    gof.bins.observed[i],
                    gof.bins.expected[i]
                );
            }
            out.write("gof.csv", csv)?;
            let mut csv = String::from("x,ecdf\n");
            for (x, f) in ecdf.steps() {
                let _ = writeln!(csv, "{x},{f}");
            }
            out.write("ecdf.csv", csv)?;
            let mut csv = String::from("lower,upper,count,density\n");
            for (i, w) in hist.edges.windows(2).enumerate() {
                let _ = writeln!(csv, "{},{},{},{}", w[0], w[1], hist.counts[i], hist.densities[i]);
            }
            out.write("histogram.csv", csv)?;
        }
    }
    println!(
        "chi-square {:.4} on {} dof (95% critical value {:.4}, p = {:.4})",
        gof.statistic, gof.dof, gof.critical_95, p_value
    );
    Ok(json!({
        "statistic": gof.statistic,
        "dof": gof.dof,
        "critical_95": gof.critical_95,
        "p_value": p_value,
        "reject_at_95": gof.statistic > gof.critical_95,
        "excluded_paths": dropped,
        "reference_excluded_paths": reference_dropped,
    }))
}

fn compare_cmd(cfg: &RunConfig, sub: &SubordinatorParams, out: &mut Outputs) -> anyhow::Result<serde_json::Value> {
    let cc = &cfg.compare;
    let format = table_format(cfg)?;
    let chain_path = cc
        .chain
        .as_ref()
        .ok_or_else(|| ConfigError::new("compare needs an option chain (--chain)"))?;
    let chain = load_chain_csv(chain_path)?;
    let results: Vec<(f64, PriceResult)> = match &cc.model_prices {
        Some(path) => load_price_ladder(path)?
            .into_iter()
            .map(|(k, price)| {
                (
                    k,
                    PriceResult {
                        price,
                        std_error: 0.0,
                        n_paths: 0,
                        exercise_fraction_per_step: Vec::new(),
                        degenerate_steps: Vec::new(),
                    },
                )
            })
            .collect(),
        None => {
            let paths = simulate_paths(cfg, sub)?;
            let lsm = cfg.contract.lsm();
            chain
                .of_right(cc.right)
                .map(|q| {
                    let c = OptionContract::new(OptionStyle::American, cc.right, q.strike, cfg.simulation.horizon)?;
                    Ok((q.strike, price_american_lsm(&paths, &c, &lsm)?))
                })
                .collect::<anyhow::Result<_>>()?
        }
    };
    let q = build_comparison(&chain, cc.right, &results)?;
    let value = nrmse(&q, cc.normalizer)?;
    match format {
        OutputFormat::Json => out.json("comparison.json", &json!({"comparison": q, "nrmse": value}))?,
        _ => {
            let mut csv = String::from("strike,simulated,market\n");
            for i in 0..q.len() {
                let _ = writeln!(csv, "{},{},{}", q.strikes[i], q.simulated[i], q.market[i]);
            }
            out.write("comparison.csv", csv)?;
        }
    }
    println!("NRMSE {value} over {} strikes", q.len());
    Ok(json!({"nrmse": value, "strikes": q.len()}))
}

/// Re-runs a manifest into `out_dir`; with `verify`, compares every output
/// byte for byte against the files next to the manifest.
pub fn replay(manifest_path: &Path, out_dir: &Path, workers: Option<usize>, verify: bool) -> anyhow::Result<()> {
    let original = RunManifest::read(manifest_path)?;
    let mut cfg = original.config.clone();
    if let Some(w) = workers {
        cfg.simulation.workers = w;
    }
    let fresh = run(original.command, cfg, out_dir)?;
    if !verify {
        return Ok(());
    }
    let source = manifest_path.parent().unwrap_or(Path::new("."));
    let mut mismatched = Vec::new();
    for name in &original.outputs {
        let a = fs::read(source.join(name)).with_context(|| format!("reading {name}"))?;
        let b = fs::read(out_dir.join(name)).with_context(|| format!("reading {name}"))?;
        if a != b {
            mismatched.push(name.clone());
        }
    }
    if fresh.outputs != original.outputs {
        mismatched.push("(output list)".into());
    }
    if mismatched.is_empty() {
        println!("replay reproduced {} output(s) byte for byte", original.outputs.len());
        Ok(())
    } else {
        Err(anyhow::anyhow!("replay differs in: {}", mismatched.join(", ")))
    }
}
