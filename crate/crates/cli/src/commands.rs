use std::path::Path;

use eqdrift::backtest::{rolling_backtest, BacktestConfig, BacktestReport, Factorization};
use eqdrift::data::{
    black_monday_week, load_csv, parse_csv, parse_french, synthetic_panel, FrenchOptions,
    ReturnPanel,
};
use eqdrift::factorization::{
    cholesky, procrustes_rotate, sym_sqrt, CovMatrix, TargetMatrix, VolMatrix,
};
use eqdrift::matrix_csv::{format_matrix_csv, format_number, read_matrix_csv};
use eqdrift::model::{expected_returns, ModelParams, TRADING_DAYS_PER_YEAR};
use eqdrift::simulate::{
    optimal_wealth_density, optimal_wealth_moments, replay_wealth, simulate_paths, WealthLaw,
};
use eqdrift::stats::{annualize, jobson_korkie_memmel, sharpe};
use eqdrift::strategy::{
    brownian_exposures, one_over_n, pi_star, pi_star_fully_invested, WeightVector,
};

use crate::config::{load_backtest_config, BacktestFile};
use crate::error::{usage, CliError, CliResult};
use crate::output::{csv_line, Staged};
use crate::{
    BacktestArgs, Cli, Command, CompareArgs, FactorArgs, Figure1Args, Method, PanelFormat,
    SimulateArgs, SynthArgs, VolArgs, WeightsArgs,
};

struct Ctx<'a> {
    cli: &'a Cli,
}

impl Ctx<'_> {
    fn progress(&self, msg: impl AsRef<str>) {
        if self.cli.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.cli.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn commit(&self, staged: Staged) -> CliResult<()> {
        for path in staged.commit(&self.cli.out_dir)? {
            self.progress(format!("wrote {}", path.display()));
        }
        Ok(())
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let ctx = Ctx { cli };
    match &cli.command {
        Command::Factor(a) => factor(&ctx, a),
        Command::Weights(a) => weights(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Figure1(a) => figure1(&ctx, a),
        Command::Backtest(a) => backtest(&ctx, a),
        Command::Compare(a) => compare(&ctx, a),
        Command::Synth(a) => synth(&ctx, a),
    }
}

fn finite(name: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be finite, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be positive, got {v}")))
    }
}

fn factorize(c: &CovMatrix, method: Method, target: Option<&TargetMatrix>) -> CliResult<VolMatrix> {
    Ok(match (method, target) {
        (Method::Cholesky, _) => cholesky(c)?,
        (Method::Sqrt, _) => sym_sqrt(c)?,
        (Method::Rotate, Some(t)) => procrustes_rotate(&cholesky(c)?, t)?.0,
        (Method::Rotate, None) => return Err(usage("--method rotate needs --target")),
    })
}

fn load_vol(args: &VolArgs) -> CliResult<VolMatrix> {
    if args.target.is_some() && args.method != Method::Rotate {
        return Err(usage("--target is only used with --method rotate"));
    }
    if let Some(path) = &args.vol {
        return Ok(VolMatrix::user(read_matrix_csv(path)?)?);
    }
    let path = args
        .cov
        .as_ref()
        .ok_or_else(|| usage("one of --cov or --vol is required"))?;
    let c = CovMatrix::new(read_matrix_csv(path)?)?;
    let target = args
        .target
        .as_ref()
        .map(|t| TargetMatrix::new(read_matrix_csv(t)?))
        .transpose()?;
    factorize(&c, args.method, target.as_ref())
}

fn model(vol: VolMatrix, mu: f64, r: f64) -> CliResult<ModelParams> {
    finite("mu", mu)?;
    finite("r", r)?;
    Ok(ModelParams::with_unit_prices(vol, mu, r)?)
}

fn factor(ctx: &Ctx, args: &FactorArgs) -> CliResult<()> {
    let vol = load_vol(&args.vol)?;
    let sums = vol.row_sums();
    let mut staged = Staged::default();
    staged.add("vol.csv", format_matrix_csv(vol.matrix()));
    let mut report = csv_line(["asset", "row_sum"]);
    for (i, s) in sums.iter().enumerate() {
        report.push_str(&csv_line([(i + 1).to_string(), format_number(*s)]));
    }
    staged.add("row_sums.csv", report);
    ctx.commit(staged)?;
    ctx.say(format!("provenance: {:?}", vol.provenance()));
    for (i, s) in sums.iter().enumerate() {
        ctx.say(format!("asset {}: row sum {s:.6}", i + 1));
    }
    Ok(())
}

fn weights(ctx: &Ctx, args: &WeightsArgs) -> CliResult<()> {
    let vol = load_vol(&args.vol)?;
    let pi = match args.kappa {
        Some(k) => pi_star(&vol, finite("kappa", k)?)?,
        None => pi_star_fully_invested(&vol, finite("exposure", args.exposure)?)?,
    };
    let bench = one_over_n(vol.dim(), pi.exposure())?;
    let p = brownian_exposures(&pi, &vol)?;
    let mut table = csv_line(["asset", "pi_star", "one_over_n", "driver_exposure"]);
    for i in 0..vol.dim() {
        table.push_str(&csv_line([
            (i + 1).to_string(),
            format_number(pi.weights()[i]),
            format_number(bench.weights()[i]),
            format_number(p.p[i]),
        ]));
    }
    let mut staged = Staged::default();
    staged.add("weights.csv", table);
    ctx.commit(staged)?;
    ctx.say(format!(
        "kappa {:.6}, exposure {:.6}, driver exposure {:.6} each",
        pi.kappa().unwrap_or(f64::NAN),
        pi.exposure(),
        p.sum() / vol.dim() as f64
    ));
    let flags = pi.flags();
    if !flags.large_positions.is_empty() {
        let list: Vec<String> = flags
            .large_positions
            .iter()
            .map(|i| (i + 1).to_string())
            .collect();
        ctx.say(format!(
            "positions above 100% of wealth: assets {}",
            list.join(", ")
        ));
    }
    if flags.negative_exposure {
        ctx.say("total risky exposure is negative");
    }
    Ok(())
}

fn constant_moments(
    w: f64,
    mu: f64,
    r: f64,
    t: f64,
    pi: &WeightVector,
    vol: &VolMatrix,
) -> CliResult<(f64, f64)> {
    let p = brownian_exposures(pi, vol)?;
    let growth = (mu - r) * p.sum() + r;
    let mean = w * (growth * t).exp();
    Ok((mean, mean * mean * (p.sum_sq() * t).exp_m1()))
}

fn sample_moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

fn simulate(ctx: &Ctx, args: &SimulateArgs) -> CliResult<()> {
    positive("w", args.w)?;
    positive("horizon", args.horizon)?;
    finite("lambda", args.lambda)?;
    if args.steps == 0 || args.paths < 2 {
        return Err(usage("--steps must be positive and --paths at least 2"));
    }
    let params = model(load_vol(&args.vol)?, args.mu, args.r)?;
    if !(args.mu > args.r) {
        return Err(usage("--mu must exceed --r"));
    }
    let kappa = (args.lambda - args.r) / (args.mu - args.r);
    if !(kappa > 0.0) {
        return Err(usage("--lambda must exceed --r"));
    }
    let pi = pi_star(params.sigma(), kappa)?;
    let bench = one_over_n(params.n_assets(), pi.exposure())?;
    ctx.progress(format!(
        "simulating {} paths x {} steps",
        args.paths, args.steps
    ));
    let paths = simulate_paths(&params, args.horizon, args.steps, args.paths, ctx.cli.seed)?;
    let w_pi = replay_wealth(&paths, &pi, &params, args.w)?;
    let w_bench = replay_wealth(&paths, &bench, &params, args.w)?;

    let mut terminal = csv_line(["path", "pi_star", "one_over_n"]);
    for (k, (a, b)) in w_pi.iter().zip(&w_bench).enumerate() {
        terminal.push_str(&csv_line([
            k.to_string(),
            format_number(*a),
            format_number(*b),
        ]));
    }
    let law = WealthLaw::from_rates(
        args.w,
        args.lambda,
        args.mu,
        args.r,
        params.n_assets(),
        args.horizon,
    )?;
    let theory_pi = optimal_wealth_moments(&law);
    let theory_bench = constant_moments(
        args.w,
        args.mu,
        args.r,
        args.horizon,
        &bench,
        params.sigma(),
    )?;
    let mut summary = csv_line([
        "strategy",
        "mean",
        "variance",
        "theory_mean",
        "theory_variance",
    ]);
    let mut lines = Vec::new();
    for (name, xs, (tm, tv)) in [
        ("pi_star", &w_pi, theory_pi),
        ("one_over_n", &w_bench, theory_bench),
    ] {
        let (m, v) = sample_moments(xs);
        summary.push_str(&csv_line([
            name.to_string(),
            format_number(m),
            format_number(v),
            format_number(tm),
            format_number(tv),
        ]));
        lines.push(format!(
            "{name}: mean {m:.6} (theory {tm:.6}), variance {v:.6} (theory {tv:.6})"
        ));
    }
    let mut staged = Staged::default();
    staged.add("terminal_wealth.csv", terminal);
    staged.add("simulation_summary.csv", summary);
    ctx.commit(staged)?;
    lines.iter().for_each(|l| ctx.say(l));
    Ok(())
}

fn figure1(ctx: &Ctx, args: &Figure1Args) -> CliResult<()> {
    positive("w", args.w)?;
    positive("t", args.t)?;
    finite("lambda", args.lambda)?;
    if args.n.is_empty() || args.n.contains(&0) {
        return Err(usage("--n needs positive market sizes"));
    }
    if args.points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    let laws: Vec<WealthLaw> = args
        .n
        .iter()
        .map(|&n| WealthLaw::from_rates(args.w, args.lambda, args.mu, args.r, n, args.t))
        .collect::<eqdrift::Result<_>>()?;
    if laws.iter().any(|l| !(l.log_sd() > 0.0)) {
        return Err(usage(
            "--lambda equal to --r gives a point mass, not a density",
        ));
    }
    // Common grid spanning +-6 log-sds of every law.
    let lo = laws
        .iter()
        .map(|l| l.log_mean() - 6.0 * l.log_sd())
        .fold(f64::INFINITY, f64::min)
        .exp();
    let hi = laws
        .iter()
        .map(|l| l.log_mean() + 6.0 * l.log_sd())
        .fold(f64::NEG_INFINITY, f64::max)
        .exp();
    let step = (hi - lo) / (args.points - 1) as f64;
    let grid: Vec<f64> = (0..args.points).map(|k| lo + k as f64 * step).collect();
    let densities: Vec<Vec<f64>> = laws
        .iter()
        .map(|l| optimal_wealth_density(l, &grid))
        .collect::<eqdrift::Result<_>>()?;

    let mut header = vec!["wealth".to_string()];
    header.extend(args.n.iter().map(|n| format!("density_n{n}")));
    let mut table = csv_line(header);
    for (k, x) in grid.iter().enumerate() {
        let mut row = vec![format_number(*x)];
        row.extend(densities.iter().map(|d| format_number(d[k])));
        table.push_str(&csv_line(row));
    }
    let mut moments = csv_line(["n", "kappa", "mean", "variance", "log_mean", "log_sd"]);
    let mut lines = Vec::new();
    for l in &laws {
        let (m, v) = optimal_wealth_moments(l);
        moments.push_str(&csv_line([
            l.n.to_string(),
            format_number(l.kappa),
            format_number(m),
            format_number(v),
            format_number(l.log_mean()),
            format_number(l.log_sd()),
        ]));
        lines.push(format!("n = {}: mean {m:.6}, variance {v:.6}", l.n));
    }
    let mut staged = Staged::default();
    staged.add("figure1.csv", table);
    staged.add("figure1_moments.csv", moments);
    ctx.commit(staged)?;
    lines.iter().for_each(|l| ctx.say(l));
    Ok(())
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_format(s: &str) -> CliResult<PanelFormat> {
    match s.to_ascii_lowercase().as_str() {
        "auto" => Ok(PanelFormat::Auto),
        "csv" => Ok(PanelFormat::Csv),
        "french" => Ok(PanelFormat::French),
        other => Err(usage(format!("unknown panel format {other:?}"))),
    }
}

fn parse_method(s: &str) -> CliResult<Method> {
    match s.to_ascii_lowercase().as_str() {
        "cholesky" => Ok(Method::Cholesky),
        "sqrt" | "sym_sqrt" | "sym-sqrt" => Ok(Method::Sqrt),
        "rotate" | "rotate_to_target" => Ok(Method::Rotate),
        other => Err(usage(format!("unknown factorization {other:?}"))),
    }
}

fn load_panel(
    text: &str,
    format: PanelFormat,
    drop: Vec<String>,
    range: Option<eqdrift::data::DateRange>,
) -> CliResult<ReturnPanel> {
    let is_csv = match format {
        PanelFormat::Csv => true,
        PanelFormat::French => false,
        PanelFormat::Auto => text
            .lines()
            .find(|l| !l.trim().is_empty())
            .is_some_and(|l| l.trim_start().to_ascii_lowercase().starts_with("date,")),
    };
    let options = FrenchOptions {
        drop_assets: drop,
        date_range: range,
    };
    if !is_csv {
        return Ok(parse_french(text, &options)?);
    }
    let mut panel = parse_csv(text)?;
    if !options.drop_assets.is_empty() {
        panel = panel.drop_assets(&options.drop_assets)?;
    }
    if let Some(r) = &options.date_range {
        panel = panel.slice(r)?;
    }
    Ok(panel)
}

/// Flags override the config file, which overrides the defaults.
fn resolve_backtest(
    args: &BacktestArgs,
    file: BacktestFile,
) -> CliResult<(
    BacktestConfig,
    PanelFormat,
    Vec<String>,
    Option<eqdrift::data::DateRange>,
)> {
    let defaults = BacktestConfig::default();
    let method = match (args.method, &file.factorization) {
        (Some(m), _) => m,
        (None, Some(s)) => parse_method(s)?,
        (None, None) => Method::Sqrt,
    };
    let target_path = args.target.clone().or(file.target);
    let factorization = match (method, target_path) {
        (Method::Cholesky, None) => Factorization::Cholesky,
        (Method::Sqrt, None) => Factorization::SymSqrt,
        (Method::Rotate, Some(p)) => {
            Factorization::RotateToTarget(TargetMatrix::new(read_matrix_csv(&p)?)?)
        }
        (Method::Rotate, None) => return Err(usage("rotate factorization needs a target matrix")),
        (_, Some(_)) => {
            return Err(usage(
                "a target matrix is only used with the rotate factorization",
            ))
        }
    };
    let exclusion_windows = if args.no_exclusions {
        Vec::new()
    } else if !args.exclude.is_empty() {
        args.exclude.clone()
    } else {
        file.exclude.unwrap_or_else(|| vec![black_monday_week()])
    };
    let config = BacktestConfig {
        window_days: args
            .window
            .or(file.window_days)
            .unwrap_or(defaults.window_days),
        reestimate_every: args
            .every
            .or(file.reestimate_every)
            .unwrap_or(defaults.reestimate_every),
        factorization,
        exposure: args.exposure.or(file.exposure).unwrap_or(defaults.exposure),
        rf_annual: args.rf.or(file.rf_annual).unwrap_or(defaults.rf_annual),
        exclusion_windows,
        shrinkage: args.shrinkage.or(file.shrinkage),
    };
    config.validate()?;
    let format = match (args.format, &file.format) {
        (Some(f), _) => f,
        (None, Some(s)) => parse_format(s)?,
        (None, None) => PanelFormat::Auto,
    };
    let drop = if args.drop.is_empty() {
        file.drop_assets.unwrap_or_default()
    } else {
        args.drop.clone()
    };
    Ok((config, format, drop, args.range.or(file.date_range)))
}

fn opt(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

fn backtest_outputs(report: &BacktestReport) -> Staged {
    let mut returns = csv_line(["date", "strategy", "benchmark"]);
    for ((d, s), b) in report
        .dates
        .iter()
        .zip(&report.strategy_returns)
        .zip(&report.benchmark_returns)
    {
        returns.push_str(&csv_line([
            d.to_string(),
            format_number(*s),
            format_number(*b),
        ]));
    }

    let mut header = vec![
        "first_day".to_string(),
        "estimation_end".into(),
        "observations".into(),
        "kappa".into(),
    ];
    header.extend(report.assets.iter().cloned());
    let mut weights = csv_line(header);
    for reb in &report.rebalances {
        let mut row = vec![
            reb.first_day.to_string(),
            reb.estimation_end.to_string(),
            reb.observations.to_string(),
            opt(reb.strategy.kappa()),
        ];
        row.extend(reb.strategy.weights().iter().map(|&w| format_number(w)));
        weights.push_str(&csv_line(row));
    }

    let perf = report.performance.as_ref().ok();
    let fields: [(&str, Option<f64>); 9] = [
        ("sharpe_strategy", report.sharpe_strategy()),
        ("sharpe_benchmark", report.sharpe_benchmark()),
        ("jk_z", report.jk_z()),
        ("jk_p", report.jk_p()),
        ("terminal_wealth_ratio", Some(report.terminal_wealth_ratio)),
        ("volatility_ratio", Some(report.volatility_ratio)),
        ("jk_p_two_sided", perf.map(|p| p.jk.p_two_sided)),
        (
            "sharpe_strategy_annualized",
            report.sharpe_strategy().map(annualize),
        ),
        (
            "sharpe_benchmark_annualized",
            report.sharpe_benchmark().map(annualize),
        ),
    ];
    let mut summary = csv_line(["field", "value"]);
    let mut json = serde_json::Map::new();
    for (name, value) in fields {
        summary.push_str(&csv_line([name.to_string(), opt(value)]));
        json.insert(name.into(), value.filter(|v| v.is_finite()).into());
    }
    summary.push_str(&csv_line([
        "days".to_string(),
        report.dates.len().to_string(),
    ]));
    summary.push_str(&csv_line([
        "rebalances".to_string(),
        report.rebalances.len().to_string(),
    ]));
    json.insert("days".into(), report.dates.len().into());
    json.insert("rebalances".into(), report.rebalances.len().into());
    if let Err(e) = &report.performance {
        summary.push_str(&csv_line(["performance_error".to_string(), e.to_string()]));
        json.insert("performance_error".into(), e.to_string().into());
    }
    let mut json_text = serde_json::to_string_pretty(&serde_json::Value::Object(json))
        .expect("plain map serializes");
    json_text.push('\n');

    let mut staged = Staged::default();
    staged.add("returns.csv", returns);
    staged.add("weights.csv", weights);
    staged.add("summary.csv", summary);
    staged.add("summary.json", json_text);
    staged
}

fn backtest(ctx: &Ctx, args: &BacktestArgs) -> CliResult<()> {
    let file = match &args.config {
        Some(p) => load_backtest_config(p)?,
        None => BacktestFile::default(),
    };
    let (config, format, drop, range) = resolve_backtest(args, file)?;
    let panel = load_panel(&read_text(&args.returns)?, format, drop, range)?;
    ctx.progress(format!(
        "{} dates x {} assets, window {}, every {}",
        panel.n_dates(),
        panel.n_assets(),
        config.window_days,
        config.reestimate_every
    ));
    let report = rolling_backtest(&panel, &config)?;
    ctx.commit(backtest_outputs(&report))?;
    match &report.performance {
        Ok(p) => {
            ctx.say(format!(
                "Sharpe (daily) pi* {:.5}, 1/n {:.5}; z = {:.3}, one-sided p = {:.3e}",
                p.sharpe_strategy.ratio, p.sharpe_benchmark.ratio, p.jk.z, p.jk.p_one_sided
            ));
        }
        Err(e) => ctx.say(format!("performance statistics undefined: {e}")),
    }
    ctx.say(format!(
        "terminal wealth ratio {:.4}, volatility ratio {:.4}",
        report.terminal_wealth_ratio, report.volatility_ratio
    ));
    Ok(())
}

fn column(panel: &ReturnPanel, name: Option<&str>, path: &Path) -> CliResult<Vec<f64>> {
    let idx = match name {
        None => 0,
        Some(n) => panel
            .assets()
            .iter()
            .position(|a| a == n)
            .ok_or_else(|| usage(format!("{}: no column {n:?}", path.display())))?,
    };
    (0..panel.n_dates())
        .map(|t| {
            if panel.is_missing(t, idx) {
                Err(CliError::Core(eqdrift::Error::MissingData {
                    date: panel.dates()[t],
                    asset: panel.assets()[idx].clone(),
                }))
            } else {
                Ok(panel.row(t)[idx])
            }
        })
        .collect()
}

fn compare(ctx: &Ctx, args: &CompareArgs) -> CliResult<()> {
    let rf_daily = finite("rf", args.rf)? / TRADING_DAYS_PER_YEAR;
    let pa = load_csv(&args.first)?;
    let pb = load_csv(&args.second)?;
    if pa.dates() != pb.dates() {
        return Err(CliError::Core(eqdrift::Error::LengthMismatch {
            left: pa.n_dates(),
            right: pb.n_dates(),
        }));
    }
    let a = column(&pa, args.first_column.as_deref(), &args.first)?;
    let b = column(&pb, args.second_column.as_deref(), &args.second)?;
    let sa = sharpe(&a, rf_daily)?;
    let sb = sharpe(&b, rf_daily)?;
    let xa: Vec<f64> = a.iter().map(|r| r - rf_daily).collect();
    let xb: Vec<f64> = b.iter().map(|r| r - rf_daily).collect();
    let jk = jobson_korkie_memmel(&xa, &xb)?;
    let mut table = csv_line(["field", "value"]);
    for (k, v) in [
        ("sharpe_first", sa.ratio),
        ("sharpe_second", sb.ratio),
        ("rho", jk.rho),
        ("jk_z", jk.z),
        ("jk_p", jk.p_one_sided),
        ("jk_p_two_sided", jk.p_two_sided),
        ("observations", a.len() as f64),
    ] {
        table.push_str(&csv_line([k.to_string(), format_number(v)]));
    }
    let mut staged = Staged::default();
    staged.add("compare.csv", table);
    ctx.commit(staged)?;
    ctx.say(format!(
        "Sharpe (daily) first {:.5}, second {:.5}; z = {:.3}, one-sided p = {:.3e}, two-sided p = {:.3e}",
        sa.ratio, sb.ratio, jk.z, jk.p_one_sided, jk.p_two_sided
    ));
    Ok(())
}

fn synth(ctx: &Ctx, args: &SynthArgs) -> CliResult<()> {
    let params = model(load_vol(&args.vol)?, args.mu, args.r)?;
    let panel = synthetic_panel(&params, args.days, ctx.cli.seed)?;
    let profile = expected_returns(&params);
    let mut staged = Staged::default();
    staged.add("panel.csv", panel.to_csv_string());
    ctx.commit(staged)?;
    ctx.say(format!(
        "{} days x {} assets; expected annual returns {:?}",
        panel.n_dates(),
        panel.n_assets(),
        profile.mu_c
    ));
    Ok(())
}
