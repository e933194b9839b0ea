mod settings;
mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use convexify_core::carleman_checks::{
    carleman_battery, carleman_test_function, clamp_boundary_columns, early_support_test_function, volterra_battery,
    CheckRow,
};
use convexify_core::coefficient::{Coefficient, TestCase};
use convexify_core::experiment::{
    preprocess, published, reproduce_table, run_sweep, run_test_case, simulate, SweepParameter,
};
use convexify_core::forward::TraceData;
use convexify_core::mesh::{ScalarField, UniformGrid};
use convexify_core::objective::{fd_grad_oracle, grad_j, impose_boundary, InverseConfig};
use convexify_core::optimizer::initial_guess;
use convexify_core::preprocess::BoundaryData;
use convexify_core::series::TimeSeries;
use convexify_core::transform::WField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use settings::Settings;
use svg::{line_chart, Chart};

/// Coefficient reconstruction for the 1D wave equation by Carleman-weighted
/// convexification.
#[derive(Parser)]
#[command(name = "convexify", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve and boundary traces.
    Simulate(Common),
    /// Noise, smoothing and boundary data from traces.
    Preprocess {
        #[command(flatten)]
        common: Common,
        /// Trace CSV (`t,f0,f1`) to use instead of a forward solve.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Full reconstruction.
    Invert(Common),
    /// Reconstructions over several values of one weight parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        param: Param,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Numerical checks of the weighted inequalities and of the gradient.
    Verify(Common),
    /// All four tests over several seeds, with the published numbers.
    Reproduce {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    Lambda,
    Alpha,
}

#[derive(Args)]
struct Common {
    /// Test coefficient 1..4.
    #[arg(long)]
    test: Option<u8>,
    /// `test`, `zero`, or a CSV file with columns `x,a`.
    #[arg(long)]
    coefficient: Option<String>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    stop_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// `energy` or `nodal`.
    #[arg(long)]
    metric: Option<String>,
    /// `auto`, `gcv`, `discrepancy`, or a fixed spline weight in (0, 1].
    #[arg(long)]
    smoothing: Option<String>,
    /// `key=value` file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = &self.config {
            s.apply_file(path)?;
        }
        let flags: [(&str, Option<String>); 13] = [
            ("test", self.test.map(|v| v.to_string())),
            ("coefficient", self.coefficient.clone()),
            ("noise", self.noise.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("beta", self.beta.map(|v| v.to_string())),
            ("mu", self.mu.map(|v| v.to_string())),
            ("gamma0", self.gamma0.map(|v| v.to_string())),
            ("stop_tol", self.stop_tol.map(|v| v.to_string())),
            ("max_iter", self.max_iter.map(|v| v.to_string())),
            ("metric", self.metric.clone()),
            ("smoothing", self.smoothing.clone()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                s.apply(key, &v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        Ok(s)
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    fn csv_and_chart(&self, name: &str, csv: &str, chart: &Chart) -> Result<()> {
        self.write(&format!("{name}.csv"), csv)?;
        self.write(&format!("{name}.svg"), &line_chart(csv, chart)?)
    }
}

fn to_string(write: impl FnOnce(&mut Vec<u8>) -> convexify_core::error::Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}

fn boundary_csv(bd: &BoundaryData) -> Result<String> {
    to_string(|b| bd.write_csv(b))
}

fn traces_csv(traces: &TraceData) -> Result<String> {
    to_string(|b| traces.write_csv(b))
}

fn coefficient_csv(xs: &[f64], series: &[(&str, Vec<f64>)]) -> String {
    let mut s = String::from("x");
    for (name, _) in series {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for (k, x) in xs.iter().enumerate() {
        let _ = write!(s, "{x}");
        for (_, v) in series {
            let _ = write!(s, ",{}", v[k]);
        }
        s.push('\n');
    }
    s
}

fn smoothed_csv(noisy: &TraceData, smoothed: &convexify_core::preprocess::SmoothedTraces) -> String {
    let mut s = String::from("t,f0,f0_smooth,f1,f1_smooth\n");
    for ((t, f0), f1) in noisy.t().iter().zip(noisy.f0.values()).zip(noisy.f1.values()) {
        let _ = writeln!(s, "{t},{f0},{},{f1},{}", smoothed.f0.evaluate(*t, 0), smoothed.f1.evaluate(*t, 0));
    }
    s
}

fn cmd_simulate(common: &Common) -> Result<()> {
    let s = common.settings()?;
    let cfg = s.experiment()?;
    let out = Output::new(&common.out)?;
    let (_, traces) = simulate(&cfg.coefficient, &cfg.forward_grid)?;
    out.csv_and_chart("traces", &traces_csv(&traces)?, &Chart { title: "traces at x = 0", x: "t", ys: &["f0", "f1"], log_y: false })?;
    out.write("manifest.txt", &s.manifest("simulate"))?;
    println!("wrote traces for {} samples to {}", traces.t().len(), common.out.display());
    Ok(())
}

fn cmd_preprocess(common: &Common, traces: Option<&Path>) -> Result<()> {
    let s = common.settings()?;
    let cfg = s.experiment()?;
    let out = Output::new(&common.out)?;
    let clean = match traces {
        Some(path) => {
            let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            TraceData::read_csv(file)?
        }
        None => simulate(&cfg.coefficient, &cfg.forward_grid)?.1,
    };
    let (noisy, smoothed, boundary) = preprocess(&clean, cfg.noise, cfg.seed, cfg.smoothing(), &cfg.inverse.grid)?;
    out.write("traces_noisy.csv", &traces_csv(&noisy)?)?;
    out.csv_and_chart("smoothed", &smoothed_csv(&noisy, &smoothed), &Chart { title: "f0: noisy and smoothed", x: "t", ys: &["f0", "f0_smooth"], log_y: false })?;
    out.csv_and_chart("boundary", &boundary_csv(&boundary)?, &Chart { title: "boundary data", x: "t", ys: &["p0", "p1"], log_y: false })?;
    let mut manifest = s.manifest("preprocess");
    if let Some(path) = traces {
        let _ = writeln!(manifest, "# traces {}", path.display());
    }
    out.write("manifest.txt", &manifest)?;
    println!("spline weights p(f0) = {:.6e}, p(f1) = {:.6e}", smoothed.f0.p(), smoothed.f1.p());
    Ok(())
}

fn cmd_invert(common: &Common) -> Result<()> {
    let s = common.settings()?;
    let cfg = s.experiment()?;
    let out = Output::new(&common.out)?;
    out.write("manifest.txt", &s.manifest("invert"))?;
    let outcome = run_test_case(&cfg)?;
    let run = &outcome.run;
    out.write("boundary.csv", &boundary_csv(&outcome.prepared.boundary)?)?;
    let history = to_string(|b| run.write_history_csv(b))?;
    out.csv_and_chart("history", &history, &Chart { title: "objective and weighted residual", x: "iter", ys: &["J", "res_sup"], log_y: true })?;
    let coefficients = to_string(|b| run.write_coefficient_csv(Some(&cfg.coefficient), b))?;
    let title = truth_label(&cfg.coefficient);
    out.csv_and_chart("coefficient", &coefficients, &Chart { title: &title, x: "x", ys: &["a_rec", "a_true"], log_y: false })?;
    let mut summary = format!(
        "iterations={}\ntermination={:?}\ninitial_j={}\nfinal_j={}\ndecrease_factor={}\n",
        run.iterations(),
        run.termination,
        run.initial_j(),
        run.final_j(),
        run.decrease_factor()
    );
    match run.error {
        Some(e) => {
            let _ = writeln!(summary, "error={e}");
        }
        None => {
            let sup = run.reconstruction.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let _ = writeln!(summary, "error=skipped (zero truth)\nreconstruction_sup={sup}");
        }
    }
    out.write("summary.txt", &summary)?;
    print!("{summary}");
    Ok(())
}

fn cmd_sweep(common: &Common, param: Param, values: &[f64]) -> Result<()> {
    let s = common.settings()?;
    let cfg = s.experiment()?;
    let out = Output::new(&common.out)?;
    let parameter = match param {
        Param::Lambda => SweepParameter::Lambda,
        Param::Alpha => SweepParameter::Alpha,
    };
    out.write("manifest.txt", &format!("{}# sweep {parameter} over {values:?}\n", s.manifest("sweep")))?;
    let points = run_sweep(parameter, values, &cfg)?;
    let mut table = format!("{parameter},status,error,iterations,initial_j,final_j,residual_rises_within_10\n");
    let mut curves: Vec<(String, Vec<f64>)> = Vec::new();
    let mut xs = Vec::new();
    for p in &points {
        match &p.run {
            Ok(run) => {
                let _ = writeln!(
                    table,
                    "{},ok,{},{},{},{},{}",
                    p.value,
                    run.error.unwrap_or(f64::NAN),
                    run.iterations(),
                    run.initial_j(),
                    run.final_j(),
                    run.residual_rises_within(10)
                );
                xs = run.reconstruction.xs.clone();
                curves.push((format!("{parameter}={}", p.value), run.reconstruction.values.clone()));
            }
            Err(e) => {
                let _ = writeln!(table, "{},\"{e}\",,,,,", p.value);
            }
        }
    }
    out.write("sweep.csv", &table)?;
    print!("{table}");
    if !xs.is_empty() {
        let truth = cfg.coefficient.sample(&xs);
        let mut series: Vec<(&str, Vec<f64>)> = vec![("a_true", truth)];
        series.extend(curves.iter().map(|(n, v)| (n.as_str(), v.clone())));
        let names: Vec<&str> = series.iter().map(|(n, _)| *n).collect();
        let csv = coefficient_csv(&xs, &series);
        let title = truth_label(&cfg.coefficient);
        out.csv_and_chart("sweep_coefficients", &csv, &Chart { title: &title, x: "x", ys: &names, log_y: false })?;
    }
    if points.iter().any(|p| p.run.is_err()) {
        bail!("some sweep runs failed; see sweep.csv");
    }
    Ok(())
}

fn gradient_rows(s: &Settings) -> Result<Vec<CheckRow>> {
    let inverse = InverseConfig { grid: UniformGrid::new(0.0, 1.1, 0.0, 2.0, 16, 12)?, ..s.inverse()? };
    let ts = inverse.grid.ts();
    let bd = BoundaryData {
        p0: TimeSeries::from_fn(ts.clone(), |t| 0.1 * t)?,
        p1: TimeSeries::from_fn(ts, |t| 0.2 * t * (2.0 - t))?,
    };
    let w0 = initial_guess(&bd, &inverse.grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let values = w0.field.values().iter().map(|v| v + rng.random_range(-0.2..0.2)).collect();
        let mut w = WField::new(ScalarField::from_values(inverse.grid, values)?);
        impose_boundary(&mut w, &bd)?;
        let exact = grad_j(&w, &bd, &inverse)?;
        let oracle = fd_grad_oracle(&w, &bd, &inverse, 1e-6)?;
        let diff = exact.field.values().iter().zip(oracle.field.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(diff / oracle.field.sup_norm());
    }
    Ok(vec![CheckRow {
        check: "gradient_relative_error".into(),
        lambda: inverse.carleman.lambda(),
        alpha: inverse.carleman.alpha(),
        value: worst,
        threshold: 1e-5,
        pass: worst < 1e-5,
    }])
}

fn cmd_verify(common: &Common) -> Result<()> {
    let s = common.settings()?;
    let out = Output::new(&common.out)?;
    let mut rows = Vec::new();
    let g = UniformGrid::new(0.0, 1.0, 0.0, 2.0, 101, 201)?;
    rows.extend(volterra_battery(g, &[1.0, 2.0, 5.0], &[0.2, 0.5], 100, &mut ChaCha8Rng::seed_from_u64(s.seed))?);
    let g = UniformGrid::new(0.0, 1.0, 0.0, 2.0, 801, 801)?;
    let lambdas = [2.0, 4.0, 8.0, 16.0];
    for (name, u) in [("sin", carleman_test_function(g)), ("sin2_cut", early_support_test_function(g))] {
        for mut row in carleman_battery(&clamp_boundary_columns(u), &lambdas, 0.25, 0.5)? {
            row.check = format!("{}_{name}", row.check);
            rows.push(row);
        }
    }
    rows.extend(gradient_rows(&s)?);
    let mut csv = String::from("check,lambda,alpha,value,threshold,pass\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{},{}", r.check, r.lambda, r.alpha, r.value, r.threshold, r.pass);
    }
    out.write("verify.csv", &csv)?;
    out.write("manifest.txt", &s.manifest("verify"))?;
    print!("{csv}");
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        bail!("{failed} of {} checks failed", rows.len());
    }
    Ok(())
}

fn cmd_reproduce(common: &Common, seeds: &[u64]) -> Result<()> {
    let s = common.settings()?;
    let inverse = s.inverse()?;
    let out = Output::new(&common.out)?;
    out.write("manifest.txt", &format!("{}# seeds {seeds:?}\n", s.manifest("reproduce")))?;
    let rows = reproduce_table(&TestCase::ALL, seeds, s.noise, &inverse);
    let mut csv = String::from(
        "test,runs,median_error,median_iterations,median_initial_j,median_final_j,median_decrease_factor,published_error,published_iterations,failures\n",
    );
    for row in &rows {
        let (error, iterations) = published(row.case);
        let failures: Vec<String> = row.failures.iter().map(|(seed, e)| format!("seed {seed}: {e}")).collect();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{error},{iterations},\"{}\"",
            row.case,
            row.runs.len(),
            row.median_error(),
            row.median_iterations(),
            row.median_initial_j(),
            row.median_final_j(),
            row.median_decrease_factor(),
            failures.join("; ").replace('"', "'")
        );
    }
    out.write("table.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(c) => cmd_simulate(c),
        Command::Preprocess { common, traces } => cmd_preprocess(common, traces.as_deref()),
        Command::Invert(c) => cmd_invert(c),
        Command::Sweep { common, param, values } => cmd_sweep(common, *param, values),
        Command::Verify(c) => cmd_verify(c),
        Command::Reproduce { common, seeds } => cmd_reproduce(common, seeds),
    }
}

fn truth_label(c: &Coefficient) -> String {
    match c {
        Coefficient::Test(t) => t.formula().to_string(),
        _ => "custom".to_string(),
    }
}
