use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use lcmort_core::{
    build_surface, compare_models, estimate_drift, fit_negbin, fit_plat, fit_poisson, fit_rh,
    forecast_kappa, forecast_rates, log_rate_curves, parse_hmd_table, write_curves_csv,
    CohortOptions, CurveSource, FitReport, LeeCarterParams, ModelKind, MortalitySurface, TableKind,
};
use serde::{Deserialize, Serialize};

use crate::args::{
    Command, CompareArgs, CurvesArgs, DataArgs, FitArgs, FitOptions, ForecastArgs, ModelArg,
    ReplayArgs,
};

/// How a command finished; maps onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    NotConverged,
}

impl Status {
    fn and(self, other: Status) -> Status {
        if self == Status::Converged && other == Status::Converged {
            Status::Converged
        } else {
            Status::NotConverged
        }
    }

    fn of(report: &FitReport) -> Status {
        if report.converged {
            Status::Converged
        } else {
            Status::NotConverged
        }
    }
}

pub const MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    invocation: Command,
    seed: Option<u64>,
    surface_fingerprints: Vec<String>,
    outputs: Vec<String>,
}

/// Collects what a run wrote, for the manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    fingerprints: Vec<String>,
}

impl Outputs {
    /// Creates `dir` and rewrites it as an absolute path.
    fn new(dir: &mut PathBuf) -> Result<Self> {
        fs::create_dir_all(&*dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        *dir = absolute(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            fingerprints: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> lcmort_core::Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush()
            .with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, command: &Command, seed: Option<u64>) -> Result<()> {
        self.files.push(MANIFEST.to_string());
        let manifest = Manifest {
            tool: "lcmort".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            invocation: command.clone(),
            seed,
            surface_fingerprints: self.fingerprints,
            outputs: self.files,
        };
        let path = self.dir.join(MANIFEST);
        let mut w = BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

pub fn run(command: Command) -> Result<Status> {
    match command {
        Command::Fit(args) => cmd_fit(args),
        Command::Forecast(args) => cmd_forecast(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Curves(args) => cmd_curves(args),
        Command::Replay(args) => cmd_replay(args),
    }
}

fn absolute(path: &Path) -> Result<PathBuf> {
    fs::canonicalize(path).with_context(|| format!("reading {}", path.display()))
}

/// Input paths are recorded absolute so a manifest replays from anywhere.
fn resolve_data(data: &mut DataArgs) -> Result<()> {
    data.deaths = absolute(&data.deaths)?;
    data.exposures = absolute(&data.exposures)?;
    Ok(())
}

fn load_surface(data: &DataArgs) -> Result<MortalitySurface> {
    let open = |p: &Path| {
        File::open(p)
            .map(BufReader::new)
            .with_context(|| format!("opening {}", p.display()))
    };
    let deaths = parse_hmd_table(open(&data.deaths)?, TableKind::Deaths)
        .with_context(|| format!("parsing deaths table {}", data.deaths.display()))?;
    let exposures = parse_hmd_table(open(&data.exposures)?, TableKind::Exposures)
        .with_context(|| format!("parsing exposures table {}", data.exposures.display()))?;
    build_surface(&deaths, &exposures, data.sex, data.ages, data.years)
        .context("building the mortality surface")
}

/// Fits `model` and writes its parameter files, report, cells and surface.
fn fit_into(
    out: &mut Outputs,
    prefix: &str,
    surface: &MortalitySurface,
    model: ModelArg,
    fit: &FitOptions,
) -> Result<(Option<LeeCarterParams>, FitReport)> {
    let config = fit.config();
    let options = CohortOptions {
        min_cohort_obs: fit.min_cohort_obs,
        ..CohortOptions::default()
    };
    let name = |file: &str| format!("{prefix}{file}");
    let fitting = || format!("fitting {}", model.name());
    let (lc, report) = match model {
        ModelArg::LcPoisson | ModelArg::LcNegbin => {
            let (p, r) = if model == ModelArg::LcPoisson {
                fit_poisson(surface, &config)
            } else {
                fit_negbin(surface, &config)
            }
            .with_context(fitting)?;
            out.write(&name("params_age.csv"), |w| {
                p.write_age_csv(surface.ages(), w)
            })?;
            out.write(&name("params_year.csv"), |w| {
                p.write_year_csv(surface.years(), w)
            })?;
            (Some(p), r)
        }
        ModelArg::Rh => {
            let (p, r) = fit_rh(surface, &config, &options).with_context(fitting)?;
            write_cohort_params(out, prefix, |a, y, c| p.write_csvs(surface, a, y, c))?;
            (None, r)
        }
        ModelArg::Plat => {
            let (p, r) = fit_plat(surface, &config, &options).with_context(fitting)?;
            write_cohort_params(out, prefix, |a, y, c| p.write_csvs(surface, a, y, c))?;
            (None, r)
        }
    };
    out.write(&name("fit_report.json"), |w| {
        report.write_json(&mut *w)?;
        writeln!(w)?;
        Ok(())
    })?;
    out.write(&name("cells.csv"), |w| report.write_cells_csv(w))?;
    out.write(&name("surface.csv"), |w| surface.write_csv(w))?;
    out.fingerprints.push(report.surface_fingerprint.clone());
    Ok((lc, report))
}

fn write_cohort_params(
    out: &mut Outputs,
    prefix: &str,
    write: impl FnOnce(&mut Vec<u8>, &mut Vec<u8>, &mut Vec<u8>) -> lcmort_core::Result<()>,
) -> Result<()> {
    let (mut a, mut y, mut c) = (Vec::new(), Vec::new(), Vec::new());
    write(&mut a, &mut y, &mut c)?;
    for (file, bytes) in [
        ("params_age.csv", a),
        ("params_year.csv", y),
        ("params_cohort.csv", c),
    ] {
        out.write(&format!("{prefix}{file}"), |w| Ok(w.write_all(&bytes)?))?;
    }
    Ok(())
}

fn report_summary(label: &str, report: &FitReport) {
    eprintln!(
        "{label}: lnL {:.6} after {} sweeps ({})",
        report.final_loglik,
        report.iterations,
        if report.converged {
            "converged"
        } else {
            "NOT converged"
        }
    );
}

fn cmd_fit(mut args: FitArgs) -> Result<Status> {
    resolve_data(&mut args.data)?;
    let surface = load_surface(&args.data)?;
    let mut out = Outputs::new(&mut args.out)?;
    let (_, report) = fit_into(&mut out, "", &surface, args.model, &args.fit)?;
    report_summary(args.model.name(), &report);
    out.finish(&Command::Fit(args), None)?;
    Ok(Status::of(&report))
}

/// A stored Lee-Carter fit: parameters with their labels and the report.
struct StoredFit {
    params: LeeCarterParams,
    ages: Vec<i32>,
    years: Vec<i32>,
    report: FitReport,
}

fn read_report(dir: &Path) -> Result<FitReport> {
    let path = dir.join("fit_report.json");
    let file = File::open(&path)
        .with_context(|| format!("missing fit artifacts: cannot open {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))
}

fn read_lee_carter(dir: &Path) -> Result<StoredFit> {
    let report = read_report(dir)?;
    if report.model != ModelKind::LeeCarter {
        bail!(
            "{} holds a {:?} fit; forecasts and curves need a Lee-Carter fit",
            dir.display(),
            report.model
        );
    }
    let open = |name: &str| {
        let path = dir.join(name);
        File::open(&path)
            .map(BufReader::new)
            .with_context(|| format!("missing fit artifacts: cannot open {}", path.display()))
    };
    let (params, ages, years) =
        LeeCarterParams::read_csv(open("params_age.csv")?, open("params_year.csv")?)
            .with_context(|| format!("reading parameters from {}", dir.display()))?;
    ensure!(
        ages == report.ages && years == report.years,
        "parameter files in {} do not match fit_report.json",
        dir.display()
    );
    Ok(StoredFit {
        params,
        ages,
        years,
        report,
    })
}

fn cmd_forecast(mut args: ForecastArgs) -> Result<Status> {
    ensure!(args.horizon >= 1, "--horizon must be at least 1");
    ensure!(args.paths >= 1, "--paths must be at least 1");
    let mut out = Outputs::new(&mut args.out)?;
    let (fit, status) = match (&args.source.from, args.source.inline_data()) {
        (Some(dir), _) => {
            let dir = absolute(dir)?;
            args.source.from = Some(dir.clone());
            let fit = read_lee_carter(&dir)?;
            out.fingerprints
                .push(fit.report.surface_fingerprint.clone());
            (fit, Status::Converged)
        }
        (None, Some(mut data)) => {
            if args.model.lee_carter_distribution().is_none() {
                bail!("forecasting supports lc_poisson and lc_negbin fits only");
            }
            resolve_data(&mut data)?;
            args.source.deaths = Some(data.deaths.clone());
            args.source.exposures = Some(data.exposures.clone());
            let surface = load_surface(&data)?;
            let (params, report) = fit_into(&mut out, "", &surface, args.model, &args.fit)?;
            report_summary(args.model.name(), &report);
            let status = Status::of(&report);
            let fit = StoredFit {
                params: params.expect("Lee-Carter fit"),
                ages: surface.ages().to_vec(),
                years: surface.years().to_vec(),
                report,
            };
            (fit, status)
        }
        (None, None) => bail!("give either --from DIR or --deaths/--exposures/--years"),
    };

    let mut drift = estimate_drift(&fit.params.kappa).context("estimating the drift")?;
    if args.zero_volatility {
        drift = drift.without_noise();
    }
    let fc = forecast_kappa(
        &fit.params.kappa,
        &drift,
        args.horizon,
        args.paths,
        args.seed,
    )
    .context("simulating the period index")?;
    let rates = forecast_rates(&fit.params, &fc, &args.quantiles).context("forecasting rates")?;
    let last_year = *fit.years.last().expect("fit has years");
    out.write("forecast.csv", |w| rates.write_csv(&fit.ages, last_year, w))?;

    let summary = ForecastSummary {
        model: fit.report.model,
        distribution: fit.report.distribution,
        last_fitted_year: last_year,
        horizon: args.horizon,
        n_paths: args.paths,
        seed: args.seed,
        zero_volatility: args.zero_volatility,
        drift,
        quantiles: args.quantiles.clone(),
        central_kappa: fc.central.clone(),
    };
    out.write("forecast_summary.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        writeln!(w)?;
        Ok(())
    })?;
    eprintln!(
        "drift {:.6} per year, sigma {:.6}; {} paths to {}",
        drift.c_hat,
        drift.sigma_hat(),
        args.paths,
        last_year + args.horizon as i32
    );
    let seed = args.seed;
    out.finish(&Command::Forecast(args), Some(seed))?;
    Ok(status)
}

#[derive(Serialize)]
struct ForecastSummary {
    model: ModelKind,
    distribution: lcmort_core::Distribution,
    last_fitted_year: i32,
    horizon: usize,
    n_paths: usize,
    seed: u64,
    zero_volatility: bool,
    drift: lcmort_core::DriftEstimate,
    quantiles: Vec<f64>,
    central_kappa: Vec<f64>,
}

fn cmd_compare(mut args: CompareArgs) -> Result<Status> {
    let mut out = Outputs::new(&mut args.out)?;
    let mut status = Status::Converged;
    let (default_labels, reports): (Vec<String>, Vec<FitReport>) =
        if let Some(mut data) = args.inline_data() {
            ensure!(
                args.models.len() >= 2,
                "compare needs at least two models (got {})",
                args.models.len()
            );
            resolve_data(&mut data)?;
            args.deaths = Some(data.deaths.clone());
            args.exposures = Some(data.exposures.clone());
            let surface = load_surface(&data)?;
            let mut labels = Vec::new();
            let mut reports = Vec::new();
            for &model in &args.models {
                let prefix = format!("{}_", model.name());
                let (_, report) = fit_into(&mut out, &prefix, &surface, model, &args.fit)?;
                report_summary(model.name(), &report);
                status = status.and(Status::of(&report));
                labels.push(model.name().to_string());
                reports.push(report);
            }
            (labels, reports)
        } else {
            ensure!(
                args.from.len() >= 2,
                "compare needs at least two fits (got {})",
                args.from.len()
            );
            let mut labels = Vec::new();
            let mut reports = Vec::new();
            for dir in args.from.iter_mut() {
                *dir = absolute(dir)?;
                let report = read_report(dir)?;
                labels.push(default_label(&report));
                out.fingerprints.push(report.surface_fingerprint.clone());
                reports.push(report);
            }
            (labels, reports)
        };

    let labels = pick_labels(&args.labels, default_labels)?;
    let years = if args.at.is_empty() {
        reports[0].years.clone()
    } else {
        args.at.clone()
    };
    let pairs: Vec<(&str, &FitReport)> = labels.iter().map(String::as_str).zip(&reports).collect();
    let comparison = compare_models(&pairs, &years).context("comparing models")?;
    out.write("comparison.json", |w| {
        comparison.write_json(&mut *w)?;
        writeln!(w)?;
        Ok(())
    })?;
    print!("{}", comparison.table());
    out.finish(&Command::Compare(args), None)?;
    Ok(status)
}

fn default_label(report: &FitReport) -> String {
    match (report.model, report.distribution) {
        (ModelKind::LeeCarter, lcmort_core::Distribution::Poisson) => "lc_poisson".into(),
        (ModelKind::LeeCarter, lcmort_core::Distribution::NegativeBinomial) => "lc_negbin".into(),
        (ModelKind::RenshawHaberman, _) => "rh".into(),
        (ModelKind::Plat, _) => "plat".into(),
    }
}

fn pick_labels(given: &[String], defaults: Vec<String>) -> Result<Vec<String>> {
    if given.is_empty() {
        return Ok(defaults);
    }
    ensure!(
        given.len() == defaults.len(),
        "{} labels given for {} models",
        given.len(),
        defaults.len()
    );
    Ok(given.to_vec())
}

fn cmd_curves(mut args: CurvesArgs) -> Result<Status> {
    let mut out = Outputs::new(&mut args.out)?;
    let mut fits = Vec::new();
    for dir in args.from.iter_mut() {
        *dir = absolute(dir)?;
        let fit = read_lee_carter(dir)?;
        out.fingerprints
            .push(fit.report.surface_fingerprint.clone());
        fits.push(fit);
    }
    let labels = pick_labels(
        &args.labels,
        fits.iter().map(|f| default_label(&f.report)).collect(),
    )?;
    let latest = *args.at.iter().max().expect("--at is required");
    let mut forecasts = Vec::new();
    for fit in &fits {
        let last = *fit.years.last().expect("fit has years");
        let horizon = usize::try_from(latest - last).unwrap_or(0);
        forecasts.push(if horizon > 0 {
            let drift = estimate_drift(&fit.params.kappa)?.without_noise();
            Some(forecast_kappa(&fit.params.kappa, &drift, horizon, 1, 0)?)
        } else {
            None
        });
    }
    let sources: Vec<CurveSource<'_>> = fits
        .iter()
        .zip(&labels)
        .zip(&forecasts)
        .map(|((fit, label), fc)| CurveSource {
            label,
            params: &fit.params,
            ages: &fit.ages,
            years: &fit.years,
            forecast: fc.as_ref(),
        })
        .collect();
    let points = log_rate_curves(&sources, &args.at).context("building curves")?;
    out.write("curves.csv", |w| write_curves_csv(&points, w))?;
    out.finish(&Command::Curves(args), None)?;
    Ok(Status::Converged)
}

fn cmd_replay(args: ReplayArgs) -> Result<Status> {
    let file = File::open(&args.manifest)
        .with_context(|| format!("opening {}", args.manifest.display()))?;
    let manifest: Manifest = serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("reading {}", args.manifest.display()))?;
    if manifest.version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest written by lcmort {}, replaying with {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let mut command = manifest.invocation;
    if let Some(dir) = args.out {
        match &mut command {
            Command::Fit(a) => a.out = dir,
            Command::Forecast(a) => a.out = dir,
            Command::Compare(a) => a.out = dir,
            Command::Curves(a) => a.out = dir,
            Command::Replay(_) => bail!("a manifest cannot record a replay"),
        }
    }
    run(command)
}
