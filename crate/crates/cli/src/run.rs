//! Evaluates a config into report rows.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use gendd_core::engine::evaluate;
use gendd_core::mc::{estimate_functionals, Estimate, FunctionalEstimates, Target};
use gendd_core::tax::{tax_epv, tax_evaluate};
use gendd_core::{
    factory_for, Boundary, EngineSettings, EpvMode, ExitParamFactory, FamilySettings, FunctionalQuery, PayoutWeight,
    ProcessModel, TaxContext, TaxSchedule,
};

use crate::config::{Config, Experiment};
use crate::report::{ReportRow, Status, SCHEMA_VERSION};

/// Command-line overrides applied on top of the config.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub mc: Option<bool>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl RunOptions {
    pub fn apply(&self, config: &mut Config) {
        if let Some(on) = self.mc {
            config.mc.enabled = on;
        }
        if let Some(seed) = self.seed {
            config.mc.seed = seed;
        }
        if let Some(jobs) = self.jobs {
            config.mc.jobs = jobs;
        }
    }
}

/// Value and error estimate, plus whether `q` was extrapolated.
type Analytic = Result<(f64, f64, bool), String>;

struct Point<'a> {
    factory: &'a dyn ExitParamFactory,
    f: Arc<dyn Boundary>,
    schedule: TaxSchedule,
    weight: PayoutWeight,
    query: FunctionalQuery,
    engine: EngineSettings,
}

impl Point<'_> {
    fn untaxed(&self) -> Result<[(f64, f64, bool); 2], String> {
        let FunctionalQuery { q, s, .. } = self.query;
        let params = self.factory.exit_params(self.f.clone(), q, s).map_err(|e| e.to_string())?;
        let extrapolated = params.provenance().extrapolated;
        let e = evaluate(params.as_ref(), &self.query, &self.engine).map_err(|e| e.to_string())?;
        Ok([(e.g, e.g_error, extrapolated), (e.h, e.h_error, extrapolated)])
    }

    fn ctx(&self) -> Result<TaxContext, String> {
        TaxContext::new(self.schedule.clone(), self.query.x).map_err(|e| e.to_string())
    }

    fn taxed(&self) -> Result<[(f64, f64, bool); 2], String> {
        let e = tax_evaluate(self.factory, &self.ctx()?, self.f.clone(), &self.query, &self.engine)
            .map_err(|e| e.to_string())?;
        Ok([(e.g, e.g_error, e.extrapolated), (e.h, e.h_error, e.extrapolated)])
    }

    fn epv(&self, mode: EpvMode) -> Analytic {
        let r = tax_epv(self.factory, &self.ctx()?, self.f.clone(), &self.weight, &self.query, mode, &self.engine)
            .map_err(|e| e.to_string())?;
        Ok((r.value, r.error, r.extrapolated))
    }
}

fn pick(pair: &Result<[(f64, f64, bool); 2], String>, i: usize) -> Analytic {
    pair.as_ref().map(|p| p[i]).map_err(Clone::clone)
}

fn mc_pick(all: &FunctionalEstimates, target: Target) -> &Estimate {
    match target {
        Target::G | Target::GU => &all.exit,
        Target::H | Target::HU => &all.drawdown,
        Target::EpvUntilEither => &all.epv_until_either,
        Target::EpvOnUpperExit => &all.epv_on_upper_exit,
    }
}

pub fn run_experiment(e: &Experiment, config: &Config) -> anyhow::Result<Vec<ReportRow>> {
    let model: ProcessModel = e.model.build();
    let family: FamilySettings = config.family;
    let factory = factory_for(&model, &family).with_context(|| format!("experiment `{}`", e.name))?;
    let f: Arc<dyn Boundary> = Arc::new(e.boundary.clone());
    let weight = e.weight.build()?;
    let schedule = e.tax.clone().unwrap_or_default();
    let (mc_on, mc) = e.mc_settings(&config.mc);
    let wants_untaxed = e.targets.iter().any(|t| !t.is_taxed());
    let wants_taxed = e.targets.iter().any(|t| t.is_taxed());

    let mut rows = Vec::new();
    for query in e.queries() {
        let point = Point {
            factory: factory.as_ref(),
            f: f.clone(),
            schedule: schedule.clone(),
            weight: weight.clone(),
            query,
            engine: config.engine,
        };
        let untaxed = if wants_untaxed { point.untaxed() } else { Err(String::new()) };
        let taxed = if e.targets.iter().any(|t| matches!(t, Target::GU | Target::HU)) {
            point.taxed()
        } else {
            Err(String::new())
        };
        let run_mc = |tax: Option<&TaxSchedule>| -> Option<Result<FunctionalEstimates, String>> {
            mc_on.then(|| estimate_functionals(&model, e.boundary_ref(), tax, &weight, &query, &mc).map_err(|e| e.to_string()))
        };
        let mc_plain = if wants_untaxed { run_mc(None) } else { None };
        let mc_taxed = if wants_taxed { run_mc(Some(&schedule)) } else { None };

        for &target in &e.targets {
            let analytic = match target {
                Target::G => pick(&untaxed, 0),
                Target::H => pick(&untaxed, 1),
                Target::GU => pick(&taxed, 0),
                Target::HU => pick(&taxed, 1),
                Target::EpvUntilEither => point.epv(EpvMode::UntilEither),
                Target::EpvOnUpperExit => point.epv(EpvMode::OnUpperExit),
            };
            let sim = if target.is_taxed() { &mc_taxed } else { &mc_plain };
            rows.push(make_row(e, &query, target, analytic, sim.as_ref()));
        }
    }
    Ok(rows)
}

fn make_row(
    e: &Experiment,
    query: &FunctionalQuery,
    target: Target,
    analytic: Analytic,
    sim: Option<&Result<FunctionalEstimates, String>>,
) -> ReportRow {
    let mut notes = Vec::new();
    let mut row = ReportRow {
        schema_version: SCHEMA_VERSION,
        experiment: e.name.clone(),
        model: e.model.describe(),
        boundary: e.boundary.describe(),
        tax: e.tax_label(),
        target: target.name().to_string(),
        q: query.q,
        s: query.s,
        x: query.x,
        k: query.k,
        analytic: None,
        analytic_err: None,
        mc: None,
        mc_se: None,
        mc_n: None,
        mc_dt: None,
        seed: None,
        abs_diff: None,
        rel_diff: None,
        tolerance: None,
        status: Status::Analytic,
        note: String::new(),
    };
    match analytic {
        Ok((v, err, extrapolated)) => {
            row.analytic = Some(v);
            row.analytic_err = Some(err);
            if extrapolated {
                notes.push("q extrapolated from q_min".to_string());
            }
        }
        Err(msg) => {
            row.status = Status::Error;
            notes.push(format!("analytic: {msg}"));
        }
    }
    match sim {
        Some(Ok(all)) => {
            let est = mc_pick(all, target);
            row.mc = Some(est.value);
            row.mc_se = Some(est.std_error);
            row.mc_n = Some(est.n_paths);
            row.mc_dt = Some(est.dt);
            row.seed = Some(est.seed);
            if let Some(w) = &est.warning {
                notes.push(w.clone());
            }
            if row.status != Status::Error {
                row.compare(e.allowance);
            }
        }
        Some(Err(msg)) => {
            row.status = Status::Error;
            notes.push(format!("mc: {msg}"));
        }
        None => {}
    }
    row.note = notes.join("; ");
    row
}

impl Experiment {
    fn boundary_ref(&self) -> &dyn Boundary {
        &self.boundary
    }
}

pub fn run_config(config: &Config) -> anyhow::Result<Vec<ReportRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for e in &config.experiments {
        rows.extend(run_experiment(e, config)?);
    }
    Ok(rows)
}

/// Writes `<stem>.csv` and `<stem>.json` under `dir` and returns both paths.
pub fn write_reports(rows: &[ReportRow], dir: &Path, stem: &str) -> anyhow::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let csv = std::fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    crate::report::write_csv(rows, std::io::BufWriter::new(csv))?;
    let json = std::fs::File::create(&json_path).with_context(|| format!("creating {}", json_path.display()))?;
    crate::report::write_json(rows, std::io::BufWriter::new(json))?;
    Ok((csv_path, json_path))
}
