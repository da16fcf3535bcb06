use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use breathmark_core::evaluation::{
    bootstrap_state_fractions, roc_sweep, symmetric_kl_flattened, symmetric_kl_transitions, EvalReport,
    Prediction,
};
use breathmark_core::features::{extract_features, feature_names};
use breathmark_core::markov::fit_markov;
use breathmark_core::pipeline::{self, EvaluateOptions, Method};
use breathmark_core::published;
use breathmark_core::semi_markov::{
    fit_semi_markov_with_report, simulate_cohort, FitOptions, LikelihoodMode, SemiMarkovModel,
};
use breathmark_core::sequences::io::{load_cohort, save_cohort, CohortFormat};
use breathmark_core::sequences::N_STATES;
use breathmark_core::{svm, Error, Label, LabeledCohort, State};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::{
    BootstrapArgs, ClassifyArgs, Common, CompareKlArgs, EvaluateArgs, FitArgs, InputArgs, RocArgs, SimulateArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Compute(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Compute(e.to_string())
        }
    }
}

fn output_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Compute(format!("{}: {e}", path.display()))
}

type Outcome<T = Vec<String>> = Result<T, CliError>;

pub fn check_common(common: &Common) -> Outcome<()> {
    if !(common.fs > 0.0 && common.fs.is_finite()) {
        return Err(CliError::Usage(format!("--fs must be positive, got {}", common.fs)));
    }
    fs::create_dir_all(&common.out).map_err(|e| output_error(&common.out, e))
}

fn load_input(path: &Path, fs: f64) -> Outcome<LabeledCohort> {
    let (cohort, _) = load_cohort(path, CohortFormat::from_path(path), fs).map_err(|e| match e {
        Error::Io(io) => CliError::Usage(format!("{}: {io}", path.display())),
        other => CliError::Usage(format!("{}: {other}", path.display())),
    })?;
    if cohort.is_empty() {
        return Err(CliError::Usage(format!("{}: cohort is empty", path.display())));
    }
    Ok(cohort)
}

fn load_model(path: &Path) -> Outcome<SemiMarkovModel> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: invalid model JSON: {e}", path.display())))
}

/// The two class models from `--model-success`/`--model-failure`, or the
/// built-in published models when neither is given.
fn load_models(common: &Common) -> Outcome<(SemiMarkovModel, SemiMarkovModel)> {
    match (&common.model_success, &common.model_failure) {
        (None, None) => {
            let m = published::models();
            Ok((m.success, m.failure))
        }
        (Some(s), Some(f)) => Ok((load_model(s)?, load_model(f)?)),
        _ => Err(CliError::Usage("--model-success and --model-failure must be given together".into())),
    }
}

fn write_file(dir: &Path, name: &str, contents: &[u8], outputs: &mut Vec<String>) -> Outcome<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| output_error(&path, e))?;
    outputs.push(name.to_string());
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, outputs: &mut Vec<String>) -> Outcome<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Compute(e.to_string()))?;
    text.push('\n');
    write_file(dir, name, text.as_bytes(), outputs)
}

fn write_csv(dir: &Path, name: &str, header: &[String], rows: &[Vec<String>], outputs: &mut Vec<String>) -> Outcome<()> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| output_error(&path, e))?;
    w.write_record(header).map_err(|e| output_error(&path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| output_error(&path, e))?;
    }
    w.flush().map_err(|e| output_error(&path, e))?;
    outputs.push(name.to_string());
    Ok(())
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn metric_csv(dir: &Path, name: &str, rows: &[(String, f64)], outputs: &mut Vec<String>) -> Outcome<()> {
    let rows: Vec<Vec<String>> = rows.iter().map(|(k, v)| vec![k.clone(), v.to_string()]).collect();
    write_csv(dir, name, &header(&["metric", "value"]), &rows, outputs)
}

pub fn write_manifest<T: Serialize>(command: &str, config: &T, common: &Common, outputs: &[String]) -> Outcome<()> {
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = json!({
        "tool": "breathmark",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "seed": common.seed,
        "parallel": breathmark_core::par::is_parallel(),
        "created_unix_seconds": created,
        "outputs": outputs,
    });
    let path = common.out.join("manifest.json");
    let file = File::create(&path).map_err(|e| output_error(&path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| output_error(&path, e))?;
    w.write_all(b"\n").and_then(|()| w.flush()).map_err(|e| output_error(&path, e))
}

fn parse_number(token: &str) -> Option<f64> {
    let token = token.trim();
    match token.split_once('^') {
        Some((base, exp)) => Some(base.trim().parse::<f64>().ok()?.powf(exp.trim().parse().ok()?)),
        None => token.parse().ok(),
    }
}

fn parse_grid(flag: &str, text: Option<&str>, default: Vec<f64>) -> Outcome<Vec<f64>> {
    let Some(text) = text else { return Ok(default) };
    let values: Option<Vec<f64>> = text.split(',').map(parse_number).collect();
    match values {
        Some(v) if !v.is_empty() && v.iter().all(|x| x.is_finite() && *x > 0.0) => Ok(v),
        _ => Err(CliError::Usage(format!("{flag}: expected comma-separated positive numbers, got {text:?}"))),
    }
}

fn parse_method(token: &str) -> Outcome<Method> {
    token.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

fn parse_mode(token: &str) -> Outcome<LikelihoodMode> {
    token
        .parse()
        .map_err(|_| CliError::Usage(format!("--state: expected all or one of PAU, ASB, MVT, SYB, UNK, got {token:?}")))
}

pub fn simulate(args: &SimulateArgs) -> Outcome {
    if !(args.duration > 0.0 && args.duration.is_finite()) {
        return Err(CliError::Usage(format!("--duration must be positive, got {}", args.duration)));
    }
    if args.n_success + args.n_failure == 0 {
        return Err(CliError::Usage("nothing to simulate: --n-success and --n-failure are both 0".into()));
    }
    let (mut success, mut failure) = load_models(&args.common)?;
    success.sampling_rate_hz = args.common.fs;
    failure.sampling_rate_hz = args.common.fs;
    let cohort = simulate_cohort(&success, &failure, args.n_success, args.n_failure, args.duration, args.common.seed)?;
    let path = args.common.out.join("cohort.csv");
    save_cohort(&cohort, &path, CohortFormat::Csv).map_err(|e| output_error(&path, e))?;
    Ok(vec!["cohort.csv".into()])
}

pub fn fit(args: &FitArgs) -> Outcome {
    let common = &args.input.common;
    let cohort = load_input(&args.input.input, common.fs)?;
    let options = FitOptions { exclude_censored: !args.include_censored, ..FitOptions::default() };
    let mut outputs = Vec::new();
    let mut dwell_reports = Map::new();
    for label in Label::ALL {
        let seqs = cohort.sequences(label);
        if seqs.is_empty() {
            return Err(CliError::Usage(format!("cohort has no {label} subjects")));
        }
        let (model, reports) = fit_semi_markov_with_report(seqs.iter().copied(), &options)?;
        let markov = fit_markov(seqs.iter().copied())?;
        write_json(&common.out, &format!("model_{label}.json"), &model, &mut outputs)?;
        write_json(&common.out, &format!("markov_{label}.json"), &markov, &mut outputs)?;
        let per_state: Map<String, Value> = State::ALL
            .iter()
            .zip(reports.iter())
            .map(|(s, r)| Ok((s.to_string(), serde_json::to_value(r).map_err(|e| CliError::Compute(e.to_string()))?)))
            .collect::<Outcome<_>>()?;
        dwell_reports.insert(label.to_string(), Value::Object(per_state));
    }
    write_json(&common.out, "dwell_fits.json", &dwell_reports, &mut outputs)?;
    Ok(outputs)
}

pub fn classify(args: &ClassifyArgs) -> Outcome {
    let common = &args.input.common;
    let cohort = load_input(&args.input.input, common.fs)?;
    let (success, failure) = load_models(common)?;
    let mode = parse_mode(&args.state)?;
    let mut rows = Vec::new();
    let mut predictions = Vec::new();
    for s in cohort.subjects() {
        let prediction = failure
            .mode_log_likelihood(&s.sequence, mode, !args.exclude_dwell)
            .and_then(|f| Ok(f - success.mode_log_likelihood(&s.sequence, mode, !args.exclude_dwell)?))
            .map(Prediction::from_score);
        rows.push(match &prediction {
            Ok(p) => vec![s.id.clone(), s.label.to_string(), p.label.to_string(), p.score.to_string()],
            Err(e) => vec![s.id.clone(), s.label.to_string(), String::new(), format!("error: {e}")],
        });
        predictions.push(prediction);
    }
    let ids: Vec<String> = cohort.subjects().iter().map(|s| s.id.clone()).collect();
    let labels: Vec<Label> = cohort.subjects().iter().map(|s| s.label).collect();
    let summary = EvalReport::from_predictions(&ids, &labels, predictions);
    let mut outputs = Vec::new();
    write_csv(&common.out, "predictions.csv", &header(&["subject_id", "label", "predicted", "score"]), &rows, &mut outputs)?;
    write_json(&common.out, "summary.json", &json!({ "likelihood": mode.to_string(), "report": summary }), &mut outputs)?;
    Ok(outputs)
}

pub fn features(args: &InputArgs) -> Outcome {
    let cohort = load_input(&args.input, args.common.fs)?;
    let mut head = header(&["subject_id", "label"]);
    head.extend(feature_names());
    let rows: Vec<Vec<String>> = cohort
        .subjects()
        .iter()
        .map(|s| {
            let mut row = vec![s.id.clone(), s.label.to_string()];
            row.extend(extract_features(&s.sequence).to_vec().iter().map(f64::to_string));
            row
        })
        .collect();
    let mut outputs = Vec::new();
    write_csv(&args.common.out, "features.csv", &head, &rows, &mut outputs)?;
    Ok(outputs)
}

pub fn evaluate(args: &EvaluateArgs) -> Outcome {
    let common = &args.input.common;
    let method = match (&args.method, &args.state) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --method or --state, not both".into())),
        (Some(m), None) => parse_method(m)?,
        (None, Some(s)) => Method::Likelihood(parse_mode(s)?),
        (None, None) => Method::Likelihood(LikelihoodMode::All),
    };
    let options = EvaluateOptions {
        include_dwell: !args.exclude_dwell,
        c_grid: parse_grid("--c-grid", args.c_grid.as_deref(), svm::default_c_grid())?,
        gamma_grid: parse_grid("--gamma-grid", args.gamma_grid.as_deref(), svm::default_gamma_grid())?,
        ..EvaluateOptions::default()
    };
    let cohort = load_input(&args.input.input, common.fs)?;
    let result = pipeline::evaluate(&cohort, method, &options)?;
    let mut rows: Vec<(String, f64)> = result.report.metric_rows().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    if let Some(n) = result.n_features {
        rows.push(("n_features".into(), n as f64));
    }
    if let (Some(c), Some(g)) = (result.best_c, result.best_gamma) {
        rows.push(("best_C".into(), c));
        rows.push(("best_gamma".into(), g));
    }
    let mut outputs = Vec::new();
    write_json(&common.out, "report.json", &result, &mut outputs)?;
    metric_csv(&common.out, "report.csv", &rows, &mut outputs)?;
    Ok(outputs)
}

type Table = [[f64; N_STATES]; N_STATES];

fn kl_pair(a: &Table, b: &Table) -> Value {
    json!({ "row_sum": symmetric_kl_transitions(a, b), "flattened": symmetric_kl_flattened(a, b) })
}

pub fn compare_kl(args: &CompareKlArgs) -> Outcome {
    let common = &args.common;
    let (success, failure) = load_models(common)?;
    let mut result = Map::new();
    result.insert("models".into(), kl_pair(success.transition.rows(), failure.transition.rows()));
    result.insert(
        "published_run_tables".into(),
        kl_pair(&published::SUCCESS_RUN_TRANSITIONS, &published::FAILURE_RUN_TRANSITIONS),
    );
    result.insert(
        "published_sample_tables".into(),
        kl_pair(&published::SUCCESS_SAMPLE_TRANSITIONS, &published::FAILURE_SAMPLE_TRANSITIONS),
    );
    if let Some(input) = &args.input {
        let cohort = load_input(input, common.fs)?;
        let fit_class = |label: Label| -> Outcome<_> {
            let seqs = cohort.sequences(label);
            if seqs.is_empty() {
                return Err(CliError::Usage(format!("cohort has no {label} subjects")));
            }
            let markov = fit_markov(seqs.iter().copied())?;
            let (semi, _) = fit_semi_markov_with_report(seqs.iter().copied(), &FitOptions::default())?;
            Ok((markov, semi))
        };
        let (ms, ss) = fit_class(Label::Success)?;
        let (mf, sf) = fit_class(Label::Failure)?;
        result.insert("cohort_run_level".into(), kl_pair(ss.transition.rows(), sf.transition.rows()));
        result.insert("cohort_sample_level".into(), kl_pair(ms.transition.rows(), mf.transition.rows()));
    }
    let mut rows = Vec::new();
    for (key, value) in &result {
        for variant in ["row_sum", "flattened"] {
            rows.push((format!("{key}_{variant}"), value[variant].as_f64().unwrap_or(f64::NAN)));
        }
    }
    let mut outputs = Vec::new();
    write_json(&common.out, "kl.json", &result, &mut outputs)?;
    metric_csv(&common.out, "kl.csv", &rows, &mut outputs)?;
    Ok(outputs)
}

pub fn roc(args: &RocArgs) -> Outcome {
    let common = &args.input.common;
    let set = match parse_method(&args.method)? {
        Method::Svm(set) => set,
        other => return Err(CliError::Usage(format!("roc needs an svm-* method, got {other}"))),
    };
    let gamma_grid = parse_grid("--gamma-grid", args.gamma_grid.as_deref(), svm::default_gamma_grid())?;
    if gamma_grid.len() < 2 {
        return Err(CliError::Usage("--gamma-grid needs at least two values".into()));
    }
    if let Some(c) = args.c {
        if !(c > 0.0 && c.is_finite()) {
            return Err(CliError::Usage(format!("--c must be positive, got {c}")));
        }
    }
    let cohort = load_input(&args.input.input, common.fs)?;
    let ids: Vec<String> = cohort.subjects().iter().map(|s| s.id.clone()).collect();
    let labels: Vec<Label> = cohort.subjects().iter().map(|s| s.label).collect();
    let x = pipeline::feature_matrix(&cohort, set);
    let c = match args.c {
        Some(c) => c,
        None => {
            let c_grid = parse_grid("--c-grid", args.c_grid.as_deref(), svm::default_c_grid())?;
            svm::grid_search(&x, &labels, &ids, &c_grid, &gamma_grid)?.best_c
        }
    };
    let curve = roc_sweep(&x, &labels, &ids, c, &gamma_grid)?;
    let rows: Vec<Vec<String>> =
        curve.points.iter().map(|p| vec![p.gamma.to_string(), p.fpr.to_string(), p.tpr.to_string()]).collect();
    let mut outputs = Vec::new();
    write_csv(&common.out, "roc.csv", &header(&["gamma", "fpr", "tpr"]), &rows, &mut outputs)?;
    write_json(
        &common.out,
        "roc.json",
        &json!({ "method": Method::Svm(set).to_string(), "C": c, "auc": curve.auc, "points": curve.points }),
        &mut outputs,
    )?;
    Ok(outputs)
}

pub fn bootstrap(args: &BootstrapArgs) -> Outcome {
    let common = &args.input.common;
    let cohort = load_input(&args.input.input, common.fs)?;
    let summary = bootstrap_state_fractions(&cohort, args.bootstrap_n, common.seed)?;
    let mut rows = Vec::new();
    for (label, estimates) in [(Label::Success, &summary.success), (Label::Failure, &summary.failure)] {
        for e in estimates {
            rows.push(vec![label.to_string(), e.state.to_string(), e.mean.to_string(), e.standard_error.to_string()]);
        }
    }
    let mut outputs = Vec::new();
    write_json(&common.out, "bootstrap.json", &summary, &mut outputs)?;
    write_csv(&common.out, "bootstrap.csv", &header(&["class", "state", "mean", "standard_error"]), &rows, &mut outputs)?;
    Ok(outputs)
}

