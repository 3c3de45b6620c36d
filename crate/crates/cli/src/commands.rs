use std::path::{Path, PathBuf};

use brlab_core::correlations::{
    apply_channel_model, channel_model_to_purification, eval_hvm, eval_quantum_model, hvm_to_nn, nn_to_hvm,
    normalize_psd, normalize_purification, psd_to_quantum_model, purification_to_channel_model, quantum_model_to_psd,
    KrausChannel, ModelFile, Povm, QuantumModel, CPTP_TOL, HVM_TOL, POVM_TOL, STATE_NORM_TOL,
};
use brlab_core::decomp::{contract_matrix, contract_vector, Decomposition, SeparableDecomposition};
use brlab_core::families::{convergence_study, w_state, Family};
use brlab_core::ranks::{
    measure_floors, parse_w_label, rank_report, reference_lookup, reference_ranks, separation_experiment, AlsOptions,
    OracleParams, Quantity, DEFAULT_ITERS, DEFAULT_STARTS,
};
use brlab_core::tensor::DenseTensor;
use brlab_core::tree::{
    closure_check, isometry_deviation, left_canonical_rooted, normalize_separable_tree_rooted, trace_balance_deviation,
    unnormalized_norm_diagnostic,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

/// What a run produced: written files and a short stdout summary.
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

pub struct Context {
    pub config: ExperimentConfig,
    pub subcommand: String,
    pub hash: String,
}

impl Context {
    fn envelope<T: Serialize>(&self, result: &T) -> Result<Value, CliError> {
        let mut config = self.config.clone();
        config.out = None;
        Ok(json!({
            "tool": "brlab",
            "version": brlab_core::VERSION,
            "config_hash": self.hash,
            "subcommand": self.subcommand,
            "config": config,
            "result": serde_json::to_value(result).map_err(CliError::internal)?,
        }))
    }

    fn write_json<T: Serialize>(&self, name: &str, result: &T) -> Result<PathBuf, CliError> {
        let v = self.envelope(result)?;
        self.write_text(name, &(serde_json::to_string_pretty(&v).map_err(CliError::internal)? + "\n"))
    }

    fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.config.out_dir().join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(&path, e))?;
        }
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    fn csv_header(&self) -> String {
        format!("# brlab {} config-hash={}\n", brlab_core::VERSION, self.hash)
    }
}

fn module<T>(context: &str, r: brlab_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::module(context, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("parsing {}: {e}", path.display())))
}

fn unwrap_result(v: Value) -> Value {
    match v {
        Value::Object(mut m) if m.contains_key("result") && m.contains_key("config_hash") => m.remove("result").unwrap(),
        other => other,
    }
}

/// Reads a file written by this tool or a bare payload.
fn read_payload<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let v: Value = read_json(path)?;
    serde_json::from_value(unwrap_result(v)).map_err(|e| CliError::config(format!("parsing {}: {e}", path.display())))
}

fn als_options(c: &ExperimentConfig) -> Result<AlsOptions, CliError> {
    let starts = c.starts.unwrap_or(DEFAULT_STARTS);
    let iters = c.iters.unwrap_or(DEFAULT_ITERS);
    if starts == 0 || iters == 0 {
        return Err(CliError::config("--starts and --iters must be positive"));
    }
    Ok(AlsOptions::new(starts, iters, c.require_seed()?))
}

pub fn family_study(ctx: &Context) -> Result<RunOutput, CliError> {
    let c = &ctx.config;
    let label = c.family.as_deref().ok_or_else(|| CliError::config("--family is required"))?;
    let param = if label == "two-domain" { c.k.or(c.p) } else { c.p };
    let family = Family::from_label(label, param).map_err(|e| CliError::config(e.to_string()))?;
    let n = c.require_n()?;
    if c.d.is_some_and(|d| d != 2) {
        return Err(CliError::config("every family has local dimension 2; --d must be 2 if given"));
    }
    let grid = c.grid()?;
    module("family-study", family.contract(n, grid[0]).and_then(|_| family.target(n)))?;
    let study = module("family-study", convergence_study(family, n, &grid))?;
    let csv = ctx.write_text("study.csv", &(ctx.csv_header() + &study.to_csv()))?;
    let summary = study.summary();
    let json = ctx.write_json("study.json", &json!({ "summary": summary, "points": study.points }))?;
    Ok(RunOutput { files: vec![csv, json], summary: serde_json::to_value(&summary).map_err(CliError::internal)? })
}

fn load_tensor(c: &ExperimentConfig) -> Result<(String, DenseTensor, Option<usize>), CliError> {
    match (&c.tensor, c.inputs().as_slice()) {
        (Some(label), []) => {
            let n = parse_w_label(label).map_err(|e| CliError::config(e.to_string()))?;
            Ok((label.clone(), module("ranks", w_state(n))?, Some(n)))
        }
        (None, [path]) => Ok((path.display().to_string(), read_payload(path)?, None)),
        _ => Err(CliError::config("give exactly one of --tensor or --input")),
    }
}

pub fn ranks(ctx: &Context) -> Result<RunOutput, CliError> {
    let c = &ctx.config;
    let (label, t, w_n) = load_tensor(c)?;
    let opts = als_options(c)?;
    let ranks = match (&c.r, w_n) {
        (Some(r), _) => r.to_vec(),
        (None, Some(n)) => (1..=n).collect(),
        (None, None) => return Err(CliError::config("--r is required for tensors from files")),
    };
    if ranks.contains(&0) {
        return Err(CliError::config("ranks must be positive"));
    }
    let report = module("ranks", rank_report(&label, &t, &ranks, &opts, w_n))?;
    let file = ctx.write_json("report.json", &report)?;
    let best: Vec<Value> = report.residuals.iter().map(|r| json!({ "r": r.r, "residual": r.residual })).collect();
    Ok(RunOutput {
        files: vec![file],
        summary: json!({ "label": report.label, "flattening_lower_bound": report.flattening_lower_bound, "residuals": best }),
    })
}

pub fn floors_bootstrap(ctx: &Context) -> Result<RunOutput, CliError> {
    let c = &ctx.config;
    let d = OracleParams::default();
    let params = OracleParams { starts: c.starts.unwrap_or(d.starts), iters: c.iters.unwrap_or(d.iters), seed: c.seed.unwrap_or(d.seed) };
    if params.starts == 0 || params.iters == 0 {
        return Err(CliError::config("--starts and --iters must be positive"));
    }
    let floors = module("floors-bootstrap", measure_floors(params))?;
    let mut v = serde_json::to_value(&floors).map_err(CliError::internal)?;
    v["config_hash"] = json!(ctx.hash);
    let file = ctx.write_text("fixtures/floors.json", &(serde_json::to_string_pretty(&v).map_err(CliError::internal)? + "\n"))?;
    Ok(RunOutput { files: vec![file], summary: v })
}

pub fn separation(ctx: &Context) -> Result<RunOutput, CliError> {
    let c = &ctx.config;
    let ns = c.n.as_ref().map(|n| n.to_vec()).unwrap_or_else(|| vec![3, 4, 5]);
    let opts = als_options(c)?;
    let report = module("separation", separation_experiment(&ns, &opts))?;
    let file = ctx.write_json("report.json", &report)?;
    let rows: Vec<Value> = report.rows.iter().map(|r| json!({ "n": r.n, "eps_n": r.eps_n, "separated": r.separated })).collect();
    Ok(RunOutput { files: vec![file], summary: json!({ "rows": rows }) })
}

pub fn reference(ctx: &Context) -> Result<RunOutput, CliError> {
    let c = &ctx.config;
    let result = match &c.tensor {
        Some(label) => {
            let n = parse_w_label(label).map_err(|e| CliError::config(e.to_string()))?;
            let quantities = [
                Quantity::Rank,
                Quantity::BorderRank,
                Quantity::TiOsrLowerBound,
                Quantity::TiPsdOsrLowerBound,
                Quantity::TiNnOsrBorderUpperBound,
            ];
            let values: Vec<_> = quantities.iter().filter_map(|&q| reference_lookup(q, n)).collect();
            json!({ "tensor": label, "values": values })
        }
        None => json!({ "table": reference_ranks() }),
    };
    let file = ctx.write_json("report.json", &result)?;
    Ok(RunOutput { files: vec![file], summary: result })
}

fn load_decomposition(path: &Path) -> Result<Decomposition, CliError> {
    read_payload(path)
}

pub fn to_model(ctx: &Context) -> Result<RunOutput, CliError> {
    let dec = load_decomposition(&ctx.config.require_input()?)?;
    let (model, summary) = match &dec {
        Decomposition::Psd(p) => {
            let m = module("to-model", normalize_psd(p).and_then(|p| psd_to_quantum_model(&p)))?;
            let rep = module("to-model", m.report())?;
            (serde_json::to_value(m.to_json()).map_err(CliError::internal)?, json!({ "flavor": "povm", "r": m.r(), "valid": rep.valid }))
        }
        Decomposition::Purification(p) => {
            let m = module("to-model", normalize_purification(p).and_then(|p| purification_to_channel_model(&p)))?;
            let rep = module("to-model", m.report())?;
            (serde_json::to_value(m.to_json()).map_err(CliError::internal)?, json!({ "flavor": "channel", "r": m.r(), "valid": rep.valid }))
        }
        Decomposition::Nonnegative(nn) => {
            let m = module("to-model", nn_to_hvm(nn))?;
            (serde_json::to_value(&m).map_err(CliError::internal)?, json!({ "flavor": "hidden-variable", "r": m.r() }))
        }
        other => {
            return Err(CliError::config(format!(
                "to-model takes psd, purification or nonnegative decompositions, got {}",
                other.kind()
            )))
        }
    };
    let file = ctx.write_json("model.json", &model)?;
    Ok(RunOutput { files: vec![file], summary })
}

fn load_model(path: &Path) -> Result<ModelFile, CliError> {
    read_payload(path)
}

pub fn from_model(ctx: &Context) -> Result<RunOutput, CliError> {
    let dec = match load_model(&ctx.config.require_input()?)? {
        ModelFile::Quantum(j) => {
            let m = module("from-model", QuantumModel::from_json(&j))?;
            match m.flavor() {
                "povm" => Decomposition::Psd(module("from-model", quantum_model_to_psd(&m))?),
                _ => Decomposition::Purification(module("from-model", channel_model_to_purification(&m))?),
            }
        }
        ModelFile::HiddenVariable(h) => Decomposition::Nonnegative(module("from-model", hvm_to_nn(&h))?),
        _ => return Err(CliError::config("from-model takes a quantum or hidden-variable model")),
    };
    let file = ctx.write_json("decomposition.json", &dec)?;
    Ok(RunOutput { files: vec![file], summary: json!({ "kind": dec.kind(), "r": dec.r() }) })
}

pub fn eval_model(ctx: &Context) -> Result<RunOutput, CliError> {
    let result = match load_model(&ctx.config.require_input()?)? {
        ModelFile::Quantum(j) => {
            let m = module("eval-model", QuantumModel::from_json(&j))?;
            match m.flavor() {
                "povm" => json!({ "distribution": module("eval-model", eval_quantum_model(&m))? }),
                _ => {
                    let rho = module("eval-model", apply_channel_model(&m))?;
                    json!({ "dims": rho.dims, "density_matrix": rho.matrix })
                }
            }
        }
        ModelFile::HiddenVariable(h) => {
            module("eval-model", h.deviation())?;
            json!({ "distribution": eval_hvm(&h) })
        }
        _ => return Err(CliError::config("eval-model takes a quantum or hidden-variable model")),
    };
    let file = ctx.write_json("report.json", &result)?;
    Ok(RunOutput { files: vec![file], summary: json!({ "evaluated": true }) })
}

pub fn validate_model(ctx: &Context) -> Result<RunOutput, CliError> {
    let tol = &ctx.config.tol;
    let (povm_tol, cptp_tol) = (tol.povm.unwrap_or(POVM_TOL), tol.cptp.unwrap_or(CPTP_TOL));
    let (hvm_tol, norm_tol) = (tol.hvm.unwrap_or(HVM_TOL), tol.state_norm.unwrap_or(STATE_NORM_TOL));
    let povm_ok = |c: &brlab_core::correlations::PovmCheck| c.completeness_deviation <= povm_tol && c.min_eigenvalue >= -povm_tol;
    let cptp_ok = |c: &brlab_core::correlations::CptpCheck| c.trace_preservation_deviation <= cptp_tol && c.choi_lambda_min >= -cptp_tol;
    let (valid, deviation, report) = match load_model(&ctx.config.require_input()?)? {
        ModelFile::Quantum(j) => {
            let m = module("validate-model", QuantumModel::from_json(&j))?;
            let rep = module("validate-model", m.report())?;
            let valid = rep.state_norm_deviation <= norm_tol && rep.povms.iter().all(povm_ok) && rep.channels.iter().all(cptp_ok);
            let dev = rep
                .povms
                .iter()
                .map(|c| c.completeness_deviation.max(-c.min_eigenvalue))
                .chain(rep.channels.iter().map(|c| c.trace_preservation_deviation.max(-c.choi_lambda_min)))
                .fold(rep.state_norm_deviation, f64::max);
            (valid, dev, serde_json::to_value(&rep).map_err(CliError::internal)?)
        }
        ModelFile::HiddenVariable(h) => {
            let dev = module("validate-model", h.deviation())?;
            (dev <= hvm_tol, dev, json!({ "flavor": "hidden-variable", "deviation": dev }))
        }
        ModelFile::Povm { povm } => {
            let c = module("validate-model", Povm::from_json(&povm))?.check();
            (povm_ok(&c), c.completeness_deviation.max(-c.min_eigenvalue), serde_json::to_value(c).map_err(CliError::internal)?)
        }
        ModelFile::Channel { kraus } => {
            let c = module("validate-model", KrausChannel::from_json(&kraus))?.check();
            (cptp_ok(&c), c.trace_preservation_deviation.max(-c.choi_lambda_min), serde_json::to_value(c).map_err(CliError::internal)?)
        }
    };
    let result = json!({ "valid": valid, "max_deviation": deviation, "checks": report });
    let file = ctx.write_json("report.json", &result)?;
    if !valid {
        return Err(CliError::Validation { deviation, report: result, files: vec![file] });
    }
    Ok(RunOutput { files: vec![file], summary: json!({ "valid": true, "max_deviation": deviation }) })
}

pub fn tree_normalize(ctx: &Context) -> Result<RunOutput, CliError> {
    let root = ctx.config.root;
    let dec = load_decomposition(&ctx.config.require_input()?)?;
    let (out, report) = match &dec {
        Decomposition::Unconstrained(u) => {
            let c = module("tree normalize", left_canonical_rooted(u, root))?;
            let before = module("tree normalize", contract_vector(u))?;
            let after = module("tree normalize", contract_vector(&c))?;
            let change = module("tree normalize", after.distance(&before))? / before.frobenius_norm().max(f64::MIN_POSITIVE);
            let iso = module("tree normalize", isometry_deviation(&c, root))?;
            (Decomposition::Unconstrained(c), json!({ "form": "left-canonical", "isometry_deviation": iso, "relative_change": change }))
        }
        Decomposition::Separable(_) | Decomposition::Nonnegative(_) => {
            let s = match &dec {
                Decomposition::Separable(s) => s.clone(),
                Decomposition::Nonnegative(nn) => SeparableDecomposition::from_nonnegative(nn),
                _ => unreachable!(),
            };
            let (c, pruned) = module("tree normalize", normalize_separable_tree_rooted(&s, root))?;
            let before = module("tree normalize", contract_matrix(&s))?;
            let after = module("tree normalize", contract_matrix(&c))?;
            let change = after.matrix.max_abs_diff(&before.matrix) / before.matrix.max_abs().max(f64::MIN_POSITIVE);
            let bal = module("tree normalize", trace_balance_deviation(&c, root))?;
            (
                Decomposition::Separable(c),
                json!({ "form": "trace-balanced", "trace_deviation": bal, "relative_change": change, "pruned": pruned }),
            )
        }
        other => return Err(CliError::config(format!("tree normalize takes unconstrained, nonnegative or separable input, got {}", other.kind()))),
    };
    let dfile = ctx.write_json("decomposition.json", &out)?;
    let rfile = ctx.write_json("report.json", &report)?;
    Ok(RunOutput { files: vec![dfile, rfile], summary: report })
}

pub fn tree_closure_check(ctx: &Context) -> Result<RunOutput, CliError> {
    let c = &ctx.config;
    let paths = c.inputs();
    if paths.is_empty() {
        return Err(CliError::config("closure-check needs one --input per sequence element"));
    }
    let seq = paths.iter().map(|p| load_decomposition(p)).collect::<Result<Vec<_>, _>>()?;
    if let Some(p) = &c.params {
        if p.len() != seq.len() || p.iter().any(|x| !(*x > 0.0)) {
            return Err(CliError::config("--params needs one positive value per input"));
        }
    }
    let mut files = Vec::new();
    let report = if c.force.unwrap_or(false) {
        module("tree closure-check", unnormalized_norm_diagnostic(&seq, c.params.as_deref()))?
    } else {
        let (report, limit) = module("tree closure-check", closure_check(&seq))?;
        files.push(ctx.write_json("limit.json", &limit)?);
        report
    };
    files.insert(0, ctx.write_json("report.json", &report)?);
    Ok(RunOutput {
        files,
        summary: json!({
            "normalized": report.normalized,
            "bounded": report.bounded,
            "cauchy": report.cauchy,
            "growth_slope": report.growth_slope,
        }),
    })
}
