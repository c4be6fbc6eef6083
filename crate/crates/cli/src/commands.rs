use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use curvlab::cone::{self, check_condition_iii, check_condition_iv, invariance_check, ConeKind, ConeSpec};
use curvlab::flow::{integrate, FlowMethod, FlowOptions};
use curvlab::io::{parse_tensor, TensorFile};
use curvlab::models::ModelSpec;
use curvlab::rigidity::rigidity_probe;
use curvlab::search::SearchBudget;
use curvlab::{CurvError, CurvTensor};

use crate::args::{
    ConditionArgs, FlowArgs, InvarianceArgs, MembershipArgs, ModelArgs, RigidityArgs, SearchArgs, TensorArgs, Which,
};
use crate::output::num;
use crate::{CliError, CommandOutput, Globals};

const DEFAULT_CONE: &str = "nic";
const DEFAULT_DIM: usize = 4;
const DEFAULT_INVARIANCE_SAMPLES: usize = 200;
const DEFAULT_CONDITION_SAMPLES: usize = 100;

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn required<T>(x: Option<T>, flag: &str) -> Result<T, CliError> {
    x.ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn cone_spec(name: Option<&str>, dim: usize, search: &SearchArgs, seed: u64) -> Result<ConeSpec, CliError> {
    let kind: ConeKind = name.unwrap_or(DEFAULT_CONE).parse()?;
    let defaults = SearchBudget::default();
    let spec = ConeSpec {
        kind,
        dim,
        tol: search.tol.unwrap_or(cone::DEFAULT_TOL),
        search: SearchBudget {
            restarts: search.restarts.unwrap_or(defaults.restarts),
            max_iters: search.max_iters.unwrap_or(defaults.max_iters),
            step_tol: search.step_tol.unwrap_or(defaults.step_tol),
            seed,
        },
    };
    Ok(spec.validated()?)
}

#[derive(Debug, Serialize)]
struct TensorSource {
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<ModelSpec>,
    dim: usize,
    norm: f64,
    /// Size of the Bianchi projection applied on load (files only).
    #[serde(skip_serializing_if = "Option::is_none")]
    projection_residual: Option<f64>,
}

impl TensorSource {
    fn id(&self) -> String {
        match (&self.input, &self.model) {
            (Some(p), _) => p.display().to_string(),
            (None, Some(m)) => m.to_string(),
            (None, None) => String::new(),
        }
    }
}

/// Loads `--input` or builds `--model`. A random model spec without an
/// explicit seed takes `default_seed`.
fn load_tensor(args: &TensorArgs, force: bool, default_seed: u64) -> Result<(CurvTensor, TensorSource), CliError> {
    match (&args.input, &args.model) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let loaded = parse_tensor(&text, force).map_err(|e| match e {
                CurvError::Parse { location, message } => CurvError::Parse {
                    location: format!("{}: {location}", path.display()),
                    message,
                },
                other => other,
            })?;
            let source = TensorSource {
                input: Some(path.clone()),
                model: None,
                dim: loaded.tensor.dim(),
                norm: loaded.tensor.norm(),
                projection_residual: Some(loaded.projection_residual),
            };
            Ok((loaded.tensor, source))
        }
        (None, Some(spec)) => {
            let mut model: ModelSpec = spec.parse()?;
            let explicit_seed = spec.split(':').count() > 2;
            if !explicit_seed {
                model = model.with_seed(default_seed);
            }
            let tensor = model.build()?;
            let source = TensorSource {
                input: None,
                model: Some(model),
                dim: tensor.dim(),
                norm: tensor.norm(),
                projection_residual: None,
            };
            Ok((tensor, source))
        }
        (Some(_), Some(_)) => Err(CliError::Usage("give only one of --input and --model".into())),
        (None, None) => Err(CliError::Usage("one of --input or --model is required".into())),
    }
}

fn model_spec(a: &ModelArgs) -> Result<ModelSpec, CliError> {
    let name = required(a.name.as_deref(), "name")?;
    let c = a.c.unwrap_or(1.0);
    let list = |s: &str, what: &str| -> Result<Vec<String>, CliError> {
        let v: Vec<String> = s.split(',').map(|x| x.trim().to_string()).collect();
        if v.iter().any(String::is_empty) {
            return Err(CliError::Usage(format!("empty entry in --{what}")));
        }
        Ok(v)
    };
    let spec = match name {
        "constant" => ModelSpec::Constant {
            dim: required(a.dim, "dim")?,
            c,
        },
        "complex_space_form" => {
            let m = match (a.m, a.dim) {
                (Some(m), _) => m,
                (None, Some(d)) if d % 2 == 0 => d / 2,
                _ => return Err(CliError::Usage("--m (or an even --dim) is required".into())),
            };
            ModelSpec::ComplexSpaceForm { m, c }
        }
        "product_spheres" => {
            let dims = list(required(a.dims.as_deref(), "dims")?, "dims")?;
            let curvatures = match &a.curvatures {
                Some(s) => list(s, "curvatures")?,
                None => vec!["1".to_string(); dims.len()],
            };
            format!("product_spheres:{}:{}", dims.join(","), curvatures.join(",")).parse()?
        }
        "random" => ModelSpec::Random {
            dim: required(a.dim, "dim")?,
            seed: a.seed.unwrap_or(0),
        },
        "random_einstein" => ModelSpec::RandomEinstein {
            dim: required(a.dim, "dim")?,
            seed: a.seed.unwrap_or(0),
        },
        other => return Err(CliError::Usage(format!("unknown model name `{other}`"))),
    };
    Ok(spec)
}

pub(crate) fn model(a: ModelArgs, _g: &Globals) -> Result<CommandOutput, CliError> {
    let spec = model_spec(&a)?;
    let tensor = spec.build()?;
    let file = TensorFile::from(&tensor);
    let mut rows = vec![vec!["i", "j", "k", "l", "value"].into_iter().map(String::from).collect()];
    rows.extend(file.entries.iter().map(|&(i, j, k, l, v)| {
        vec![i.to_string(), j.to_string(), k.to_string(), l.to_string(), num(v)]
    }));
    Ok(CommandOutput {
        config: to_value(&spec),
        seed: a.seed.unwrap_or(0),
        result: Value::Null,
        csv: rows,
        raw_json: Some(serde_json::to_string(&file).expect("tensor files serialize")),
        failed: false,
    })
}

fn strings<const N: usize>(xs: [&str; N]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub(crate) fn membership(a: MembershipArgs, g: &Globals) -> Result<CommandOutput, CliError> {
    let seed = a.seed.unwrap_or(0);
    let (tensor, source) = load_tensor(&a.tensor, g.force, seed)?;
    let cone = cone_spec(a.cone.as_deref(), tensor.dim(), &a.search, seed)?;
    let verdict = cone::membership(&cone, &tensor)?;
    let csv = vec![
        strings(["cone", "dim", "margin", "classification", "budget_exhausted"]),
        vec![
            cone.kind.to_string(),
            cone.dim.to_string(),
            num(verdict.margin),
            to_value(&verdict.classification).as_str().unwrap_or_default().to_string(),
            verdict.budget_exhausted.to_string(),
        ],
    ];
    Ok(CommandOutput {
        config: json!({ "cone": cone, "tensor": source, "force": g.force }),
        seed,
        result: to_value(&verdict),
        csv,
        raw_json: None,
        failed: false,
    })
}

pub(crate) fn flow(a: FlowArgs, g: &Globals) -> Result<CommandOutput, CliError> {
    let (tensor, source) = load_tensor(&a.tensor, g.force, 0)?;
    let d = FlowOptions::default();
    let method = match a.method.as_deref() {
        None => d.method,
        Some(m) => serde_json::from_value::<FlowMethod>(Value::String(m.replace('-', "_")))
            .map_err(|_| CliError::Usage(format!("unknown method `{m}` (rk4_fixed or rk4_adaptive)")))?,
    };
    let opts = FlowOptions {
        method,
        step: a.dt.unwrap_or(d.step),
        t_end: a.t_end.unwrap_or(d.t_end),
        normalized: a.normalized.unwrap_or(d.normalized),
        blowup_threshold: a.blowup_threshold.unwrap_or(d.blowup_threshold),
        sample_every: a.sample_every.unwrap_or(d.sample_every),
        rel_tol: a.rel_tol.unwrap_or(d.rel_tol),
    };
    let keep = a.keep_tensors.unwrap_or(false);
    let rec = integrate(&tensor, &opts)?;
    let mut csv = vec![strings(["t", "norm", "scalar", "step"])];
    csv.extend(
        rec.diagnostics
            .iter()
            .map(|s| vec![num(s.t), num(s.norm), num(s.scalar), num(s.step)]),
    );
    let mut result = json!({
        "status": rec.status,
        "final_time": rec.final_time(),
        "accepted_steps": rec.diagnostics.len(),
        "rejected_steps": rec.rejected_steps,
        "times": rec.times,
        "diagnostics": rec.diagnostics,
        "final_tensor": rec.final_tensor(),
    });
    if keep {
        result["tensors"] = to_value(&rec.tensors);
    }
    Ok(CommandOutput {
        config: json!({ "tensor": source, "flow": opts, "keep_tensors": keep, "force": g.force }),
        seed: 0,
        result,
        csv,
        raw_json: None,
        failed: false,
    })
}

fn suite_csv(cone: &ConeSpec, seed: u64, trials: usize, pass: usize, fail: usize, worst: f64) -> Vec<Vec<String>> {
    vec![
        strings(["cone", "dim", "seed", "trials", "pass", "fail", "worst"]),
        vec![
            cone.kind.to_string(),
            cone.dim.to_string(),
            seed.to_string(),
            trials.to_string(),
            pass.to_string(),
            fail.to_string(),
            num(worst),
        ],
    ]
}

pub(crate) fn invariance(a: InvarianceArgs) -> Result<CommandOutput, CliError> {
    let seed = a.seed.unwrap_or(0);
    let dim = a.dim.unwrap_or(DEFAULT_DIM);
    let cone = cone_spec(a.cone.as_deref(), dim, &a.search, seed)?;
    let samples = a.samples.unwrap_or(DEFAULT_INVARIANCE_SAMPLES);
    let trajectories = a.trajectories.unwrap_or(0);
    let report = invariance_check(&cone, samples, seed, trajectories)?;
    Ok(CommandOutput {
        config: json!({ "cone": cone, "samples": samples, "trajectories": trajectories }),
        seed,
        result: to_value(&report),
        csv: suite_csv(&cone, seed, report.trials, report.pass, report.fail, report.worst),
        raw_json: None,
        failed: !report.passed(),
    })
}

pub(crate) fn condition_check(a: ConditionArgs) -> Result<CommandOutput, CliError> {
    let seed = a.seed.unwrap_or(0);
    let dim = a.dim.unwrap_or(DEFAULT_DIM);
    let which = required(a.which, "which")?;
    let cone = cone_spec(a.cone.as_deref(), dim, &a.search, seed)?;
    let samples = a.samples.unwrap_or(DEFAULT_CONDITION_SAMPLES);
    let (result, csv, failed) = match which {
        Which::Iii => {
            let r = check_condition_iii(&cone, samples, seed)?;
            let csv = suite_csv(&cone, seed, r.trials, r.pass, r.fail, r.worst);
            (to_value(&r), csv, !r.passed())
        }
        Which::Iv => {
            let r = check_condition_iv(&cone)?;
            let csv = suite_csv(&cone, seed, r.trials, r.pass, r.fail, r.worst);
            (to_value(&r), csv, !r.passed())
        }
    };
    Ok(CommandOutput {
        config: json!({ "cone": cone, "which": which, "samples": samples }),
        seed,
        result,
        csv,
        raw_json: None,
        failed,
    })
}

pub(crate) fn rigidity(a: RigidityArgs, g: &Globals) -> Result<CommandOutput, CliError> {
    let seed = a.seed.unwrap_or(0);
    let (tensor, source) = load_tensor(&a.tensor, g.force, seed)?;
    let cone = cone_spec(a.cone.as_deref(), tensor.dim(), &a.search, seed)?;
    let report = rigidity_probe(&cone, &tensor, &source.id())?;
    let csv = vec![
        strings([
            "input_id",
            "cone",
            "dim",
            "kappa_star",
            "kappa_star_closed_form",
            "eq3_residual",
            "prop1_residual_symmetric",
            "s_norm",
            "fixed_point_residual",
            "einstein_residual",
            "verdict",
        ]),
        vec![
            report.input_id.clone(),
            cone.kind.to_string(),
            cone.dim.to_string(),
            num(report.kappa_star),
            num(report.kappa_star_closed_form),
            num(report.eq3_residual),
            report.prop1_residual_symmetric.map(num).unwrap_or_default(),
            num(report.s_norm),
            num(report.fixed_point_residual),
            num(report.einstein_residual),
            to_value(&report.verdict).as_str().unwrap_or_default().to_string(),
        ],
    ];
    Ok(CommandOutput {
        config: json!({ "cone": cone, "tensor": source, "force": g.force }),
        seed,
        result: to_value(&report),
        csv,
        raw_json: None,
        failed: report.kappa_bound_applies && !report.kappa_within_bound,
    })
}
