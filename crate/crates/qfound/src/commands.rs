//! Implementations behind the subcommands. Each returns both a JSON value
//! and a CSV table so the caller can pick the requested encoding.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qfound_core::causal::{classical_limit, predict, validate_model};
use qfound_core::comm::{fc_lower_bound, fc_pigeonhole_witness, fingerprint_states, random_code, verify_triples, Codebook};
use qfound_core::ctc::{builtin_circuit, dctc_evolve, pctc_evolve, tctc_evolve, tctc_montecarlo, StandardFormCircuit, Uniqueness};
use qfound_core::ontology::{bound_tables, epsilon_asymmetric_overlap, symmetric_overlap, OverlapQuery};
use qfound_core::qci::check_multipartite_qci;
use qfound_core::random::rng_from_seed;
use qfound_core::Tol;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::emit::fmt_f64;
use crate::schema::{
    channel_from_json, channel_to_json, circuit_from_json, dims_to_json, matrix_to_json,
    model_from_json, ont_model_from_json, operator_to_json, ChannelJson, CircuitJson,
    CodebookJson, DimJson, MatrixJson, ModelJson, OntModelJson,
};
use crate::AppError;

#[derive(Debug, Clone, Copy)]
pub struct Ctx {
    pub seed: u64,
    pub tol: Tol,
}

pub struct Output {
    pub json: Value,
    pub csv_header: Vec<String>,
    pub csv_rows: Vec<Vec<String>>,
}

impl Output {
    fn from_pairs(json: Value, pairs: Vec<(&str, String)>) -> Self {
        Output {
            json,
            csv_header: vec!["key".to_string(), "value".to_string()],
            csv_rows: pairs
                .into_iter()
                .map(|(k, v)| vec![k.to_string(), v])
                .collect(),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| AppError::schema(format!("cannot parse {}: {e}", path.display())))
}

#[derive(Serialize)]
struct BlockReport {
    left_dim: usize,
    right_dim: usize,
    isometry: MatrixJson,
    channel_left: ChannelJson,
    channel_right: ChannelJson,
}

#[derive(Serialize)]
struct DecompositionReport {
    residual: f64,
    blocks: Vec<BlockReport>,
}

#[derive(Serialize)]
struct DilationReport {
    in_dims: Vec<DimJson>,
    out_dims: Vec<DimJson>,
    ancilla_left: String,
    ancilla_right: String,
    garbage: String,
    unitary: MatrixJson,
    v: MatrixJson,
    w: MatrixJson,
    commutator_norm: f64,
    rederivation_residual: f64,
}

#[derive(Serialize)]
struct QciCheckReport {
    factorises: bool,
    commutes: bool,
    cmi_value: f64,
    factorisation_residual: f64,
    commutator_norm: f64,
    decomposition: Option<DecompositionReport>,
    dilation: Option<DilationReport>,
}

pub fn qci_check(
    ctx: &Ctx,
    channel_path: &Path,
    b: &[String],
    c: &[String],
) -> Result<Output, AppError> {
    let ch = channel_from_json(&read_json::<ChannelJson>(channel_path)?, &ctx.tol)?;
    let mut rng = rng_from_seed(ctx.seed);
    let parts = vec![b.to_vec(), c.to_vec()];
    let report = check_multipartite_qci(&ch, &parts, &ctx.tol, &mut rng)?;

    let decomposition = report.decomposition.as_ref().map(|dec| DecompositionReport {
        residual: dec.residual,
        blocks: dec
            .blocks
            .iter()
            .map(|blk| BlockReport {
                left_dim: blk.left_dim,
                right_dim: blk.right_dim,
                isometry: matrix_to_json(&blk.isometry),
                channel_left: channel_to_json(&blk.channel_left),
                channel_right: channel_to_json(&blk.channel_right),
            })
            .collect(),
    });
    let dilation = report.dilation.as_ref().map(|dil| DilationReport {
        in_dims: dims_to_json(&dil.in_dims),
        out_dims: dims_to_json(&dil.out_dims),
        ancilla_left: dil.ancilla_left.clone(),
        ancilla_right: dil.ancilla_right.clone(),
        garbage: dil.garbage.clone(),
        unitary: matrix_to_json(&dil.unitary),
        v: matrix_to_json(&dil.v),
        w: matrix_to_json(&dil.w),
        commutator_norm: dil.commutator_norm,
        rederivation_residual: dil.rederivation_residual,
    });

    let pairs = vec![
        ("factorises", report.factorises.to_string()),
        ("commutes", report.commutes.to_string()),
        ("cmi_value", fmt_f64(report.cmi_value)),
        ("factorisation_residual", fmt_f64(report.factorisation_residual)),
        ("commutator_norm", fmt_f64(report.commutator_norm)),
        (
            "decomposition_residual",
            report
                .decomposition
                .as_ref()
                .map(|d| fmt_f64(d.residual))
                .unwrap_or_else(|| "none".to_string()),
        ),
        (
            "rederivation_residual",
            report
                .dilation
                .as_ref()
                .map(|d| fmt_f64(d.rederivation_residual))
                .unwrap_or_else(|| "none".to_string()),
        ),
    ];
    let full = QciCheckReport {
        factorises: report.factorises,
        commutes: report.commutes,
        cmi_value: report.cmi_value,
        factorisation_residual: report.factorisation_residual,
        commutator_norm: report.commutator_norm,
        decomposition,
        dilation,
    };
    let json = serde_json::to_value(&full)
        .map_err(|e| AppError::io(format!("serialization failed: {e}")))?;
    Ok(Output::from_pairs(json, pairs))
}

fn load_model(path: &Path, tol: &Tol) -> Result<crate::schema::LoadedModel, AppError> {
    let loaded = model_from_json(&read_json::<ModelJson>(path)?, tol)?;
    let violations = validate_model(&loaded.model, tol);
    if !violations.is_empty() {
        return Err(AppError::Domain {
            name: "ModelInvalid",
            detail: violations.join("; "),
        });
    }
    Ok(loaded)
}

pub fn causal_predict(ctx: &Ctx, model_path: &Path) -> Result<Output, AppError> {
    let mut loaded = load_model(model_path, &ctx.tol)?;
    if loaded.instruments.is_empty() {
        // Without explicit instruments every node is read in its own basis.
        for (node, d) in loaded.model.dag().nodes().to_vec() {
            let ins = crate::schema::projective_instrument(&node, d)?;
            loaded.instruments.insert(node, ins);
        }
    }
    let table = predict(&loaded.model, &loaded.instruments, &ctx.tol)?;
    let measured: Vec<String> = loaded
        .model
        .dag()
        .topological_order()
        .into_iter()
        .filter(|n| loaded.instruments.contains_key(n))
        .collect();
    let total: f64 = table.values().sum();
    let outcomes: Vec<Value> = table
        .iter()
        .map(|(key, p)| json!({ "key": key, "probability": p }))
        .collect();
    let json = json!({
        "measured": measured,
        "outcomes": outcomes,
        "total": total,
    });
    let mut header: Vec<String> = measured.clone();
    header.push("probability".to_string());
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|(key, p)| {
            let mut row = key.clone();
            row.push(fmt_f64(*p));
            row
        })
        .collect();
    Ok(Output {
        json,
        csv_header: header,
        csv_rows: rows,
    })
}

pub fn causal_classical_limit(ctx: &Ctx, model_path: &Path) -> Result<Output, AppError> {
    let loaded = load_model(model_path, &ctx.tol)?;
    let cl = classical_limit(&loaded.model, &BTreeMap::new(), &ctx.tol)?;
    let joint: Vec<Value> = cl
        .joint
        .iter()
        .map(|(outcome, p)| json!({ "outcome": outcome, "probability": p }))
        .collect();
    let conditionals: BTreeMap<String, Value> = cl
        .conditionals
        .iter()
        .map(|(node, t)| {
            (
                node.clone(),
                json!({
                    "parent_order": t.parent_order,
                    "parent_dims": t.parent_dims,
                    "probs": t.probs,
                }),
            )
        })
        .collect();
    let json = json!({
        "node_order": cl.node_order,
        "markov_residual": cl.markov_residual,
        "joint": joint,
        "conditionals": conditionals,
    });
    let mut header = cl.node_order.clone();
    header.push("probability".to_string());
    let rows: Vec<Vec<String>> = cl
        .joint
        .iter()
        .map(|(outcome, p)| {
            let mut row: Vec<String> = outcome.iter().map(|x| x.to_string()).collect();
            row.push(fmt_f64(*p));
            row
        })
        .collect();
    Ok(Output {
        json,
        csv_header: header,
        csv_rows: rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtcModelKind {
    Dctc,
    Pctc,
    Tctc,
    TctcMc,
}

pub enum CircuitSource {
    File(PathBuf),
    Builtin { name: String, bits: Option<usize> },
}

pub fn load_circuit(source: &CircuitSource, tol: &Tol) -> Result<StandardFormCircuit, AppError> {
    match source {
        CircuitSource::File(path) => circuit_from_json(&read_json::<CircuitJson>(path)?, tol),
        CircuitSource::Builtin { name, bits } => {
            builtin_circuit(name, *bits).map_err(AppError::from)
        }
    }
}

pub fn ctc_run(
    ctx: &Ctx,
    kind: CtcModelKind,
    source: &CircuitSource,
    noise: f64,
    samples: usize,
) -> Result<Output, AppError> {
    let circuit = load_circuit(source, &ctx.tol)?;
    match kind {
        CtcModelKind::Dctc => {
            let sol = dctc_evolve(&circuit, noise, &ctx.tol)?;
            let uniqueness = match sol.uniqueness {
                Uniqueness::Unique => "unique",
                Uniqueness::Family => "family",
            };
            let json = json!({
                "model": "dctc",
                "noise": noise,
                "tau": operator_to_json(&sol.tau),
                "rho_f": operator_to_json(&sol.rho_f),
                "fixed_point_residual": sol.fixed_point_residual,
                "entropy_bits": sol.entropy_bits,
                "uniqueness": uniqueness,
            });
            Ok(Output::from_pairs(
                json,
                vec![
                    ("model", "dctc".to_string()),
                    ("noise", fmt_f64(noise)),
                    ("fixed_point_residual", fmt_f64(sol.fixed_point_residual)),
                    ("entropy_bits", fmt_f64(sol.entropy_bits)),
                    ("uniqueness", uniqueness.to_string()),
                ],
            ))
        }
        CtcModelKind::Pctc => {
            let rho_f = pctc_evolve(&circuit)?;
            let json = json!({ "model": "pctc", "rho_f": operator_to_json(&rho_f) });
            Ok(Output::from_pairs(
                json,
                vec![("model", "pctc".to_string())],
            ))
        }
        CtcModelKind::Tctc => {
            let out = tctc_evolve(&circuit);
            let json = json!({
                "model": "tctc",
                "rho_f": operator_to_json(&out.rho_f),
                "p_term_weight": out.p_term_weight,
                "mix_term_weight": out.mix_term_weight,
            });
            Ok(Output::from_pairs(
                json,
                vec![
                    ("model", "tctc".to_string()),
                    ("p_term_weight", fmt_f64(out.p_term_weight)),
                    ("mix_term_weight", fmt_f64(out.mix_term_weight)),
                ],
            ))
        }
        CtcModelKind::TctcMc => {
            let rho_f = tctc_montecarlo(&circuit, samples, ctx.seed)?;
            let json = json!({
                "model": "tctc-mc",
                "samples": samples,
                "seed": ctx.seed,
                "rho_f": operator_to_json(&rho_f),
            });
            Ok(Output::from_pairs(
                json,
                vec![
                    ("model", "tctc-mc".to_string()),
                    ("samples", samples.to_string()),
                    ("seed", ctx.seed.to_string()),
                ],
            ))
        }
    }
}

pub fn overlap(
    _ctx: &Ctx,
    model_path: &Path,
    target: &[String],
    given: &str,
    epsilon: f64,
    symmetric: bool,
) -> Result<Output, AppError> {
    let model = ont_model_from_json(&read_json::<OntModelJson>(model_path)?)?;
    let (kind, value) = if symmetric {
        if target.len() != 1 {
            return Err(AppError::schema(
                "symmetric overlap takes exactly one target preparation".to_string(),
            ));
        }
        ("symmetric", symmetric_overlap(&model, given, &target[0])?)
    } else {
        let query = OverlapQuery {
            target: target.to_vec(),
            given: given.to_string(),
            epsilon,
        };
        let kind = if epsilon == 0.0 {
            "asymmetric"
        } else {
            "epsilon-asymmetric"
        };
        (kind, epsilon_asymmetric_overlap(&model, &query)?)
    };
    let json = json!({
        "kind": kind,
        "given": given,
        "target": target,
        "epsilon": epsilon,
        "value": value,
    });
    Ok(Output::from_pairs(
        json,
        vec![
            ("kind", kind.to_string()),
            ("given", given.to_string()),
            ("target", target.join("+")),
            ("epsilon", fmt_f64(epsilon)),
            ("value", fmt_f64(value)),
        ],
    ))
}

pub fn bounds(alpha: f64, d: usize, epsilon: f64) -> Result<Output, AppError> {
    let t = bound_tables(alpha, d, epsilon);
    let named: Vec<(&str, Option<f64>)> = vec![
        ("max_epistemic", t.max_epistemic),
        ("large_d", t.large_d),
        ("symmetric_error", t.symmetric_error),
        ("symmetric_error_slope", t.symmetric_error_slope),
        ("basic", t.basic),
    ];
    let rows: Vec<Vec<String>> = named
        .iter()
        .filter_map(|(name, v)| {
            v.map(|x| {
                vec![
                    fmt_f64(alpha),
                    d.to_string(),
                    fmt_f64(epsilon),
                    name.to_string(),
                    fmt_f64(x),
                ]
            })
        })
        .collect();
    let bounds_json: Vec<Value> = named
        .iter()
        .filter_map(|(name, v)| v.map(|x| json!({ "bound": name, "value": x })))
        .collect();
    let json = json!({
        "alpha": alpha,
        "d": d,
        "epsilon": epsilon,
        "bounds": bounds_json,
    });
    Ok(Output {
        json,
        csv_header: ["alpha", "d", "epsilon", "bound", "value"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        csv_rows: rows,
    })
}

pub enum CodeSource {
    File(PathBuf),
    Generate {
        n: usize,
        m: usize,
        min_frac: f64,
        max_frac: f64,
    },
}

pub fn comm(
    ctx: &Ctx,
    source: &CodeSource,
    assignment: Option<&[usize]>,
) -> Result<Output, AppError> {
    let code = match source {
        CodeSource::File(path) => {
            let cj: CodebookJson = read_json(path)?;
            Codebook::new(cj.n, cj.m, cj.words)
                .map_err(|e| AppError::schema(format!("bad codebook: {e}")))?
        }
        CodeSource::Generate {
            n,
            m,
            min_frac,
            max_frac,
        } => random_code(*n, *m, *min_frac, *max_frac, ctx.seed)?,
    };
    let fs = fingerprint_states(&code)?;
    let count = fs.len();
    let mut max_overlap = 0.0f64;
    for x in 0..count {
        for y in (x + 1)..count {
            max_overlap = max_overlap.max(fs.squared_overlap(x, y));
        }
    }
    let triples = if count >= 3 {
        Some(verify_triples(&fs)?)
    } else {
        None
    };
    let bound = match &triples {
        Some(t) if t.all_pass => Some(fc_lower_bound(&fs)?),
        None => Some(fc_lower_bound(&fs)?),
        Some(_) => None,
    };
    let witness = match assignment {
        Some(a) => fc_pigeonhole_witness(&fs, a)?,
        None => None,
    };

    let triples_json = triples.as_ref().map(|t| {
        json!({ "all_pass": t.all_pass, "checked": t.checked, "failing": t.failing })
    });
    let witness_json = witness.as_ref().map(|w| {
        json!({ "message": w.message, "triple": w.triple, "explanation": w.explanation })
    });
    let json = json!({
        "code": { "n": code.n(), "m": code.m(), "words": code.words() },
        "states": count,
        "max_squared_overlap": max_overlap,
        "triples": triples_json,
        "min_messages": bound.map(|b| b.0),
        "min_bits": bound.map(|b| b.1),
        "pigeonhole": witness_json,
    });
    let pairs = vec![
        ("n", code.n().to_string()),
        ("m", code.m().to_string()),
        ("states", count.to_string()),
        ("max_squared_overlap", fmt_f64(max_overlap)),
        (
            "triples_all_pass",
            triples
                .as_ref()
                .map(|t| t.all_pass.to_string())
                .unwrap_or_else(|| "none".to_string()),
        ),
        (
            "min_messages",
            bound
                .map(|b| b.0.to_string())
                .unwrap_or_else(|| "none".to_string()),
        ),
        (
            "min_bits",
            bound
                .map(|b| b.1.to_string())
                .unwrap_or_else(|| "none".to_string()),
        ),
    ];
    Ok(Output::from_pairs(json, pairs))
}
