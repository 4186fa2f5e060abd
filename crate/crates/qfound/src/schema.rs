//! JSON mirrors of the core types. Operators embed their labelled factor
//! dimensions; entries are row-major `[re, im]` pairs and round-trip
//! bit-exactly under the default serializer.

use std::collections::BTreeMap;

use qfound_core::channel::{Channel, Instrument};
use qfound_core::ctc::StandardFormCircuit;
use qfound_core::causal::{CausalDag, QuantumCausalModel};
use qfound_core::dense::DenseOperator;
use qfound_core::dims::{dual_label, Dim, Dims};
use qfound_core::mat::Mat;
use qfound_core::ontology::{FiniteOntModel, Response};
use qfound_core::{Complex64, Tol};
use serde::{Deserialize, Serialize};

use crate::AppError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimJson {
    pub label: String,
    pub d: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorJson {
    pub dims: Vec<DimJson>,
    pub entries: Vec<[f64; 2]>,
}

/// General rectangular matrix; used where a block isometry or dilation
/// unitary has no factor structure of its own.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelJson {
    pub in_dims: Vec<DimJson>,
    pub out_dims: Vec<DimJson>,
    pub cj: OperatorJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircuitJson {
    pub u: OperatorJson,
    pub cr_dims: Vec<DimJson>,
    pub cv_dims: Vec<DimJson>,
    pub input: OperatorJson,
}

/// Either the computational-basis shorthand `"projective"` or explicit arms.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstrumentJson {
    Named(String),
    Full {
        in_dims: Vec<DimJson>,
        out_dims: Vec<DimJson>,
        arms: BTreeMap<String, OperatorJson>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    pub nodes: Vec<DimJson>,
    pub edges: Vec<[String; 2]>,
    pub channels: BTreeMap<String, ChannelJson>,
    #[serde(default)]
    pub instruments: BTreeMap<String, InstrumentJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodebookJson {
    pub n: usize,
    pub m: usize,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseJson {
    pub outcomes: Vec<String>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OntModelJson {
    pub states: Vec<String>,
    pub preparations: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub transforms: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub responses: BTreeMap<String, ResponseJson>,
}

pub fn dims_to_json(dims: &Dims) -> Vec<DimJson> {
    dims.factors()
        .iter()
        .map(|f| DimJson {
            label: f.label.clone(),
            d: f.d,
        })
        .collect()
}

pub fn dims_from_json(v: &[DimJson]) -> Result<Dims, AppError> {
    if v.is_empty() {
        return Ok(Dims::scalar());
    }
    Dims::new(v.iter().map(|f| Dim::new(&f.label, f.d)).collect())
        .map_err(|e| AppError::schema(format!("bad dims: {e}")))
}

pub fn operator_to_json(op: &DenseOperator) -> OperatorJson {
    let n = op.dim();
    let mut entries = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let z = op.at(r, c);
            entries.push([z.re, z.im]);
        }
    }
    OperatorJson {
        dims: dims_to_json(op.dims()),
        entries,
    }
}

pub fn operator_from_json(v: &OperatorJson) -> Result<DenseOperator, AppError> {
    let dims = dims_from_json(&v.dims)?;
    let n: usize = v.dims.iter().map(|f| f.d).product::<usize>().max(1);
    if v.entries.len() != n * n {
        return Err(AppError::schema(format!(
            "operator on total dimension {n} needs {} entries, got {}",
            n * n,
            v.entries.len()
        )));
    }
    let mut m = Mat::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let e = v.entries[r * n + c];
            m[(r, c)] = Complex64::new(e[0], e[1]);
        }
    }
    DenseOperator::from_mat(dims, m).map_err(|e| AppError::schema(format!("bad operator: {e}")))
}

pub fn matrix_to_json(m: &Mat) -> MatrixJson {
    MatrixJson {
        rows: m.nrows,
        cols: m.ncols,
        entries: m.a.iter().map(|z| [z.re, z.im]).collect(),
    }
}

pub fn channel_to_json(ch: &Channel) -> ChannelJson {
    ChannelJson {
        in_dims: dims_to_json(ch.in_dims()),
        out_dims: dims_to_json(ch.out_dims()),
        cj: operator_to_json(ch.cj()),
    }
}

pub fn channel_from_json(v: &ChannelJson, tol: &Tol) -> Result<Channel, AppError> {
    let in_dims = dims_from_json(&v.in_dims)?;
    let out_dims = dims_from_json(&v.out_dims)?;
    let cj = operator_from_json(&v.cj)?;
    Channel::new(in_dims, out_dims, cj, tol)
        .map_err(|e| AppError::schema(format!("bad channel: {e}")))
}

pub fn circuit_to_json(c: &StandardFormCircuit) -> CircuitJson {
    CircuitJson {
        u: operator_to_json(c.u()),
        cr_dims: dims_to_json(c.cr_dims()),
        cv_dims: dims_to_json(c.cv_dims()),
        input: operator_to_json(c.input()),
    }
}

pub fn circuit_from_json(v: &CircuitJson, tol: &Tol) -> Result<StandardFormCircuit, AppError> {
    let cr = dims_from_json(&v.cr_dims)?;
    let cv = dims_from_json(&v.cv_dims)?;
    let u = operator_from_json(&v.u)?;
    let input = operator_from_json(&v.input)?;
    StandardFormCircuit::new(u, cr, cv, input, tol)
        .map_err(|e| AppError::schema(format!("bad circuit: {e}")))
}

/// Computational-basis readout wired for `predict`: the outcome factor sits
/// on the node's double-dual slot so it cannot collide with parent slots.
pub fn projective_instrument(node: &str, d: usize) -> Result<Instrument, AppError> {
    Instrument::projective(
        Dims::single(node, d),
        Dims::single(&dual_label(&dual_label(node)), d),
        None,
    )
    .map_err(|e| AppError::schema(format!("instrument at {node:?}: {e}")))
}

fn instrument_from_json(
    node: &str,
    d: usize,
    v: &InstrumentJson,
    tol: &Tol,
) -> Result<Instrument, AppError> {
    match v {
        InstrumentJson::Named(name) if name == "projective" => projective_instrument(node, d),
        InstrumentJson::Named(name) => Err(AppError::schema(format!(
            "unknown instrument shorthand {name:?} at node {node:?} (only \"projective\")"
        ))),
        InstrumentJson::Full {
            in_dims,
            out_dims,
            arms,
        } => {
            let in_dims = dims_from_json(in_dims)?;
            let out_dims = dims_from_json(out_dims)?;
            let arms = arms
                .iter()
                .map(|(label, op)| Ok((label.clone(), operator_from_json(op)?)))
                .collect::<Result<Vec<_>, AppError>>()?;
            Instrument::new(in_dims, out_dims, arms, tol)
                .map_err(|e| AppError::schema(format!("instrument at {node:?}: {e}")))
        }
    }
}

pub struct LoadedModel {
    pub model: QuantumCausalModel,
    pub instruments: BTreeMap<String, Instrument>,
}

pub fn model_from_json(v: &ModelJson, tol: &Tol) -> Result<LoadedModel, AppError> {
    let dag = CausalDag::new(
        v.nodes.iter().map(|n| (n.label.clone(), n.d)).collect(),
        v.edges
            .iter()
            .map(|[a, b]| (a.clone(), b.clone()))
            .collect(),
    )
    .map_err(|e| AppError::schema(format!("bad DAG: {e}")))?;
    let mut channels = BTreeMap::new();
    for (node, ch) in &v.channels {
        channels.insert(node.clone(), channel_from_json(ch, tol)?);
    }
    let mut instruments = BTreeMap::new();
    for (node, ins) in &v.instruments {
        let d = dag
            .dim_of(node)
            .map_err(|e| AppError::schema(format!("instrument at unknown node: {e}")))?;
        instruments.insert(node.clone(), instrument_from_json(node, d, ins, tol)?);
    }
    Ok(LoadedModel {
        model: QuantumCausalModel::new(dag, channels),
        instruments,
    })
}

pub fn ont_model_from_json(v: &OntModelJson) -> Result<FiniteOntModel, AppError> {
    let responses = v
        .responses
        .iter()
        .map(|(label, r)| {
            (
                label.clone(),
                Response {
                    outcomes: r.outcomes.clone(),
                    probs: r.probs.clone(),
                },
            )
        })
        .collect();
    FiniteOntModel::new(
        v.states.clone(),
        v.preparations.clone(),
        v.transforms.clone(),
        responses,
    )
    .map_err(|e| AppError::schema(format!("bad ontological model: {e}")))
}
