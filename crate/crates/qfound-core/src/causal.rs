//! Quantum causal models over directed acyclic graphs: the process state as
//! a commuting product of node channels, outcome prediction, node removal,
//! classical limits, and common-cause Bayesian updating.
//!
//! Every node `i` owns an input factor labeled `i` and an output factor
//! labeled `i*` (its dual). The channel attached to `i` maps the joint
//! output space of its parents (factors `p*`) to the node's input space, so
//! its dual operator lives on `i ⊗ p**…` and is relabeled `p** → p*` when
//! embedded into the process state.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::channel::{identity_link, Channel, Instrument};
use crate::dense::{
    conjugated_per_factor, mul_embedded, partial_trace, tensor_all, trace_product, DenseOperator,
};
use crate::dims::{dual_label, Dim, Dims};
use crate::error::{CoreError, Result};
use crate::mat::Mat;
use crate::spectral::sqrt_psd;
use crate::tol::Tol;

/// Directed acyclic graph of labeled nodes with input dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalDag {
    nodes: Vec<(String, usize)>,
    edges: Vec<(String, String)>,
}

impl CausalDag {
    /// Node labels must be unique, non-empty and star-free ('*' is reserved
    /// for dual factors); edges must join existing nodes, contain no
    /// duplicates or self-loops, and the graph must be acyclic.
    pub fn new(nodes: Vec<(String, usize)>, edges: Vec<(String, String)>) -> Result<Self> {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for (label, d) in &nodes {
            if label.is_empty() || label.contains('*') {
                return Err(CoreError::InvalidParameter {
                    detail: format!("node label {label:?} must be non-empty without '*'"),
                });
            }
            if *d == 0 {
                return Err(CoreError::InvalidParameter {
                    detail: format!("node {label:?} has dimension zero"),
                });
            }
            if !seen.insert(label) {
                return Err(CoreError::LabelCollision {
                    label: label.clone(),
                });
            }
        }
        let mut edge_set: BTreeSet<(&str, &str)> = BTreeSet::new();
        for (a, b) in &edges {
            for end in [a, b] {
                if !seen.contains(end.as_str()) {
                    return Err(CoreError::LabelNotFound { label: end.clone() });
                }
            }
            if a == b {
                return Err(CoreError::InvalidParameter {
                    detail: format!("self-loop at {a:?}"),
                });
            }
            if !edge_set.insert((a, b)) {
                return Err(CoreError::InvalidParameter {
                    detail: format!("duplicate edge {a:?} -> {b:?}"),
                });
            }
        }
        let dag = CausalDag { nodes, edges };
        dag.topological_order_checked()?;
        Ok(dag)
    }

    pub fn nodes(&self) -> &[(String, usize)] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    pub fn contains(&self, label: &str) -> bool {
        self.nodes.iter().any(|(l, _)| l == label)
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        self.nodes
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, d)| *d)
            .ok_or_else(|| CoreError::LabelNotFound {
                label: label.to_string(),
            })
    }

    /// Parents in edge order.
    pub fn parents(&self, label: &str) -> Vec<String> {
        self.edges
            .iter()
            .filter(|(_, b)| b == label)
            .map(|(a, _)| a.clone())
            .collect()
    }

    /// Children in edge order.
    pub fn children(&self, label: &str) -> Vec<String> {
        self.edges
            .iter()
            .filter(|(a, _)| a == label)
            .map(|(_, b)| b.clone())
            .collect()
    }

    /// Kahn's algorithm with ties broken by label, so the order is
    /// reproducible across runs.
    pub fn topological_order(&self) -> Vec<String> {
        self.topological_order_checked()
            .expect("acyclicity was established at construction")
    }

    fn topological_order_checked(&self) -> Result<Vec<String>> {
        let mut indegree: BTreeMap<&str, usize> =
            self.nodes.iter().map(|(l, _)| (l.as_str(), 0)).collect();
        for (_, b) in &self.edges {
            *indegree.get_mut(b.as_str()).expect("endpoint checked") += 1;
        }
        let mut ready: BTreeSet<&str> = indegree
            .iter()
            .filter(|(_, deg)| **deg == 0)
            .map(|(l, _)| *l)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(&next) = ready.iter().next() {
            ready.remove(next);
            order.push(next.to_string());
            for (a, b) in &self.edges {
                if a == next {
                    let deg = indegree.get_mut(b.as_str()).expect("endpoint checked");
                    *deg -= 1;
                    if *deg == 0 {
                        ready.insert(b.as_str());
                    }
                }
            }
        }
        if order.len() != self.nodes.len() {
            return Err(CoreError::InvalidParameter {
                detail: "graph contains a directed cycle".to_string(),
            });
        }
        Ok(order)
    }
}

/// A DAG together with one channel per node, from the joint parent output
/// space to the node's input space.
#[derive(Debug, Clone)]
pub struct QuantumCausalModel {
    dag: CausalDag,
    channels: BTreeMap<String, Channel>,
}

impl QuantumCausalModel {
    /// Stores the assignment as given; use [`validate_model`] for the full
    /// report and [`model_state`] for the gated product state.
    pub fn new(dag: CausalDag, channels: BTreeMap<String, Channel>) -> Self {
        QuantumCausalModel { dag, channels }
    }

    pub fn dag(&self) -> &CausalDag {
        &self.dag
    }

    pub fn channel(&self, node: &str) -> Result<&Channel> {
        self.channels.get(node).ok_or_else(|| CoreError::LabelNotFound {
            label: node.to_string(),
        })
    }

    /// Factors of the process state: (i, i*) per node in topological order.
    pub fn sigma_dims(&self) -> Result<Dims> {
        let mut factors = Vec::with_capacity(2 * self.dag.nodes.len());
        for node in self.dag.topological_order() {
            let d = self.dag.dim_of(&node)?;
            factors.push(Dim::new(node.clone(), d));
            factors.push(Dim::new(dual_label(&node), d));
        }
        Dims::new(factors)
    }
}

/// Process state σ on ⊗ᵢ (i ⊗ i*).
#[derive(Debug, Clone)]
pub struct ModelState {
    pub sigma: DenseOperator,
}

/// Node channel dual relabeled onto the shared parent slots (p** → p*).
fn relabel_to_slots(dag: &CausalDag, node: &str, ch: &Channel) -> Result<DenseOperator> {
    let pairs: Vec<(String, String)> = dag
        .parents(node)
        .iter()
        .map(|p| {
            let slot = dual_label(p);
            (dual_label(&slot), slot)
        })
        .collect();
    let refs: Vec<(&str, &str)> = pairs
        .iter()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    ch.cj().relabeled(&refs)
}

/// Full structural report: per-node channel presence, label and dimension
/// agreement with the graph, channel validity, and pairwise commutation of
/// the embedded duals. Empty means the model is valid.
pub fn validate_model(m: &QuantumCausalModel, tol: &Tol) -> Vec<String> {
    let mut violations = Vec::new();
    let sigma_dims = match m.sigma_dims() {
        Ok(d) => d,
        Err(e) => {
            violations.push(format!("state space cannot be formed: {e}"));
            return violations;
        }
    };
    let mut embedded: Vec<(String, DenseOperator)> = Vec::new();
    for node in m.dag.topological_order() {
        let d_node = m.dag.dim_of(&node).expect("node exists");
        let ch = match m.channels.get(&node) {
            Some(c) => c,
            None => {
                violations.push(format!("node {node:?}: no channel assigned"));
                continue;
            }
        };
        let mut structural_ok = true;
        if ch.out_dims().labels() != [node.clone()] || ch.d_out() != d_node {
            violations.push(format!(
                "node {node:?}: channel output must be the single factor ({node}, {d_node})"
            ));
            structural_ok = false;
        }
        let expected: BTreeMap<String, usize> = m
            .dag
            .parents(&node)
            .iter()
            .map(|p| (dual_label(p), m.dag.dim_of(p).expect("node exists")))
            .collect();
        let actual: BTreeMap<String, usize> = ch
            .in_dims()
            .factors()
            .iter()
            .map(|f| (f.label.clone(), f.d))
            .collect();
        if expected != actual {
            violations.push(format!(
                "node {node:?}: channel input factors {actual:?} do not match the parent output slots {expected:?}"
            ));
            structural_ok = false;
        }
        if let Err(e) = ch.validate(tol) {
            violations.push(format!("node {node:?}: {e}"));
            structural_ok = false;
        }
        if structural_ok {
            match relabel_to_slots(&m.dag, &node, ch)
                .and_then(|op| op.embedded(&sigma_dims))
            {
                Ok(op) => embedded.push((node.clone(), op)),
                Err(e) => violations.push(format!("node {node:?}: embedding failed: {e}")),
            }
        }
    }
    for i in 0..embedded.len() {
        for j in (i + 1)..embedded.len() {
            let (na, ea) = &embedded[i];
            let (nb, eb) = &embedded[j];
            let comm = ea.mul(eb).and_then(|ab| eb.mul(ea).and_then(|ba| ab.sub(&ba)));
            match comm {
                Ok(c) => {
                    let scale = (ea.frobenius_norm() * eb.frobenius_norm()).max(1.0);
                    let r = c.frobenius_norm();
                    if r > tol.algebraic * scale {
                        violations.push(format!(
                            "channels at {na:?} and {nb:?} do not commute (residual {r:.3e})"
                        ));
                    }
                }
                Err(e) => violations.push(format!(
                    "commutator of {na:?} and {nb:?} could not be formed: {e}"
                )),
            }
        }
    }
    violations
}

/// σ = ∏ᵢ (embedded node duals). The factors commute for valid models, so
/// the product order is immaterial; topological order is used for
/// reproducibility.
pub fn model_state(m: &QuantumCausalModel, tol: &Tol) -> Result<ModelState> {
    let violations = validate_model(m, tol);
    if !violations.is_empty() {
        return Err(CoreError::ModelInvalid { violations });
    }
    let dims = m.sigma_dims()?;
    let relabeled: Vec<DenseOperator> = m
        .dag
        .topological_order()
        .iter()
        .map(|node| relabel_to_slots(&m.dag, node, m.channels.get(node).expect("validated")))
        .collect::<Result<_>>()?;
    let refs: Vec<&DenseOperator> = relabeled.iter().collect();
    let sigma = mul_embedded(&refs, &dims)?;
    Ok(ModelState { sigma })
}

/// Instrument arms rewritten onto a node's (i*, i) slot pair.
fn node_arm_ops(
    dag: &CausalDag,
    node: &str,
    inst: &Instrument,
) -> Result<Vec<(String, DenseOperator)>> {
    let d = dag.dim_of(node)?;
    let in_ok = inst.in_dims().labels() == [node.to_string()] && inst.in_dims().total_dim() == d;
    let out_labels = inst.out_dims().labels();
    if !in_ok || out_labels.len() != 1 || inst.out_dims().total_dim() != d {
        return Err(CoreError::DimensionMismatch {
            context: format!(
                "instrument at {node:?} must map the factor ({node}, {d}) to one output factor of dimension {d}"
            ),
        });
    }
    let slot = dual_label(node);
    let mut ops = Vec::with_capacity(inst.arms().len());
    for (label, arm) in inst.arms() {
        let op = arm.relabeled(&[(out_labels[0].as_str(), slot.as_str()), (slot.as_str(), node)])?;
        // Arms enter the contraction conjugated (the link-product transpose);
        // otherwise sequential composition would see the transposed
        // post-measurement state. Invisible for real arms.
        let op = DenseOperator::from_mat(op.dims().clone(), op.mat().conj())?;
        ops.push((label.clone(), op));
    }
    Ok(ops)
}

/// Outcome distribution: every listed node is measured by its instrument,
/// all other nodes pass through the identity link. Keys are the arm labels
/// of the measured nodes in topological order.
pub fn predict(
    m: &QuantumCausalModel,
    instruments: &BTreeMap<String, Instrument>,
    tol: &Tol,
) -> Result<BTreeMap<Vec<String>, f64>> {
    let state = model_state(m, tol)?;
    predict_from_state(m, &state, instruments)
}

fn predict_from_state(
    m: &QuantumCausalModel,
    state: &ModelState,
    instruments: &BTreeMap<String, Instrument>,
) -> Result<BTreeMap<Vec<String>, f64>> {
    for node in instruments.keys() {
        if !m.dag.contains(node) {
            return Err(CoreError::LabelNotFound { label: node.clone() });
        }
    }
    let order = m.dag.topological_order();
    let mut fixed: BTreeMap<String, DenseOperator> = BTreeMap::new();
    let mut measured: Vec<&String> = Vec::new();
    let mut arms: Vec<Vec<(String, DenseOperator)>> = Vec::new();
    for node in &order {
        match instruments.get(node) {
            Some(inst) => {
                measured.push(node);
                arms.push(node_arm_ops(&m.dag, node, inst)?);
            }
            None => {
                let d = m.dag.dim_of(node)?;
                let tau = identity_link(
                    &Dims::single(&dual_label(node), d),
                    &Dims::single(node, d),
                )?;
                fixed.insert(node.clone(), tau);
            }
        }
    }
    let radixes: Vec<usize> = arms.iter().map(Vec::len).collect();
    let mut idx = alloc::vec![0usize; measured.len()];
    let mut table = BTreeMap::new();
    loop {
        let mut ops: Vec<&DenseOperator> = Vec::with_capacity(order.len());
        let mut key = Vec::with_capacity(measured.len());
        for node in &order {
            if let Some(pos) = measured.iter().position(|n| *n == node) {
                let (label, op) = &arms[pos][idx[pos]];
                key.push(label.clone());
                ops.push(op);
            } else {
                ops.push(fixed.get(node.as_str()).expect("filled above"));
            }
        }
        let t = tensor_all(&ops)?;
        let p = trace_product(&state.sigma, &t)?;
        table.insert(key, p.re);
        let mut carry = true;
        for pos in (0..idx.len()).rev() {
            idx[pos] += 1;
            if idx[pos] < radixes[pos] {
                carry = false;
                break;
            }
            idx[pos] = 0;
        }
        if carry {
            break;
        }
    }
    Ok(table)
}

/// Removes one node from the state by contracting its slot pair with the
/// identity link: σ′ = Tr_{i,i*}(σ · τ^id). The result is again a process
/// state on the remaining factors, but need not be a commuting product for
/// the node-deleted graph; see [`markov_violations_after_removal`].
pub fn link_out(state: &ModelState, node: &str) -> Result<ModelState> {
    let dims = state.sigma.dims();
    let d = dims.dim_of(node)?;
    let slot = dual_label(node);
    dims.position(&slot)?;
    let tau = identity_link(&Dims::single(&slot, d), &Dims::single(node, d))?;
    let prod = state.sigma.mul(&tau.embedded(dims)?)?;
    let keep: Vec<String> = dims
        .labels()
        .into_iter()
        .filter(|l| l != node && *l != slot)
        .collect();
    let sigma = partial_trace(&prod, &keep)?;
    Ok(ModelState { sigma })
}

/// Tries to re-derive a model on the node-deleted graph from a linked-out
/// state and checks the commuting-product reconstruction. Survivors with an
/// intact parent set keep their channel; survivors whose parents were all
/// removed get the normalized marginal as a root candidate; a partially
/// removed parent set admits no candidate and is reported as such. An empty
/// return means the state is Markov for the reduced graph.
pub fn markov_violations_after_removal(
    m: &QuantumCausalModel,
    removed: &[String],
    state: &ModelState,
    tol: &Tol,
) -> Result<Vec<String>> {
    for r in removed {
        m.dag.dim_of(r)?;
    }
    let removed_set: BTreeSet<&str> = removed.iter().map(String::as_str).collect();
    let order: Vec<String> = m
        .dag
        .topological_order()
        .into_iter()
        .filter(|n| !removed_set.contains(n.as_str()))
        .collect();
    let mut factors = Vec::with_capacity(2 * order.len());
    for node in &order {
        let d = m.dag.dim_of(node)?;
        factors.push(Dim::new(node.clone(), d));
        factors.push(Dim::new(dual_label(node), d));
    }
    let dims = Dims::new(factors)?;
    let mut state_labels = state.sigma.dims().labels();
    let mut want = dims.labels();
    state_labels.sort();
    want.sort();
    if state_labels != want {
        return Err(CoreError::DimensionMismatch {
            context: "state factors do not match the surviving nodes".to_string(),
        });
    }
    let mut violations = Vec::new();
    let mut candidates: Vec<DenseOperator> = Vec::new();
    for node in &order {
        let parents = m.dag.parents(node);
        let gone: Vec<&String> = parents
            .iter()
            .filter(|p| removed_set.contains(p.as_str()))
            .collect();
        if gone.is_empty() {
            candidates.push(relabel_to_slots(&m.dag, node, m.channel(node)?)?);
        } else if gone.len() == parents.len() {
            let d = m.dag.dim_of(node)?;
            let pt = partial_trace(&state.sigma, core::slice::from_ref(node))?;
            let tr = pt.trace();
            if tr.norm() <= tol.algebraic {
                violations.push(format!("node {node:?}: marginal has vanishing trace"));
                continue;
            }
            let rho = pt.scaled(Complex64::new(1.0, 0.0) / tr);
            match Channel::new(Dims::scalar(), Dims::single(node, d), rho.clone(), tol) {
                Ok(_) => candidates.push(rho),
                Err(e) => violations.push(format!(
                    "node {node:?}: normalized marginal is not a state ({e})"
                )),
            }
        } else {
            violations.push(format!(
                "node {node:?}: parent set was partially removed ({gone:?}); no reduced channel is derivable"
            ));
        }
    }
    if !violations.is_empty() {
        return Ok(violations);
    }
    let refs: Vec<&DenseOperator> = candidates.iter().collect();
    let recon = mul_embedded(&refs, &dims)?;
    let recon_p = recon.permuted(&state.sigma.dims().labels())?;
    let residual = state.sigma.sub(&recon_p)?.frobenius_norm();
    let scale = state.sigma.frobenius_norm().max(1.0);
    if residual > tol.decomposition * scale {
        violations.push(format!(
            "state is not a commuting product for the reduced graph (residual {residual:.3e})"
        ));
    }
    Ok(violations)
}

/// Conditional probability table of one decohered node: probs[x·∏dₚ + pa]
/// with the parent index raveled over `parent_order`.
#[derive(Debug, Clone)]
pub struct CondTable {
    pub parent_order: Vec<String>,
    pub parent_dims: Vec<usize>,
    pub probs: Vec<f64>,
}

impl CondTable {
    pub fn prob(&self, x: usize, parents: &[usize]) -> f64 {
        assert_eq!(parents.len(), self.parent_dims.len());
        let mut pa = 0usize;
        for (i, &v) in parents.iter().enumerate() {
            assert!(v < self.parent_dims[i]);
            pa = pa * self.parent_dims[i] + v;
        }
        let block: usize = self.parent_dims.iter().product();
        self.probs[x * block + pa]
    }
}

/// Joint distribution of a model that is diagonal in declared product bases,
/// with the per-node conditionals and the worst deviation of the joint from
/// the factorization ∏ᵢ P(xᵢ | pa(xᵢ)).
#[derive(Debug, Clone)]
pub struct ClassicalLimit {
    pub node_order: Vec<String>,
    pub joint: BTreeMap<Vec<usize>, f64>,
    pub conditionals: BTreeMap<String, CondTable>,
    pub markov_residual: f64,
}

/// Decoheres a valid model in the declared bases (identity when a node is
/// not listed). Fails with `NotDecohered` if any channel has off-diagonal
/// weight in those bases.
pub fn classical_limit(
    m: &QuantumCausalModel,
    bases: &BTreeMap<String, Mat>,
    tol: &Tol,
) -> Result<ClassicalLimit> {
    let state = model_state(m, tol)?;
    for node in bases.keys() {
        m.dag.dim_of(node)?;
    }
    let order = m.dag.topological_order();
    let mut basis_of: BTreeMap<String, Mat> = BTreeMap::new();
    for node in &order {
        let d = m.dag.dim_of(node)?;
        let b = match bases.get(node) {
            Some(b) => {
                if b.nrows != d || b.ncols != d {
                    return Err(CoreError::DimensionMismatch {
                        context: format!("basis for {node:?} must be {d}x{d}"),
                    });
                }
                let dev = b.adjoint().mul(b).sub(&Mat::identity(d)).max_abs();
                if dev > tol.algebraic * d as f64 {
                    return Err(CoreError::InvalidParameter {
                        detail: format!("basis for {node:?} is not unitary (deviation {dev:.3e})"),
                    });
                }
                b.clone()
            }
            None => Mat::identity(d),
        };
        basis_of.insert(node.clone(), b);
    }

    let mut conditionals = BTreeMap::new();
    for node in &order {
        let ch = m.channel(node)?;
        let node_rot = basis_of.get(node).expect("filled above").adjoint();
        let mut maps: Vec<(String, Mat)> = alloc::vec![(node.clone(), node_rot)];
        for p in m.dag.parents(node) {
            let rot = basis_of.get(&p).expect("filled above").transpose();
            maps.push((dual_label(&dual_label(&p)), rot));
        }
        let map_refs: Vec<(&str, &Mat)> = maps.iter().map(|(l, m)| (l.as_str(), m)).collect();
        let rotated = conjugated_per_factor(ch.cj(), &map_refs)?;
        let rm = rotated.mat();
        let mut off = 0.0f64;
        for r in 0..rm.nrows {
            for c in 0..rm.ncols {
                if r != c {
                    off += rm[(r, c)].norm_sqr();
                }
            }
        }
        let off = libm::sqrt(off);
        if off > tol.decomposition * rotated.frobenius_norm().max(1.0) {
            return Err(CoreError::NotDecohered {
                off_diagonal_mass: off,
            });
        }
        let d = m.dag.dim_of(node)?;
        let mut parent_order = Vec::new();
        let mut parent_dims = Vec::new();
        for f in ch.in_dims().factors() {
            parent_order.push(f.label[..f.label.len() - 1].to_string());
            parent_dims.push(f.d);
        }
        let block: usize = parent_dims.iter().product();
        let mut probs = Vec::with_capacity(d * block);
        for x in 0..d {
            for pa in 0..block {
                probs.push(rm[(x * block + pa, x * block + pa)].re);
            }
        }
        conditionals.insert(
            node.clone(),
            CondTable {
                parent_order,
                parent_dims,
                probs,
            },
        );
    }

    let mut arm_ops: Vec<Vec<(String, DenseOperator)>> = Vec::with_capacity(order.len());
    for node in &order {
        let d = m.dag.dim_of(node)?;
        let out_label = dual_label(&dual_label(node));
        let inst = Instrument::projective(
            Dims::single(node, d),
            Dims::single(&out_label, d),
            Some(basis_of.get(node).expect("filled above")),
        )?;
        arm_ops.push(node_arm_ops(&m.dag, node, &inst)?);
    }
    let radixes: Vec<usize> = arm_ops.iter().map(Vec::len).collect();
    let mut idx = alloc::vec![0usize; order.len()];
    let mut joint = BTreeMap::new();
    let mut markov_residual = 0.0f64;
    let pos_of: BTreeMap<&str, usize> = order
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    loop {
        let ops: Vec<&DenseOperator> = (0..order.len()).map(|i| &arm_ops[i][idx[i]].1).collect();
        let t = tensor_all(&ops)?;
        let p = trace_product(&state.sigma, &t)?.re;
        let mut product = 1.0f64;
        for (i, node) in order.iter().enumerate() {
            let table = conditionals.get(node).expect("filled above");
            let parents: Vec<usize> = table
                .parent_order
                .iter()
                .map(|p| idx[pos_of[p.as_str()]])
                .collect();
            product *= table.prob(idx[i], &parents);
        }
        markov_residual = markov_residual.max(libm::fabs(p - product));
        joint.insert(idx.clone(), p);
        let mut carry = true;
        for pos in (0..idx.len()).rev() {
            idx[pos] += 1;
            if idx[pos] < radixes[pos] {
                carry = false;
                break;
            }
            idx[pos] = 0;
        }
        if carry {
            break;
        }
    }
    Ok(ClassicalLimit {
        node_order: order,
        joint,
        conditionals,
        markov_residual,
    })
}

/// Result of conditioning a common cause on one observed effect.
#[derive(Debug, Clone)]
pub struct BayesUpdate {
    pub updated: DenseOperator,
    pub probability: f64,
    /// Whether conditioning commutes with evolving the other effects:
    /// the collapsed joint marginal on the unobserved outputs against the
    /// marginal predicted from the updated cause. None when the channel has
    /// no outputs besides the observed one.
    pub consistent: Option<bool>,
    pub forward_residual: Option<f64>,
}

/// Conditions the input of `ch` on observing `arm` at the output factors
/// `labels_b`. The update is the square-root (Lüders) form of the
/// back-propagated effect operator: ρ̃ = √M ρ √M / p with
/// p = Tr(ρ M) and M the Heisenberg image of the arm's effect.
pub fn bayes_update_common_cause(
    rho_a: &DenseOperator,
    ch: &Channel,
    labels_b: &[String],
    arm: &DenseOperator,
    tol: &Tol,
) -> Result<BayesUpdate> {
    let rho_p = rho_a.permuted(&ch.in_dims().labels())?;
    let trace_dev = (rho_p.trace() - Complex64::new(1.0, 0.0)).norm();
    if trace_dev > 10.0 * tol.algebraic || rho_p.hermiticity_deviation() > 10.0 * tol.algebraic {
        return Err(CoreError::InvalidParameter {
            detail: "input must be a unit-trace Hermitian state".to_string(),
        });
    }
    let ch_b = ch.marginal_keep_outputs(labels_b)?;
    let labels_c: Vec<String> = ch
        .out_dims()
        .labels()
        .into_iter()
        .filter(|l| !labels_b.contains(l))
        .collect();

    let dual_b: Vec<String> = labels_b.iter().map(|l| dual_label(l)).collect();
    for (b, db) in labels_b.iter().zip(&dual_b) {
        let d_arm = arm.dims().dim_of(db)?;
        if d_arm != ch.out_dims().dim_of(b)? {
            return Err(CoreError::DimensionMismatch {
                context: format!("arm factor {db:?} does not match output {b:?}"),
            });
        }
    }
    let effect = partial_trace(arm, &dual_b)?.permuted(&dual_b)?;

    let d_a = ch.d_in();
    let d_b: usize = labels_b
        .iter()
        .map(|l| ch.out_dims().dim_of(l).expect("validated above"))
        .product();
    let mut cj_order: Vec<String> = labels_b.to_vec();
    cj_order.extend(ch.in_dims().dual().labels());
    let cj_b = ch_b.cj().permuted(&cj_order)?;
    // Heisenberg image on the dual input coordinates:
    // M*[i,j] = Σ_{o,o'} D[o,o'] cj[(o,i),(o',j)]; the operator on the
    // input space is its transpose.
    let mut m_star = Mat::zeros(d_a, d_a);
    for i in 0..d_a {
        for j in 0..d_a {
            let mut acc = Complex64::new(0.0, 0.0);
            for o in 0..d_b {
                for op in 0..d_b {
                    let w = effect.at(o, op);
                    if w == crate::mat::ZERO {
                        continue;
                    }
                    acc += w * cj_b.at(o * d_a + i, op * d_a + j);
                }
            }
            m_star[(i, j)] = acc;
        }
    }
    let m_op = m_star.transpose().hermitized();
    let p = rho_p.mat().mul(&m_op).trace().re;
    if p <= tol.algebraic {
        return Err(CoreError::ZeroProbabilityOutcome { probability: p });
    }
    let root = sqrt_psd(&m_op, tol.algebraic)?;
    let upd = root
        .mul(rho_p.mat())
        .mul(&root)
        .scaled(Complex64::new(1.0 / p, 0.0))
        .hermitized();
    let updated = DenseOperator::from_mat(ch.in_dims().clone(), upd)?;

    let (consistent, forward_residual) = if labels_c.is_empty() {
        (None, None)
    } else {
        let full_out = ch.apply(&rho_p)?;
        let x_labels: Vec<String> = arm
            .dims()
            .labels()
            .into_iter()
            .filter(|l| !dual_b.contains(l))
            .collect();
        let mut arm_order = x_labels.clone();
        arm_order.extend(dual_b.iter().cloned());
        let mut in_factors = Vec::with_capacity(labels_b.len());
        for l in labels_b {
            in_factors.push(Dim::new(l.clone(), ch.out_dims().dim_of(l)?));
        }
        let in_b = Dims::new(in_factors)?;
        let out_x = arm.dims().subset_in_order(&x_labels)?;
        let arm_ch = Channel::new_unchecked(in_b, out_x, arm.permuted(&arm_order)?)?;
        let collapsed = arm_ch.apply_to_part(&full_out)?;
        let sigma_c = partial_trace(&collapsed, &labels_c)?.scaled_re(1.0 / p);
        let forward = partial_trace(&ch.apply(&updated)?, &labels_c)?;
        let residual = sigma_c
            .sub(&forward.permuted(&sigma_c.dims().labels())?)?
            .frobenius_norm();
        (
            Some(residual <= 10.0 * tol.decomposition),
            Some(residual),
        )
    };
    Ok(BayesUpdate {
        updated,
        probability: p,
        consistent,
        forward_residual,
    })
}
