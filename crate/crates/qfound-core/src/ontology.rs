//! Finite ontological models: probability distributions over an explicit
//! state space, stochastic transformations, response functions, the overlap
//! measures between preparations, anti-distinguishability of triples, the
//! reference state pair saturating the epistemic bounds, and a two-time
//! correlator evaluator for macrorealism tests.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::dense::{DenseOperator, PureState};
use crate::dims::Dims;
use crate::error::{CoreError, Result};
use crate::mat::{vec_norm, Mat, ONE, ZERO};
use crate::spectral::eigh;
use crate::tol::Tol;

/// Mass below which a state is outside a distribution's support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;
/// Slack for validating probability sums and nonnegativity.
const STOCHASTIC_TOL: f64 = 1e-12;
/// Margin enforcing strict inequalities in overlap optimizations.
const STRICT_MARGIN: f64 = 1e-12;

/// Response function of one measurement: row-major `outcomes x states`
/// matrix of outcome probabilities conditioned on each state. Every column
/// sums to one.
#[derive(Clone, Debug)]
pub struct Response {
    pub outcomes: Vec<String>,
    pub probs: Vec<f64>,
}

/// Ontological model over a finite state space.
///
/// Preparations are distributions over the states, transforms are
/// column-stochastic matrices pushing those distributions forward, and
/// responses assign outcome probabilities to each state.
#[derive(Clone, Debug)]
pub struct FiniteOntModel {
    states: Vec<String>,
    preparations: BTreeMap<String, Vec<f64>>,
    transforms: BTreeMap<String, Vec<f64>>,
    responses: BTreeMap<String, Response>,
}

fn check_distribution(what: &str, label: &str, p: &[f64], violations: &mut Vec<String>) {
    let sum: f64 = p.iter().sum();
    if !(sum.is_finite() && (sum - 1.0).abs() <= STOCHASTIC_TOL) {
        violations.push(format!("{what} '{label}' sums to {sum:.12e} instead of 1"));
    }
    if p.iter().any(|&x| !x.is_finite() || x < -STOCHASTIC_TOL) {
        violations.push(format!("{what} '{label}' has negative or non-finite entries"));
    }
}

impl FiniteOntModel {
    pub fn new(
        states: Vec<String>,
        preparations: BTreeMap<String, Vec<f64>>,
        transforms: BTreeMap<String, Vec<f64>>,
        responses: BTreeMap<String, Response>,
    ) -> Result<Self> {
        let n = states.len();
        let mut violations: Vec<String> = Vec::new();
        if n == 0 {
            violations.push("state space is empty".to_string());
        }
        let mut sorted = states.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != n {
            violations.push("state labels repeat".to_string());
        }
        for (label, p) in &preparations {
            if p.len() != n {
                violations.push(format!(
                    "preparation '{label}' has {} entries for {n} states",
                    p.len()
                ));
                continue;
            }
            check_distribution("preparation", label, p, &mut violations);
        }
        for (label, t) in &transforms {
            if t.len() != n * n {
                violations.push(format!("transform '{label}' is not {n}x{n}"));
                continue;
            }
            for j in 0..n {
                let col: Vec<f64> = (0..n).map(|i| t[i * n + j]).collect();
                check_distribution("transform column of", label, &col, &mut violations);
            }
        }
        for (label, r) in &responses {
            let m = r.outcomes.len();
            if m == 0 || r.probs.len() != m * n {
                violations.push(format!("response '{label}' is not {m}x{n}"));
                continue;
            }
            for j in 0..n {
                let col: Vec<f64> = (0..m).map(|i| r.probs[i * n + j]).collect();
                check_distribution("response column of", label, &col, &mut violations);
            }
        }
        if violations.is_empty() {
            Ok(Self {
                states,
                preparations,
                transforms,
                responses,
            })
        } else {
            Err(CoreError::ModelInvalid { violations })
        }
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn preparation(&self, label: &str) -> Result<&[f64]> {
        self.preparations
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| CoreError::LabelNotFound {
                label: label.to_string(),
            })
    }

    pub fn preparation_labels(&self) -> impl Iterator<Item = &str> {
        self.preparations.keys().map(String::as_str)
    }

    pub fn transform(&self, label: &str) -> Result<&[f64]> {
        self.transforms
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| CoreError::LabelNotFound {
                label: label.to_string(),
            })
    }

    pub fn response(&self, label: &str) -> Result<&Response> {
        self.responses
            .get(label)
            .ok_or_else(|| CoreError::LabelNotFound {
                label: label.to_string(),
            })
    }
}

/// Pushes a preparation through a transform: `nu_i = sum_j T[i,j] mu_j`.
pub fn apply_transform(
    model: &FiniteOntModel,
    preparation: &str,
    transform: &str,
) -> Result<Vec<f64>> {
    let mu = model.preparation(preparation)?;
    let t = model.transform(transform)?;
    let n = model.n_states();
    Ok((0..n)
        .map(|i| (0..n).map(|j| t[i * n + j] * mu[j]).sum())
        .collect())
}

/// How much of `given`'s mass is committed to the supports of the `target`
/// preparations, optionally with an error tolerance `epsilon`.
#[derive(Clone, Debug)]
pub struct OverlapQuery {
    pub target: Vec<String>,
    pub given: String,
    pub epsilon: f64,
}

impl OverlapQuery {
    pub fn single(target: &str, given: &str, epsilon: f64) -> Self {
        Self {
            target: vec![target.to_string()],
            given: given.to_string(),
            epsilon,
        }
    }

    pub fn set(targets: &[&str], given: &str, epsilon: f64) -> Self {
        Self {
            target: targets.iter().map(|t| t.to_string()).collect(),
            given: given.to_string(),
            epsilon,
        }
    }
}

fn query_distributions<'a>(
    model: &'a FiniteOntModel,
    query: &OverlapQuery,
) -> Result<(&'a [f64], Vec<&'a [f64]>)> {
    if query.target.is_empty() {
        return Err(CoreError::InvalidParameter {
            detail: "overlap query needs at least one target".to_string(),
        });
    }
    let mu = model.preparation(&query.given)?;
    let targets = query
        .target
        .iter()
        .map(|t| model.preparation(t))
        .collect::<Result<Vec<_>>>()?;
    Ok((mu, targets))
}

/// Asymmetric overlap: the mass `given` places on the union of the targets'
/// supports. Requires `epsilon == 0`; [`epsilon_asymmetric_overlap`] covers
/// the error-tolerant version.
pub fn asymmetric_overlap(model: &FiniteOntModel, query: &OverlapQuery) -> Result<f64> {
    if query.epsilon != 0.0 {
        return Err(CoreError::InvalidParameter {
            detail: format!(
                "asymmetric overlap is defined at epsilon = 0, got {}",
                query.epsilon
            ),
        });
    }
    let (mu, targets) = query_distributions(model, query)?;
    Ok(mu
        .iter()
        .enumerate()
        .filter(|&(i, _)| targets.iter().any(|nu| nu[i] > SUPPORT_THRESHOLD))
        .map(|(_, &m)| m)
        .sum())
}

/// Symmetric overlap `sum_lambda min(mu, nu)`: one minus the total variation
/// distance between the two preparations.
pub fn symmetric_overlap(model: &FiniteOntModel, a: &str, b: &str) -> Result<f64> {
    let mu = model.preparation(a)?;
    let nu = model.preparation(b)?;
    Ok(mu.iter().zip(nu.iter()).map(|(&x, &y)| x.min(y)).sum())
}

fn branch_and_bound(
    masses: &[f64],
    costs: &[Vec<f64>],
    suffix: &[f64],
    budget: f64,
    k: usize,
    gained: f64,
    spent: &mut [f64],
    best: &mut f64,
) {
    if gained > *best {
        *best = gained;
    }
    if k == masses.len() || gained + suffix[k] <= *best + 1e-15 {
        return;
    }
    if costs[k]
        .iter()
        .zip(spent.iter())
        .all(|(c, s)| s + c <= budget)
    {
        for (s, c) in spent.iter_mut().zip(costs[k].iter()) {
            *s += c;
        }
        branch_and_bound(masses, costs, suffix, budget, k + 1, gained + masses[k], spent, best);
        for (s, c) in spent.iter_mut().zip(costs[k].iter()) {
            *s -= c;
        }
    }
    branch_and_bound(masses, costs, suffix, budget, k + 1, gained, spent, best);
}

/// Error-tolerant asymmetric overlap: the least mass `given` must place on
/// an event every target accepts with probability strictly above
/// `1 - epsilon`. Solved exactly by maximizing the mass excluded from the
/// event subject to each target's exclusion budget.
pub fn epsilon_asymmetric_overlap(model: &FiniteOntModel, query: &OverlapQuery) -> Result<f64> {
    if !(0.0..1.0).contains(&query.epsilon) {
        return Err(CoreError::InvalidParameter {
            detail: format!("epsilon must lie in [0, 1), got {}", query.epsilon),
        });
    }
    if query.epsilon == 0.0 {
        return asymmetric_overlap(model, query);
    }
    let (mu, targets) = query_distributions(model, query)?;
    // The margin keeps the acceptance constraint strict: an excluded set may
    // carry at most epsilon - margin of any target's mass.
    let budget = query.epsilon - STRICT_MARGIN;
    let mut free = 0.0;
    let mut live: Vec<usize> = Vec::new();
    for i in 0..mu.len() {
        if targets.iter().all(|nu| nu[i] <= 0.0) {
            free += mu[i].max(0.0);
        } else {
            live.push(i);
        }
    }
    // Largest given-mass first tightens the suffix upper bound early.
    live.sort_by(|&a, &b| mu[b].partial_cmp(&mu[a]).expect("finite masses"));
    let masses: Vec<f64> = live.iter().map(|&i| mu[i].max(0.0)).collect();
    let costs: Vec<Vec<f64>> = live
        .iter()
        .map(|&i| targets.iter().map(|nu| nu[i].max(0.0)).collect())
        .collect();
    let mut suffix = vec![0.0; masses.len() + 1];
    for k in (0..masses.len()).rev() {
        suffix[k] = suffix[k + 1] + masses[k];
    }
    let mut best = 0.0_f64;
    let mut spent = vec![0.0_f64; targets.len()];
    branch_and_bound(&masses, &costs, &suffix, budget, 0, 0.0, &mut spent, &mut best);
    Ok((1.0 - (free + best)).max(0.0))
}

/// One row of a target behaviour: prepare, optionally transform, measure,
/// and compare against the stated outcome distribution.
#[derive(Clone, Debug)]
pub struct QuantumSpecEntry {
    pub preparation: String,
    pub transform: Option<String>,
    pub measurement: String,
    pub target_probs: Vec<f64>,
}

/// Result of checking a model against a target behaviour table.
#[derive(Clone, Debug)]
pub struct QuantumSpecReport {
    pub reproduced: bool,
    pub worst_deviation: f64,
    pub failures: Vec<String>,
}

/// Checks whether the model reproduces every target outcome probability to
/// within `epsilon` (absolute, per outcome).
pub fn reproduces_quantum(
    model: &FiniteOntModel,
    entries: &[QuantumSpecEntry],
    epsilon: f64,
) -> Result<QuantumSpecReport> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(CoreError::InvalidParameter {
            detail: format!("deviation tolerance must be nonnegative, got {epsilon}"),
        });
    }
    let n = model.n_states();
    let mut worst = 0.0_f64;
    let mut failures: Vec<String> = Vec::new();
    for (row, e) in entries.iter().enumerate() {
        let nu: Vec<f64> = match &e.transform {
            Some(t) => apply_transform(model, &e.preparation, t)?,
            None => model.preparation(&e.preparation)?.to_vec(),
        };
        let r = model.response(&e.measurement)?;
        let m = r.outcomes.len();
        if e.target_probs.len() != m {
            return Err(CoreError::DimensionMismatch {
                context: format!(
                    "entry {row} gives {} target probabilities for the {m} outcomes of '{}'",
                    e.target_probs.len(),
                    e.measurement
                ),
            });
        }
        for i in 0..m {
            let p: f64 = (0..n).map(|l| r.probs[i * n + l] * nu[l]).sum();
            let dev = (p - e.target_probs[i]).abs();
            worst = worst.max(dev);
            if dev > epsilon {
                failures.push(format!(
                    "entry {row} ('{}' measured by '{}'): outcome '{}' predicted {p:.9}, target {:.9}",
                    e.preparation, e.measurement, r.outcomes[i], e.target_probs[i]
                ));
            }
        }
    }
    Ok(QuantumSpecReport {
        reproduced: failures.is_empty(),
        worst_deviation: worst,
        failures,
    })
}

/// Whether three pairwise overlaps admit a joint measurement that never
/// reports the prepared state: `a + b + c < 1` together with
/// `(1 - a - b - c)^2 >= 4abc`. The second comparison carries a 1e-12 slack
/// because the reference construction sits exactly on the equality boundary.
pub fn anti_distinguishable_triple(a: f64, b: f64, c: f64) -> Result<bool> {
    for (name, v) in [("a", a), ("b", b), ("c", c)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CoreError::InvalidParameter {
                detail: format!("overlap {name} = {v} lies outside [0, 1]"),
            });
        }
    }
    let rest = 1.0 - a - b - c;
    Ok(rest > 0.0 && rest * rest + 1e-12 >= 4.0 * a * b * c)
}

/// The reference state pair with overlap `alpha`, the basis state both are
/// built over, and the rotation fixing `psi` while moving `zero` to `phi`.
#[derive(Clone, Debug)]
pub struct TheoremStates {
    pub psi: PureState,
    pub phi: PureState,
    pub zero: PureState,
    pub rotation: DenseOperator,
}

/// Builds the bound-saturating state pair in dimension `d >= 4` for
/// `alpha` strictly inside `(0, 1/sqrt(2))`:
/// `psi = alpha|0> + sqrt(2) alpha^2 |1> + tau|2>` and
/// `phi = (1 - 2 alpha^2)|0> + sqrt(2) alpha |1> + kappa|3>` with `tau` and
/// `kappa` fixed by normalization. Their inner product is exactly `alpha`,
/// as are `<0|psi>` and (squared) `<0|phi> = 1 - 2 alpha^2`.
pub fn construct_theorem_states(alpha: f64, d: usize) -> Result<TheoremStates> {
    let sup = 1.0 / libm::sqrt(2.0);
    if !(alpha > 0.0 && alpha < sup) {
        return Err(CoreError::InvalidParameter {
            detail: format!("alpha must lie strictly inside (0, 1/sqrt(2)), got {alpha}"),
        });
    }
    if d < 4 {
        return Err(CoreError::InvalidParameter {
            detail: format!("the construction needs dimension >= 4, got {d}"),
        });
    }
    let dims = Dims::single("S", d);
    let a2 = alpha * alpha;
    let root2 = libm::sqrt(2.0);
    let tau = libm::sqrt(1.0 - a2 - 2.0 * a2 * a2);
    let delta = 1.0 - 2.0 * a2;
    let kappa = libm::sqrt(2.0 * a2 * delta);
    let mut psi_amps = vec![ZERO; d];
    psi_amps[0] = Complex64::new(alpha, 0.0);
    psi_amps[1] = Complex64::new(root2 * a2, 0.0);
    psi_amps[2] = Complex64::new(tau, 0.0);
    let mut phi_amps = vec![ZERO; d];
    phi_amps[0] = Complex64::new(delta, 0.0);
    phi_amps[1] = Complex64::new(root2 * alpha, 0.0);
    phi_amps[3] = Complex64::new(kappa, 0.0);
    let psi = PureState::new(dims.clone(), psi_amps)?;
    let phi = PureState::new(dims.clone(), phi_amps)?;
    let zero = PureState::basis(dims.clone(), 0)?;
    // Two orthonormal frames sharing psi as first column; the second columns
    // are the unit parts of |0> and phi orthogonal to psi. Since
    // <psi|0> = <psi|phi> = alpha, the frame change fixes psi and carries
    // |0> onto phi.
    let perp = |v: &PureState| -> Vec<Complex64> {
        let ip = psi.inner(v);
        let mut out: Vec<Complex64> = v
            .amplitudes()
            .iter()
            .zip(psi.amplitudes())
            .map(|(x, p)| x - ip * p)
            .collect();
        let norm = vec_norm(&out);
        for x in out.iter_mut() {
            *x /= norm;
        }
        out
    };
    let mut from_frame = Mat::zeros(d, 2);
    from_frame.set_col(0, psi.amplitudes());
    from_frame.set_col(1, &perp(&zero));
    let mut to_frame = Mat::zeros(d, 2);
    to_frame.set_col(0, psi.amplitudes());
    to_frame.set_col(1, &perp(&phi));
    let rotation = to_frame
        .complete_basis()
        .mul(&from_frame.complete_basis().adjoint());
    Ok(TheoremStates {
        psi,
        phi,
        zero,
        rotation: DenseOperator::from_mat(dims, rotation)?,
    })
}

/// Upper bounds on the asymmetric overlap of the constructed pair. Each
/// field is present only when its hypotheses hold at the given parameters.
#[derive(Clone, Copy, Debug)]
pub struct BoundTables {
    /// `alpha^2 (1/2 + alpha^2)`; needs `alpha^2` in (0, 1/2) and `d >= 4`.
    pub max_epistemic: Option<f64>,
    /// `alpha^2 (1 + 2 alpha) / (d - 2)`; needs `alpha` in (0, 1/4) and `d >= 4`.
    pub large_d: Option<f64>,
    /// `large_d + symmetric_error_slope * epsilon`; additionally needs
    /// `epsilon` in [0, 1].
    pub symmetric_error: Option<f64>,
    /// Error coefficient `(3d^2 - 7d) / (2(d - 2))`; needs `d >= 4`.
    pub symmetric_error_slope: Option<f64>,
    /// Distinguishability baseline `1 - sqrt(1 - alpha^2)`; needs `alpha`
    /// in [0, 1].
    pub basic: Option<f64>,
}

/// Evaluates the overlap upper bounds at `(alpha, d, epsilon)`.
pub fn bound_tables(alpha: f64, d: usize, epsilon: f64) -> BoundTables {
    let a2 = alpha * alpha;
    let df = d as f64;
    let max_epistemic = (alpha > 0.0 && a2 < 0.5 && d >= 4).then_some(a2 * (0.5 + a2));
    let large_d = (alpha > 0.0 && alpha < 0.25 && d >= 4).then(|| a2 * (1.0 + 2.0 * alpha) / (df - 2.0));
    let slope = (d >= 4).then(|| (3.0 * df * df - 7.0 * df) / (2.0 * (df - 2.0)));
    let symmetric_error = match (large_d, slope) {
        (Some(l), Some(s)) if (0.0..=1.0).contains(&epsilon) => Some(l + s * epsilon),
        _ => None,
    };
    let basic = (0.0..=1.0).contains(&alpha).then(|| 1.0 - libm::sqrt(1.0 - a2));
    BoundTables {
        max_epistemic,
        large_d,
        symmetric_error,
        symmetric_error_slope: slope,
        basic,
    }
}

/// Both sides of the overlap inequality at one parameter point. `violated`
/// means the left side falls strictly below the right, i.e. no model with
/// these overlap parameters can match the target statistics.
#[derive(Clone, Copy, Debug)]
pub struct MrInequality {
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
}

/// Evaluates `alpha^2 (1 + 2 alpha^2) + epsilon (3 - kappa)` against
/// `2 (1 - kappa)^2 (1 - eps/(kappa eta)) / (1 - eps/eta)
///  * (alpha^2 - eps - tau - (eps/eta)(1 - tau))`.
///
/// At `epsilon = 0` every `eps/...` ratio is exactly zero and `kappa = 0` is
/// allowed. For `epsilon > 0` the validity constraints `kappa > 2 eps`,
/// `eta > 2 eps / kappa`, and `eta > eps` must hold.
pub fn mr_inequality(
    alpha: f64,
    eta: f64,
    tau: f64,
    kappa: f64,
    epsilon: f64,
) -> Result<MrInequality> {
    for (name, v, lo, hi) in [
        ("alpha", alpha, 0.0, 1.0),
        ("eta", eta, -f64::EPSILON, 1.0 + f64::EPSILON),
        ("tau", tau, -f64::EPSILON, 1.0 + f64::EPSILON),
        ("kappa", kappa, -f64::EPSILON, 1.0),
        ("epsilon", epsilon, -f64::EPSILON, 1.0),
    ] {
        if !(v.is_finite() && v > lo && v < hi) {
            return Err(CoreError::InvalidParameter {
                detail: format!("{name} = {v} lies outside its domain"),
            });
        }
    }
    let (eps_keta, eps_eta) = if epsilon == 0.0 {
        (0.0, 0.0)
    } else {
        if !(kappa > 2.0 * epsilon && eta > 2.0 * epsilon / kappa && eta > epsilon) {
            return Err(CoreError::InvalidParameter {
                detail: format!(
                    "epsilon = {epsilon} needs kappa > 2 epsilon and \
                     eta > max(2 epsilon / kappa, epsilon); got kappa = {kappa}, eta = {eta}"
                ),
            });
        }
        (epsilon / (kappa * eta), epsilon / eta)
    };
    let a2 = alpha * alpha;
    let lhs = a2 * (1.0 + 2.0 * a2) + epsilon * (3.0 - kappa);
    let rhs = 2.0 * (1.0 - kappa) * (1.0 - kappa) * (1.0 - eps_keta) / (1.0 - eps_eta)
        * (a2 - epsilon - tau - eps_eta * (1.0 - tau));
    Ok(MrInequality {
        lhs,
        rhs,
        violated: lhs < rhs,
    })
}

fn check_qubit_density(op: &DenseOperator, tol: &Tol) -> Result<()> {
    if op.dim() != 2 {
        return Err(CoreError::DimensionMismatch {
            context: format!(
                "two-time correlators need a qubit state, got dimension {}",
                op.dim()
            ),
        });
    }
    let dev = op.hermiticity_deviation();
    if dev > 10.0 * tol.algebraic {
        return Err(CoreError::NotHermitian { deviation: dev });
    }
    let tr = op.trace();
    if (tr.re - 1.0).abs() > 100.0 * tol.algebraic || tr.im.abs() > 100.0 * tol.algebraic {
        return Err(CoreError::InvalidParameter {
            detail: format!("state trace is {tr}, expected 1"),
        });
    }
    let eig = eigh(op.mat(), 10.0 * tol.algebraic)?;
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min < -10.0 * tol.algebraic {
        return Err(CoreError::NotPositive {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

fn y_rotation(theta: f64) -> Mat {
    let c = Complex64::new(libm::cos(theta / 2.0), 0.0);
    let s = Complex64::new(libm::sin(theta / 2.0), 0.0);
    Mat::from_rows(&[&[c, -s], &[s, c]])
}

fn evolve(rho: &Mat, theta: f64) -> Mat {
    let r = y_rotation(theta);
    r.mul(rho).mul(&r.adjoint())
}

fn z_expectation(rho: &Mat) -> f64 {
    rho.at(0, 0).re - rho.at(1, 1).re
}

/// Signed two-time correlator: measure in the computational basis, collapse,
/// rotate by `theta`, measure again.
fn two_time_correlator(rho: &Mat, theta: f64) -> f64 {
    let mut total = 0.0;
    for (k, sign) in [(0usize, 1.0), (1usize, -1.0)] {
        let p = rho.at(k, k).re.max(0.0);
        let mut collapsed = Mat::zeros(2, 2);
        collapsed[(k, k)] = ONE;
        total += p * sign * z_expectation(&evolve(&collapsed, theta));
    }
    total
}

/// Sum of the three two-time correlators of a projectively measured qubit
/// rotated by `theta12` between the first pair of measurement times and by
/// `theta23` between the second. The intermediate collapse makes the value
/// `cos(theta12) + cos(theta23) + cos(theta12 + theta23)` for every valid
/// input state; deterministic classical assignments reach only -1 or 3.
pub fn lgi_value(
    theta12: f64,
    theta23: f64,
    initial: &DenseOperator,
    tol: &Tol,
) -> Result<f64> {
    check_qubit_density(initial, tol)?;
    let rho = initial.mat().hermitized();
    let e12 = two_time_correlator(&rho, theta12);
    let e23 = two_time_correlator(&evolve(&rho, theta12), theta23);
    let e13 = two_time_correlator(&rho, theta12 + theta23);
    Ok(e12 + e23 + e13)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CoreError;
    use crate::random::{random_density, rng_from_seed};
    use rand_core::RngCore;

    fn dist_map(entries: &[(&str, &[f64])]) -> BTreeMap<String, Vec<f64>> {
        entries
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_vec()))
            .collect()
    }

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("l{i}")).collect()
    }

    fn prep_model(n: usize, entries: &[(&str, &[f64])]) -> FiniteOntModel {
        FiniteOntModel::new(labels(n), dist_map(entries), BTreeMap::new(), BTreeMap::new())
            .expect("test model is valid")
    }

    fn u01(rng: &mut impl RngCore) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn random_dist(n: usize, rng: &mut impl RngCore) -> Vec<f64> {
        loop {
            let mut p: Vec<f64> = (0..n)
                .map(|_| if u01(rng) < 0.3 { 0.0 } else { u01(rng) })
                .collect();
            let s: f64 = p.iter().sum();
            if s > 1e-3 {
                for x in p.iter_mut() {
                    *x /= s;
                }
                return p;
            }
        }
    }

    fn random_prep_model(n: usize, preps: usize, rng: &mut impl RngCore) -> FiniteOntModel {
        let preparations = (0..preps)
            .map(|k| (format!("p{k}"), random_dist(n, rng)))
            .collect();
        FiniteOntModel::new(labels(n), preparations, BTreeMap::new(), BTreeMap::new())
            .expect("random model is valid")
    }

    /// Exhaustive reference for the excluded-mass optimization.
    fn epsilon_overlap_bitmask(mu: &[f64], targets: &[&[f64]], epsilon: f64) -> f64 {
        let n = mu.len();
        let budget = epsilon - STRICT_MARGIN;
        let mut best = 0.0_f64;
        for mask in 0u32..(1u32 << n) {
            let feasible = targets.iter().all(|t| {
                let cost: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| t[i]).sum();
                cost <= budget
            });
            if feasible {
                let gain: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| mu[i]).sum();
                best = best.max(gain);
            }
        }
        1.0 - best
    }

    #[test]
    fn model_validation_rejects_malformed_data() {
        let bad_sum = FiniteOntModel::new(
            labels(2),
            dist_map(&[("p", &[0.6, 0.6])]),
            BTreeMap::new(),
            BTreeMap::new(),
        );
        assert!(matches!(bad_sum, Err(CoreError::ModelInvalid { .. })));

        let negative = FiniteOntModel::new(
            labels(2),
            dist_map(&[("p", &[1.2, -0.2])]),
            BTreeMap::new(),
            BTreeMap::new(),
        );
        assert!(matches!(negative, Err(CoreError::ModelInvalid { .. })));

        let bad_transform = FiniteOntModel::new(
            labels(2),
            dist_map(&[("p", &[1.0, 0.0])]),
            dist_map(&[("t", &[1.0, 0.0, 0.5, 0.5])]),
            BTreeMap::new(),
        );
        // Column 1 sums to 0.5: rows are (1.0, 0.0) and (0.5, 0.5).
        assert!(matches!(bad_transform, Err(CoreError::ModelInvalid { .. })));

        let bad_response = FiniteOntModel::new(
            labels(2),
            BTreeMap::new(),
            BTreeMap::new(),
            [(
                "m".to_string(),
                Response {
                    outcomes: vec!["0".to_string(), "1".to_string()],
                    probs: vec![0.9, 0.0, 0.0, 0.9],
                },
            )]
            .into_iter()
            .collect(),
        );
        assert!(matches!(bad_response, Err(CoreError::ModelInvalid { .. })));

        let duplicate = FiniteOntModel::new(
            vec!["a".to_string(), "a".to_string()],
            BTreeMap::new(),
            BTreeMap::new(),
            BTreeMap::new(),
        );
        assert!(matches!(duplicate, Err(CoreError::ModelInvalid { .. })));

        let empty = FiniteOntModel::new(Vec::new(), BTreeMap::new(), BTreeMap::new(), BTreeMap::new());
        assert!(matches!(empty, Err(CoreError::ModelInvalid { .. })));

        let model = prep_model(2, &[("p", &[0.5, 0.5])]);
        assert!(matches!(
            model.preparation("missing"),
            Err(CoreError::LabelNotFound { .. })
        ));
        assert!(matches!(
            model.transform("missing"),
            Err(CoreError::LabelNotFound { .. })
        ));
        assert!(matches!(
            model.response("missing"),
            Err(CoreError::LabelNotFound { .. })
        ));
    }

    #[test]
    fn asymmetric_overlap_measures_support_mass() {
        let model = prep_model(
            3,
            &[
                ("mu", &[0.5, 0.5, 0.0]),
                ("nu", &[0.0, 0.5, 0.5]),
                ("same", &[0.5, 0.5, 0.0]),
                ("solo0", &[1.0, 0.0, 0.0]),
                ("solo1", &[0.0, 1.0, 0.0]),
                ("solo2", &[0.0, 0.0, 1.0]),
                ("spread", &[0.3, 0.3, 0.4]),
            ],
        );
        let overlap = |t: &[&str], g: &str| {
            asymmetric_overlap(&model, &OverlapQuery::set(t, g, 0.0)).unwrap()
        };
        assert!((overlap(&["same"], "mu") - 1.0).abs() < 1e-15);
        assert!((overlap(&["solo2"], "mu")).abs() < 1e-15);
        assert!((overlap(&["nu"], "mu") - 0.5).abs() < 1e-15);
        // Union of supports {0} and {1} carries 0.6 of the spread state.
        assert!((overlap(&["solo0", "solo1"], "spread") - 0.6).abs() < 1e-15);

        let eps_query = OverlapQuery::single("nu", "mu", 0.1);
        assert!(matches!(
            asymmetric_overlap(&model, &eps_query),
            Err(CoreError::InvalidParameter { .. })
        ));
        let empty = OverlapQuery::set(&[], "mu", 0.0);
        assert!(matches!(
            asymmetric_overlap(&model, &empty),
            Err(CoreError::InvalidParameter { .. })
        ));
        let unknown = OverlapQuery::single("ghost", "mu", 0.0);
        assert!(matches!(
            asymmetric_overlap(&model, &unknown),
            Err(CoreError::LabelNotFound { .. })
        ));
    }

    #[test]
    fn symmetric_overlap_is_one_minus_total_variation() {
        let model = prep_model(2, &[("a", &[0.7, 0.3]), ("b", &[0.2, 0.8])]);
        let w = symmetric_overlap(&model, "a", "b").unwrap();
        assert!((w - 0.5).abs() < 1e-15);
        assert!((symmetric_overlap(&model, "b", "a").unwrap() - w).abs() < 1e-15);

        let mut rng = rng_from_seed(41);
        for n in [2usize, 3, 5, 8, 10] {
            for _ in 0..4 {
                let model = random_prep_model(n, 2, &mut rng);
                let mu = model.preparation("p0").unwrap();
                let nu = model.preparation("p1").unwrap();
                // Reference: minimize mu(A) + nu(complement of A) over events A.
                let mut oracle = f64::INFINITY;
                for mask in 0u32..(1u32 << n) {
                    let v: f64 = (0..n)
                        .map(|i| if mask >> i & 1 == 1 { mu[i] } else { nu[i] })
                        .sum();
                    oracle = oracle.min(v);
                }
                let w = symmetric_overlap(&model, "p0", "p1").unwrap();
                assert!(
                    (w - oracle).abs() < 1e-12,
                    "n = {n}: overlap {w} vs oracle {oracle}"
                );
            }
        }
    }

    #[test]
    fn epsilon_overlap_solves_the_exclusion_problem_exactly() {
        let model = prep_model(3, &[("mu", &[0.4, 0.4, 0.2]), ("nu", &[0.5, 0.3, 0.2])]);
        // Budget 0.25 admits only the third state (cost 0.2), so the event
        // keeps mass 0.8.
        let w = epsilon_asymmetric_overlap(&model, &OverlapQuery::single("nu", "mu", 0.25)).unwrap();
        assert!((w - 0.8).abs() < 1e-12, "got {w}");

        // Excluding either state would cost exactly epsilon, which the strict
        // constraint forbids.
        let tight = prep_model(2, &[("mu", &[0.5, 0.5])]);
        let w = epsilon_asymmetric_overlap(&tight, &OverlapQuery::single("mu", "mu", 0.5)).unwrap();
        assert!((w - 1.0).abs() < 1e-15, "got {w}");
        let w = epsilon_asymmetric_overlap(&tight, &OverlapQuery::single("mu", "mu", 0.500001)).unwrap();
        assert!((w - 0.5).abs() < 1e-12, "got {w}");

        for bad in [-0.1, 1.0, 1.5, f64::NAN] {
            assert!(matches!(
                epsilon_asymmetric_overlap(&model, &OverlapQuery::single("nu", "mu", bad)),
                Err(CoreError::InvalidParameter { .. })
            ));
        }

        let mut rng = rng_from_seed(42);
        // At epsilon = 0 the query reduces to the support-mass overlap.
        for _ in 0..20 {
            let model = random_prep_model(6, 3, &mut rng);
            let q = OverlapQuery::set(&["p1", "p2"], "p0", 0.0);
            let a = epsilon_asymmetric_overlap(&model, &q).unwrap();
            let b = asymmetric_overlap(&model, &q).unwrap();
            assert_eq!(a, b);
        }
        // Exact agreement with exhaustive enumeration.
        for round in 0..15 {
            let model = random_prep_model(12, 3, &mut rng);
            let mu = model.preparation("p0").unwrap().to_vec();
            let t1 = model.preparation("p1").unwrap().to_vec();
            let t2 = model.preparation("p2").unwrap().to_vec();
            for eps in [0.1, 0.25, 0.4] {
                let q = OverlapQuery::set(&["p1", "p2"], "p0", eps);
                let got = epsilon_asymmetric_overlap(&model, &q).unwrap();
                let want = epsilon_overlap_bitmask(&mu, &[&t1, &t2], eps);
                assert!(
                    (got - want).abs() < 1e-12,
                    "round {round}, eps {eps}: got {got}, oracle {want}"
                );
            }
        }
        // Nonincreasing in epsilon.
        for _ in 0..10 {
            let model = random_prep_model(8, 2, &mut rng);
            let mut last = f64::INFINITY;
            for step in 0..11 {
                let eps = step as f64 * 0.05;
                let q = OverlapQuery::single("p1", "p0", eps);
                let w = epsilon_asymmetric_overlap(&model, &q).unwrap();
                assert!(w <= last + 1e-12, "eps {eps}: {w} > {last}");
                last = w;
            }
        }
    }

    #[test]
    fn transforms_act_by_stochastic_matrices() {
        let model = FiniteOntModel::new(
            labels(2),
            dist_map(&[("p", &[0.3, 0.7])]),
            dist_map(&[
                ("flip", &[0.0, 1.0, 1.0, 0.0]),
                ("reset", &[1.0, 1.0, 0.0, 0.0]),
            ]),
            BTreeMap::new(),
        )
        .unwrap();
        let flipped = apply_transform(&model, "p", "flip").unwrap();
        assert!((flipped[0] - 0.7).abs() < 1e-15 && (flipped[1] - 0.3).abs() < 1e-15);
        let reset = apply_transform(&model, "p", "reset").unwrap();
        assert!((reset[0] - 1.0).abs() < 1e-15 && reset[1].abs() < 1e-15);
        assert!(matches!(
            apply_transform(&model, "p", "ghost"),
            Err(CoreError::LabelNotFound { .. })
        ));

        // Random column-stochastic matrices keep distributions normalized.
        let mut rng = rng_from_seed(7);
        for _ in 0..20 {
            let n = 4;
            let mut t = vec![0.0; n * n];
            for j in 0..n {
                let col = random_dist(n, &mut rng);
                for i in 0..n {
                    t[i * n + j] = col[i];
                }
            }
            let model = FiniteOntModel::new(
                labels(n),
                dist_map(&[("p", &random_dist(n, &mut rng))]),
                [("t".to_string(), t)].into_iter().collect(),
                BTreeMap::new(),
            )
            .unwrap();
            let out = apply_transform(&model, "p", "t").unwrap();
            let sum: f64 = out.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(out.iter().all(|&x| x >= -1e-15));
        }
    }

    #[test]
    fn behaviour_reproduction_reports_deviations() {
        let model = FiniteOntModel::new(
            labels(2),
            dist_map(&[("z0", &[1.0, 0.0]), ("z1", &[0.0, 1.0]), ("mix", &[0.5, 0.5])]),
            dist_map(&[("flip", &[0.0, 1.0, 1.0, 0.0])]),
            [(
                "Z".to_string(),
                Response {
                    outcomes: vec!["up".to_string(), "down".to_string()],
                    probs: vec![1.0, 0.0, 0.0, 1.0],
                },
            )]
            .into_iter()
            .collect(),
        )
        .unwrap();
        let entry = |prep: &str, tr: Option<&str>, probs: &[f64]| QuantumSpecEntry {
            preparation: prep.to_string(),
            transform: tr.map(str::to_string),
            measurement: "Z".to_string(),
            target_probs: probs.to_vec(),
        };

        let diagonal = [
            entry("z0", None, &[1.0, 0.0]),
            entry("z1", None, &[0.0, 1.0]),
            entry("mix", None, &[0.5, 0.5]),
            entry("z0", Some("flip"), &[0.0, 1.0]),
        ];
        let report = reproduces_quantum(&model, &diagonal, 0.0).unwrap();
        assert!(report.reproduced, "failures: {:?}", report.failures);
        assert!(report.worst_deviation < 1e-15);

        // A basis-rotated target is off by 0.5 on both outcomes.
        let rotated = [entry("z0", None, &[0.5, 0.5])];
        let report = reproduces_quantum(&model, &rotated, 0.0).unwrap();
        assert!(!report.reproduced);
        assert_eq!(report.failures.len(), 2);
        assert!((report.worst_deviation - 0.5).abs() < 1e-15);

        // Any behaviour passes when the tolerance is maximal.
        let report = reproduces_quantum(&model, &rotated, 1.0).unwrap();
        assert!(report.reproduced);
        assert!((report.worst_deviation - 0.5).abs() < 1e-15);

        let short = [entry("z0", None, &[1.0])];
        assert!(matches!(
            reproduces_quantum(&model, &short, 0.0),
            Err(CoreError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            reproduces_quantum(&model, &diagonal, -0.1),
            Err(CoreError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn anti_distinguishability_criterion_matches_arithmetic() {
        assert!(anti_distinguishable_triple(0.0, 0.0, 0.0).unwrap());
        // 0.4^2 = 0.16 >= 4 * 0.008 = 0.032.
        assert!(anti_distinguishable_triple(0.2, 0.2, 0.2).unwrap());
        // Sum exceeds one.
        assert!(!anti_distinguishable_triple(0.4, 0.4, 0.4).unwrap());
        // 0.1^2 = 0.01 < 4 * 0.027 = 0.108.
        assert!(!anti_distinguishable_triple(0.3, 0.3, 0.3).unwrap());
        // Exact equality boundary: a = b = 0.25, c = (1 - 0.5)^2 = 0.25.
        assert!(anti_distinguishable_triple(0.25, 0.25, 0.25).unwrap());
        for bad in [(-0.1, 0.2, 0.2), (0.2, 1.2, 0.2), (0.2, 0.2, f64::NAN)] {
            assert!(matches!(
                anti_distinguishable_triple(bad.0, bad.1, bad.2),
                Err(CoreError::InvalidParameter { .. })
            ));
        }
    }

    #[test]
    fn theorem_states_satisfy_their_design() {
        let ts = construct_theorem_states(0.5, 4).unwrap();
        let psi = ts.psi.amplitudes();
        let phi = ts.phi.amplitudes();
        let expect_psi = [0.5, libm::sqrt(2.0) * 0.25, libm::sqrt(0.625), 0.0];
        let expect_phi = [0.5, libm::sqrt(2.0) * 0.5, 0.0, 0.5];
        for k in 0..4 {
            assert!((psi[k].re - expect_psi[k]).abs() < 1e-12 && psi[k].im == 0.0);
            assert!((phi[k].re - expect_phi[k]).abs() < 1e-12 && phi[k].im == 0.0);
        }

        for (alpha, d) in [
            (0.05, 4),
            (0.2, 5),
            (0.35, 7),
            (0.5, 10),
            (0.65, 16),
            (0.245, 6),
            (0.7, 4),
            (0.01, 4),
            (0.6, 32),
        ] {
            let ts = construct_theorem_states(alpha, d).unwrap();
            assert!((ts.psi.norm() - 1.0).abs() < 1e-12, "alpha {alpha}");
            assert!((ts.phi.norm() - 1.0).abs() < 1e-12, "alpha {alpha}");
            let ip = ts.phi.inner(&ts.psi);
            assert!(
                (ip.re - alpha).abs() < 1e-12 && ip.im.abs() < 1e-15,
                "alpha {alpha}: inner {ip}"
            );
            let a = ts.zero.inner(&ts.psi).norm_sqr();
            let b = ts.psi.inner(&ts.phi).norm_sqr();
            let c = ts.zero.inner(&ts.phi).norm_sqr();
            let a2 = alpha * alpha;
            assert!((a - a2).abs() < 1e-12 && (b - a2).abs() < 1e-12);
            assert!((c - (1.0 - 2.0 * a2) * (1.0 - 2.0 * a2)).abs() < 1e-12);
            assert!(anti_distinguishable_triple(a, b, c).unwrap(), "alpha {alpha}, d {d}");

            let u = ts.rotation.mat();
            assert!(u.isometry_deviation() < 1e-10, "alpha {alpha}, d {d}");
            let fixed = u.matvec(ts.psi.amplitudes());
            let moved = u.matvec(ts.zero.amplitudes());
            let err_fixed: f64 = fixed
                .iter()
                .zip(ts.psi.amplitudes())
                .map(|(x, y)| (x - y).norm())
                .sum();
            let err_moved: f64 = moved
                .iter()
                .zip(ts.phi.amplitudes())
                .map(|(x, y)| (x - y).norm())
                .sum();
            assert!(err_fixed < 1e-10, "alpha {alpha}, d {d}: {err_fixed}");
            assert!(err_moved < 1e-10, "alpha {alpha}, d {d}: {err_moved}");
        }

        for (alpha, d) in [(0.0, 4), (1.0 / libm::sqrt(2.0), 4), (0.9, 4), (0.3, 3)] {
            assert!(matches!(
                construct_theorem_states(alpha, d),
                Err(CoreError::InvalidParameter { .. })
            ));
        }
    }

    #[test]
    fn bound_values_match_the_quoted_numbers() {
        let b = bound_tables(0.245, 6, 0.01);
        let large_d = b.large_d.unwrap();
        assert!((large_d - 0.0223593125).abs() < 1e-12, "{large_d}");
        let slope = b.symmetric_error_slope.unwrap();
        assert!((slope - 8.25).abs() < 1e-12, "{slope}");
        let sym = b.symmetric_error.unwrap();
        assert!((sym - (large_d + 8.25 * 0.01)).abs() < 1e-15);
        let basic = b.basic.unwrap();
        assert!((basic - 0.030477).abs() < 1e-5, "{basic}");
        let me = bound_tables(0.5, 6, 0.0).max_epistemic.unwrap();
        assert!((me - 0.1875).abs() < 1e-12, "{me}");

        // Hypothesis gates.
        let wide = bound_tables(0.8, 6, 0.01);
        assert!(wide.max_epistemic.is_none() && wide.large_d.is_none());
        assert!(wide.symmetric_error.is_none());
        assert!((wide.basic.unwrap() - 0.4).abs() < 1e-12);
        let mid = bound_tables(0.3, 6, 0.01);
        assert!(mid.max_epistemic.is_some() && mid.large_d.is_none());
        let low_dim = bound_tables(0.2, 3, 0.01);
        assert!(
            low_dim.max_epistemic.is_none()
                && low_dim.large_d.is_none()
                && low_dim.symmetric_error_slope.is_none()
        );
        let big_eps = bound_tables(0.2, 6, 1.5);
        assert!(big_eps.large_d.is_some() && big_eps.symmetric_error.is_none());
        assert!(bound_tables(1.2, 6, 0.0).basic.is_none());
    }

    #[test]
    fn mr_inequality_detects_the_contradiction_region() {
        let r = mr_inequality(0.5, 0.05, 0.05, 0.0, 0.0).unwrap();
        assert!((r.lhs - 0.375).abs() < 1e-12, "{}", r.lhs);
        assert!((r.rhs - 0.4).abs() < 1e-12, "{}", r.rhs);
        assert!(r.violated);

        // eta = tau = 1/16 at alpha^2 = 1/4 puts both sides at 0.375 exactly;
        // a tie is not a violation.
        let r = mr_inequality(0.5, 0.0625, 0.0625, 0.0, 0.0).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-12);
        assert!(!r.violated);

        for eta in [0.01, 0.03, 0.05] {
            let r = mr_inequality(0.5, eta, eta, 0.0, 0.0).unwrap();
            assert!(r.violated, "eta {eta}");
        }
        // Large tau pushes the right side down.
        let r = mr_inequality(0.5, 0.05, 0.2, 0.0, 0.0).unwrap();
        assert!(!r.violated);

        // A valid noisy point evaluates both ratio corrections.
        let r = mr_inequality(0.5, 0.5, 0.01, 0.1, 0.001).unwrap();
        let want_lhs = 0.25 * 1.5 + 0.001 * 2.9;
        let want_rhs = 2.0 * 0.81 * (1.0 - 0.02) / (1.0 - 0.002)
            * (0.25 - 0.001 - 0.01 - 0.002 * 0.99);
        assert!((r.lhs - want_lhs).abs() < 1e-12);
        assert!((r.rhs - want_rhs).abs() < 1e-12);

        // Validity constraints for epsilon > 0.
        assert!(matches!(
            mr_inequality(0.5, 0.5, 0.01, 0.001, 0.001),
            Err(CoreError::InvalidParameter { .. })
        ));
        assert!(matches!(
            mr_inequality(0.5, 0.003, 0.01, 0.1, 0.001),
            Err(CoreError::InvalidParameter { .. })
        ));
        // Domain walls.
        assert!(matches!(
            mr_inequality(0.0, 0.05, 0.05, 0.0, 0.0),
            Err(CoreError::InvalidParameter { .. })
        ));
        assert!(matches!(
            mr_inequality(0.5, 0.05, 0.05, 1.0, 0.0),
            Err(CoreError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn lgi_matches_the_two_point_correlators() {
        let tol = Tol::default();
        let dims = Dims::single("Q", 2);
        let ground = PureState::basis(dims.clone(), 0).unwrap().density();

        let v = lgi_value(0.0, 0.0, &ground, &tol).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        let third = 2.0 * core::f64::consts::PI / 3.0;
        let v = lgi_value(third, third, &ground, &tol).unwrap();
        assert!((v + 1.5).abs() < 1e-12, "{v}");
        let quarter = core::f64::consts::FRAC_PI_2;
        let v = lgi_value(quarter, quarter, &ground, &tol).unwrap();
        assert!((v + 1.0).abs() < 1e-12, "{v}");

        // The collapse at the first time erases the input: any valid state
        // gives cos(t12) + cos(t23) + cos(t12 + t23).
        let mut rng = rng_from_seed(11);
        for _ in 0..10 {
            let t12 = u01(&mut rng) * core::f64::consts::TAU;
            let t23 = u01(&mut rng) * core::f64::consts::TAU;
            let rho = random_density(&Dims::single("Q", 2), &mut rng);
            let v = lgi_value(t12, t23, &rho, &tol).unwrap();
            let closed = libm::cos(t12) + libm::cos(t23) + libm::cos(t12 + t23);
            assert!((v - closed).abs() < 1e-9, "{v} vs {closed}");
            let w = lgi_value(t12, t23, &ground, &tol).unwrap();
            assert!((v - w).abs() < 1e-9);
        }

        // Deterministic assignments only reach -1 or 3.
        for bits in 0..8u32 {
            let q: Vec<f64> = (0..3).map(|k| if bits >> k & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let k = q[0] * q[1] + q[1] * q[2] + q[0] * q[2];
            assert!(k == 3.0 || k == -1.0);
        }

        let big = DenseOperator::identity(Dims::single("Q", 3)).scaled_re(1.0 / 3.0);
        assert!(matches!(
            lgi_value(0.1, 0.2, &big, &tol),
            Err(CoreError::DimensionMismatch { .. })
        ));
        let unnormalized = DenseOperator::identity(dims);
        assert!(matches!(
            lgi_value(0.1, 0.2, &unnormalized, &tol),
            Err(CoreError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn overlaps_obey_union_and_symmetric_bounds() {
        let mut rng = rng_from_seed(23);
        for round in 0..30 {
            let n = 4 + (round % 7);
            let model = random_prep_model(n, 3, &mut rng);
            let union = asymmetric_overlap(&model, &OverlapQuery::set(&["p1", "p2"], "p0", 0.0))
                .unwrap();
            let v1 = asymmetric_overlap(&model, &OverlapQuery::single("p1", "p0", 0.0)).unwrap();
            let v2 = asymmetric_overlap(&model, &OverlapQuery::single("p2", "p0", 0.0)).unwrap();
            assert!(union <= v1 + v2 + 1e-12, "round {round}");
            assert!(v1.max(v2) <= union + 1e-12, "round {round}");

            let w = symmetric_overlap(&model, "p0", "p1").unwrap();
            let wb = asymmetric_overlap(&model, &OverlapQuery::single("p0", "p1", 0.0)).unwrap();
            assert!(
                w <= v1.min(wb) + n as f64 * SUPPORT_THRESHOLD + 1e-12,
                "round {round}: {w} vs {} / {wb}",
                v1
            );
        }
    }
}
