//! The acceptance gate: fourteen numbered criteria covering the closed-form
//! time-travel outputs, the Monte-Carlo estimator, the conditional-independence
//! pipeline, classical limits, solver guarantees, bound tables, inequality
//! scans, the exact overlap solver, and the fingerprinting bound, each with an
//! explicit runtime budget. Every test prints one `criterion NN PASS` line.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use qfound_core::comm::{fc_lower_bound, fingerprint_states, random_code, verify_triples};
use qfound_core::ctc::{
    dctc_evolve, dctc_evolve_from, grandfather_circuit, haar_fourth_moment_ratio,
    identity_circuit, p_operator, pctc_evolve, tctc_distinguishability_bound, tctc_evolve,
    tctc_montecarlo, unproved_theorem_circuit, StandardFormCircuit,
};
use qfound_core::causal::{classical_limit, CausalDag, QuantumCausalModel};
use qfound_core::channel::Channel;
use qfound_core::dense::{DenseOperator, PureState};
use qfound_core::dims::{dual_label, Dim, Dims};
use qfound_core::entropy::trace_distance;
use qfound_core::mat::{vec_norm, Mat};
use qfound_core::ontology::{
    asymmetric_overlap, bound_tables, epsilon_asymmetric_overlap, lgi_value, mr_inequality,
    symmetric_overlap, FiniteOntModel, OverlapQuery,
};
use qfound_core::qci::{
    build_unitary_dilation, check_cmi, check_factorisation, coherent_copy_channel,
    find_decomposition, incoherent_copy_channel, random_conditionally_independent_channel,
};
use qfound_core::random::{ginibre_vector, haar_state_with, haar_unitary, random_density, rng_from_seed};
use qfound_core::{Complex64, CoreError, Tol};
use rand_core::RngCore;

fn tol() -> Tol {
    Tol::default()
}

fn u01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn budget(label: &str, started: Instant, allowed: Duration, summary: String) {
    let elapsed = started.elapsed();
    assert!(
        elapsed <= allowed,
        "{label}: took {elapsed:?}, budget {allowed:?}"
    );
    println!("{label} PASS ({} ms): {summary}", elapsed.as_millis());
}

fn random_circuit(d_cr: usize, d_cv: usize, rng: &mut impl RngCore) -> StandardFormCircuit {
    let cr = Dims::single("R", d_cr);
    let cv = Dims::single("V", d_cv);
    let joint = cr.joined(&cv).unwrap();
    let u = DenseOperator::from_mat(joint, haar_unitary(d_cr * d_cv, rng)).unwrap();
    let input = random_density(&cr, rng);
    StandardFormCircuit::new(u, cr, cv, input, &tol()).unwrap()
}

#[test]
fn criterion_01_tctc_closed_form_on_the_book_circuit() {
    let start = Instant::now();
    let out = tctc_evolve(&unproved_theorem_circuit(1).unwrap());
    let mut dev = 0.0f64;
    for r in 0..4 {
        for c in 0..4 {
            let want = match (r, c) {
                (0, 0) | (3, 3) => 0.5,
                (0, 3) | (3, 0) => 0.25,
                _ => 0.0,
            };
            dev = dev.max((out.rho_f.at(r, c) - Complex64::new(want, 0.0)).norm());
        }
    }
    assert!(dev <= 1e-10, "entrywise deviation {dev}");
    budget(
        "criterion 01",
        start,
        Duration::from_secs(1),
        format!("transition-rule output matches the closed form to {dev:.2e}"),
    );
}

#[test]
fn criterion_02_pctc_projects_onto_the_entangled_pair() {
    let start = Instant::now();
    let c = unproved_theorem_circuit(1).unwrap();
    let rho = pctc_evolve(&c).unwrap();
    let inv = 0.5f64.sqrt();
    let mut amps = vec![Complex64::new(0.0, 0.0); 4];
    amps[0] = Complex64::new(inv, 0.0);
    amps[3] = Complex64::new(inv, 0.0);
    let want = PureState::new(c.cr_dims().clone(), amps).unwrap().density();
    let mut dev = 0.0f64;
    for r in 0..4 {
        for col in 0..4 {
            dev = dev.max((rho.at(r, col) - want.at(r, col)).norm());
        }
    }
    assert!(dev <= 1e-12, "entrywise deviation {dev}");
    budget(
        "criterion 02",
        start,
        Duration::from_secs(1),
        format!("post-selected output is the entangled projector to {dev:.2e}"),
    );
}

#[test]
fn criterion_03_montecarlo_agrees_with_the_closed_form() {
    let start = Instant::now();
    let c = unproved_theorem_circuit(1).unwrap();
    let exact = tctc_evolve(&c).rho_f;
    let est = tctc_montecarlo(&c, 1_000_000, 20_260_815).unwrap();
    let mut dev = 0.0f64;
    for r in 0..4 {
        for col in 0..4 {
            dev = dev.max((est.at(r, col) - exact.at(r, col)).norm());
        }
    }
    assert!(dev <= 5e-3, "entrywise deviation {dev}");
    let ratio = haar_fourth_moment_ratio(2, 1_000_000, 20_260_816).unwrap();
    assert!(
        (ratio - 2.0).abs() <= 0.04,
        "moment ratio {ratio} outside 2 +- 2%"
    );
    budget(
        "criterion 03",
        start,
        Duration::from_secs(60),
        format!("1e6-sample estimate within {dev:.2e}; moment ratio {ratio:.4}"),
    );
}

#[test]
fn criterion_04_copy_channels_bracket_the_information_range() {
    let start = Instant::now();
    let b = vec!["B".to_string()];
    let c = vec!["C".to_string()];
    let coherent = check_cmi(
        &coherent_copy_channel(2, &["B", "C"], "A").unwrap(),
        &b,
        &c,
        &tol(),
    )
    .unwrap();
    let incoherent = check_cmi(
        &incoherent_copy_channel(2, &["B", "C"], "A").unwrap(),
        &b,
        &c,
        &tol(),
    )
    .unwrap();
    assert!((coherent - 1.0).abs() <= 1e-9, "coherent copy: {coherent}");
    assert!(incoherent.abs() <= 1e-9, "incoherent copy: {incoherent}");
    budget(
        "criterion 04",
        start,
        Duration::from_secs(1),
        format!("I(B:C|A) = {coherent:.3} coherent, {incoherent:.1e} incoherent"),
    );
}

#[test]
fn criterion_05_constructed_channels_pass_all_four_conditions() {
    let start = Instant::now();
    let mut rng = rng_from_seed(105);
    let b = vec!["B".to_string()];
    let c = vec!["C".to_string()];
    let block_menu: [&[(usize, usize)]; 5] = [
        &[(2, 1)],
        &[(1, 2)],
        &[(2, 2)],
        &[(1, 1), (1, 2)],
        &[(2, 1), (1, 2)],
    ];
    let side_menu = [(2usize, 2usize), (2, 3), (3, 2)];
    let mut largest = 0usize;
    for round in 0..200 {
        let blocks = block_menu[round % block_menu.len()];
        let (db, dc) = side_menu[round % side_menu.len()];
        let ch = random_conditionally_independent_channel(blocks, db, dc, &mut rng).unwrap();
        largest = largest.max(ch.d_in() * db * dc);
        assert!(ch.d_in() * db * dc <= 24, "round {round} exceeds the size cap");
        let fact = check_factorisation(&ch, &b, &c, &tol()).unwrap();
        assert!(fact.factorises, "round {round}: residual {}", fact.residual);
        assert!(fact.commutator_norm <= 1e-8, "round {round}");
        let cmi = check_cmi(&ch, &b, &c, &tol()).unwrap();
        assert!(cmi <= 1e-6, "round {round}: CMI {cmi}");
        let dec = find_decomposition(&ch, &b, &c, &tol(), &mut rng).unwrap();
        assert!(dec.residual <= 1e-6, "round {round}: reconstruction {}", dec.residual);
        let dil = build_unitary_dilation(&ch, &dec, &tol()).unwrap();
        assert!(
            dil.rederivation_residual <= 1e-8,
            "round {round}: dilation residual {}",
            dil.rederivation_residual
        );
    }
    budget(
        "criterion 05",
        start,
        Duration::from_secs(120),
        format!("200 channels up to total dimension {largest} pass all four checks"),
    );
}

fn diag_root(label: &str, weights: &[f64]) -> Channel {
    let d = weights.len();
    let mut m = Mat::zeros(d, d);
    for (i, w) in weights.iter().enumerate() {
        m[(i, i)] = Complex64::new(*w, 0.0);
    }
    let cj = DenseOperator::from_mat(Dims::single(label, d), m).unwrap();
    Channel::new(Dims::scalar(), Dims::single(label, d), cj, &tol()).unwrap()
}

fn classical_edge(parent: &str, node: &str, p: &[Vec<f64>]) -> Channel {
    let dx = p.len();
    let dy = p[0].len();
    let slot = dual_label(parent);
    let dims = Dims::new(vec![Dim::new(node, dx), Dim::new(dual_label(&slot), dy)]).unwrap();
    let mut mat = Mat::zeros(dx * dy, dx * dy);
    for x in 0..dx {
        for y in 0..dy {
            mat[(x * dy + y, x * dy + y)] = Complex64::new(p[x][y], 0.0);
        }
    }
    let cj = DenseOperator::from_mat(dims, mat).unwrap();
    Channel::new(Dims::single(&slot, dy), Dims::single(node, dx), cj, &tol()).unwrap()
}

fn random_stochastic(dx: usize, dy: usize, rng: &mut impl RngCore) -> Vec<Vec<f64>> {
    let mut cols = vec![vec![0.0; dy]; dx];
    for y in 0..dy {
        let mut col: Vec<f64> = (0..dx).map(|_| u01(rng) + 1e-3).collect();
        let total: f64 = col.iter().sum();
        for x in 0..dx {
            col[x] /= total;
            cols[x][y] = col[x];
        }
    }
    cols
}

fn build_model(
    nodes: &[(&str, usize)],
    edges: &[(&str, &str)],
    channels: Vec<(&str, Channel)>,
) -> QuantumCausalModel {
    let dag = CausalDag::new(
        nodes.iter().map(|(l, d)| (l.to_string(), *d)).collect(),
        edges
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
    )
    .unwrap();
    QuantumCausalModel::new(
        dag,
        channels
            .into_iter()
            .map(|(l, ch)| (l.to_string(), ch))
            .collect(),
    )
}

#[test]
fn criterion_06_classical_models_factorize() {
    let start = Instant::now();
    let mut rng = rng_from_seed(106);
    for round in 0..50 {
        let da = 2 + round % 2;
        let db = 2 + (round / 2) % 2;
        let dc = 2;
        let mut w: Vec<f64> = (0..da).map(|_| u01(&mut rng) + 1e-3).collect();
        let total: f64 = w.iter().sum();
        for x in w.iter_mut() {
            *x /= total;
        }
        let m = if round % 2 == 0 {
            build_model(
                &[("A", da), ("B", db), ("C", dc)],
                &[("A", "B"), ("B", "C")],
                vec![
                    ("A", diag_root("A", &w)),
                    ("B", classical_edge("A", "B", &random_stochastic(db, da, &mut rng))),
                    ("C", classical_edge("B", "C", &random_stochastic(dc, db, &mut rng))),
                ],
            )
        } else {
            build_model(
                &[("A", da), ("B", db), ("C", dc)],
                &[("A", "B"), ("A", "C")],
                vec![
                    ("A", diag_root("A", &w)),
                    ("B", classical_edge("A", "B", &random_stochastic(db, da, &mut rng))),
                    ("C", classical_edge("A", "C", &random_stochastic(dc, da, &mut rng))),
                ],
            )
        };
        let cl = classical_limit(&m, &BTreeMap::new(), &tol()).unwrap();
        assert!(cl.markov_residual <= 1e-12, "round {round}: {}", cl.markov_residual);
        for (outcome, &p) in &cl.joint {
            let mut want = 1.0;
            for (pos, node) in cl.node_order.iter().enumerate() {
                let table = &cl.conditionals[node];
                let parents: Vec<usize> = table
                    .parent_order
                    .iter()
                    .map(|pl| outcome[cl.node_order.iter().position(|n| n == pl).unwrap()])
                    .collect();
                want *= table.prob(outcome[pos], &parents);
            }
            assert!(
                (p - want).abs() <= 1e-12,
                "round {round}, outcome {outcome:?}: {p} vs {want}"
            );
        }
    }
    budget(
        "criterion 06",
        start,
        Duration::from_secs(30),
        "50 diagonal models factorize into their conditional tables".to_string(),
    );
}

#[test]
fn criterion_07_dctc_solutions_are_consistent_and_denoise_uniquely() {
    let start = Instant::now();
    let mut rng = rng_from_seed(107);
    let shapes = [(2usize, 2usize), (2, 3), (3, 2), (1, 4)];
    let mut worst = 0.0f64;
    for round in 0..200 {
        let (dr, dv) = shapes[round % shapes.len()];
        let sol = dctc_evolve(&random_circuit(dr, dv, &mut rng), 0.0, &tol()).unwrap();
        worst = worst.max(sol.fixed_point_residual);
        assert!(sol.fixed_point_residual <= 1e-8, "round {round}");
    }
    let mut worst_gap = 0.0f64;
    for round in 0..100 {
        let circuit = random_circuit(2, 2, &mut rng);
        let a = random_density(circuit.cv_dims(), &mut rng);
        let b = random_density(circuit.cv_dims(), &mut rng);
        let sol_a = dctc_evolve_from(&circuit, 0.05, &a, &tol()).unwrap();
        let sol_b = dctc_evolve_from(&circuit, 0.05, &b, &tol()).unwrap();
        let gap = trace_distance(&sol_a.tau, &sol_b.tau, &tol()).unwrap();
        worst_gap = worst_gap.max(gap);
        assert!(gap <= 1e-7, "round {round}: initializations disagree by {gap}");
    }
    let sol = dctc_evolve(&identity_circuit(2, 3).unwrap(), 0.0, &tol()).unwrap();
    for r in 0..3 {
        for c in 0..3 {
            let want = if r == c { 1.0 / 3.0 } else { 0.0 };
            assert!((sol.tau.at(r, c) - Complex64::new(want, 0.0)).norm() <= 1e-9);
        }
    }
    budget(
        "criterion 07",
        start,
        Duration::from_secs(120),
        format!(
            "200 fixed points (worst residual {worst:.1e}), 100 noisy reruns (worst gap {worst_gap:.1e}), identity gives the uniform state"
        ),
    );
}

#[test]
fn criterion_08_p_operator_bound_and_paradox_behavior() {
    let start = Instant::now();
    let mut rng = rng_from_seed(108);
    let shapes = [(2usize, 2usize), (2, 3), (3, 2), (2, 4), (4, 2)];
    for round in 0..1000 {
        let (dr, dv) = shapes[round % shapes.len()];
        let circuit = random_circuit(dr, dv, &mut rng);
        let p = p_operator(&circuit);
        let v = ginibre_vector(dr, &mut rng);
        let pv = p.mat().matvec(&v);
        assert!(
            vec_norm(&pv) <= dv as f64 * vec_norm(&v) + 1e-9,
            "round {round}: trace-out operator amplified past the register dimension"
        );
    }
    assert!(matches!(
        pctc_evolve(&grandfather_circuit()),
        Err(CoreError::DynamicalParadox)
    ));
    let out = tctc_evolve(&grandfather_circuit());
    assert!((out.rho_f.trace() - Complex64::new(1.0, 0.0)).norm() <= 1e-9);
    assert!(out.p_term_weight.abs() <= 1e-12);
    budget(
        "criterion 08",
        start,
        Duration::from_secs(10),
        "1000 norm trials obey the bound; the paradox circuit fails post-selection and passes the transition rule".to_string(),
    );
}

#[test]
fn criterion_09_bound_tables_reproduce_the_quoted_coefficients() {
    let start = Instant::now();
    let t = bound_tables(0.245, 6, 0.0);
    let large_d = t.large_d.unwrap();
    let slope = t.symmetric_error_slope.unwrap();
    let basic = t.basic.unwrap();
    assert!((large_d - 0.0224).abs() <= 1e-3, "intercept {large_d}");
    assert_eq!(slope, 66.0 / 8.0, "slope must be exact");
    assert!((basic - 0.0305).abs() <= 1e-3, "basic bound {basic}");
    let at_eps = bound_tables(0.245, 6, 0.01).symmetric_error.unwrap();
    assert!(
        (at_eps - (large_d + slope * 0.01)).abs() <= 1e-12,
        "line evaluation {at_eps}"
    );
    budget(
        "criterion 09",
        start,
        Duration::from_secs(1),
        format!("{large_d:.4} + {slope}*eps and basic {basic:.4}"),
    );
}

#[test]
fn criterion_10_mr_inequality_violation_region() {
    let start = Instant::now();
    for eta in [0.01, 0.03, 0.05] {
        let mut violated_at = Vec::new();
        for step in 1..100 {
            let alpha = step as f64 / 100.0;
            if mr_inequality(alpha, eta, eta, 0.0, 0.0).unwrap().violated {
                violated_at.push(alpha);
            }
        }
        assert!(
            !violated_at.is_empty(),
            "eta = {eta}: no violating alpha found"
        );
    }
    let eta = 1.0 / 16.0;
    for step in 1..100 {
        let alpha = step as f64 / 100.0;
        assert!(
            !mr_inequality(alpha, eta, eta, 0.0, 0.0).unwrap().violated,
            "eta = 1/16 must close the violation window (alpha = {alpha})"
        );
    }
    let boundary = mr_inequality(0.5, eta, eta, 0.0, 0.0).unwrap();
    assert!(
        (boundary.lhs - boundary.rhs).abs() <= 1e-12,
        "alpha^2 = 1/4 sits exactly on the boundary"
    );
    budget(
        "criterion 10",
        start,
        Duration::from_secs(1),
        "violation window open at eta in {0.01, 0.03, 0.05}, closed at 1/16 with a boundary tie".to_string(),
    );
}

#[test]
fn criterion_11_lgi_protocol_value_and_classical_range() {
    let start = Instant::now();
    let theta = 2.0 * std::f64::consts::PI / 3.0;
    let initial = PureState::basis(Dims::single("Q", 2), 0).unwrap().density();
    let v = lgi_value(theta, theta, &initial, &tol()).unwrap();
    assert!((v - (-1.5)).abs() <= 1e-9, "protocol value {v}");
    assert!(v < -1.0, "the macrorealist bound is violated");
    for mask in 0..8u8 {
        let s = |bit: u8| if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
        let classical = s(0) * s(1) + s(1) * s(2) + s(0) * s(2);
        assert!(
            classical == -1.0 || classical == 3.0,
            "deterministic assignment yields {classical}"
        );
    }
    budget(
        "criterion 11",
        start,
        Duration::from_secs(1),
        format!("two-point correlators sum to {v:.6}; assignments stay in {{-1, 3}}"),
    );
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
    let states = (0..n).map(|i| format!("l{i}")).collect();
    let preparations = (0..preps)
        .map(|k| (format!("p{k}"), random_dist(n, rng)))
        .collect();
    FiniteOntModel::new(states, preparations, BTreeMap::new(), BTreeMap::new()).unwrap()
}

#[test]
fn criterion_12_overlap_solver_is_exact_and_obeys_the_inequalities() {
    let start = Instant::now();
    let mut rng = rng_from_seed(112);
    for round in 0..50 {
        let n = 6 + round % 7;
        let m = random_prep_model(n, 3, &mut rng);
        let mu = m.preparation("p0").unwrap().to_vec();
        let t1 = m.preparation("p1").unwrap().to_vec();
        let t2 = m.preparation("p2").unwrap().to_vec();
        for eps in [0.1, 0.3] {
            let got = epsilon_asymmetric_overlap(&m, &OverlapQuery::set(&["p1", "p2"], "p0", eps))
                .unwrap();
            let budget_mass = eps - 1e-12;
            let mut best = 0.0f64;
            for mask in 0u32..(1u32 << n) {
                let cost = |t: &[f64]| -> f64 {
                    (0..n).filter(|i| mask >> i & 1 == 1).map(|i| t[i]).sum()
                };
                if cost(&t1) <= budget_mass && cost(&t2) <= budget_mass {
                    best = best.max(cost(&mu));
                }
            }
            assert!(
                (got - (1.0 - best)).abs() <= 1e-12,
                "round {round}, eps {eps}: solver {got} vs enumeration {}",
                1.0 - best
            );
        }
    }
    for round in 0..100 {
        let m = random_prep_model(4 + round % 6, 4, &mut rng);
        let union =
            asymmetric_overlap(&m, &OverlapQuery::set(&["p1", "p2", "p3"], "p0", 0.0)).unwrap();
        let parts: f64 = (1..4)
            .map(|k| {
                asymmetric_overlap(&m, &OverlapQuery::single(&format!("p{k}"), "p0", 0.0)).unwrap()
            })
            .sum();
        assert!(union <= parts + 1e-12, "round {round}: Boole subadditivity");
        let w = symmetric_overlap(&m, "p0", "p1").unwrap();
        let v = asymmetric_overlap(&m, &OverlapQuery::single("p1", "p0", 0.0)).unwrap();
        assert!(w <= v + 1e-10, "round {round}: symmetric exceeds asymmetric");
    }
    budget(
        "criterion 12",
        start,
        Duration::from_secs(60),
        "50 exact solver matches, 100 subadditivity and ordering checks".to_string(),
    );
}

#[test]
fn criterion_13_fingerprinting_bound_at_desk_scale() {
    let start = Instant::now();
    let code = random_code(3, 16, 0.25, 0.75, 113).unwrap();
    let fs = fingerprint_states(&code).unwrap();
    assert_eq!(fs.len(), 8);
    let mut max_ov = 0.0f64;
    for x in 0..8 {
        for y in (x + 1)..8 {
            max_ov = max_ov.max(fs.squared_overlap(x, y));
        }
    }
    assert!(max_ov < 0.25, "pairwise overlap {max_ov}");
    let triples = verify_triples(&fs).unwrap();
    assert!(triples.all_pass);
    assert_eq!(triples.checked, 56);
    let (min_messages, min_bits) = fc_lower_bound(&fs).unwrap();
    assert_eq!(min_messages, 4);
    assert_eq!(min_bits, 2);
    assert_eq!(min_bits, code.n() - 1);
    budget(
        "criterion 13",
        start,
        Duration::from_secs(10),
        format!("8 states, max overlap {max_ov:.3}, 56 triples, bound (4, 2)"),
    );
}

#[test]
fn criterion_14_tctc_outputs_respect_the_distinguishability_bound() {
    let start = Instant::now();
    let mut rng = rng_from_seed(114);
    let shapes = [(2usize, 2usize), (2, 3), (3, 2)];
    let mut tightest = f64::INFINITY;
    for round in 0..100 {
        let (dr, dv) = shapes[round % shapes.len()];
        let circuit = random_circuit(dr, dv, &mut rng);
        let a = PureState::new(circuit.cr_dims().clone(), haar_state_with(dr, &mut rng).unwrap())
            .unwrap();
        let b = PureState::new(circuit.cr_dims().clone(), haar_state_with(dr, &mut rng).unwrap())
            .unwrap();
        let (lhs, rhs) = tctc_distinguishability_bound(&circuit, &a, &b, &tol()).unwrap();
        tightest = tightest.min(rhs - lhs);
        assert!(lhs <= rhs + 1e-9, "round {round}: {lhs} > {rhs}");
    }
    budget(
        "criterion 14",
        start,
        Duration::from_secs(60),
        format!("100 sweeps, zero violations, smallest margin {tightest:.3e}"),
    );
}
