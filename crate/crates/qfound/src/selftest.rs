//! Built-in verification suite over the library's worked examples: closed-form
//! CTC outputs, copy-channel information values, bound tables, inequality
//! values, and the fingerprinting pipeline. Each check prints one PASS/FAIL
//! line; `corrupt` shifts one check's expected constant (or flips its verdict)
//! as a negative control.

use qfound_core::comm::{fc_lower_bound, fingerprint_states, random_code, verify_triples};
use qfound_core::ctc::{
    dctc_evolve, grandfather_circuit, haar_fourth_moment_ratio, identity_circuit, pctc_evolve,
    tctc_evolve, unproved_theorem_circuit,
};
use qfound_core::dense::{DenseOperator, PureState};
use qfound_core::dims::Dims;
use qfound_core::ontology::{
    anti_distinguishable_triple, bound_tables, construct_theorem_states, lgi_value, mr_inequality,
};
use qfound_core::qci::{check_cmi, check_multipartite_qci, coherent_copy_channel, incoherent_copy_channel};
use qfound_core::random::rng_from_seed;
use qfound_core::{Complex64, CoreError, Tol};

use crate::emit::fmt_f64;

pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

struct Corruptor<'a> {
    target: Option<&'a str>,
}

impl<'a> Corruptor<'a> {
    /// Shift added to an expected constant; large against every tolerance
    /// used below.
    fn bump(&self, name: &str, tol: f64) -> f64 {
        if self.target == Some(name) {
            1000.0 * tol + 0.01
        } else {
            0.0
        }
    }

    fn flip(&self, name: &str, pass: bool) -> bool {
        if self.target == Some(name) {
            !pass
        } else {
            pass
        }
    }
}

fn max_entry_dev(got: &DenseOperator, want: &[(usize, usize, f64)]) -> f64 {
    let n = got.dim();
    let mut dev = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            let expected = want
                .iter()
                .find(|(wr, wc, _)| *wr == r && *wc == c)
                .map(|(_, _, v)| *v)
                .unwrap_or(0.0);
            dev = dev.max((got.at(r, c) - Complex64::new(expected, 0.0)).norm());
        }
    }
    dev
}

pub fn run(seed: u64, corrupt: Option<&str>) -> Vec<CheckOutcome> {
    let tol = Tol::default();
    let cx = Corruptor { target: corrupt };
    let mut out = Vec::new();
    let mut push = |name: &'static str, pass: bool, detail: String| {
        out.push(CheckOutcome { name, pass, detail });
    };

    {
        let name = "tctc-unproved-theorem";
        let b = cx.bump(name, 1e-10);
        let res = tctc_evolve(&unproved_theorem_circuit(1).expect("one-bit registers"));
        let dev = max_entry_dev(
            &res.rho_f,
            &[(0, 0, 0.5 + b), (0, 3, 0.25), (3, 0, 0.25), (3, 3, 0.5)],
        );
        push(name, dev <= 1e-10, format!("max entry deviation {}", fmt_f64(dev)));
    }

    {
        let name = "pctc-unproved-theorem";
        let b = cx.bump(name, 1e-12);
        match pctc_evolve(&unproved_theorem_circuit(1).expect("one-bit registers")) {
            Ok(rho) => {
                let dev = max_entry_dev(
                    &rho,
                    &[(0, 0, 0.5 + b), (0, 3, 0.5), (3, 0, 0.5), (3, 3, 0.5)],
                );
                push(name, dev <= 1e-12, format!("max entry deviation {}", fmt_f64(dev)));
            }
            Err(e) => push(name, false, format!("unexpected error: {e}")),
        }
    }

    {
        let name = "pctc-grandfather-paradox";
        let raised = matches!(
            pctc_evolve(&grandfather_circuit()),
            Err(CoreError::DynamicalParadox)
        );
        push(
            name,
            cx.flip(name, raised),
            format!("paradox raised: {raised}"),
        );
    }

    {
        let name = "tctc-grandfather-state";
        let b = cx.bump(name, 1e-9);
        let res = tctc_evolve(&grandfather_circuit());
        let dev = (res.rho_f.trace() - Complex64::new(1.0 + b, 0.0))
            .norm()
            .max(res.p_term_weight.abs());
        push(
            name,
            dev <= 1e-9,
            format!(
                "trace/p-term deviation {}, mix weight {}",
                fmt_f64(dev),
                fmt_f64(res.mix_term_weight)
            ),
        );
    }

    {
        let name = "dctc-grandfather-tau";
        let b = cx.bump(name, 1e-9);
        match dctc_evolve(&grandfather_circuit(), 0.0, &tol) {
            Ok(sol) => {
                let dev = max_entry_dev(&sol.tau, &[(0, 0, 0.5 + b), (1, 1, 0.5)])
                    .max((sol.entropy_bits - 1.0).abs());
                push(name, dev <= 1e-6, format!("deviation from I/2 {}", fmt_f64(dev)));
            }
            Err(e) => push(name, false, format!("unexpected error: {e}")),
        }
    }

    {
        let name = "dctc-identity-uniform";
        let b = cx.bump(name, 1e-9);
        match identity_circuit(2, 3).and_then(|c| dctc_evolve(&c, 0.0, &tol)) {
            Ok(sol) => {
                let third = 1.0 / 3.0;
                let dev = max_entry_dev(
                    &sol.tau,
                    &[(0, 0, third + b), (1, 1, third), (2, 2, third)],
                );
                push(name, dev <= 1e-9, format!("deviation from I/3 {}", fmt_f64(dev)));
            }
            Err(e) => push(name, false, format!("unexpected error: {e}")),
        }
    }

    {
        let name = "dctc-unproved-family";
        let b = cx.bump(name, 1e-9);
        match dctc_evolve(&unproved_theorem_circuit(1).expect("one-bit registers"), 0.0, &tol) {
            Ok(sol) => {
                let dev = max_entry_dev(&sol.tau, &[(0, 0, 0.5 + b), (1, 1, 0.5)]).max(
                    max_entry_dev(&sol.rho_f, &[(0, 0, 0.5), (3, 3, 0.5)]),
                );
                push(
                    name,
                    dev <= 1e-9,
                    format!("deviation from the uniform solution {}", fmt_f64(dev)),
                );
            }
            Err(e) => push(name, false, format!("unexpected error: {e}")),
        }
    }

    {
        let name = "cmi-coherent-copy";
        let b = cx.bump(name, 1e-9);
        let labels = (vec!["B".to_string()], vec!["C".to_string()]);
        let got = coherent_copy_channel(2, &["B", "C"], "A")
            .and_then(|ch| check_cmi(&ch, &labels.0, &labels.1, &tol));
        match got {
            Ok(v) => push(name, (v - (1.0 + b)).abs() <= 1e-9, format!("I(B:C|A) = {}", fmt_f64(v))),
            Err(e) => push(name, false, format!("unexpected error: {e}")),
        }
    }

    {
        let name = "cmi-incoherent-copy";
        let b = cx.bump(name, 1e-9);
        let labels = (vec!["B".to_string()], vec!["C".to_string()]);
        let got = incoherent_copy_channel(2, &["B", "C"], "A")
            .and_then(|ch| check_cmi(&ch, &labels.0, &labels.1, &tol));
        match got {
            Ok(v) => push(name, (v - b).abs() <= 1e-9, format!("I(B:C|A) = {}", fmt_f64(v))),
            Err(e) => push(name, false, format!("unexpected error: {e}")),
        }
    }

    {
        let name = "qci-incoherent-copy";
        let mut rng = rng_from_seed(seed ^ 0x51);
        let parts = vec![vec!["B".to_string()], vec!["C".to_string()]];
        let got = incoherent_copy_channel(2, &["B", "C"], "A")
            .and_then(|ch| check_multipartite_qci(&ch, &parts, &tol, &mut rng));
        match got {
            Ok(rep) => {
                let dec_ok = rep.decomposition.as_ref().is_some_and(|d| d.residual <= 1e-6);
                let dil_ok = rep
                    .dilation
                    .as_ref()
                    .is_some_and(|d| d.rederivation_residual <= 1e-8);
                let pass = rep.factorises && rep.commutes && rep.cmi_value <= 1e-6 && dec_ok && dil_ok;
                push(
                    name,
                    cx.flip(name, pass),
                    format!(
                        "factorises {}, cmi {}, decomposition {}, dilation {}",
                        rep.factorises,
                        fmt_f64(rep.cmi_value),
                        dec_ok,
                        dil_ok
                    ),
                );
            }
            Err(e) => push(name, false, format!("unexpected error: {e}")),
        }
    }

    {
        let name = "haar-moment-ratio";
        let b = cx.bump(name, 0.05);
        match haar_fourth_moment_ratio(2, 100_000, seed ^ 0x77) {
            Ok(r) => push(name, (r - (2.0 + b)).abs() <= 0.05, format!("ratio = {}", fmt_f64(r))),
            Err(e) => push(name, false, format!("unexpected error: {e}")),
        }
    }

    {
        let name = "bounds-error-tolerance";
        let b = cx.bump(name, 1e-3);
        let t = bound_tables(0.245, 6, 0.0);
        let large_d = t.large_d.unwrap_or(f64::NAN);
        let slope = t.symmetric_error_slope.unwrap_or(f64::NAN);
        let basic = t.basic.unwrap_or(f64::NAN);
        let pass = (large_d - (0.0224 + b)).abs() <= 1e-3
            && slope == 66.0 / 8.0
            && (basic - 0.0305).abs() <= 1e-3;
        push(
            name,
            pass,
            format!(
                "large_d {}, slope {}, basic {}",
                fmt_f64(large_d),
                fmt_f64(slope),
                fmt_f64(basic)
            ),
        );
    }

    {
        let name = "max-epistemic-bound";
        let b = cx.bump(name, 1e-12);
        let v = bound_tables(0.5, 4, 0.0).max_epistemic.unwrap_or(f64::NAN);
        push(
            name,
            (v - (0.1875 + b)).abs() <= 1e-12,
            format!("bound = {}", fmt_f64(v)),
        );
    }

    {
        let name = "theorem-states";
        let b = cx.bump(name, 1e-12);
        match construct_theorem_states(0.5, 4) {
            Ok(ts) => {
                let a = ts.zero.inner(&ts.psi).norm_sqr();
                let bb = ts.psi.inner(&ts.phi).norm_sqr();
                let cc = ts.zero.inner(&ts.phi).norm_sqr();
                let dev = (a - (0.25 + b)).abs().max((bb - 0.25).abs());
                let anti = anti_distinguishable_triple(a, bb, cc).unwrap_or(false);
                push(
                    name,
                    dev <= 1e-12 && anti,
                    format!("overlap deviation {}, anti-distinguishable {anti}", fmt_f64(dev)),
                );
            }
            Err(e) => push(name, false, format!("unexpected error: {e}")),
        }
    }

    {
        let name = "lgi-violation";
        let b = cx.bump(name, 1e-9);
        let theta = 2.0 * std::f64::consts::PI / 3.0;
        let initial = PureState::basis(Dims::single("Q", 2), 0)
            .expect("qubit basis state")
            .density();
        match lgi_value(theta, theta, &initial, &tol) {
            Ok(v) => push(
                name,
                (v - (-1.5 + b)).abs() <= 1e-9 && v < -1.0,
                format!("value = {}", fmt_f64(v)),
            ),
            Err(e) => push(name, false, format!("unexpected error: {e}")),
        }
    }

    {
        let name = "mr-inequality";
        let violated_low = mr_inequality(0.5, 0.05, 0.05, 0.0, 0.0).map(|r| r.violated);
        let violated_tie = mr_inequality(0.5, 1.0 / 16.0, 1.0 / 16.0, 0.0, 0.0).map(|r| r.violated);
        match (violated_low, violated_tie) {
            (Ok(lo), Ok(tie)) => push(
                name,
                cx.flip(name, lo && !tie),
                format!("violated at eta=0.05: {lo}, at eta=1/16: {tie}"),
            ),
            (e1, e2) => push(name, false, format!("unexpected: {e1:?} {e2:?}")),
        }
    }

    {
        let name = "comm-fingerprints";
        let run = || -> Result<(f64, bool, (usize, usize)), CoreError> {
            let code = random_code(3, 16, 0.25, 0.75, seed ^ 0x33)?;
            let fs = fingerprint_states(&code)?;
            let mut max_ov = 0.0f64;
            for x in 0..fs.len() {
                for y in (x + 1)..fs.len() {
                    max_ov = max_ov.max(fs.squared_overlap(x, y));
                }
            }
            let triples = verify_triples(&fs)?;
            let bound = fc_lower_bound(&fs)?;
            Ok((max_ov, triples.all_pass, bound))
        };
        match run() {
            Ok((max_ov, all_pass, bound)) => {
                let pass = max_ov < 0.25 && all_pass && bound == (4, 2);
                push(
                    name,
                    cx.flip(name, pass),
                    format!(
                        "max overlap {}, triples pass {all_pass}, bound ({}, {})",
                        fmt_f64(max_ov),
                        bound.0,
                        bound.1
                    ),
                );
            }
            Err(e) => push(name, false, format!("unexpected error: {e}")),
        }
    }

    out
}

pub fn render(outcomes: &[CheckOutcome]) -> (String, bool) {
    let mut text = String::new();
    let mut passed = 0usize;
    for o in outcomes {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        passed += o.pass as usize;
        text.push_str(&format!("{tag} {}: {}\n", o.name, o.detail));
    }
    text.push_str(&format!(
        "selftest: {passed} passed, {} failed\n",
        outcomes.len() - passed
    ));
    (text, passed == outcomes.len())
}
