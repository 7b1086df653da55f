//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hyperrigid_core::expr::{parse, BinOp, Expr};
use hyperrigid_core::function_system::FunctionSystem;
use hyperrigid_core::korovkin::{default_probes, korovkin_table, test_functions, MapFamily};
use hyperrigid_core::lab::{
    discretize_volterra, haar_unitary, infinity_obstruction_witness, nearest_matches, real_part_check,
    strictly_negative_element, unitary_generator_demo, unitary_system, volterra_spectral_report,
};
use hyperrigid_core::linalg::{apply_function, eig_hermitian, operator_norm, ComplexMatrix, HermitianMatrix};
use hyperrigid_core::minimax::{
    boundary_envelope, inf_dominating, max_extension, min_extension, sup_dominated, verify_minimax,
    FiniteFunctionSystem,
};
use hyperrigid_core::rigidity::{rigidity_verdict, Verdict};
use hyperrigid_core::uep::{convex_split_witness, direct_sum_check, uep_check, OperatorSystemM, UepParams, UepStatus};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Result<Outcome, String> {
    Ok(Outcome { pass, detail })
}

type Criterion = fn() -> Result<Outcome, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn counterexample() -> Result<Outcome, String> {
    let (verdict, dt) = timed(|| {
        let fs = FunctionSystem::new(0.0, 1.0, parse("abs(x-1/2)").map_err(err)?, 101).map_err(err)?;
        rigidity_verdict(&fs).map_err(err)
    });
    let Verdict::NotRigid { report } = verdict? else {
        return check(false, "verdict RigidCandidate".into());
    };
    let mut diag = report.a.diag_real();
    diag.sort_by(f64::total_cmp);
    let a_ok = diag.len() == 3 && [0.0, 0.25, 0.5].iter().zip(&diag).all(|(w, d)| (w - d).abs() <= 1e-15);

    // Recompute the residuals from the Choi matrix.
    let a = report.a.as_matrix();
    let f = parse("abs(x-1/2)").map_err(err)?;
    let fa = apply_function(&report.a, |x| f.eval(x).unwrap_or(f64::NAN)).map_err(err)?;
    let phi = &report.phi;
    let pa = phi.apply(a).map_err(err)?;
    let fix_a = operator_norm(&(&pa - a));
    let fix_fa = operator_norm(&(&phi.apply(fa.as_matrix()).map_err(err)? - fa.as_matrix()));
    let dev = operator_norm(&(&phi.apply(&a.matmul(a)).map_err(err)? - &pa.matmul(&pa)));
    let ucp = phi.is_ucp();
    let pass = a_ok
        && ucp.is_ucp
        && fix_a <= 1e-10
        && fix_fa <= 1e-10
        && (dev - 0.0625).abs() <= 1e-9
        && report.dimension() <= 7
        && dt < Duration::from_secs(1);
    check(
        pass,
        format!(
            "A = diag{diag:?}, ucp = {}, ‖φ(A)-A‖ = {fix_a:.1e}, ‖φ(f(A))-f(A)‖ = {fix_fa:.1e}, defect = {dev}, dim = {}, {dt:.2?}",
            ucp.is_ucp,
            report.dimension()
        ),
    )
}

fn random_convex_polynomial(rng: &mut ChaCha8Rng) -> Expr {
    // c0 + c1 x + c2 x² + c3 x³ + c4 x⁴ with c2 > 0 and c3, c4 ≥ 0, so f'' > 0 on [0, 1].
    let coeffs = [
        rng.random_range(-1.0..1.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(0.1..2.0),
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..1.0),
    ];
    let x = || Expr::Var;
    let mut e = Expr::num(coeffs[0]);
    for (k, &c) in coeffs.iter().enumerate().skip(1) {
        let term = Expr::bin(
            BinOp::Mul,
            Expr::num(c),
            Expr::bin(BinOp::Pow, x(), Expr::num(k as f64)),
        );
        e = Expr::bin(BinOp::Add, e, term);
    }
    e
}

fn rigid_gate() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut rigid = 0;
    for _ in 0..20 {
        let f = random_convex_polynomial(&mut rng);
        let mut ok = true;
        for m in [101, 201] {
            let fs = FunctionSystem::new(0.0, 1.0, f.clone(), m).map_err(err)?;
            ok &= matches!(rigidity_verdict(&fs).map_err(err)?, Verdict::RigidCandidate);
        }
        rigid += ok as usize;
    }
    let fs = FunctionSystem::new(-1.0, 1.0, parse("x^3").map_err(err)?, 101).map_err(err)?;
    let cube = match rigidity_verdict(&fs).map_err(err)? {
        Verdict::NotRigid { report } => Some(report.deviation),
        Verdict::RigidCandidate => None,
    };
    let pass = rigid == 20 && cube.is_some_and(|d| (d - 1.0).abs() <= 1e-9);
    check(
        pass,
        format!("{rigid}/20 RigidCandidate at m = 101 and 201; x^3 deviation {cube:?}"),
    )
}

fn diag3() -> ComplexMatrix {
    ComplexMatrix::from_real_diag(&[0.0, 0.5, 1.0])
}

fn uep_dichotomy() -> Result<Outcome, String> {
    let a = diag3();
    let params = UepParams::default();
    let (res, dt) = timed(|| -> Result<_, String> {
        let s1 = OperatorSystemM::from_powers(&a, 1).map_err(err)?;
        let r1 = uep_check(&s1, &[a.matmul(&a)], &params).map_err(err)?;
        let s2 = OperatorSystemM::from_powers(&a, 2).map_err(err)?;
        let r2 = uep_check(&s2, &[a.matmul(&a).matmul(&a)], &params).map_err(err)?;
        Ok((r1, r2))
    });
    let (r1, r2) = res?;
    let h = HermitianMatrix::from_real_diag(&[0.0, 0.5, 1.0]);
    let w = convex_split_witness(&h).map_err(err)?;
    let pa = w.apply(&a).map_err(err)?;
    let explicit = operator_norm(&(&w.apply(&a.matmul(&a)).map_err(err)? - &a.matmul(&a)));
    let explicit_fix = operator_norm(&(&pa - &a));
    let pass = r1.status == UepStatus::Violated
        && r1.deviation >= 0.2
        && (explicit - 0.25).abs() <= 1e-12
        && explicit_fix <= 1e-12
        && r2.status == UepStatus::NoViolationFound
        && r2.deviation <= 1e-6
        && r2.restarts == 16
        && dt < Duration::from_secs(30);
    check(
        pass,
        format!(
            "span{{1,A}}: {:?} dev {:.4}; explicit witness {explicit}; span{{1,A,A²}}: {:?} dev {:.1e} over {} restarts; {dt:.2?}",
            r1.status, r1.deviation, r2.status, r2.deviation, r2.restarts
        ),
    )
}

fn direct_sums() -> Result<Outcome, String> {
    let params = UepParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst: f64 = 0.0;
    let mut all = true;
    for i in 0..5 {
        let mut ev: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        ev.sort_by(f64::total_cmp);
        let a = ComplexMatrix::from_real_diag(&ev);
        let s1 = OperatorSystemM::from_powers(&a, 2).map_err(err)?;
        let r1 = uep_check(
            &s1,
            &[a.matmul(&a).matmul(&a)],
            &UepParams {
                seed: i,
                ..params.clone()
            },
        )
        .map_err(err)?;
        let us: Vec<ComplexMatrix> = (0..2).map(|_| haar_unitary(2, &mut rng)).collect();
        let s2 = unitary_system(&us).map_err(err)?;
        let r2 = uep_check(
            &s2,
            &[us[0].matmul(&us[1]), us[0].matmul(&us[0])],
            &UepParams {
                seed: i,
                ..params.clone()
            },
        )
        .map_err(err)?;
        let (_, r) = direct_sum_check(
            &s1,
            &r1,
            &s2,
            &r2,
            &UepParams {
                seed: 100 + i,
                ..params.clone()
            },
        )
        .map_err(err)?;
        all &= r.status == UepStatus::NoViolationFound && r.deviation <= 1e-6;
        worst = worst.max(r.deviation);
    }
    check(
        all,
        format!("5 instances (diag 3x3 ⊕ unitary 2x2), worst deviation {worst:.1e}"),
    )
}

fn unitary_generators() -> Result<Outcome, String> {
    let params = UepParams::default();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut all = true;
    for (n, k) in [(2, 2), (3, 2)] {
        for seed in 0..10 {
            let d = unitary_generator_demo(n, k, seed, &params).map_err(err)?;
            all &= d.report.status == UepStatus::NoViolationFound && d.report.deviation <= 1e-6;
            worst = worst.max(d.report.deviation);
            count += 1;
        }
    }
    check(all, format!("{count} draws, worst deviation {worst:.1e}"))
}

fn volterra_spectra() -> Result<Outcome, String> {
    let r = volterra_spectral_report(256).map_err(err)?;
    let ks = [0, -1, 1, -2, 2];
    let errs: Vec<Vec<f64>> = [64, 128, 256]
        .iter()
        .map(|&n| -> Result<Vec<f64>, String> {
            let d = discretize_volterra(n).map_err(err)?;
            let e = eig_hermitian(&d.b).map_err(err)?;
            Ok(nearest_matches(&e.values, &ks)
                .iter()
                .map(|m| m.relative_error)
                .collect())
        })
        .collect::<Result<_, _>>()?;
    let top5 = &r.matches[..5];
    let within = top5.iter().all(|m| m.relative_error <= 1e-2) && errs[2].iter().all(|&e| e <= 1e-2);
    let monotone = (0..ks.len()).all(|j| errs[0][j] > errs[1][j] && errs[1][j] > errs[2][j]);
    let real = real_part_check(&discretize_volterra(256).map_err(err)?).map_err(err)?;
    let k0 = top5.iter().find(|m| m.k == 0).map(|m| m.computed);
    let pass = real.residual <= 1e-10 && within && monotone && k0.is_some_and(|c| (c + 1.0 / PI).abs() < 1e-2 / PI);
    check(
        pass,
        format!(
            "real-part residual {:.1e}; max rel. error at n=256 {:.1e}; monotone 64→128→256: {monotone}",
            real.residual,
            errs[2].iter().fold(0.0_f64, |m, &e| m.max(e))
        ),
    )
}

fn obstruction() -> Result<Outcome, String> {
    let d = discretize_volterra(64).map_err(err)?;
    let w = infinity_obstruction_witness(&d).map_err(err)?;
    let rv = w.state.expect(&d.v).norm();
    let rvs = w.state.expect(&d.v.adjoint()).norm();
    let one = w.state.expect(&ComplexMatrix::identity(64));
    let v2 = d.v.matmul(&d.v);
    let rv2 = w.state.expect(&(&v2 + &v2.adjoint())).re;

    // The strictly negative element lies in span{V, V†, V², V²†}: it is the
    // Hermitian part of V² - V/2.
    let neg = strictly_negative_element(&d.a, &d.b, 0.5).map_err(err)?;
    let from_v = (&v2 - &d.v.scale_real(0.5)).hermitian_part();
    let in_span = operator_norm(&(neg.s.as_matrix() - from_v.as_matrix()));
    let b2 = d.b.as_matrix().matmul(d.b.as_matrix()).hermitian_part();
    let lam = eig_hermitian(&b2).map_err(err)?.min();
    let pass = rv.max(rvs) <= 1e-10
        && (one.re - 1.0).abs() <= 1e-12
        && one.im.abs() <= 1e-12
        && rv2.abs() > 1e-4
        && neg.strictly_negative
        && (neg.margin - lam).abs() <= 1e-12
        && lam > 0.0
        && in_span <= 1e-13;
    check(
        pass,
        format!(
            "max(|ρ(V)|, |ρ(V†)|) = {:.1e}, ρ(1) = {:.15}, ρ(V²+V²†) = {rv2:.4e}, margin λ_min(B²) = {lam:.4e}",
            rv.max(rvs),
            one.re
        ),
    )
}

fn korovkin() -> Result<Outcome, String> {
    let probes: Vec<_> = default_probes()
        .into_iter()
        .filter(|p| p.label == "sin(pi*x)")
        .collect();
    let (table, dt) = timed(|| {
        korovkin_table(
            &MapFamily::Bernstein { grid: 1001 },
            &test_functions(),
            &probes,
            &[10, 100, 1000],
        )
    });
    let table = table.map_err(err)?;
    let col = |l: &str| table.column(l).ok_or_else(|| format!("missing column {l}"));
    let f0 = col("1")?.errors.iter().fold(0.0_f64, |m, &e| m.max(e));
    let f1 = col("x")?.errors.iter().fold(0.0_f64, |m, &e| m.max(e));
    let f2 = &col("x^2")?.errors;
    let f2_dev = f2
        .iter()
        .zip([10.0, 100.0, 1000.0])
        .fold(0.0_f64, |m, (e, n)| m.max((e - 0.25 / n).abs()));
    let sin = col("sin(pi*x)")?;
    let pass =
        f0 <= 1e-12 && f1 <= 1e-12 && f2_dev <= 1e-10 && sin.strictly_decreasing() && dt < Duration::from_secs(5);
    check(
        pass,
        format!(
            "max err on 1 {f0:.1e}, on x {f1:.1e}; |err(x²) - 1/(4n)| ≤ {f2_dev:.1e}; sin(πx) {:?}; {dt:.2?}",
            sin.errors
        ),
    )
}

fn random_minimax_instance(rng: &mut ChaCha8Rng) -> Result<(FiniteFunctionSystem, Vec<f64>, Vec<f64>), String> {
    let m = rng.random_range(3..9);
    let mut points: Vec<f64> = Vec::new();
    while points.len() < m {
        let p: f64 = rng.random_range(0.0..1.0);
        if points.iter().all(|q| (q - p).abs() > 1e-3) {
            points.push(p);
        }
    }
    let extra = rng.random_range(1..m.min(4));
    let mut basis = vec![vec![1.0; m]];
    for _ in 0..extra {
        basis.push((0..m).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    let fs = FiniteFunctionSystem::new(points, basis).map_err(err)?;
    // States as mixtures of point evaluations.
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let phi = fs.mixture(&weights);
    let x: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
    Ok((fs, phi, x))
}

fn minimax() -> Result<Outcome, String> {
    let fs = FiniteFunctionSystem::from_functions(vec![0.0, 0.5, 1.0], &[&|x| x]).map_err(err)?;
    let phi = fs.evaluation(1);
    let sq = [0.0, 0.25, 1.0];
    let pairs = [
        sup_dominated(&fs, &phi, &sq).map_err(err)?,
        min_extension(&fs, &phi, &sq).map_err(err)?,
        inf_dominating(&fs, &phi, &sq).map_err(err)?,
        max_extension(&fs, &phi, &sq).map_err(err)?,
    ];
    let worked = pairs
        .iter()
        .zip([0.25, 0.25, 0.5, 0.5])
        .all(|(v, w)| (v - w).abs() <= 1e-8);

    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (fs, phi, x) = random_minimax_instance(&mut rng)?;
        let r = verify_minimax(&fs, &phi, &x, 1e-7).map_err(err)?;
        worst = worst.max(r.lower_gap);
    }

    let mut boundary_gap: f64 = 0.0;
    let mut boundary_ok = true;
    for p in [0, 2] {
        let r = boundary_envelope(&fs, p, &sq).map_err(err)?;
        boundary_ok &= r.boundary;
        boundary_gap = boundary_gap.max(r.gap.abs());
    }
    let cube_fs = FiniteFunctionSystem::from_functions(vec![0.0, 0.5, 1.0], &[&|x| x, &|x| x * x]).map_err(err)?;
    for p in 0..3 {
        let r = boundary_envelope(&cube_fs, p, &[0.0, 0.125, 1.0]).map_err(err)?;
        boundary_ok &= r.boundary;
        boundary_gap = boundary_gap.max(r.gap.abs());
    }
    let inner = boundary_envelope(&fs, 1, &sq).map_err(err)?;
    let pass = worked && worst <= 1e-7 && boundary_ok && boundary_gap <= 1e-8 && !inner.boundary && inner.gap >= 0.2;
    check(
        pass,
        format!(
            "worked values {pairs:?}; worst |sup_dominated - min_extension| over 50 = {worst:.1e}; boundary gap {boundary_gap:.1e}; interior gap {}",
            inner.gap
        ),
    )
}

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("1 counterexample for |x-1/2|", counterexample),
        ("2 rigid-candidate gate", rigid_gate),
        ("3 UEP dichotomy", uep_dichotomy),
        ("4 direct sums", direct_sums),
        ("5 unitary generators", unitary_generators),
        ("6 Volterra spectra", volterra_spectra),
        ("7 obstruction witness", obstruction),
        ("8 Korovkin (Bernstein)", korovkin),
        ("9 minimax and envelope", minimax),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let (line, ok) = match f() {
            Ok(o) => (
                format!(
                    "{} criterion {name}: {}",
                    if o.pass { "PASS" } else { "FAIL" },
                    o.detail
                ),
                o.pass,
            ),
            Err(e) => (format!("FAIL criterion {name}: error: {e}"), false),
        };
        println!("{line}");
        failed += !ok as usize;
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
