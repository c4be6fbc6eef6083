//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines are
//! always printed.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use curvlab::cone::{
    check_condition_iii, check_condition_iv, invariance_check, membership, Classification, ConeKind, ConeSpec,
};
use curvlab::flow::{integrate, q_term, FlowMethod, FlowOptions};
use curvlab::models::{complex_space_form, product_spheres, random_einstein};
use curvlab::rigidity::{eq3_residual, prop1_residual_symmetric, rigidity_probe, RigidityVerdict};
use curvlab::rng;
use curvlab::tensor::identity_tensor;
use curvlab::CurvTensor;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Six-index summation, independent of the library's `q_term`.
fn q_brute(r: &CurvTensor) -> Vec<f64> {
    let n = r.dim();
    let mut q = vec![0.0; n.pow(4)];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for p in 0..n {
                        for t in 0..n {
                            s += r.get(i, j, p, t) * r.get(k, l, p, t);
                            s += 2.0 * (r.get(i, p, k, t) * r.get(j, p, l, t) - r.get(i, p, l, t) * r.get(j, p, k, t));
                        }
                    }
                    q[((i * n + j) * n + k) * n + l] = s;
                }
            }
        }
    }
    q
}

// Q(I) = 2(n-1) I for n = 4..8, relative residual <= 1e-12, checked
// against the brute-force oracle as well.
fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 4..=8 {
        let i = identity_tensor(n).map_err(err)?;
        let expect = i.scale(2.0 * (n as f64 - 1.0));
        let q = q_term(&i);
        let lib = (&q - &expect).norm() / expect.norm();
        let brute = q_brute(&i);
        let mut diff: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let x = brute[((a * n + b) * n + c) * n + d];
                        diff = diff.max((x - expect.get(a, b, c, d)).abs()).max((x - q.get(a, b, c, d)).abs());
                    }
                }
            }
        }
        worst = worst.max(lib).max(diff / expect.norm());
    }
    check(worst <= 1e-12, format!("max relative residual {worst:e} over n=4..8 (limit 1e-12)"))
}

// eq3_residual <= 1e-10 for 100 random Einstein tensors in each of n = 4, 5
// and 10 random kappa each.
fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in [4usize, 5] {
        for seed in 0..100u64 {
            let r = random_einstein(n, seed).map_err(err)?;
            let mut g = rng::substream(seed, &[0xe3, n as u64]);
            for _ in 0..10 {
                let kappa: f64 = g.random_range(0.0..1.0);
                worst = worst.max(eq3_residual(&r, kappa).map_err(err)?);
                count += 1;
            }
        }
    }
    check(worst <= 1e-10, format!("{count} cases, max residual {worst:e} (limit 1e-10)"))
}

// prop1_residual_symmetric <= 1e-9 on I, S^2 x S^2 and CP^2 for kappa in 0.1..0.9.
fn criterion_3() -> Outcome {
    let models = [
        ("I", identity_tensor(4).map_err(err)?),
        ("product_spheres([2,2],[3,3])", product_spheres(&[2, 2], &[3.0, 3.0]).map_err(err)?),
        ("complex_space_form(2,2)", complex_space_form(2, 2.0).map_err(err)?),
    ];
    let mut worst: f64 = 0.0;
    for (name, r) in &models {
        for k in 1..=9 {
            let kappa = k as f64 / 10.0;
            let res = prop1_residual_symmetric(r, kappa).map_err(|e| format!("{name}: {e}"))?;
            worst = worst.max(res);
        }
    }
    check(worst <= 1e-9, format!("3 models x 9 kappa, max residual {worst:e} (limit 1e-9)"))
}

fn flow_error(method: FlowMethod, step: f64) -> Result<f64, String> {
    let i = identity_tensor(4).map_err(err)?;
    let opts = FlowOptions {
        method,
        step,
        t_end: 0.1,
        ..FlowOptions::default()
    };
    let rec = integrate(&i, &opts).map_err(err)?;
    let t = rec.final_time();
    if (t - 0.1).abs() > 1e-14 {
        return Err(format!("stopped at t = {t}"));
    }
    let exact = i.scale(1.0 / (1.0 - 6.0 * t));
    Ok((rec.final_tensor() - &exact).norm() / exact.norm())
}

// From I (n=4) to t = 0.1: adaptive RK4 within 1e-9 of c(t) = 1/(1 - 6t);
// fixed-step halving gives an error ratio in [12, 20].
fn criterion_4() -> Outcome {
    let adaptive = flow_error(FlowMethod::Rk4Adaptive, 1e-3)?;
    let coarse = flow_error(FlowMethod::Rk4Fixed, 0.01)?;
    let fine = flow_error(FlowMethod::Rk4Fixed, 0.005)?;
    let ratio = coarse / fine;
    check(
        adaptive <= 1e-9 && (12.0..=20.0).contains(&ratio),
        format!("adaptive relative error {adaptive:e} (limit 1e-9); fixed-step errors {coarse:e} / {fine:e}, ratio {ratio:.3} (want [12, 20])"),
    )
}

// Condition (iv) for NIC and the curvature-operator cone; condition (iii)
// on 100 NIC samples at n = 4.
fn criterion_5() -> Outcome {
    let nic = ConeSpec::new(ConeKind::Nic, 4).map_err(err)?;
    let op = ConeSpec::new(ConeKind::NonnegCurvOp, 4).map_err(err)?;
    let iv_nic = check_condition_iv(&nic).map_err(err)?;
    let iv_op = check_condition_iv(&op).map_err(err)?;
    let iii = check_condition_iii(&nic, 100, 5).map_err(err)?;
    let ok = iv_nic.passed()
        && iv_op.passed()
        && (iv_nic.worst - 4.0).abs() <= 1e-9
        && (iv_op.worst - 1.0).abs() <= 1e-9
        && iii.pass == 100;
    check(
        ok,
        format!(
            "iv: NIC margin {}, curv-op margin {}; iii: {}/{} NIC samples pass, min scal/|R| {:.4}",
            iv_nic.worst, iv_op.worst, iii.pass, iii.trials, iii.worst
        ),
    )
}

// 200 NIC boundary samples at n = 4 with min directional value >= -1e-5,
// plus trajectories whose margin stays >= -1e-5 until blowup.
fn criterion_6() -> Outcome {
    let cone = ConeSpec::new(ConeKind::Nic, 4).map_err(err)?;
    let rep = invariance_check(&cone, 200, 42, 5).map_err(err)?;
    let traj_worst = rep
        .trajectories
        .iter()
        .map(|t| t.min_normalized_margin)
        .fold(f64::INFINITY, f64::min);
    let all_blew_up = rep.trajectories.iter().all(|t| t.blowup_detected);
    let ok = rep.trials == 200 && rep.worst >= -1e-5 && traj_worst >= -1e-5 && all_blew_up;
    check(
        ok,
        format!(
            "{}/{} boundary samples, worst min_directional_value {:.6e} (limit -1e-5); {} trajectories to blowup, worst margin {:.6e}",
            rep.pass,
            rep.trials,
            rep.worst,
            rep.trajectories.len(),
            traj_worst
        ),
    )
}

// rigidity_probe on 2I, S^2 x S^2 and random NIC-interior Einstein tensors.
fn criterion_7() -> Outcome {
    let nic = ConeSpec::new(ConeKind::Nic, 4).map_err(err)?;
    let two_i = rigidity_probe(&nic, &identity_tensor(4).map_err(err)?.scale(2.0), "2I").map_err(err)?;
    let s2s2 = rigidity_probe(&nic, &product_spheres(&[2, 2], &[1.0, 1.0]).map_err(err)?, "s2xs2").map_err(err)?;
    let mut msgs = Vec::new();
    let mut ok = true;
    if !((two_i.kappa_star - 1.0).abs() <= 1e-8 && two_i.verdict == RigidityVerdict::ConstantCurvature) {
        ok = false;
        msgs.push(format!("2I: kappa* {} verdict {:?}", two_i.kappa_star, two_i.verdict));
    }
    if !(s2s2.verdict == RigidityVerdict::BoundaryModel
        && s2s2.kappa_star <= 1e-8
        && s2s2.fixed_point_residual <= 1e-10)
    {
        ok = false;
        msgs.push(format!(
            "s2xs2: kappa* {} verdict {:?} fixed point {:e}",
            s2s2.kappa_star, s2s2.verdict, s2s2.fixed_point_residual
        ));
    }
    let (mut lo, mut hi, mut probed) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    for n in [4usize, 5] {
        let cone = ConeSpec::new(ConeKind::Nic, n).map_err(err)?;
        for seed in 0..12u64 {
            let r = random_einstein(n, seed).map_err(err)?;
            if membership(&cone, &r).map_err(err)?.classification != Classification::Interior {
                continue;
            }
            let rep = rigidity_probe(&cone, &r, "random").map_err(err)?;
            probed += 1;
            lo = lo.min(rep.kappa_star);
            hi = hi.max(rep.kappa_star);
        }
    }
    if !(probed > 0 && lo > 0.0 && hi <= 1.0 + 1e-6) {
        ok = false;
    }
    msgs.push(format!(
        "2I kappa* {}; s2xs2 kappa* {} ({:?}); {probed} random Einstein inputs, kappa* in [{lo:.6}, {hi:.6}]",
        two_i.kappa_star, s2s2.kappa_star, s2s2.verdict
    ));
    check(ok, msgs.join("; "))
}

fn run_cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut errs = Vec::new();
    let mut full = vec!["curvlab"];
    full.extend_from_slice(args);
    let code = curvlab_cli::execute(full, &mut out, &mut errs);
    (code, String::from_utf8(out).expect("utf-8 report"))
}

fn strip_timestamp(report: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(report).expect("report is JSON");
    v.as_object_mut().expect("report object").remove("timestamp");
    serde_json::to_string(&v).expect("serialize")
}

// Repeated CLI invocations with the same seed give identical reports apart
// from the timestamp field.
fn criterion_8() -> Outcome {
    let cases: [&[&str]; 5] = [
        &["invariance", "--cone", "nic", "--dim", "4", "--samples", "200", "--seed", "42"],
        &["membership", "--cone", "nic", "--model", "random:5:3", "--seed", "9"],
        &["condition-check", "--cone", "nic", "--which", "iii", "--samples", "20", "--seed", "4"],
        &["rigidity", "--cone", "nic", "--model", "random_einstein:4", "--seed", "11"],
        &["flow", "--model", "random:4:2", "--t-end", "0.05"],
    ];
    for args in cases {
        let (c1, a) = run_cli(args);
        let (c2, b) = run_cli(args);
        if c1 != 0 || c2 != 0 {
            return Err(format!("{} exited with {c1}/{c2}", args[0]));
        }
        let (sa, sb) = (strip_timestamp(&a), strip_timestamp(&b));
        if sa != sb {
            return Err(format!("{} reports differ", args[0]));
        }
        // the timestamp is the only field allowed to differ, and it is last
        let cut = |s: &str| s[..s.find("\"timestamp\"").expect("timestamp present")].to_string();
        if cut(&a) != cut(&b) {
            return Err(format!("{} reports differ outside the timestamp", args[0]));
        }
    }
    check(true, format!("{} commands run twice, byte-identical apart from the timestamp", cases.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("Q(I) = 2(n-1) I against brute force", criterion_1),
        ("pinching identity for Einstein tensors", criterion_2),
        ("pinching identity on symmetric models", criterion_3),
        ("ODE closed form and RK4 order", criterion_4),
        ("cone conditions iii and iv", criterion_5),
        ("NIC invariance at boundary points", criterion_6),
        ("rigidity pipeline", criterion_7),
        ("CLI determinism", criterion_8),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail} [{secs:.1}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {detail} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
