//! Acceptance suite. Each test checks one acceptance criterion at its tolerance
//! and prints a single `PASS` or `FAIL` line; run with `--nocapture` to see
//! them.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use prclab::analysis::{
    canonical_one, classify, cost, grad_cost, identify, ClassLabel, IdentifyOptions, DEFAULT_TIE_TOL,
};
use prclab::metrics::{
    cross_correlation, distance, horizontal_project, inner, norm, optimal_shift, PhaseSignal, PrcSpace,
};
use prclab::models::{
    goodwin_model, morris_lecar_model, radial_clock_model, Goodwin, GoodwinParams, Model, MorrisLecarParams,
    RadialClockParams,
};
use prclab::orbit::{continue_orbit, find_orbit, NewtonOptions, OrbitOptions, PeriodicOrbit, Scheme};
use prclab::prc::{adjoint_prc, direct_prc, DirectOptions, Stimulus};
use prclab::sensitivity::sensitivity_bundle;

/// Criteria run one at a time so that each runtime is measured alone.
static SERIAL: Mutex<()> = Mutex::new(());

/// Collects the checks of one criterion and reports them on one line.
struct Criterion {
    id: &'static str,
    start: Instant,
    checks: Vec<(String, bool)>,
    _turn: MutexGuard<'static, ()>,
}

impl Criterion {
    fn new(id: &'static str) -> Self {
        let turn = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
        Self { id, start: Instant::now(), checks: vec![], _turn: turn }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn within(&mut self, what: &str, value: f64, limit: f64) {
        self.check(format!("{what} = {value:.3e} (limit {limit:.0e})"), value <= limit);
    }

    fn runtime(&mut self, limit_s: f64) {
        let t = self.start.elapsed().as_secs_f64();
        self.check(format!("runtime {t:.1} s (limit {limit_s} s)"), t < limit_s);
    }

    fn finish(self) {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
        let all: Vec<&str> = self.checks.iter().map(|c| c.0.as_str()).collect();
        if failed.is_empty() {
            println!("PASS {}: {}", self.id, all.join("; "));
        } else {
            println!("FAIL {}: {}", self.id, failed.join("; "));
        }
        assert!(failed.is_empty(), "{} failed: {}", self.id, failed.join("; "));
    }
}

fn goodwin(k: f64, tau: f64) -> Goodwin {
    goodwin_model(GoodwinParams { k, tau, nu: 20.0 }).unwrap()
}

fn opts(segments: usize, scheme: Scheme) -> OrbitOptions {
    OrbitOptions { segments, scheme, ..OrbitOptions::default() }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn rel_l2(a: &PhaseSignal, b: &PhaseSignal) -> f64 {
    norm(&a.axpy(-1.0, b).unwrap()) / norm(b)
}

fn radial_case(c: &mut Criterion, scheme: Scheme) {
    let m = radial_clock_model(RadialClockParams { omega0: 2.0 * PI, kappa: 1.0, gain: 1.0 }).unwrap();
    let o = find_orbit(&m, &m.params(), &opts(256, scheme)).unwrap();
    let (_, q) = adjoint_prc(&m, &o).unwrap();
    let exact: Vec<f64> = (0..q.len()).map(|j| -q.phase(j).sin()).collect();
    c.within("relative omega error", (o.omega() - 2.0 * PI).abs() / (2.0 * PI), 1e-6);
    c.within("sup |q + sin|", sup_diff(q.values(), &exact), 1e-6);
    c.runtime(5.0);
}

#[test]
fn radial_clock_multiple_shooting() {
    let mut c = Criterion::new("analytic PRC, multiple shooting");
    radial_case(&mut c, Scheme::MultipleShooting);
    c.finish();
}

#[test]
fn radial_clock_trapezoidal() {
    let mut c = Criterion::new("analytic PRC, trapezoidal");
    radial_case(&mut c, Scheme::Trapezoidal);
    c.finish();
}

#[test]
fn adjoint_direct_consistency() {
    let mut c = Criterion::new("adjoint vs direct PRC");
    let m = goodwin(2.0, 1.0);
    let o = find_orbit(&m, &[2.0, 1.0], &opts(128, Scheme::MultipleShooting)).unwrap();
    let (_, q) = adjoint_prc(&m, &o).unwrap();
    let phases: Vec<f64> = (0..q.len()).map(|j| q.phase(j)).collect();
    let qmax = q.sup_norm();
    let err = |alpha: f64| {
        let prc =
            direct_prc(&m, &o, &Stimulus::Impulse { amplitude: alpha }, &phases, &DirectOptions::default()).unwrap();
        let scaled: Vec<f64> = prc.shifts.iter().map(|s| s / alpha).collect();
        sup_diff(&scaled, q.values())
    };
    let (e2, e3) = (err(1e-2), err(1e-3));
    c.within("sup |PRC/alpha - q| / |q| at alpha = 1e-3", e3 / qmax, 0.05);
    let ratio = e2 / e3;
    c.check(format!("error ratio 1e-2 : 1e-3 = {ratio:.2} (range [5, 20])"), (5.0..=20.0).contains(&ratio));
    c.runtime(120.0);
    c.finish();
}

fn normalization_case(c: &mut Criterion, scheme: Scheme) {
    let rad = radial_clock_model(RadialClockParams::default()).unwrap();
    let ml = morris_lecar_model(MorrisLecarParams::default()).unwrap();
    let cases: Vec<(&str, Box<dyn Model>, Vec<f64>)> = vec![
        ("radial clock", Box::new(rad), vec![1.0, 1.0, 1.0]),
        ("Goodwin (2, 1)", Box::new(goodwin(2.0, 1.0)), vec![2.0, 1.0]),
        ("Goodwin (3, 1.5)", Box::new(goodwin(3.0, 1.5)), vec![3.0, 1.5]),
        ("Morris-Lecar (45, 4)", Box::new(ml), vec![45.0, 4.0]),
    ];
    for (name, m, lambda) in cases {
        let o = find_orbit(&*m, &lambda, &opts(256, scheme)).unwrap();
        let (g, _) = adjoint_prc(&*m, &o).unwrap();
        c.within(&format!("{name}: max |<p, f> - omega| / omega"), g.normalization_error(&*m, &o) / o.omega(), 1e-8);
    }
}

#[test]
fn normalization_multiple_shooting() {
    let mut c = Criterion::new("normalization, multiple shooting");
    normalization_case(&mut c, Scheme::MultipleShooting);
    c.finish();
}

#[test]
fn normalization_trapezoidal() {
    let mut c = Criterion::new("normalization, trapezoidal");
    normalization_case(&mut c, Scheme::Trapezoidal);
    c.finish();
}

/// Central differences of ω, T and q in parameter `j` by full re-solves.
fn central(m: &Goodwin, o: &PeriodicOrbit, j: usize, rel: f64) -> (f64, f64, PhaseSignal) {
    let lambda = o.lambda().to_vec();
    let h = rel * lambda[j];
    let solve = |s: f64| {
        let mut l = lambda.clone();
        l[j] += s * h;
        let oo = continue_orbit(m, o, &l, &NewtonOptions::default()).unwrap();
        let q = adjoint_prc(m, &oo).unwrap().1;
        (oo.omega(), oo.period(), q)
    };
    let (wp, tp, qp) = solve(1.0);
    let (wm, tm, qm) = solve(-1.0);
    ((wp - wm) / (2.0 * h), (tp - tm) / (2.0 * h), qp.axpy(-1.0, &qm).unwrap().scale(1.0 / (2.0 * h)))
}

#[test]
fn sensitivity_finite_differences() {
    let mut c = Criterion::new("sensitivities vs finite differences");
    for scheme in [Scheme::MultipleShooting, Scheme::Trapezoidal] {
        let m = goodwin(2.0, 1.0);
        let o = find_orbit(&m, &[2.0, 1.0], &opts(128, scheme)).unwrap();
        let b = sensitivity_bundle(&m, &o).unwrap();
        let (sw, st, sq) = (b.s_omega(), b.s_period(), b.s_q());
        for j in 0..2 {
            let name = format!("{scheme:?} {}", b.param_names[j]);
            let (fw, ft, fq) = central(&m, &o, j, 1e-4);
            c.within(&format!("{name}: S^omega"), (fw - sw[j]).abs() / sw[j].abs(), 1e-3);
            c.within(&format!("{name}: S^T"), (ft - st[j]).abs() / st[j].abs(), 1e-3);
            c.within(&format!("{name}: S^q (L2)"), rel_l2(&fq, sq[j]), 1e-3);
            // At 1e-4 the truncation error is below solver noise, so the
            // order is read off at larger steps.
            let disc = |rel: f64| {
                let (fw, _, fq) = central(&m, &o, j, rel);
                ((fw - sw[j]).abs() / sw[j].abs(), rel_l2(&fq, sq[j]))
            };
            let (a, b2) = (disc(8e-3), disc(4e-3));
            for (what, r) in [("S^omega", a.0 / b2.0), ("S^q", a.1 / b2.1)] {
                c.check(format!("{name}: {what} halving ratio {r:.2} (range [3, 5])"), (3.0..=5.0).contains(&r));
            }
        }
    }
    c.runtime(60.0);
    c.finish();
}

/// Random trigonometric polynomial of degree at most 8.
fn smooth(rng: &mut ChaCha8Rng, n: usize) -> PhaseSignal {
    let coef: Vec<(f64, f64)> = (0..=8)
        .map(|k| {
            let decay = 1.0 / (1.0 + k as f64);
            (rng.random_range(-1.0..1.0) * decay, rng.random_range(-1.0..1.0) * decay)
        })
        .collect();
    PhaseSignal::from_fn(n, |t| {
        coef.iter().enumerate().map(|(k, (a, b))| a * (k as f64 * t).cos() + b * (k as f64 * t).sin()).sum()
    })
}

#[test]
fn metric_suite() {
    let mut c = Criterion::new("metric suite");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 256;
    let grid = 2.0 * PI * 17.0 / n as f64;

    let (mut on, mut off) = (0.0_f64, 0.0_f64);
    for _ in 0..20 {
        let q = smooth(&mut rng, n);
        let a = rng.random_range(0.2..5.0);
        let s = rng.random_range(0.0..2.0 * PI);
        on = on.max(distance(PrcSpace::B, &q, &q.scale(a)).unwrap());
        on = on.max(distance(PrcSpace::C, &q, &q.shifted(grid)).unwrap());
        on = on.max(distance(PrcSpace::D, &q, &q.shifted(grid).scale(a)).unwrap());
        off = off.max(distance(PrcSpace::C, &q, &q.shifted(s)).unwrap());
        off = off.max(distance(PrcSpace::D, &q.shifted(s).scale(a), &q).unwrap());
    }
    c.within("scale/shift identification on grid", on, 1e-12);
    c.within("scale/shift identification off grid", off, 1e-6);

    let mut corr = 0.0_f64;
    for m in [16, 64, 256, 512] {
        let (a, b) = (smooth(&mut rng, m), smooth(&mut rng, m));
        let fast = cross_correlation(&a, &b).unwrap();
        for (k, f) in fast.iter().enumerate() {
            let brute: f64 = (0..m).map(|i| a.values()[i] * b.values()[(i + k) % m]).sum::<f64>() * 2.0 * PI / m as f64;
            corr = corr.max((f - brute).abs());
        }
    }
    c.within("DFT vs brute-force correlation", corr, 1e-10);

    let (mut ortho, mut idem) = (0.0_f64, 0.0_f64);
    for _ in 0..20 {
        let (q, eta) = (smooth(&mut rng, n), smooth(&mut rng, n));
        let dq = prclab::metrics::derivative(&q);
        ortho = ortho.max(inner(&q, &dq).unwrap().abs());
        for space in PrcSpace::ALL {
            let p = horizontal_project(space, &q, &eta).unwrap();
            let pp = horizontal_project(space, &q, &p).unwrap();
            idem = idem.max(sup_diff(p.values(), pp.values()));
            if space.scale_invariant() {
                ortho = ortho.max(inner(&p, &q).unwrap().abs());
            }
            if space.shift_invariant() {
                ortho = ortho.max(inner(&p, &dq).unwrap().abs());
            }
        }
    }
    c.within("projection orthogonality", ortho, 1e-10);
    c.within("projection idempotence", idem, 1e-12);

    let mut worst = f64::NEG_INFINITY;
    let mut axioms = true;
    for space in PrcSpace::ALL {
        for _ in 0..100 {
            let (a, b, d) = (smooth(&mut rng, n), smooth(&mut rng, n), smooth(&mut rng, n));
            let ab = distance(space, &a, &b).unwrap();
            let bd = distance(space, &b, &d).unwrap();
            let ad = distance(space, &a, &d).unwrap();
            worst = worst.max(ad - ab - bd);
            axioms &= ab == distance(space, &b, &a).unwrap() && distance(space, &a, &a).unwrap() == 0.0;
        }
    }
    c.check(format!("triangle inequality excess {worst:.3e} (limit 1e-9)"), worst <= 1e-9);
    c.check("symmetry and d(q, q) = 0 exact", axioms);

    let shift = optimal_shift(&PhaseSignal::from_fn(n, f64::sin), &PhaseSignal::from_fn(n, f64::cos)).unwrap();
    c.within("optimal shift of (sin, cos) vs 3pi/2", (shift.sigma - 1.5 * PI).abs(), 1e-12);
    c.runtime(30.0);
    c.finish();
}

#[test]
fn cost_gradient() {
    let mut c = Criterion::new("cost gradient vs finite differences");
    // Away from tau = 1, where the shape of q is stationary in tau and the
    // scale-invariant gradients have a vanishing tau component.
    let lambda = [2.2, 1.3];
    let m = goodwin(lambda[0], lambda[1]);
    let o = find_orbit(&m, &lambda, &opts(128, Scheme::MultipleShooting)).unwrap();
    let q_ref = adjoint_prc(&m, &find_orbit(&m, &[2.5, 1.0], &opts(128, Scheme::MultipleShooting)).unwrap()).unwrap().1;
    let b = sensitivity_bundle(&m, &o).unwrap();
    let h = 1e-4;
    let shifted_q = |j: usize, s: f64| {
        let mut l = lambda.to_vec();
        l[j] += s * h * l[j];
        adjoint_prc(&m, &continue_orbit(&m, &o, &l, &NewtonOptions::default()).unwrap()).unwrap().1
    };
    let qs: Vec<(PhaseSignal, PhaseSignal)> = (0..2).map(|j| (shifted_q(j, 1.0), shifted_q(j, -1.0))).collect();
    for space in PrcSpace::ALL {
        let g = grad_cost(space, &b.q, &q_ref, &b.s_q()).unwrap();
        for j in 0..2 {
            let (qp, qm) = &qs[j];
            let fd = (cost(space, qp, &q_ref).unwrap() - cost(space, qm, &q_ref).unwrap()) / (2.0 * h * lambda[j]);
            c.within(
                &format!("space {space:?}, dV/d{} = {:.4e}", b.param_names[j], g[j]),
                (g[j] - fd).abs() / g[j].abs(),
                1e-3,
            );
        }
    }
    c.runtime(120.0);
    c.finish();
}

#[test]
fn identification() {
    let mut c = Criterion::new("identification");
    let m = goodwin(3.0, 1.0);
    let id = IdentifyOptions { orbit: opts(128, Scheme::Trapezoidal), ..IdentifyOptions::default() };
    let q_ref = adjoint_prc(&m, &find_orbit(&m, &[3.0, 1.0], &id.orbit).unwrap()).unwrap().1;
    let mut finals = vec![];
    for start in [[3.6, 1.2], [2.4, 0.8]] {
        let r = identify(&m, &q_ref, &start, PrcSpace::D, &id).unwrap();
        let monotone = r.trace.windows(2).all(|w| w[1].cost <= w[0].cost);
        c.check(format!("start {start:?}: monotone trace over {} iterations", r.trace.len()), monotone);
        let q = adjoint_prc(&m, &find_orbit(&m, &r.lambda, &id.orbit).unwrap()).unwrap().1;
        c.within(
            &format!("start {start:?}: final dist_D (lambda {:.4?})", r.lambda),
            distance(PrcSpace::D, &q, &q_ref).unwrap(),
            1e-3,
        );
        finals.push((r.lambda.clone(), r.cost));
    }
    let (la, ca) = &finals[0];
    let (lb, cb) = &finals[1];
    let apart = la.iter().zip(lb).any(|(a, b)| (a - b).abs() > 1e-2 * a.abs().max(b.abs()));
    if apart {
        let spread = (ca - cb).abs() / ca.max(*cb);
        c.check(format!("distinct minima, final costs within {spread:.2} (limit 0.1)"), spread <= 0.1);
    } else {
        c.check("both starts reach the same minimum", true);
    }
    c.runtime(600.0);
    c.finish();
}

/// Steady-state current `I(V)` at which `V` is an equilibrium.
fn steady_current(p: &MorrisLecarParams, v: f64) -> f64 {
    let m = 0.5 * (1.0 + ((v - p.v1) / p.v2).tanh());
    let w = 0.5 * (1.0 + ((v - p.v3) / p.v4).tanh());
    p.g_ca * m * (v - p.v_ca) + p.g_k * w * (v - p.v_k) + p.g_l * (v - p.v_l)
}

/// Local maximum of the steady-state I–V curve (the saddle-node current),
/// or `None` when the curve is monotone and every equilibrium is unique.
fn saddle_node_current(p: &MorrisLecarParams) -> Option<f64> {
    let vs: Vec<f64> = (0..=30000).map(|k| -80.0 + 0.005 * k as f64).collect();
    let is: Vec<f64> = vs.iter().map(|&v| steady_current(p, v)).collect();
    (1..is.len() - 1).find(|&k| is[k] > is[k - 1] && is[k] >= is[k + 1]).map(|k| is[k])
}

/// First `I_app` on a unit grid from `from` at which a stable cycle is found.
fn onset(g_ca: f64, from: f64) -> (f64, PeriodicOrbit) {
    let m = morris_lecar_model(MorrisLecarParams { g_ca, ..Default::default() }).unwrap();
    let o = opts(128, Scheme::MultipleShooting);
    let mut i = from;
    loop {
        if let Ok(orbit) = find_orbit(&m, &[i, g_ca], &o) {
            return (i, orbit);
        }
        i += 1.0;
        assert!(i < from + 150.0, "no oscillation for g_ca = {g_ca}");
    }
}

fn ml_label(g_ca: f64, i_app: f64) -> (ClassLabel, f64, f64, f64) {
    let m = morris_lecar_model(MorrisLecarParams { g_ca, ..Default::default() }).unwrap();
    let o = find_orbit(&m, &[i_app, g_ca], &opts(128, Scheme::MultipleShooting)).unwrap();
    let q = adjoint_prc(&m, &o).unwrap().1;
    let cl = classify(&q, PrcSpace::D, DEFAULT_TIE_TOL).unwrap();
    (cl.label, cl.d_one, cl.d_two, o.period())
}

#[test]
fn classification() {
    let mut c = Criterion::new("classification");
    let one = classify(&canonical_one(256), PrcSpace::D, DEFAULT_TIE_TOL).unwrap();
    c.check(
        format!("1 - cos: {} with d_I = {:.1e}", one.label, one.d_one),
        one.label == ClassLabel::ClassOne && one.d_one == 0.0,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut all_two = true;
    for _ in 0..50 {
        let (a, s) = (rng.random_range(0.01..100.0), rng.random_range(0.0..2.0 * PI));
        let q = PhaseSignal::from_fn(256, |t| a * (t + PI + s).sin());
        all_two &= classify(&q, PrcSpace::D, DEFAULT_TIE_TOL).unwrap().label == ClassLabel::ClassTwo;
    }
    c.check("alpha sin(theta + pi + sigma), 50 random draws: class-q_II", all_two);

    // Large g_Ca: the cycle is born on the saddle-node of the I-V curve.
    for g_ca in [4.0, 5.0] {
        let p = MorrisLecarParams { g_ca, ..Default::default() };
        let knee = saddle_node_current(&p).expect("non-monotone I-V curve");
        let (i0, _) = onset(g_ca, knee.floor() - 5.0);
        let (label, d1, d2, t) = ml_label(g_ca, i0);
        c.check(
            format!("g_Ca = {g_ca}, I = {i0} (saddle-node at {knee:.2}, T = {t:.0}): {label} ({d1:.3} vs {d2:.3})"),
            (i0 - knee).abs() <= 2.0 && label == ClassLabel::ClassOne,
        );
    }
    // Small g_Ca: a unique equilibrium, so the onset is a Hopf bifurcation.
    let p = MorrisLecarParams { g_ca: 1.5, ..Default::default() };
    let mono = saddle_node_current(&p).is_none();
    let (i0, _) = onset(1.5, 80.0);
    let (label, d1, d2, t) = ml_label(1.5, i0);
    c.check(
        format!("g_Ca = 1.5, I = {i0} (monotone I-V: {mono}, T = {t:.0}): {label} ({d1:.3} vs {d2:.3})"),
        mono && label == ClassLabel::ClassTwo,
    );
    // Hopf onset, yet the PRC away from onset is closest to q_I.
    let p = MorrisLecarParams { g_ca: 2.0, ..Default::default() };
    let mono = saddle_node_current(&p).is_none();
    let (i0, _) = onset(2.0, 50.0);
    let (label, d1, d2, t) = ml_label(2.0, i0 + 10.0);
    c.check(
        format!(
            "g_Ca = 2, I = {} (onset {i0}, monotone I-V: {mono}, T = {t:.0}): {label} ({d1:.3} vs {d2:.3})",
            i0 + 10.0
        ),
        mono && label == ClassLabel::ClassOne,
    );
    c.runtime(900.0);
    c.finish();
}

#[test]
fn scheme_cross_validation() {
    let mut c = Criterion::new("shooting vs trapezoidal");
    let m = goodwin(2.0, 1.0);
    let w_ref = find_orbit(&m, &[2.0, 1.0], &opts(256, Scheme::MultipleShooting)).unwrap().omega();
    let err =
        |n: usize| (find_orbit(&m, &[2.0, 1.0], &opts(n, Scheme::Trapezoidal)).unwrap().omega() - w_ref).abs() / w_ref;
    let (e256, e512) = (err(256), err(512));
    c.within("relative omega difference at N = 256", e256, 1e-3);
    let r = e256 / e512;
    c.check(format!("error ratio N = 256 : 512 = {r:.3} (range [3.6, 4.4])"), (3.6..=4.4).contains(&r));
    c.finish();
}

fn prclab(sub: &str, config: &Path, out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_prclab"))
        .args([sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("PRCLAB_THREADS", "2")
        .output()
        .unwrap()
}

#[test]
fn cli_determinism() {
    let mut c = Criterion::new("CLI determinism and validation");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("goodwin.json");
    std::fs::write(
        &cfg,
        r#"{"schema": "prclab/1", "model": {"kind": "goodwin", "K": 2.0, "tau": 1.0},
            "orbit": {"segments": 32}, "seed": 7,
            "identify": {"target": {"lambda": [2.2, 1.1]}, "random_starts": 1, "options": {"max_iter": 3, "orbit": {"segments": 32}}}}"#,
    )
    .unwrap();
    for sub in ["orbit", "prc", "sens", "robustness", "identify", "classify"] {
        let (a, b) = (dir.path().join(format!("{sub}-a")), dir.path().join(format!("{sub}-b")));
        let (ra, rb) = (prclab(sub, &cfg, &a), prclab(sub, &cfg, &b));
        let mut same = ra.status.success() && rb.status.success();
        let mut files: Vec<_> =
            std::fs::read_dir(&a).map(|d| d.map(|e| e.unwrap().file_name()).collect()).unwrap_or_default();
        files.sort();
        same &= !files.is_empty();
        for f in &files {
            same &= std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap();
        }
        c.check(format!("{sub}: {} files byte-identical", files.len()), same);
    }
    let bad = [
        ("unknown key", r#"{"schema": "prclab/1", "orbit": {"segmnts": 32}}"#, "orbit.segmnts"),
        ("wrong schema", r#"{"schema": "prclab/0"}"#, "schema"),
        ("wrong type", r#"{"schema": "prclab/1", "space": 4}"#, "space"),
        ("missing schema", r#"{"model": {"kind": "goodwin", "K": 2.0, "tau": 1.0}}"#, ""),
    ];
    for (what, text, key) in bad {
        let p = dir.path().join("bad.json");
        std::fs::write(&p, text).unwrap();
        let r = prclab("orbit", &p, &dir.path().join("bad"));
        let err = String::from_utf8_lossy(&r.stderr);
        let ok = r.status.code() == Some(1) && err.contains(key);
        c.check(format!("{what}: exit {:?}, points at {key:?}", r.status.code()), ok);
    }
    c.finish();
}
