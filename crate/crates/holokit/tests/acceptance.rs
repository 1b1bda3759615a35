//! Acceptance gate: one PASS/FAIL line per primary criterion.

use holokit_core::dynamics::{self, SweepSpec};
use holokit_core::gates::{
    self, last_level_direction, pacman_loop, phase_integrals, Loop, PhaseMethod, Profile, Schedule, Warp, Which,
};
use holokit_core::geometry::{self, TransportRoute};
use holokit_core::model::{self, NullFrame};
use holokit_core::noise::{self, delta_alpha_bound, perturb_loop, LoopPerturbation};
use holokit_core::{linalg, Arity, CMat, ModelConfig, ParameterPoint, C64};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_point(rng: &mut StdRng, d: usize, scale: f64) -> ParameterPoint {
    let amps: Vec<C64> =
        (0..d).map(|_| C64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))).collect();
    ParameterPoint::from_amplitudes(&amps)
}

fn frame_at(cfg: &ModelConfig, lambda: &[f64], arity: Arity) -> NullFrame {
    let p = ParameterPoint::from_lambda(lambda.to_vec()).unwrap();
    match arity {
        Arity::One => model::single_atom_null_frame(cfg, &p).unwrap(),
        Arity::Two => model::two_atom_null_frame(cfg, &p).unwrap(),
    }
}

/// Worst relative gap between the lowered connection and central differences of the frame.
fn connection_fd_error(cfg: &ModelConfig, p: &ParameterPoint) -> f64 {
    let s = geometry::connection_at(cfg, p, Arity::Two).unwrap();
    let lambda = p.lambda();
    let base = frame_at(cfg, lambda, Arity::Two);
    let n = base.len();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for mu in 0..lambda.len() {
        let (mut up, mut dn) = (lambda.to_vec(), lambda.to_vec());
        up[mu] += h;
        dn[mu] -= h;
        let (fu, fd) = (frame_at(cfg, &up, Arity::Two), frame_at(cfg, &dn, Arity::Two));
        let num = CMat::from_fn(n, n, |a, b| base.basis[a].dotc(&((&fu.basis[b] - &fd.basis[b]) / C64::new(2.0 * h, 0.0))));
        let scale = linalg::max_abs(&num).max(1.0);
        worst = worst.max(linalg::max_abs(&(&s.lowered[mu] - &num)) / scale);
    }
    worst
}

fn null_space() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2024);
    let (mut annihilation, mut gram, mut inverse, mut fd): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for d in [2, 3, 4] {
        let cfg = ModelConfig { d, ..ModelConfig::default() }.with_omega_d(C64::from_polar(1.2, 0.3)).unwrap();
        let od = cfg.omega_d_abs();
        for i in 0..100 {
            let p = random_point(&mut rng, d, 2.5);
            for arity in [Arity::One, Arity::Two] {
                let h = model::hamiltonian_matrix(&cfg, &p.amplitudes(), arity, false);
                let f = frame_at(&cfg, p.lambda(), arity);
                for v in &f.basis {
                    annihilation = annihilation.max((&h * v).norm() / od);
                }
                let brute = f.brute_gram();
                gram = gram.max(linalg::max_abs(&(&brute - &f.gram)) / linalg::max_abs(&brute).max(1.0));
                let n = f.len();
                inverse = inverse.max(linalg::max_abs(&(&brute * &f.gram_inv - CMat::identity(n, n))));
            }
            if i % 10 == 0 && d <= 3 {
                fd = fd.max(connection_fd_error(&cfg, &p));
            }
        }
    }
    let pass = annihilation <= 1e-10 && gram <= 1e-10 && inverse <= 1e-10 && fd <= 1e-6;
    outcome(
        pass,
        format!("max |Hv|/|Od| {annihilation:.1e}, gram {gram:.1e}, inverse {inverse:.1e}, connection vs FD {fd:.1e}"),
    )
}

fn cz_loop(r: f64, t1: f64, t2: f64, schedule: Schedule) -> Loop {
    let sol = gates::solve_beta_for_phase(r, PI, Which::Alpha2).unwrap();
    Loop::new(Profile::Pacman(sol.pacman(r, t1, t2, schedule).unwrap()), last_level_direction(2)).unwrap()
}

fn three_way() -> Outcome {
    let cfg = ModelConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (r, t1, t2) in [(2.0, 150.0, 150.0), (5.0, 320.0, 40.0)] {
        let lp = cz_loop(r, t1, t2, Schedule::Linear);
        let analytic = gates::analytic_gate(&cfg, &lp, Arity::Two).unwrap().u;
        let mut dist: f64 = 0.0;
        for route in [TransportRoute::ClosedForm, TransportRoute::Frame] {
            let hol = geometry::parallel_transport_via(&cfg, &lp, 4096, Arity::Two, route).unwrap();
            dist = dist.max(linalg::op_norm(&(&hol.u - &analytic)));
        }
        let evo = dynamics::schrodinger_evolve(
            &cfg,
            &lp,
            dynamics::EvolveOptions::step_size(lp.duration(), 0.05),
            Arity::Two,
        )
        .unwrap();
        let f = dynamics::effective_gate(&cfg, &evo, Some(&analytic), dynamics::FidelityConvention::Raw)
            .unwrap()
            .fidelity
            .unwrap();
        pass &= dist <= 1e-6 && f >= 0.999 && lp.duration() >= 150.0;
        parts.push(format!("R={r} T={}: transport {dist:.1e}, Schrodinger F {f:.6}", lp.duration()));
    }
    outcome(pass, parts.join("; "))
}

fn stokes() -> Outcome {
    let (mut line_surface, mut closed): (f64, f64) = (0.0, 0.0);
    for r in [1.0, 2.0, 5.0] {
        for beta in [PI / 2.0, PI, 2.0 * PI] {
            let lp = pacman_loop(r, beta, 2.0, 3.0, Schedule::Linear, &last_level_direction(2)).unwrap();
            let line = phase_integrals(&lp, PhaseMethod::Line).unwrap();
            let surf = phase_integrals(&lp, PhaseMethod::Surface).unwrap();
            line_surface = line_surface.max((line.alpha1 - surf.alpha1).abs()).max((line.alpha2 - surf.alpha2).abs());
            closed = closed.max((line.alpha1 - beta * r * r / (1.0 + r * r)).abs());
        }
    }
    outcome(line_surface <= 1e-6 && closed <= 1e-9, format!("line vs surface {line_surface:.1e}, alpha1 closed form {closed:.1e}"))
}

fn split_scan(schedule: Schedule, total: f64, target: f64) -> (bool, String) {
    let cfg = ModelConfig::default();
    let spec = SweepSpec::cz(2, schedule, vec![], vec![], vec![]);
    let mut best = f64::INFINITY;
    let mut vals = Vec::new();
    for (t1, t2) in dynamics::splits_for_total(total, &[10.0, 20.0, 30.0]) {
        let row = dynamics::sweep_row(&cfg, &spec, t1, t2, 1e-4).unwrap();
        best = best.min((row.fidelity - target).abs());
        vals.push(format!("t2={t2} F={:.4}", row.fidelity));
    }
    (best <= 0.003, format!("{} T={total} [{}] vs {target}", schedule.label(), vals.join(", ")))
}

fn headline() -> Outcome {
    let (a, da) = split_scan(Schedule::Linear, 168.0, 0.9880);
    let (b, db) = split_scan(Schedule::Power(2.0), 66.0, 0.9938);
    outcome(a && b, format!("{da}; {db}"))
}

fn coherent_scaling() -> Outcome {
    let cfg = ModelConfig::default();
    let eps = [1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3];
    let t = noise::coherent_error_sweep(&cfg, &[3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0], &eps).unwrap();
    let slope = t.fits.iter().find(|f| f.radius == 5.0).map(|f| f.slope).unwrap_or(f64::NAN);
    let c: Vec<f64> = t.fits.iter().filter(|f| f.radius <= 6.0).map(|f| f.c).collect();
    let decreasing = c.len() == 4 && c.windows(2).all(|w| w[1] < w[0]);
    let expo = t.c_exponent(3.0, 10.0).unwrap_or(f64::NAN);
    let lp = cz_loop(5.0, 2.0, 3.0, Schedule::Linear);
    let resid = |e: f64| {
        let da = delta_alpha_bound(&lp, &perturb_loop(&lp, LoopPerturbation::constant_amplitude(e)).unwrap()).unwrap();
        ((da.exact1 - da.leading1.unwrap()).abs(), (da.exact2 - da.leading2.unwrap()).abs())
    };
    let (r1, r2) = (resid(1e-3), resid(5e-4));
    let ratios = (r1.0 / r2.0, r1.1 / r2.1);
    let pass = (slope - 2.0).abs() <= 0.05
        && decreasing
        && (expo + 4.0).abs() <= 1.0
        && (ratios.0 - 4.0).abs() <= 0.5
        && (ratios.1 - 4.0).abs() <= 0.5;
    outcome(
        pass,
        format!(
            "slope(R=5) {slope:.4}, c(3..6) {:?}, exponent {expo:.3}, halving ratios {:.3}/{:.3}",
            c.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>(),
            ratios.0,
            ratios.1
        ),
    )
}

fn gap_structure() -> Outcome {
    let mut rng = StdRng::seed_from_u64(50);
    let mut mismatch: f64 = 0.0;
    for w in [10.0, 20.0] {
        let cfg = ModelConfig { w, ..ModelConfig::default() };
        for k in 0..8 {
            let p = ParameterPoint::from_amplitudes(&[C64::new(0.0, 0.0), C64::from_polar(5.0, 0.4 * k as f64)]);
            mismatch = mismatch.max(model::spectral_gap(&cfg, &p).unwrap().root_mismatch);
        }
        for _ in 0..20 {
            let p = random_point(&mut rng, 2, 3.0);
            mismatch = mismatch.max(model::spectral_gap(&cfg, &p).unwrap().root_mismatch);
        }
    }
    let strong = ModelConfig { w: 50.0, ..ModelConfig::default() };
    let min_gap = (0..100)
        .map(|_| model::spectral_gap(&strong, &random_point(&mut rng, 2, 3.0)).unwrap().gap)
        .fold(f64::INFINITY, f64::min);
    let mut saturation: f64 = 0.0;
    for k in 0..8 {
        let p = ParameterPoint::from_amplitudes(&[C64::new(0.0, 0.0), C64::from_polar(5.0, 0.4 * k as f64)]);
        let at = |w: f64| model::spectral_gap(&ModelConfig { w, ..ModelConfig::default() }, &p).unwrap().gap;
        saturation = saturation.max((at(10.0) - at(100.0)).abs() / at(100.0));
    }
    let mut w0: f64 = 0.0;
    for (om2, od2) in [(26.0, 1.0), (2.0, 1.0), (9.5, 0.7)] {
        let om: f64 = f64::sqrt(om2);
        let roots = model::quintic_roots(0.0, om2, od2).unwrap();
        for (r, e) in roots.iter().zip([-2.0 * om, -om, 0.0, om, 2.0 * om]) {
            w0 = w0.max((r - e).abs());
        }
    }
    let pass = mismatch <= 1e-8 && min_gap >= 0.5 && saturation <= 0.05 && w0 <= 1e-8;
    outcome(
        pass,
        format!("root mismatch {mismatch:.1e}, min gap at W=50 {min_gap:.3}, W=10 vs 100 {saturation:.3}, W->0 roots {w0:.1e}"),
    )
}

fn fig5_suite() -> Outcome {
    let cfg = ModelConfig::default();
    let t1s = vec![10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0];
    let t2s = vec![10.0, 20.0, 30.0];
    let spec = SweepSpec::cz(2, Schedule::Linear, t1s.clone(), t2s.clone(), vec![0.0, 1e-4, 1e-3]);
    let table = holokit::experiments::time_sweep(&cfg, &spec, &spec.points()).unwrap();
    let curve = |g: f64, t2: f64| -> Vec<f64> { table.curve(g, t2).iter().map(|r| r.fidelity).collect() };
    let unimodal = |f: &[f64]| {
        let peak = f.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
        peak > 0 && peak + 1 < f.len() && f[..=peak].windows(2).all(|w| w[1] > w[0]) && f[peak..].windows(2).all(|w| w[1] < w[0])
    };
    let mut ok_unimodal = true;
    for g in [1e-4, 1e-3] {
        for &t2 in &t2s {
            ok_unimodal &= unimodal(&curve(g, t2));
        }
    }
    let spread = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
    // Per decay rate: typical spread across t2 at fixed t1 against typical spread across t1.
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut spreads_ok = true;
    let mut worst_ratio: f64 = 0.0;
    let (mut t2_max, mut t1_min) = (0.0f64, f64::INFINITY);
    for g in [0.0, 1e-4, 1e-3] {
        let over_t2: Vec<f64> = t1s
            .iter()
            .map(|&t1| {
                let v: Vec<f64> = table.rows.iter().filter(|r| r.gamma == g && r.t1 == t1).map(|r| r.fidelity).collect();
                spread(&v)
            })
            .collect();
        let over_t1: Vec<f64> = t2s.iter().map(|&t2| spread(&curve(g, t2))).collect();
        worst_ratio = worst_ratio.max(mean(&over_t2) / mean(&over_t1));
        spreads_ok &= mean(&over_t2) < mean(&over_t1);
        t2_max = t2_max.max(over_t2.iter().cloned().fold(0.0, f64::max));
        t1_min = t1_min.min(over_t1.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    // Fixed-t2 curves saturate at the arc's own adiabatic error; beyond the
    // plateau the fidelity wobbles by a few 1e-5.
    let plateau_tol = 1e-4;
    let mut worst_drop: f64 = 0.0;
    let mut strict = true;
    for &t2 in &t2s {
        let f = curve(0.0, t2);
        for w in f.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
            strict &= w[1] > w[0];
        }
    }
    let monotone = worst_drop <= plateau_tol;
    outcome(
        ok_unimodal && spreads_ok && monotone,
        format!(
            "unimodal {ok_unimodal}; mean t2/t1 spread ratio {worst_ratio:.3} (extremes {t2_max:.3} vs {t1_min:.3}); Gamma=0 largest drop {worst_drop:.1e} (strict {strict})"
        ),
    )
}

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stochastic_run(name: &str) -> (Vec<u8>, serde_json::Value) {
    let run = holokit::load_config(&configs().join(name)).unwrap();
    let (arts, _) = holokit::compute(&run).unwrap();
    let a = arts.into_iter().find(|a| a.name == "stochastic.json").unwrap();
    let v = serde_json::from_slice(&a.bytes).unwrap();
    (a.bytes, v)
}

fn stochastic() -> Outcome {
    let (bytes_a, a) = stochastic_run("stochastic_lindblad_2000.json");
    let (bytes_b, _) = stochastic_run("stochastic_lindblad_2000.json");
    let (_, doubled) = stochastic_run("stochastic_lindblad_4000.json");
    let td = a["trace_distance"].as_f64().unwrap();
    let td2 = doubled["trace_distance"].as_f64().unwrap();
    let change = (td - td2).abs() / td;
    let drift = a["master_trace_error"].as_f64().unwrap().max(doubled["master_trace_error"].as_f64().unwrap());
    let identical = bytes_a == bytes_b;
    outcome(
        td <= 0.02 && change <= 0.3 && drift <= 1e-8 && identical,
        format!("trace distance {td:.5} (2000) / {td2:.5} (4000), change {:.1}%, trace drift {drift:.1e}, same-seed identical {identical}", change * 100.0),
    )
}

fn invariances() -> Outcome {
    let cfg = ModelConfig::default();
    let lp = cz_loop(2.0, 5.0, 8.0, Schedule::Linear);
    let base = geometry::parallel_transport(&cfg, &lp, 4096, Arity::Two).unwrap();
    let mut reparam: f64 = 0.0;
    for warp in [Warp::Power(2.0), Warp::Sinusoidal(0.3)] {
        let u = geometry::parallel_transport(&cfg, &lp.reparametrized(warp).unwrap(), 4096, Arity::Two).unwrap().u;
        reparam = reparam.max(linalg::op_norm(&(u - &base.u)));
    }
    let cz5 = cz_loop(5.0, 5.0, 5.0, Schedule::Linear);
    let fwd = geometry::parallel_transport(&cfg, &cz5, 4096, Arity::Two).unwrap().u;
    let back = geometry::parallel_transport(&cfg, &cz5.reversed(), 4096, Arity::Two).unwrap().u;
    let reversal = linalg::op_norm(&(back - fwd.adjoint()));
    let mut mixing: f64 = 0.0;
    let mut rng = StdRng::seed_from_u64(8);
    for d in [2, 3] {
        let c = ModelConfig { d, ..ModelConfig::default() };
        let dir: Vec<C64> = {
            let v: Vec<C64> = (0..d).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|z| z / n).collect()
        };
        let lp = pacman_loop(1.5, 2.0, 2.0, 3.0, Schedule::Power(2.0), &dir).unwrap();
        for route in [TransportRoute::ClosedForm, TransportRoute::Frame] {
            mixing = mixing.max(geometry::parallel_transport_via(&c, &lp, 1024, Arity::Two, route).unwrap().off_block);
        }
    }
    outcome(
        reparam <= 1e-8 && reversal <= 1e-8 && mixing <= 1e-10,
        format!("reparametrization {reparam:.1e}, reversal vs adjoint {reversal:.1e}, block mixing {mixing:.1e}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("null-space correctness", null_space),
        ("three-way holonomy agreement", three_way),
        ("Stokes consistency", stokes),
        ("headline fidelities", headline),
        ("coherent-error scaling", coherent_scaling),
        ("gap structure", gap_structure),
        ("fidelity-vs-time suite", fig5_suite),
        ("stochastic-noise consistency", stochastic),
        ("geometric invariances", invariances),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "acceptance {:<30} {} ({:.1}s) {}",
            name,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance summary: {} of {} criteria passed", 9 - failed, 9);
    if failed > 0 {
        std::process::exit(1);
    }
}
