//! Acceptance suite: one test per numbered criterion, each printing a single
//! PASS/FAIL line (plus sub-check detail) and asserting the pinned
//! tolerances. Reference values were measured once on converged solves and
//! frozen here; tolerances are part of the project contract.
//!
//! Known-red checks are asserted anyway: a criterion that cannot be met at
//! desk scale fails loudly rather than being loosened. The analysis lives
//! with the project notes, not in weakened tolerances.

use std::process::Command;

use disloc_core::*;

struct Gate {
    name: &'static str,
    failures: Vec<String>,
}

impl Gate {
    fn new(name: &'static str) -> Self {
        Gate { name, failures: Vec::new() }
    }

    fn check(&mut self, sub: &str, pass: bool, detail: String) {
        let tag = if pass { "pass" } else { "FAIL" };
        println!("  [{tag}] {}: {sub}: {detail}", self.name);
        if !pass {
            self.failures.push(format!("{sub}: {detail}"));
        }
    }

    fn finish(self) {
        if self.failures.is_empty() {
            println!("{}: PASS", self.name);
        } else {
            println!("{}: FAIL", self.name);
            panic!("{} failed:\n  {}", self.name, self.failures.join("\n  "));
        }
    }
}

fn builtin() -> PotentialSpec {
    PotentialSpec::builtin_cosine()
}

fn reference_layer(x_half: f64, dx: f64, tol: f64) -> LayerProfile {
    let p = builtin();
    let s = FracOrder::new_model(0.25).unwrap();
    solve_layer(&p, s, LayerGrid { x_half, dx }, tol).unwrap()
}

#[test]
fn criterion_1_operator_spectral_accuracy() {
    let mut gate = Gate::new("criterion 1 (operator spectral accuracy)");
    for s in [0.1, 0.25, 0.4] {
        for omega in [0.5f64, 1.0, 2.0] {
            let m = spectral_multiplier(s, omega).unwrap();
            let x_half = 700.0 / omega.min(1.0);
            let dx = 0.035 / omega.max(1.0);
            let n = (2.0 * x_half / dx).round() as usize + 1;
            let x_min = -x_half;
            let vals: Vec<f64> =
                (0..n).map(|i| (omega * (x_min + i as f64 * dx)).cos()).collect();
            // the oscillatory exterior cannot be modeled; zero tail with the
            // stitch check disabled leaves only a small truncation error
            let g =
                GridFunction::with_stitch_tol(x_min, dx, vals, TailModel::zero(), 2.0).unwrap();
            let op = LsOperator::new(&g, FracOrder::new_operator(s).unwrap()).unwrap();
            let mid = n / 2;
            let mut worst = 0.0f64;
            for &i in &[mid - 40, mid - 13, mid, mid + 7, mid + 29] {
                let got = op.apply_values(&g.values, i..i + 1).unwrap()[0];
                let want = -m * (omega * g.x(i)).cos();
                worst = worst.max((got - want).abs() / m);
            }
            gate.check(
                &format!("s = {s}, omega = {omega}"),
                worst <= 1e-4,
                format!("worst relative error {worst:.3e} (tol 1e-4)"),
            );
        }
    }
    gate.finish();
}

#[test]
fn criterion_2_layer_residual_and_decay() {
    let mut gate = Gate::new("criterion 2 (layer residual and tail decay)");
    let layer = reference_layer(400.0, 0.05, 1e-6);
    gate.check(
        "sup-norm residual",
        layer.residual_norm <= 1e-6,
        format!("{:.3e} (tol 1e-6)", layer.residual_norm),
    );
    let decay = verify_decay(&layer, 50.0, 200.0).unwrap();
    // plain log-log slope of 1 - u on [50, 200]: the exact tail exponent is
    // -1/2 but the x^{-3/4} correction is still visible at these radii, so
    // this check is expected red; see the two-term fit below
    gate.check(
        "plain tail slope",
        (decay.slope_u_minus_h + 0.5).abs() <= 0.05,
        format!("{:.4} (want -0.5 within 0.05)", decay.slope_u_minus_h),
    );
    gate.check(
        "tail coefficient",
        (decay.coefficient - 2.0).abs() <= 0.2,
        format!("{:.4} (want 2 within 10%)", decay.coefficient),
    );
    // margin pinned from the reference solve: measured -0.7367
    gate.check(
        "corrected-residual slope",
        decay.corrected_slope <= -0.65,
        format!("{:.4} (must be <= -0.65, strictly past -0.5)", decay.corrected_slope),
    );
    gate.finish();
}

#[test]
fn criterion_3_decay_exponent_formula() {
    let mut gate = Gate::new("criterion 3 (corrected decay exponent formula)");
    // theta = 4s on (0, 1/6], (1 + 2s)/2 on (1/6, 1/2)
    for (s, want) in [
        (0.05, 0.2),
        (0.1, 0.4),
        (1.0 / 6.0, 2.0 / 3.0),
        (0.2, 0.7),
        (0.25, 0.75),
        (0.3, 0.8),
        (0.4, 0.9),
    ] {
        let got = theta_exponent(FracOrder::new_model(s).unwrap()).unwrap();
        gate.check(
            &format!("theta({s})"),
            (got - want).abs() < 1e-15,
            format!("{got} (want {want})"),
        );
    }
    gate.finish();
}

#[test]
fn criterion_4_corrector_quality() {
    let mut gate = Gate::new("criterion 4 (corrector quality)");
    let p = builtin();
    let mut max_psis = Vec::new();
    for dx in [0.1f64, 0.05] {
        let layer = reference_layer(800.0, dx, 1e-8);
        let n = layer.u.n();
        let du = &layer.du.values;
        let w2: Vec<f64> = layer.u.values.iter().map(|&v| p.w(v, 2)).collect();

        // discrete kernel: u' is annihilated by the linearized operator up to
        // window truncation; measured on the interior (collar x_half / 8)
        let op_du = LsOperator::new(&layer.du, layer.s).unwrap();
        let lsdu = op_du.apply_values(du, 0..n).unwrap();
        let collar = (100.0 / dx) as usize;
        let num: f64 = (collar..n - collar)
            .map(|i| {
                let k = lsdu[i] - w2[i] * du[i];
                k * k
            })
            .sum();
        let den: f64 = (collar..n - collar).map(|i| du[i] * du[i]).sum();
        let kernel_rel = (num / den).sqrt();
        gate.check(
            &format!("kernel annihilation (dx = {dx})"),
            kernel_rel <= 1e-4,
            format!("{kernel_rel:.3e} (tol 1e-4)"),
        );

        let corr = solve_corrector(&layer, &p, 1e-3).unwrap();
        max_psis.push(corr.psi.values.iter().fold(0.0f64, |m, v| m.max(v.abs())));

        // weak-form residual against compactly supported bumps; relative to
        // the weighted right-hand side mass
        let g: Vec<f64> =
            (0..n).map(|i| du[i] + corr.eta * (w2[i] - layer.beta)).collect();
        let op_psi = LsOperator::new(&corr.psi, layer.s).unwrap();
        let ls = op_psi.apply_values(&corr.psi.values, 0..n).unwrap();
        let res: Vec<f64> =
            (0..n).map(|i| ls[i] - w2[i] * corr.psi.values[i] - g[i]).collect();
        let mut worst = 0.0f64;
        for center in [0.0f64, 3.0, 10.0, 30.0, -20.0] {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                let x = layer.u.x(i);
                let t = (x - center) / 5.0;
                if t.abs() >= 1.0 {
                    continue;
                }
                let phi = (-1.0 / (1.0 - t * t)).exp();
                num += res[i] * phi;
                den += g[i].abs() * phi;
            }
            worst = worst.max((num / den).abs());
        }
        // expected red: the corrector's fat tails leave a window-truncation
        // defect that decays too slowly in the window size (measured 3.3e-5
        // at half-width 800, 3.9e-5 at 400)
        gate.check(
            &format!("weak-form residual (dx = {dx})"),
            worst <= 1e-5,
            format!("{worst:.3e} (tol 1e-5)"),
        );
    }
    let change = (max_psis[1] - max_psis[0]).abs() / max_psis[0];
    gate.check(
        "max |psi| under dx halving",
        change < 0.02,
        format!("relative change {change:.3e} (tol 2e-2)"),
    );
    gate.finish();
}

#[test]
fn criterion_5_two_body_closed_form() {
    let mut gate = Gate::new("criterion 5 (two-body gap closed form)");
    let sigma = StressField::zero();
    let rtol = 1e-8;
    for s in [0.1, 0.25, 0.4] {
        let fo = FracOrder::new_model(s).unwrap();
        let gamma = 1.3;
        let g0 = 4.0;
        let st = ParticleState {
            time: 0.0,
            positions: vec![-g0 / 2.0, g0 / 2.0],
            s: fo,
            gamma,
            delta: 0.0,
        };
        let samples = [1.0, 10.0, 50.0, 100.0];
        let runs = integrate(&st, &sigma, 100.0, rtol, &samples).unwrap();
        let mut worst = 0.0f64;
        for snap in &runs {
            let want = two_body_gap(g0, s, gamma, snap.time);
            worst = worst.max((snap.min_gap() - want).abs() / want);
        }
        gate.check(
            &format!("s = {s}"),
            worst <= 10.0 * rtol,
            format!("worst relative gap error {worst:.3e} (tol {:.0e})", 10.0 * rtol),
        );
    }
    gate.finish();
}

#[test]
fn criterion_6_field_particle_convergence() {
    let mut gate = Gate::new("criterion 6 (field-to-particle convergence sweep)");
    let p = builtin();
    let layer = reference_layer(60.0, 0.1, 1e-7);
    let sigma = StressField::zero();
    let positions = [-8.0, 8.0];
    let t_end = 1.0;
    let samples: Vec<f64> = (1..=4).map(|i| 0.25 * i as f64).collect();
    let epsilons = [0.2, 0.1, 0.05];
    let mut runs = Vec::new();
    for &eps in &epsilons {
        let cfg = EvolutionConfig {
            dt_safety: 0.9,
            scheme: Scheme::Explicit,
            x_min: -85.0,
            x_max: 85.0,
            dx: eps / 8.0,
        };
        let st = initial_condition(&layer, &sigma, &positions, eps, cfg).unwrap();
        let run = run_evolution(&st, &p, layer.s, &sigma, t_end, &samples).unwrap();
        // crossing count conserved at every snapshot
        let mut conserved = true;
        for snap in &run {
            match half_level_crossings(&snap.field, 2) {
                Ok(c) => conserved &= c.len() == 2,
                Err(_) => conserved = false,
            }
        }
        gate.check(
            &format!("crossing count conserved (eps = {eps})"),
            conserved,
            format!("{} snapshots", run.len()),
        );
        runs.push(run);
    }
    let st = ParticleState {
        time: 0.0,
        positions: positions.to_vec(),
        s: layer.s,
        gamma: layer.gamma,
        delta: 0.0,
    };
    let ode = integrate(&st, &sigma, t_end, 1e-8, &samples).unwrap();
    let rep = compare_to_particles(&epsilons, &runs, &ode, 0.5).unwrap();
    let finals: Vec<f64> =
        rep.crossing_errors.iter().map(|col| *col.last().unwrap()).collect();
    gate.check(
        "crossing errors strictly decreasing in epsilon",
        rep.monotone_in_epsilon,
        format!("final errors {finals:?}"),
    );
    // expected red: the layer mobility gamma = 1/int (u')^2 is about 227 for
    // s = 0.25, so any order-one configuration moves at speeds of order 100
    // and the finite-epsilon lag stays far above the threshold; see notes
    let last = *finals.last().unwrap();
    gate.check(
        "final error at eps = 0.05",
        last <= 0.05,
        format!("{last:.4} (tol 0.05)"),
    );
    gate.finish();
}

#[test]
fn criterion_7_supersolution_barrier() {
    let mut gate = Gate::new("criterion 7 (supersolution barrier positivity)");
    let p = builtin();
    let layer = reference_layer(60.0, 0.1, 1e-7);
    let corr = solve_corrector(&layer, &p, 1e-4).unwrap();
    let sigma = StressField::zero();
    let min_i = |delta: f64, eps: f64| -> f64 {
        let bar = ParticleState {
            time: 0.0,
            positions: vec![-8.0, 8.0],
            s: layer.s,
            gamma: layer.gamma,
            delta,
        };
        supersolution_discrepancy(&layer, &corr, &p, &sigma, &bar, eps, -33.0, 33.0, eps / 8.0)
            .unwrap()
            .grid_min_i
    };

    // scan downward for an eps* below which the barrier stays above delta/4
    let delta = 0.1;
    let eps_grid = [0.05, 0.02, 0.005];
    let mins: Vec<f64> = eps_grid.iter().map(|&e| min_i(delta, e)).collect();
    let eps_star = eps_grid
        .iter()
        .zip(&mins)
        .rev()
        .take_while(|&(_, &m)| m >= delta / 4.0)
        .last()
        .map(|(&e, _)| e);
    println!(
        "  criterion 7: delta = {delta}, grid_min_I over eps {eps_grid:?} = {mins:?}, \
         eps* = {eps_star:?}"
    );
    // expected red: the shifted trajectory moves at speed >= gamma * delta
    // (about 23) plus the interaction speed, and the velocity-driven error
    // terms saturate near -0.8 as eps -> 0 instead of vanishing; no eps*
    // exists at desk scale (see notes)
    gate.check(
        "grid_min_I >= delta / 4 below a reported eps*",
        eps_star.is_some(),
        format!("smallest sampled min {:.3e} (need >= {:.3e})", mins[2], delta / 4.0),
    );
    // expected red for the same reason: doubling delta doubles the drift
    // speed and the quadratic velocity error outweighs the linear delta gain
    let at_fixed_eps = 0.005;
    let a = mins[2];
    let b = min_i(2.0 * delta, at_fixed_eps);
    gate.check(
        "grid_min_I increases when delta doubles at fixed eps",
        b > a,
        format!("delta {delta}: {a:.3e} vs delta {}: {b:.3e} at eps {at_fixed_eps}", 2.0 * delta),
    );
    gate.finish();
}

#[test]
fn criterion_8_determinism_and_round_trip() {
    let mut gate = Gate::new("criterion 8 (determinism and round-trip)");

    // byte-identical binary reruns
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[layer]\nx_half = 30.0\ndx = 0.25\ntol = 1e-6\n\
         [particles]\ngamma = 1.0\nt_end = 2.0\nn_samples = 4\n",
    )
    .unwrap();
    for sub in ["layer", "particles"] {
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let out_dir = dir.path().join(format!("{sub}_{run}"));
            let out = Command::new(env!("CARGO_BIN_EXE_disloc"))
                .args(["--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(&out_dir)
                .arg(sub)
                .output()
                .unwrap();
            assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
            let mut files: Vec<_> = std::fs::read_dir(&out_dir)
                .unwrap()
                .map(|e| e.unwrap().file_name())
                .collect();
            files.sort();
            let blobs: Vec<Vec<u8>> = files
                .iter()
                .map(|f| std::fs::read(out_dir.join(f)).unwrap())
                .collect();
            outputs.push((files, blobs));
        }
        gate.check(
            &format!("`{sub}` rerun byte-identical"),
            outputs[0] == outputs[1],
            format!("{} output files compared", outputs[0].0.len()),
        );
    }

    // archive round-trips are bit-exact for both profile kinds
    let p = builtin();
    let layer = reference_layer(60.0, 0.1, 1e-7);
    let corr = solve_corrector(&layer, &p, 1e-4).unwrap();
    let lp = dir.path().join("layer.profile");
    let cp = dir.path().join("corrector.profile");
    disloc_cli::archive::save_profile(
        &disloc_cli::archive::Profile::Layer(layer.clone()),
        &lp,
        "acceptance",
    )
    .unwrap();
    disloc_cli::archive::save_profile(
        &disloc_cli::archive::Profile::Corrector(corr.clone()),
        &cp,
        "acceptance",
    )
    .unwrap();
    let disloc_cli::archive::Profile::Layer(l2) = disloc_cli::archive::load_profile(&lp).unwrap()
    else {
        panic!("layer kind")
    };
    let disloc_cli::archive::Profile::Corrector(c2) =
        disloc_cli::archive::load_profile(&cp).unwrap()
    else {
        panic!("corrector kind")
    };
    gate.check(
        "layer profile round-trip bit-exact",
        l2.u.values == layer.u.values
            && l2.du.values == layer.du.values
            && l2.u.tail == layer.u.tail
            && l2.du.tail == layer.du.tail
            && l2.gamma == layer.gamma
            && l2.eta == layer.eta
            && l2.beta == layer.beta
            && l2.residual_norm == layer.residual_norm,
        format!("{} samples", layer.u.n()),
    );
    gate.check(
        "corrector profile round-trip bit-exact",
        c2.psi.values == corr.psi.values
            && c2.psi.tail == corr.psi.tail
            && c2.eta == corr.eta
            && c2.residual_norm == corr.residual_norm,
        format!("{} samples", corr.psi.n()),
    );
    gate.finish();
}
