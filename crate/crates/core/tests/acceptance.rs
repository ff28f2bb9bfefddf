//! Acceptance suite. Runs without the libtest harness and prints one
//! `PASS`/`FAIL` line per criterion; exits non-zero if any criterion fails.
//!
//! Run alone with `cargo test --release --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use risnoma::ao::{self, rate_report, SolverOptions};
use risnoma::baselines::BaselineKind;
use risnoma::channel::{dbm_to_mw, generate_channels};
use risnoma::experiments::{aggregate, default_paper_scenario, preset, run_trials, SweepRow, SweepSpec, TrialRecord};
use risnoma::manifold::{
    descend, euclidean_grad, max_step, riemannian_grad, tangency_residual, BeamVector, DescendSettings,
    QuadraticObjective,
};
use risnoma::power_alloc::{
    brute_force_w, optimal_w, rates, satisfies_qos, sum_rate, weighted_gain, PowerAllocation, QosTargets,
};
use risnoma::sca::{ScaProblem, ScaSettings};

type Outcome = Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_complex(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    c(rng.random_range(-1.0..1.0) * scale, rng.random_range(-1.0..1.0) * scale)
}

fn random_cvec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<Complex64> {
    DVector::from_iterator(n, (0..n).map(|_| random_complex(rng, scale)))
}

/// Strictly decreasing gains spanning a few orders of magnitude.
fn sorted_gains(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut h: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(-1.0..2.0))).collect();
    h.sort_by(|a, b| b.total_cmp(a));
    for i in 1..k {
        if h[i] >= h[i - 1] * (1.0 - 1e-6) {
            h[i] = h[i - 1] * 0.5;
        }
    }
    h
}

fn telescoping() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let k = rng.random_range(1..=6);
        let h: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=1.0)).collect();
        let p_t = 10f64.powf(rng.random_range(-2.0..2.0));
        let sigma2 = 10f64.powf(rng.random_range(-2.0..1.0));
        let per: f64 = rates(&w, &h, p_t, sigma2).iter().sum();
        worst = worst.max((per - sum_rate(&w, &h, p_t, sigma2)).abs());
    }
    if worst <= 1e-9 {
        Ok(format!("10^4 instances, max |Σ rate_k − sum_rate| = {worst:.2e}"))
    } else {
        Err(format!("max deviation {worst:.3e} > 1e-9"))
    }
}

fn closed_form_vs_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut solved = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    while solved < 500 {
        let k = if solved % 2 == 0 { 2 } else { 3 };
        let h = sorted_gains(&mut rng, k);
        let r: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.5)).collect();
        let targets = QosTargets::new(r).unwrap();
        let (p_t, sigma2) = (1.0, rng.random_range(0.05..1.0));
        let PowerAllocation::Feasible(w) = optimal_w(&h, &targets, p_t, sigma2).unwrap() else { continue };
        if !satisfies_qos(w.as_slice(), &h, &targets, p_t, sigma2) || w.as_slice().iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(format!("closed form violates a constraint for h = {h:?}"));
        }
        let oracle = brute_force_w(&h, &targets, p_t, sigma2, 1e-3).unwrap();
        let ours = weighted_gain(w.as_slice(), &h);
        if let Some(g) = oracle {
            let slack = k as f64 * 1e-3 * h.iter().cloned().fold(0.0, f64::max);
            let gap = weighted_gain(g.as_slice(), &h) - ours;
            worst_gap = worst_gap.max(gap / slack);
            if gap > slack {
                return Err(format!("oracle beats closed form by {gap:.3e} > {slack:.3e} for h = {h:?}"));
            }
        }
        solved += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 60.0 {
        return Err(format!("took {secs:.1} s"));
    }
    Ok(format!("500 feasible instances, worst oracle gain {worst_gap:.3} of the allowed slack, zero violations, {secs:.1} s"))
}

fn random_objective(rng: &mut ChaCha8Rng, n: usize, k: usize) -> QuadraticObjective {
    let b: Vec<DVector<Complex64>> = (0..k).map(|_| random_cvec(rng, n, 1.0)).collect();
    let aux: Vec<Complex64> = (0..k).map(|_| random_complex(rng, 3.0)).collect();
    QuadraticObjective::from_auxiliary(&b, &aux).unwrap()
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let q = rng.random_range(1..=16);
        let k = rng.random_range(1..=4);
        let obj = random_objective(&mut rng, q + 1, k);
        let v = random_cvec(&mut rng, q + 1, 1.0);
        let g = euclidean_grad(&obj, &v).unwrap();
        let h = 1e-6;
        let mut fd = DVector::<Complex64>::zeros(q + 1);
        for i in 0..=q {
            let diff = |d: Complex64| {
                let mut p = v.clone();
                p[i] += d;
                let mut m = v.clone();
                m[i] -= d;
                (obj.value(&p) - obj.value(&m)) / (2.0 * h)
            };
            fd[i] = c(diff(c(h, 0.0)), diff(c(0.0, h)));
        }
        let rel = (&g - &fd).norm() / g.norm().max(1e-12);
        worst = worst.max(rel);
    }
    if worst <= 1e-5 {
        Ok(format!("100 instances, max relative error {worst:.2e}"))
    } else {
        Err(format!("max relative error {worst:.3e} > 1e-5"))
    }
}

/// Largest eigenvalue through the real symmetric embedding
/// `[[Re A, −Im A], [Im A, Re A]]`, whose spectrum repeats that of `A`.
fn dense_lambda_max(a: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = a[(i, j)].re;
            m[(i + n, j + n)] = a[(i, j)].re;
            m[(i, j + n)] = -a[(i, j)].im;
            m[(i + n, j)] = a[(i, j)].im;
        }
    }
    m.symmetric_eigen().eigenvalues.max()
}

fn manifold_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut dev, mut tan, mut rise, mut step_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let settings = DescendSettings { max_iter: 300, ..DescendSettings::default() };
    for _ in 0..1000 {
        let q = rng.random_range(1..=32);
        let k = rng.random_range(1..=4);
        let obj = random_objective(&mut rng, q + 1, k);
        let lambda = dense_lambda_max(&obj.a);
        step_err = step_err.max((max_step(&obj, 1.0) * lambda - 1.0).abs());
        let v0 = BeamVector::random(q + 1, &mut rng);
        let res = descend(&obj, &v0, &settings).unwrap();
        dev = dev.max(res.max_modulus_deviation);
        tan = tan.max(res.max_tangency_residual);
        for p in res.trace.windows(2) {
            rise = rise.max(p[1] - p[0]);
        }
        // independent check at the returned point
        let eg = euclidean_grad(&obj, res.v.as_vector()).unwrap();
        let rg = riemannian_grad(&eg, res.v.as_vector()).unwrap();
        tan = tan.max(tangency_residual(&rg, res.v.as_vector()));
    }
    let detail = format!(
        "1000 runs: modulus dev {dev:.1e}, tangency {tan:.1e}, max f increase {rise:.1e}, |λ·step − 1| {step_err:.1e}"
    );
    if dev <= 1e-12 && tan <= 1e-10 && rise <= 1e-12 && step_err <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Coarse-to-fine grid search over `(a_1, a_2) ∈ C²` for the convex round
/// of a two-BD problem.
fn grid_oracle(p: &ScaProblem, a_ref: &[Complex64]) -> Option<f64> {
    let scale = a_ref.iter().chain(&p.anchors).map(|x| x.norm()).fold(p.noise.sqrt(), f64::max);
    let feasible = |a: &[Complex64]| p.linearized_constraints(a, a_ref).iter().all(|g| *g <= 0.0);
    let mut center = [0.0f64; 4];
    let mut half = 3.0 * scale;
    let mut best = f64::INFINITY;
    let n = 12;
    for _ in 0..60 {
        let mut best_point = None;
        for i0 in 0..=n {
            for i1 in 0..=n {
                for i2 in 0..=n {
                    for i3 in 0..=n {
                        let off = |i: usize| -half + 2.0 * half * i as f64 / n as f64;
                        let z = [center[0] + off(i0), center[1] + off(i1), center[2] + off(i2), center[3] + off(i3)];
                        let a = [c(z[0], z[1]), c(z[2], z[3])];
                        if !feasible(&a) {
                            continue;
                        }
                        let f = p.linearized_objective(&a, a_ref);
                        if f < best {
                            best = f;
                            best_point = Some(z);
                        }
                    }
                }
            }
        }
        if let Some(z) = best_point {
            center = z;
        }
        if best.is_finite() {
            half *= 0.6;
        }
    }
    best.is_finite().then_some(best)
}

fn sca_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let settings = ScaSettings::default();
    let (mut kkt, mut rise, mut oracle_gap) = (0.0f64, 0.0f64, 0.0f64);
    let mut runs = 0;
    let mut compared = 0;
    while compared < 50 {
        let k = if runs % 2 == 0 { 2 } else { 3 };
        runs += 1;
        let mut anchors: Vec<Complex64> = (0..k).map(|_| random_complex(&mut rng, 3.0)).collect();
        anchors.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        let w: Vec<f64> = (0..k).map(|i| if i == 0 { 1.0 } else { rng.random_range(0.2..1.0) }).collect();
        let r: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..0.3)).collect();
        let mu = 10.0 * rng.random_range(1.0..5.0);
        let p = ScaProblem { w, anchors: anchors.clone(), targets: QosTargets::new(r).unwrap(), noise: 0.1, mu };
        let start = match p.find_feasible_start(&anchors, &settings) {
            Ok(s) => s.a,
            Err(_) => continue,
        };
        let run = p.run(&start, &settings).map_err(|e| e.to_string())?;
        kkt = kkt.max(run.max_kkt_residual);
        for pair in run.trace.windows(2) {
            rise = rise.max(pair[1] - pair[0]);
        }
        if k == 2 {
            let sub = p.solve_subproblem(&start, &settings.barrier).map_err(|e| e.to_string())?;
            kkt = kkt.max(sub.kkt_residual);
            let Some(oracle) = grid_oracle(&p, &start) else { continue };
            oracle_gap = oracle_gap.max((sub.objective - oracle).abs());
            compared += 1;
        }
    }
    let detail = format!(
        "{runs} runs: max KKT {kkt:.1e}, max objective increase {rise:.1e}; 50 K=2 rounds within {oracle_gap:.1e} of the grid oracle"
    );
    if kkt <= 1e-7 && rise <= 1e-9 && oracle_gap <= 1e-5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ao_contracts() -> Outcome {
    let start = Instant::now();
    let opts = SolverOptions::default();
    let (mut solves, mut infeasible, mut violations, mut worst_drop, mut worst_mismatch) = (0, 0, 0, 0.0f64, 0.0f64);
    let mut seed = 0u64;
    while solves < 200 {
        let mut cfg = default_paper_scenario().with_uniform_r_min(0.5);
        cfg.q_ris = if seed % 2 == 0 { 8 } else { 16 };
        cfg.p_t = dbm_to_mw(40.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + seed);
        seed += 1;
        let ch = generate_channels(&cfg, &mut rng).unwrap();
        let v0 = BeamVector::random(cfg.q_ris + 1, &mut rng);
        let res = ao::solve(&ch, &cfg, &v0, &opts).map_err(|e| e.to_string())?;
        solves += 1;
        if !res.is_feasible() {
            infeasible += 1;
            continue;
        }
        for p in res.traces.sum_rate.windows(2) {
            worst_drop = worst_drop.max(p[0] - p[1]);
        }
        let report = rate_report(&res, &ch, &cfg).map_err(|e| e.to_string())?;
        violations += report.violations.len();
        worst_mismatch = worst_mismatch.max((report.sum_rate - res.sum_rate_bits).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "200 solves ({infeasible} infeasible): max trace drop {worst_drop:.1e}, {violations} violations, \
         recomputed rate within {worst_mismatch:.1e}, {secs:.1} s"
    );
    if worst_drop <= 1e-9 && violations == 0 && worst_mismatch <= 1e-6 && secs < 600.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct SweepRun {
    spec: SweepSpec,
    trials: Vec<TrialRecord>,
    rows: Vec<SweepRow>,
}

fn run_preset(name: &str, parallel: usize) -> Result<SweepRun, String> {
    let spec = preset(name).map_err(|e| e.to_string())?;
    let trials = run_trials(&spec, parallel).map_err(|e| e.to_string())?;
    let rows = aggregate(&spec, &trials);
    Ok(SweepRun { spec, trials, rows })
}

impl SweepRun {
    fn scheme_index(&self, s: BaselineKind) -> usize {
        self.spec.schemes.iter().position(|x| *x == s).expect("scheme in preset")
    }

    fn row(&self, value_index: usize, s: BaselineKind) -> &SweepRow {
        let si = self.scheme_index(s);
        &self.rows[value_index * self.spec.schemes.len() + si]
    }

    /// Per-trial pairs where both schemes were feasible.
    fn pairs(&self, value_index: usize, a: BaselineKind, b: BaselineKind) -> Vec<(f64, f64)> {
        let (ia, ib) = (self.scheme_index(a), self.scheme_index(b));
        self.trials
            .iter()
            .filter(|t| t.value_index == value_index)
            .filter_map(|t| Some((t.sum_rates[ia]?, t.sum_rates[ib]?)))
            .collect()
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// 2.5th percentile of the bootstrap distribution of the mean.
fn bootstrap_lower(x: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let mut means: Vec<f64> = (0..2000)
        .map(|_| (0..x.len()).map(|_| x[rng.random_range(0..x.len())]).sum::<f64>() / x.len() as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    means[(0.025 * means.len() as f64) as usize]
}

fn fig3(run: &SweepRun) -> Outcome {
    use BaselineKind::*;
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut failures = Vec::new();
    let mut details = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for (vi, q) in run.spec.values.iter().enumerate() {
        let m = run.row(vi, Proposed).mean_sum_rate;
        if !(m > prev) {
            failures.push(format!("proposed mean not increasing at Q = {q}"));
        }
        prev = m;

        let pr = run.pairs(vi, Proposed, RandomRis);
        let gap: Vec<f64> = pr.iter().map(|(a, b)| a - b).collect();
        let lower = if gap.is_empty() { f64::NAN } else { bootstrap_lower(&gap, &mut rng) };
        if !(mean(&gap) > 0.0 && lower > 0.0) {
            failures.push(format!("proposed − random_ris at Q = {q}: mean {:.3e}, 95% lower {lower:.3e}", mean(&gap)));
        }

        let rn = run.pairs(vi, RandomRis, NomabcNoRis);
        let diff: Vec<f64> = rn.iter().map(|(a, b)| a - b).collect();
        if !(mean(&diff) > 0.0) {
            failures.push(format!("random_ris − nomabc_no_ris paired mean at Q = {q}: {:.3e}", mean(&diff)));
        }
        details.push(format!("Q={q}: {m:.3} (+{:.3} vs random, random {:+.3} vs no-RIS)", mean(&gap), mean(&diff)));
    }
    if failures.is_empty() {
        Ok(details.join("; "))
    } else {
        Err(format!("{} [{}]", failures.join("; "), details.join("; ")))
    }
}

fn fig4(run: &SweepRun) -> Outcome {
    use BaselineKind::*;
    let mut failures = Vec::new();
    for s in &run.spec.schemes {
        let means: Vec<f64> = (0..run.spec.values.len()).map(|vi| run.row(vi, *s).mean_sum_rate).collect();
        if !means.windows(2).all(|p| p[1] > p[0]) {
            failures.push(format!("{s} means not increasing: {means:.3?}"));
        }
    }
    for (vi, p) in run.spec.values.iter().enumerate() {
        let oma = run.row(vi, OmabcNoRis).mean_sum_rate;
        for s in [Proposed, RandomRis, NomabcNoRis] {
            let noma = run.row(vi, s).mean_sum_rate;
            if !(noma > oma) {
                failures.push(format!("{s} {noma:.3} not above OMA {oma:.3} at {p} dBm"));
            }
        }
    }
    let table: Vec<String> = run
        .spec
        .values
        .iter()
        .enumerate()
        .map(|(vi, p)| {
            let m: Vec<String> = run.spec.schemes.iter().map(|s| format!("{:.2}", run.row(vi, *s).mean_sum_rate)).collect();
            format!("{p} dBm: {}", m.join("/"))
        })
        .collect();
    if failures.is_empty() {
        Ok(format!("proposed/random/no-RIS/OMA {}", table.join("; ")))
    } else {
        Err(format!("{} [{}]", failures.join("; "), table.join("; ")))
    }
}

fn fig5(run: &SweepRun) -> Outcome {
    use BaselineKind::*;
    let mut failures = Vec::new();
    for (vi, r) in run.spec.values.iter().enumerate() {
        let (p, n) = (run.row(vi, Proposed).mean_sum_rate, run.row(vi, NomabcNoRis).mean_sum_rate);
        if !(p > n) {
            failures.push(format!("proposed {p:.3} not above nomabc_no_ris {n:.3} at R_min = {r}"));
        }
    }
    let mut fracs = Vec::new();
    for s in &run.spec.schemes {
        let f: Vec<f64> = (0..run.spec.values.len()).map(|vi| run.row(vi, *s).feasible_frac).collect();
        if !f.windows(2).all(|p| p[1] <= p[0]) {
            failures.push(format!("{s} feasible fraction increases: {f:?}"));
        }
        fracs.push(format!("{s} {f:?}"));
    }
    if failures.is_empty() {
        Ok(format!("feasible fractions {}", fracs.join(", ")))
    } else {
        Err(failures.join("; "))
    }
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_risnoma");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = Vec::new();
    for name in ["fig3", "fig4", "fig5"] {
        let mut outputs = Vec::new();
        for parallel in [1, 3, 1] {
            let out = dir.path().join(format!("{name}-{parallel}-{}.csv", outputs.len()));
            let status = Command::new(bin)
                .args(["run", "--preset", name, "--trials", "6", "--seed", "42", "--parallel", &parallel.to_string()])
                .arg("--out")
                .arg(&out)
                .status()
                .map_err(|e| e.to_string())?;
            if !status.success() {
                return Err(format!("{name} with --parallel {parallel} exited with {status}"));
            }
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        if outputs.windows(2).any(|p| p[0] != p[1]) {
            return Err(format!("{name}: CSV differs between runs"));
        }
        checked.push(format!("{name} ({} bytes)", outputs[0].len()));
    }
    Ok(format!("identical CSV for --parallel 1, 3, 1: {}", checked.join(", ")))
}

fn main() -> ExitCode {
    let parallel = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, outcome: Outcome| {
        match &outcome {
            Ok(d) => println!("criterion {n:>2} PASS  {name}: {d}"),
            Err(d) => println!("criterion {n:>2} FAIL  {name}: {d}"),
        }
        results.push((n, name, outcome));
    };

    report(1, "telescoping identity", telescoping());
    report(2, "closed-form reflection coefficients vs grid oracle", closed_form_vs_oracle());
    report(3, "Euclidean gradient vs finite differences", gradient_check());
    report(4, "manifold descent contracts", manifold_contracts());
    report(5, "SCA contracts", sca_contracts());
    report(6, "AO monotonicity and feasibility", ao_contracts());
    for (n, name, figure) in [
        (7, "fig3 trend", fig3 as fn(&SweepRun) -> Outcome),
        (8, "fig4 trend", fig4),
        (9, "fig5 trend", fig5),
    ] {
        let start = Instant::now();
        let outcome = run_preset(&format!("fig{}", n - 4), parallel).and_then(|run| figure(&run));
        let outcome = outcome.map(|d| format!("{d} ({:.0} s)", start.elapsed().as_secs_f64()));
        report(n, name, outcome);
    }
    report(10, "determinism across worker counts", determinism());

    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
