//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::oracle::{bisection_lambda, brute_force_projection, random_instance};
use ndr_core::decision_rule::{
    ffnn_forward, rnn_forward, sigmoid, Architecture, DecisionRuleParams, OutputBounds,
    StateMatrix,
};
use ndr_core::emissions::{convert_carbon_to_co2, rates_for, EmissionFactors};
use ndr_core::exec::ExecMode;
use ndr_core::feasibility::{project, solve_dual, FeasibleSet};
use ndr_core::harness::{
    demand_sweep, evaluate_online, load_training_spec, run_kpis, sensor_relocation_compare, simulate,
    train, write_detail_csv, write_kpi_csv, write_relocation_csv, Control, TrainingSpec,
};
use ndr_core::microsim::{FixedTiming, Simulation};
use ndr_core::network::{read_detector_layout, VehicleClass};
use ndr_core::pso::{pso_minimize, PsoConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

struct Instance {
    y: Vec<f64>,
    set: FeasibleSet,
}

fn instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..1000)
        .map(|k| {
            let (y, lower, upper, budget) = random_instance(&mut rng, 2 + k % 7);
            Instance {
                y,
                set: FeasibleSet { lower, upper, budget },
            }
        })
        .collect()
}

fn projection_oracle() -> Outcome {
    let started = Instant::now();
    let cases = instances();
    let (mut worst_obj, mut worst_con) = (0.0f64, 0.0f64);
    let mut failures = 0;
    for (k, case) in cases.iter().enumerate() {
        let (y, set) = (&case.y, &case.set);
        let p = project(y, set).map_err(|e| format!("instance {k}: {e}"))?.greens;
        let (_, oracle_obj) = brute_force_projection(y, &set.lower, &set.upper, set.budget);
        let obj = 0.5 * dist(&p, y).powi(2);
        worst_obj = worst_obj.max((obj - oracle_obj).abs());
        let bound_violation = p
            .iter()
            .zip(set.lower.iter().zip(&set.upper))
            .map(|(g, (l, u))| (l - g).max(g - u).max(0.0))
            .fold(0.0, f64::max);
        worst_con = worst_con.max(bound_violation).max((p.iter().sum::<f64>() - set.budget).abs());
        let again = project(&p, set).unwrap().greens;
        // Pair each instance with the next proposal for non-expansiveness.
        let other = &cases[(k + 1) % cases.len()];
        let shifted: Vec<f64> = y.iter().zip(other.y.iter().cycle()).map(|(a, b)| 0.5 * (a + b) - 3.0).collect();
        let q = project(&shifted, set).unwrap().greens;
        if dist(&again, &p) > 1e-9 || dist(&p, &q) > dist(y, &shifted) + 1e-9 {
            failures += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(
        worst_obj <= 1e-6 && worst_con <= 1e-9 && failures == 0 && secs < 5.0,
        format!(
            "1000 instances, max objective gap {worst_obj:.2e}, max constraint violation {worst_con:.2e}, \
             idempotence/non-expansiveness failures {failures}, {secs:.2} s"
        ),
    )
}

fn dual_equation() -> Outcome {
    let (mut worst_res, mut worst_gap) = (0.0f64, 0.0f64);
    for (k, case) in instances().iter().enumerate() {
        let (y, set) = (&case.y, &case.set);
        let lambda = solve_dual(y, set).map_err(|e| format!("instance {k}: {e}"))?;
        worst_res = worst_res.max(set.residual(y, lambda).abs());
        let reference = bisection_lambda(y, &set.lower, &set.upper, set.budget, 1e-12);
        worst_gap = worst_gap.max((lambda - reference).abs());
    }
    ensure(
        worst_res <= 1e-9 && worst_gap <= 1e-9,
        format!("max residual {worst_res:.2e}, max distance to bisection root {worst_gap:.2e}"),
    )
}

fn monotone(history: &[f64]) -> bool {
    history.windows(2).all(|w| w[1] <= w[0])
}

fn pso_benchmarks() -> Outcome {
    let started = Instant::now();
    let sphere = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let rosenbrock = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let mut sphere_hits = 0;
    let mut all_monotone = true;
    let mut rosen = Vec::new();
    for seed in 0..20 {
        let cfg = PsoConfig::uniform_box(10, -5.12, 5.12, 20, 200, seed);
        let r = pso_minimize(&sphere, &cfg, &mut ()).map_err(|e| e.to_string())?;
        all_monotone &= monotone(&r.history);
        if r.best_value < 1e-3 {
            sphere_hits += 1;
        }
        let cfg = PsoConfig::uniform_box(2, -5.0, 5.0, 30, 500, 100 + seed);
        let r = pso_minimize(&rosenbrock, &cfg, &mut ()).map_err(|e| e.to_string())?;
        all_monotone &= monotone(&r.history);
        rosen.push(r.best_value);
    }
    rosen.sort_by(f64::total_cmp);
    let median = 0.5 * (rosen[9] + rosen[10]);
    let secs = started.elapsed().as_secs_f64();
    ensure(
        sphere_hits >= 19 && median < 1e-2 && all_monotone && secs < 30.0,
        format!(
            "sphere-10D {sphere_hits}/20 runs below 1e-3, Rosenbrock-2D median {median:.2e}, \
             histories monotone: {all_monotone}, {secs:.2} s"
        ),
    )
}

fn neural_forward() -> Outcome {
    let bounds = OutputBounds {
        lower: vec![5.0, 7.5, 12.0],
        upper: vec![41.0, 30.0, 40.0],
    };
    let mid: Vec<f64> = bounds
        .lower
        .iter()
        .zip(&bounds.upper)
        .map(|(l, u)| l + 0.5 * (u - l))
        .collect();
    let q = StateMatrix::from_rows(vec![vec![0.3, 0.9, 0.1], vec![0.5, 0.0, 1.0]]);
    let f0 = DecisionRuleParams::zeros(Architecture::Ffnn { hidden: vec![4, 3] }, 2, 3, 3);
    let r0 = DecisionRuleParams::zeros(Architecture::Rnn { hidden: 4 }, 2, 3, 3);
    let zero_ok = ffnn_forward(&f0, &q, &bounds).unwrap() == mid && rnn_forward(&r0, &q, &bounds).unwrap() == mid;

    // One input, one hidden neuron, one output.
    let b1 = OutputBounds { lower: vec![8.0], upper: vec![46.0] };
    let x = 0.7;
    let (w1, c1, w2, c2) = (1.3, -0.4, -2.1, 0.25);
    let ff = DecisionRuleParams::zeros(Architecture::Ffnn { hidden: vec![1] }, 1, 1, 1)
        .with_weights(vec![w1, c1, w2, c2])
        .unwrap();
    let s = |z: f64| 1.0 / (1.0 + (-z).exp());
    let ff_hand = 8.0 + s(w2 * s(w1 * x + c1) + c2) * 38.0;
    let ff_got = ffnn_forward(&ff, &StateMatrix::from_rows(vec![vec![x]]), &b1).unwrap()[0];
    // Recurrent: two time steps, hidden state starts empty.
    let (wi, bh, u, wo, bo) = (0.9, 0.1, -1.7, 2.3, -0.6);
    let rn = DecisionRuleParams::zeros(Architecture::Rnn { hidden: 1 }, 1, 2, 1)
        .with_weights(vec![wi, bh, u, wo, bo])
        .unwrap();
    let (x1, x2) = (0.2, 0.8);
    let h1 = s(wi * x1 + bh);
    let h2 = s(wi * x2 + bh + u * h1);
    let rn_hand = 8.0 + s(wo * h2 + bo) * 38.0;
    let rn_got = rnn_forward(&rn, &StateMatrix::from_rows(vec![vec![x1, x2]]), &b1).unwrap()[0];
    let hand_err = (ff_hand - ff_got).abs().max((rn_hand - rn_got).abs());
    let sig_ok = sigmoid(0.0) == 0.5;

    // Permuting the time columns of the input together with the matching
    // first-layer weight columns leaves an FFNN unchanged.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (sensors, cols, hidden) = (2, 3, 4);
    let base = DecisionRuleParams::zeros(Architecture::Ffnn { hidden: vec![hidden] }, sensors, cols, 3);
    let w: Vec<f64> = (0..base.expected_len())
        .map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0))
        .collect();
    let perm = [2, 0, 1];
    let fan_in = sensors * cols;
    let mut qp = StateMatrix::zeros(sensors, cols);
    let mut wp = w.clone();
    for c in 0..cols {
        for r in 0..sensors {
            qp.set(r, c, q.get(r, perm[c]));
            for j in 0..hidden {
                wp[j * fan_in + c * sensors + r] = w[j * fan_in + perm[c] * sensors + r];
            }
        }
    }
    let a = ffnn_forward(&base.with_weights(w).unwrap(), &q, &bounds).unwrap();
    let b = ffnn_forward(&base.with_weights(wp).unwrap(), &qp, &bounds).unwrap();
    let perm_err = dist(&a, &b);

    // Reversing the column order changes an RNN's output.
    let rnn = DecisionRuleParams::zeros(Architecture::Rnn { hidden: 1 }, 1, 2, 1)
        .with_weights(vec![3.0, -1.0, 2.5, 4.0, -2.0])
        .unwrap();
    let fwd = rnn_forward(&rnn, &StateMatrix::from_rows(vec![vec![0.0, 1.0]]), &b1).unwrap()[0];
    let rev = rnn_forward(&rnn, &StateMatrix::from_rows(vec![vec![1.0, 0.0]]), &b1).unwrap()[0];
    let order_gap = (fwd - rev).abs();

    ensure(
        zero_ok && sig_ok && hand_err <= 1e-12 && perm_err <= 1e-12 && order_gap > 1e-3,
        format!(
            "zero weights give midpoints: {zero_ok}, hand-case error {hand_err:.1e}, \
             FFNN permutation error {perm_err:.1e}, RNN reversed-order gap {order_gap:.3} s"
        ),
    )
}

fn kpi_csv(records: &[ndr_core::harness::KpiRecord], net: &ndr_core::network::TrafficNetwork) -> Vec<u8> {
    let mut buf = Vec::new();
    write_kpi_csv(records, &mut buf).unwrap();
    write_detail_csv(records, net, &mut buf).unwrap();
    buf
}

fn conservation_and_determinism(params: &DecisionRuleParams, spec: &TrainingSpec) -> Outcome {
    let sc = &spec.scenario;
    let mut steps = 0u64;
    for seed in [1, 2, 3, 40, 41] {
        let mut sim = Simulation::new(sc, seed);
        while !sim.is_finished() {
            sim.step(&mut FixedTiming, &mut ()).map_err(|e| e.to_string())?;
            steps += 1;
            if sim.departed() != sim.completed() + sim.in_network() {
                return Err(format!("conservation broken at seed {seed}, t = {}", sim.time()));
            }
        }
    }
    let seeds: Vec<u64> = (500..508).collect();
    let ndr = Control::Ndr { params, window: spec.window };
    let mut identical = true;
    for control in [Control::Fixed, ndr] {
        let first = run_kpis(sc, control, &seeds, ExecMode::Sequential).map_err(|e| e.to_string())?;
        let again = run_kpis(sc, control, &seeds, ExecMode::Sequential).map_err(|e| e.to_string())?;
        let pooled = run_kpis(sc, control, &seeds, ExecMode::Parallel).map_err(|e| e.to_string())?;
        let reference = kpi_csv(&first, &sc.network);
        identical &= reference == kpi_csv(&again, &sc.network) && reference == kpi_csv(&pooled, &sc.network);
    }
    ensure(
        identical,
        format!(
            "departed = completed + in-network over {steps} steps; KPI CSVs bitwise identical across reruns \
             and worker pools: {identical} (parallel build: {})",
            ExecMode::parallel_available()
        ),
    )
}

fn emission_properties(params: &DecisionRuleParams, spec: &TrainingSpec) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut exact = [0.0, 3.0, 12.0, 0.75, 1e-3, 663.27, 1.5e6]
        .iter()
        .all(|&c| convert_carbon_to_co2(c).unwrap() == c * 44.0 / 12.0);
    for _ in 0..1000 {
        let c: f64 = rand::Rng::random_range(&mut rng, 0.0..1e4);
        exact &= convert_carbon_to_co2(c).unwrap() == c * 44.0 / 12.0;
    }
    exact &= convert_carbon_to_co2(12.0).unwrap() == 44.0;

    let f = EmissionFactors::default();
    let (mut idle_ok, mut accel_ok, mut grad_ok) = (true, true, true);
    let speeds: Vec<f64> = (0..=30).map(|k| k as f64).collect();
    let accels: Vec<f64> = (-8..=6).map(|k| k as f64 * 0.5).collect();
    let grads: Vec<f64> = (-8..=8).map(|k| k as f64 * 0.01).collect();
    for class in VehicleClass::ALL {
        let c = f.get(class).unwrap();
        for &v in &speeds {
            for &g in &grads {
                for w in accels.windows(2) {
                    let (lo, hi) = (rates_for(c, v, w[0], g), rates_for(c, v, w[1], g));
                    accel_ok &= hi.fuel >= lo.fuel && hi.carbon >= lo.carbon;
                    idle_ok &= lo.fuel >= c.idle_fuel;
                }
            }
            for &a in &accels {
                for w in grads.windows(2) {
                    grad_ok &= rates_for(c, v, a, w[1]).fuel >= rates_for(c, v, a, w[0]).fuel;
                }
                idle_ok &= rates_for(c, 0.0, a, 0.0).fuel == c.idle_fuel;
            }
        }
    }

    let mut runs = 0;
    let mut bounded = true;
    for seed in [1u64, 2, 3, 4] {
        for control in [Control::Fixed, Control::Ndr { params, window: spec.window }] {
            let r = simulate(&spec.scenario, control, seed).map_err(|e| e.to_string())?;
            let net = r.emissions.network;
            bounded &= r
                .emissions
                .by_junction
                .iter()
                .all(|j| j.co2 <= net.co2 && j.bc <= net.bc && j.pm <= net.pm);
            runs += 1;
        }
    }
    ensure(
        exact && idle_ok && accel_ok && grad_ok && bounded,
        format!(
            "CO2 = carbon x 44/12 exact: {exact}; idle floor: {idle_ok}; accel monotone: {accel_ok}; \
             gradient monotone: {grad_ok}; junction <= network on {runs} runs: {bounded}"
        ),
    )
}

fn training(spec: &TrainingSpec, params: &DecisionRuleParams, secs: f64) -> Outcome {
    let report = evaluate_online(&spec.scenario, params, spec.window, &spec.eval_seeds, spec.exec)
        .map_err(|e| e.to_string())?;
    let worse: Vec<u64> = report
        .baseline
        .iter()
        .zip(&report.candidate)
        .filter(|(b, c)| c.mean_delay > b.mean_delay)
        .map(|(b, _)| b.seed)
        .collect();
    let pct = report.percent.mean_delay;
    ensure(
        pct >= 10.0 && worse.is_empty() && secs < 900.0,
        format!(
            "mean delay {:.1} s -> {:.1} s over {} held-out seeds ({pct:.1}% reduction), \
             seeds worse than baseline: {worse:?}, training {secs:.1} s",
            report.baseline_mean.mean_delay,
            report.candidate_mean.mean_delay,
            report.seeds.len()
        ),
    )
}

fn delay_emission_correlation(spec: &TrainingSpec, params: &DecisionRuleParams) -> Outcome {
    let seeds: Vec<u64> = (3001..3031).chain(spec.eval_seeds.iter().copied()).collect();
    let report = evaluate_online(&spec.scenario, params, spec.window, &seeds, spec.exec)
        .map_err(|e| e.to_string())?;
    let co2 = report.delay_co2.ok_or("delay-CO2 correlation undefined")?;
    let bc = report
        .delay_bc
        .map_or("undefined".to_string(), |c| format!("r = {:.3} (p = {:.3})", c.r, c.p_value));
    ensure(
        co2.r > 0.0 && co2.n >= 30,
        format!(
            "{} paired runs: delay/CO2 reduction r = {:.3} (p = {:.2e}); delay/BC reduction {bc}",
            co2.n, co2.r, co2.p_value
        ),
    )
}

fn demand_sweeps(spec: &TrainingSpec, params: &DecisionRuleParams) -> Outcome {
    let light = ndr_core::network::load_scenario(common::fixture("corridor2_light.scenario")).map_err(|e| e.to_string())?;
    let seeds = &spec.eval_seeds;
    let ndr = Control::Ndr { params, window: spec.window };
    let rows = demand_sweep(&light, ndr, &[1.0, 1.3], seeds, spec.exec).map_err(|e| e.to_string())?;
    let throughput_pp = 100.0 * rows[1].relative.throughput;
    let rows = demand_sweep(&spec.scenario, ndr, &[1.0, 1.3], seeds, spec.exec).map_err(|e| e.to_string())?;
    let delay_ratio = 1.0 + rows[1].relative.mean_delay;
    let baseline_ratio = 1.0 + rows[1].baseline_relative.mean_delay;
    ensure(
        (throughput_pp - 30.0).abs() <= 5.0 && delay_ratio > 1.3,
        format!(
            "undersaturated throughput +{throughput_pp:.1}% at +30% demand; congesting delay ratio \
             {delay_ratio:.2} at factor 1.3 (fixed timing {baseline_ratio:.2})"
        ),
    )
}

fn relocation(spec: &TrainingSpec, objective: &ndr_core::harness::ObjectiveSpec) -> Outcome {
    let layout_a = spec.scenario.network.detectors.clone();
    let layout_b = read_detector_layout(common::fixture("layout_b.toml")).map_err(|e| e.to_string())?;
    let report = sensor_relocation_compare(spec, objective, &layout_a, &layout_b, None).map_err(|e| e.to_string())?;
    let mut csv = Vec::new();
    write_relocation_csv(&report, &mut csv).map_err(|e| e.to_string())?;
    let rows = String::from_utf8_lossy(&csv).lines().count();
    let finite = report.delta.values().iter().all(|v| v.is_finite());
    ensure(
        finite && rows > 1,
        format!(
            "layout A delay {:.1} s ({:.1}% vs fixed), layout B {:.1} s ({:.1}% vs fixed), B-A {:+.1} s; report rows {rows}",
            report.a.candidate_mean.mean_delay,
            report.a.percent.mean_delay,
            report.b.candidate_mean.mean_delay,
            report.b.percent.mean_delay,
            report.delta.mean_delay
        ),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut failed = 0;
    let mut record = |n: usize, outcome: Outcome| {
        match outcome {
            Ok(d) => println!("PASS criterion {n}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {n}: {d}");
            }
        }
    };
    record(1, projection_oracle());
    record(2, dual_equation());
    record(3, pso_benchmarks());
    record(4, neural_forward());

    let spec = match load_training_spec(common::fixture("corridor2.train.toml")) {
        Ok(s) => s,
        Err(e) => {
            for n in 5..=10 {
                record(n, Err(format!("training spec: {e}")));
            }
            return ExitCode::FAILURE;
        }
    };
    let train_start = Instant::now();
    let trained = spec
        .objective_for(None)
        .and_then(|objective| train(&spec, &objective, None, &mut ()));
    let train_secs = train_start.elapsed().as_secs_f64();
    match trained {
        Ok(result) => {
            record(5, conservation_and_determinism(&result.params, &spec));
            record(6, emission_properties(&result.params, &spec));
            record(7, training(&spec, &result.params, train_secs));
            record(8, delay_emission_correlation(&spec, &result.params));
            record(9, demand_sweeps(&spec, &result.params));
            record(10, relocation(&spec, &result.objective));
        }
        Err(e) => {
            for n in 5..=10 {
                record(n, Err(format!("training failed: {e}")));
            }
        }
    }
    println!("{} of 10 criteria passed in {:.1} s", 10 - failed, started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
