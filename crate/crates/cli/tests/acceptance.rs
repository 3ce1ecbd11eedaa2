//! End-to-end acceptance checks, one line of output per criterion.

use std::fs;
use std::process::Command;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand_distr_free::complex_normal;

use crossfield::calibration::{fit_threshold, sweep_offline};
use crossfield::channel::{gen_full_channel, relative_frobenius_error};
use crossfield::config::{Profile, RunConfig};
use crossfield::harness::{calibrate, coherence_time, run_metric_sweep, run_online};
use crossfield::hmm::viterbi;
use crossfield::metric::compute_eta;
use crossfield::rng::{stream, Purpose};
use crossfield::{
    ArrayConfig, ChannelModel, DecisionMethod, HmmModel, MeasurementSet, Observation, PathSet, Region, Vec3,
};

mod rand_distr_free {
    use crossfield::Complex64;
    use rand::Rng;

    /// Box-Muller draw from CN(0, 1).
    pub fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
        let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        let v: f64 = rng.random();
        Complex64::from_polar((-u.ln()).sqrt(), 2.0 * std::f64::consts::PI * v)
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c1_coherence_time() -> Outcome {
    let t = coherence_time(1.0, 0.3e12).unwrap();
    let rel = (t - 0.4231e-3).abs() / 0.4231e-3;
    outcome(rel <= 5e-3, format!("T_coh = {:.5} ms, relative deviation {rel:.2e}", t * 1e3))
}

fn random_set<R: Rng>(rng: &mut R) -> MeasurementSet {
    let q = rng.random_range(2..=8);
    let k = rng.random_range(1..=4);
    let (mr, mt) = (rng.random_range(1..=6), rng.random_range(1..=6));
    let blocks = (0..q * k).map(|_| Array2::from_shape_simple_fn((mr, mt), || complex_normal(rng))).collect();
    MeasurementSet::from_blocks(q, k, blocks, 1.0, 0.0).unwrap()
}

fn c2_metric_bounds() -> Outcome {
    let mut rng = stream(2024, Purpose::Realization, &[2]);
    let (mut out_of_range, mut dup_nonzero, mut worst_scale) = (0, 0, 0.0f64);
    for _ in 0..1000 {
        let ms = random_set(&mut rng);
        let eta = compute_eta(&ms).unwrap();
        if !(0.0..=2.0).contains(&eta) {
            out_of_range += 1;
        }
        let factor = crossfield::Complex64::from_polar(10f64.powf(rng.random_range(-3.0..3.0)), rng.random_range(-3.0..3.0));
        let scaled = compute_eta(&ms.map_entries(|z| z * factor)).unwrap();
        worst_scale = worst_scale.max((scaled - eta).abs() / eta);

        let k = ms.num_subcarriers();
        let dup: Vec<_> = (0..ms.num_rx_sas()).flat_map(|_| (0..k).map(|kk| ms.block(0, kk).clone())).collect();
        let dup = MeasurementSet::from_blocks(ms.num_rx_sas(), k, dup, 1.0, 0.0).unwrap();
        if compute_eta(&dup).unwrap() != 0.0 {
            dup_nonzero += 1;
        }
    }
    outcome(
        out_of_range == 0 && dup_nonzero == 0 && worst_scale <= 1e-12,
        format!(
            "1000 sets: {out_of_range} outside [0, 2], {dup_nonzero} nonzero duplicates, \
             worst scaling deviation {worst_scale:.1e}"
        ),
    )
}

fn c3_cross_field_premise() -> Outcome {
    let cfg = RunConfig::profile(Profile::Desk);
    let scenario = cfg.scenario().unwrap();
    assert_eq!(scenario.system.num_paths, 3);
    let distances = [0.5, 2.0, 8.0, 32.0, 128.0];
    let rows = run_metric_sweep(&scenario, &distances, &[20.0], 5, 20, cfg.seed).unwrap();
    let med: Vec<f64> = rows.iter().map(|r| r.q50_eta).collect();
    let decreasing = med.windows(2).all(|w| w[0] > w[1]);
    let ratio = med[0] / med[med.len() - 1];
    let listed: Vec<String> = distances.iter().zip(&med).map(|(d, m)| format!("{d} m: {m:.4}")).collect();
    outcome(
        decreasing && ratio >= 5.0,
        format!("median η {}; ratio {ratio:.1}", listed.join(", ")),
    )
}

fn c4_model_convergence() -> Outcome {
    let sys = crossfield::SystemConfig::new(0.3e12, 10e9, 4, 1);
    let spacing = crossfield::SPEED_OF_LIGHT / 0.3e12 / 2.0;
    let tx = ArrayConfig::contiguous(4, 64, spacing);
    let errs: Vec<f64> = [1.0, 5.0, 25.0, 125.0]
        .iter()
        .map(|&d| {
            let rx = ArrayConfig::contiguous(4, 16, spacing).with_center(Vec3::new(d, 0.0, 0.0));
            let paths = PathSet::line_of_sight();
            let swm = gen_full_channel(&sys, &tx, &rx, &paths, ChannelModel::Swm).unwrap();
            let hsp = gen_full_channel(&sys, &tx, &rx, &paths, ChannelModel::Hspwm).unwrap();
            relative_frobenius_error(&swm, &hsp).unwrap()
        })
        .collect();
    let monotone = errs.windows(2).all(|w| w[0] > w[1]);
    let factor = errs[0] / errs[3];
    outcome(
        monotone && factor >= 10.0,
        format!("errors at 1/5/25/125 m: {:.3e}, {:.3e}, {:.3e}, {:.3e}; factor {factor:.0}", errs[0], errs[1], errs[2], errs[3]),
    )
}

fn random_row<R: Rng>(rng: &mut R, lattice: bool) -> [f64; 2] {
    let p = if lattice { rng.random_range(1..=3) as f64 / 4.0 } else { rng.random_range(1e-6..1.0) };
    [p, 1.0 - p]
}

fn path_probability(m: &HmmModel, s: &[Region], o: &[Observation]) -> f64 {
    let mut p = m.initial(s[0]) * m.emission(s[0], o[0]);
    for t in 1..o.len() {
        p *= m.transition(s[t - 1], s[t]) * m.emission(s[t], o[t]);
    }
    p
}

/// Exhaustive search; among paths within 1e-9 of the best probability the
/// one preferring Near at the last step, then the one before, and so on.
fn oracle(m: &HmmModel, o: &[Observation]) -> (Vec<Region>, f64) {
    let t = o.len();
    let paths: Vec<(Vec<Region>, f64)> = (0..1usize << t)
        .map(|bits| {
            let s: Vec<Region> = (0..t).map(|i| Region::from_index((bits >> i) & 1)).collect();
            let p = path_probability(m, &s, o);
            (s, p)
        })
        .collect();
    let best = paths.iter().map(|p| p.1).fold(0.0, f64::max);
    let chosen = paths
        .into_iter()
        .filter(|(_, p)| *p >= best * (1.0 - 1e-9))
        .min_by_key(|(s, _)| s.iter().rev().map(|r| r.index()).collect::<Vec<_>>())
        .unwrap();
    (chosen.0, best)
}

fn c5_viterbi_exactness() -> Outcome {
    let mut rng = stream(5, Purpose::HmmTraining, &[5]);
    let (mut sequences, mut prob_mismatch, mut path_mismatch) = (0usize, 0usize, 0usize);
    for i in 0..20 {
        let lattice = i % 2 == 1;
        let m = HmmModel::new(
            [random_row(&mut rng, lattice), random_row(&mut rng, lattice)],
            [random_row(&mut rng, lattice), random_row(&mut rng, lattice)],
            random_row(&mut rng, lattice),
        )
        .unwrap();
        for t in 1..=8 {
            for bits in 0..1usize << t {
                let o: Vec<Observation> =
                    (0..t).map(|j| if (bits >> j) & 1 == 0 { Observation::Swm } else { Observation::Hspwm }).collect();
                let path = viterbi(&m, &o).unwrap();
                let (expected, best) = oracle(&m, &o);
                let got = path_probability(&m, &path, &o);
                sequences += 1;
                if (got - best).abs() > 1e-9 * best {
                    prob_mismatch += 1;
                }
                if path != expected {
                    path_mismatch += 1;
                }
            }
        }
    }
    outcome(
        prob_mismatch == 0 && path_mismatch == 0,
        format!("{sequences} sequences over 20 models: {prob_mismatch} suboptimal, {path_mismatch} tie-break mismatches"),
    )
}

fn c6_calibration_separability() -> Outcome {
    let cfg = RunConfig::profile(Profile::Desk);
    let scenario = cfg.scenario().unwrap();
    let (r, e) = (cfg.r_offline, cfg.e_offline);
    let train = sweep_offline(&scenario, &cfg.offline_distances, r, e, 30.0, cfg.seed).unwrap();
    let model = fit_threshold(&train, 10.0).unwrap();
    let held_out = sweep_offline(&scenario, &cfg.offline_distances, r, e, 30.0, cfg.seed + 1000).unwrap();
    let ba = model.evaluate(&held_out).unwrap();
    outcome(
        ba >= 0.9,
        format!(
            "gamma {:.4}; balanced accuracy {:.4} on training, {ba:.4} held out ({} samples each)",
            model.gamma,
            model.balanced_accuracy,
            held_out.len()
        ),
    )
}

fn c7_success_ordering() -> Outcome {
    let mut cfg = RunConfig::profile(Profile::Desk);
    cfg.snr_db = vec![-10.0, 0.0, 10.0];
    cfg.r_online = 5;
    cfg.e_online = 10;
    cfg.window = 4;
    let scenario = cfg.scenario().unwrap();
    let cal = calibrate(&scenario, &cfg.calibration_plan().unwrap(), cfg.seed).unwrap();
    let plan = cfg.online_plan().unwrap();
    let out = run_online(&scenario, &plan, &cal.thresholds, &cal.hmms, cfg.seed).unwrap();
    let rate = |snr: f64, region, method| out.result.rate(snr, region, method).unwrap_or(f64::NAN);

    let mut table = Vec::new();
    for &snr in &cfg.snr_db {
        for region in Region::ALL {
            table.push(format!(
                "{snr} dB {}: single {:.3}, majority {:.3}, hmm {:.3}",
                region.as_str(),
                rate(snr, region, DecisionMethod::Single),
                rate(snr, region, DecisionMethod::Majority),
                rate(snr, region, DecisionMethod::Hmm)
            ));
        }
    }
    let lowest = cfg.snr_db.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = Region::ALL.iter().all(|&region| {
        let s = rate(lowest, region, DecisionMethod::Single);
        let m = rate(lowest, region, DecisionMethod::Majority);
        let h = rate(lowest, region, DecisionMethod::Hmm);
        h >= m && m >= s && h - s >= 0.02
    });
    outcome(pass, format!("{} steps per trajectory; {}", plan.trajectory.num_steps(), table.join("; ")))
}

fn c8_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("desk.toml");
    fs::write(&cfg, "snr_db = [20.0]\nhmm_trajectories = 4\n").unwrap();
    let mut csvs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("out{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_crossfield"))
            .args(["calibrate", "--profile", "desk", "--config", cfg.to_str().unwrap()])
            .args(["--out", out.to_str().unwrap(), "--seed", "77", "--threads", threads])
            .output()
            .unwrap();
        if !status.status.success() {
            return outcome(false, format!("calibrate failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        csvs.push(fs::read(out.join("offline_samples.csv")).unwrap());
    }
    outcome(
        csvs[0] == csvs[1] && !csvs[0].is_empty(),
        format!("offline_samples.csv with 1 and 4 threads: {} and {} bytes, identical = {}", csvs[0].len(), csvs[1].len(), csvs[0] == csvs[1]),
    )
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Check; 8] = [
        ("coherence time", c1_coherence_time),
        ("metric bounds and degeneracies", c2_metric_bounds),
        ("cross-field premise", c3_cross_field_premise),
        ("model convergence", c4_model_convergence),
        ("viterbi exactness", c5_viterbi_exactness),
        ("calibration separability", c6_calibration_separability),
        ("success-rate ordering at the lowest SNR", c7_success_ordering),
        ("determinism across thread counts", c8_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = format!("{}", i + 1);
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {id} {}: {name} ({:.1} s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
