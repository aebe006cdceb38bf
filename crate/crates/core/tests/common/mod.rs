//! Slow, independent reference computations. Each check returns a
//! description of the first disagreement.

use morl_core::env::{Environment, TabularMdp};
use morl_core::indicators::hypervolume;
use morl_core::moq::{self, EpsilonSchedule, MoqConfig};
use morl_core::pql::{self, PqlConfig, SetEvaluation, DEFAULT_STATE_CAP};
use morl_core::rng::stream_rng;
use morl_core::scalarise::{ScalariserKind, WeightVector};
use morl_core::{nondominated_filter, ObjectiveVector};
use rand::Rng;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ov(v: &[f64]) -> ObjectiveVector {
    ObjectiveVector::new(v.iter().copied()).unwrap()
}

fn weakly_better(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

/// Pairwise quadratic filter with bitwise dedup.
fn brute_nondominated(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut keep: Vec<Vec<f64>> = Vec::new();
    for p in points {
        let dominated = points
            .iter()
            .any(|q| weakly_better(q, p) && q.iter().zip(p).any(|(x, y)| x > y));
        if !dominated && !keep.contains(p) {
            keep.push(p.clone());
        }
    }
    keep.sort_by(|a, b| a.partial_cmp(b).unwrap());
    keep
}

pub fn nondominated_filter_matches_pairwise_filter() -> Result<(), String> {
    let mut rng = stream_rng(7, 0);
    for _ in 0..1000 {
        let dim = rng.gen_range(1..=4);
        let n = rng.gen_range(0..=40);
        // Small integer grid so ties and duplicates are common.
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-3..=3) as f64).collect())
            .collect();
        let vecs: Vec<ObjectiveVector> = pts.iter().map(|p| ov(p)).collect();
        let got: Vec<Vec<f64>> = nondominated_filter(&vecs)
            .unwrap()
            .iter()
            .map(|p| p.values().to_vec())
            .collect();
        let mut got_sorted = got.clone();
        got_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ensure!(got_sorted == brute_nondominated(&pts), "filter disagrees on {pts:?}");
    }
    Ok(())
}

/// Union volume by inclusion-exclusion over every subset of boxes.
fn inclusion_exclusion(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let mut corner: Vec<f64> = vec![f64::INFINITY; reference.len()];
        for (i, p) in points.iter().enumerate() {
            if mask & (1 << i) != 0 {
                for (c, v) in corner.iter_mut().zip(p) {
                    *c = c.min(*v);
                }
            }
        }
        let vol: f64 = corner
            .iter()
            .zip(reference)
            .map(|(c, r)| (c - r).max(0.0))
            .product();
        if mask.count_ones() % 2 == 1 {
            total += vol;
        } else {
            total -= vol;
        }
    }
    total
}

pub fn two_d_hypervolume_matches_inclusion_exclusion() -> Result<(), String> {
    let mut rng = stream_rng(11, 0);
    let reference = [0.0, 0.0];
    for n in 1..=12 {
        for _ in 0..150 {
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.gen_range(-2..=10) as f64, rng.gen_range(-2..=10) as f64])
                .collect();
            let vecs: Vec<ObjectiveVector> = pts.iter().map(|p| ov(p)).collect();
            let exact = inclusion_exclusion(&pts, &reference);
            let got = hypervolume(&vecs, &ov(&reference)).unwrap();
            ensure!((got - exact).abs() < 1e-9, "{pts:?}: {got} vs {exact}");
        }
    }
    Ok(())
}

pub fn three_d_hypervolume_matches_inclusion_exclusion() -> Result<(), String> {
    let mut rng = stream_rng(12, 0);
    let reference = [-1.0, -1.0, -1.0];
    for n in 1..=10 {
        for _ in 0..100 {
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.gen_range(-1.5..5.0)).collect())
                .collect();
            let vecs: Vec<ObjectiveVector> = pts.iter().map(|p| ov(p)).collect();
            let exact = inclusion_exclusion(&pts, &reference);
            let got = hypervolume(&vecs, &ov(&reference)).unwrap();
            ensure!((got - exact).abs() < 1e-9 * exact.max(1.0), "{pts:?}: {got} vs {exact}");
        }
    }
    Ok(())
}

pub fn three_d_hypervolume_agrees_with_monte_carlo() -> Result<(), String> {
    let mut rng = stream_rng(13, 0);
    let reference = [0.0, 0.0, 0.0];
    let samples = 1_000_000;
    for n in 1..=8 {
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.gen_range(0.1..1.0)).collect())
            .collect();
        let vecs: Vec<ObjectiveVector> = pts.iter().map(|p| ov(p)).collect();
        let exact = hypervolume(&vecs, &ov(&reference)).unwrap();
        let mut hits = 0u64;
        for _ in 0..samples {
            let x: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
            if pts.iter().any(|p| p.iter().zip(&x).all(|(pv, xv)| xv <= pv)) {
                hits += 1;
            }
        }
        // Sampling the unit cube, so the estimate is the hit fraction.
        let frac = hits as f64 / samples as f64;
        let se = (frac * (1.0 - frac) / samples as f64).sqrt();
        ensure!(
            (frac - exact).abs() <= 3.0 * se,
            "n={n}: exact {exact}, estimate {frac} (se {se})"
        );
    }
    Ok(())
}

/// Every simple-path return from `state`, composed backwards as
/// `r + gamma * rest`.
fn path_returns(mdp: &TabularMdp, actions: usize, state: usize, gamma: f64, visited: &mut Vec<bool>) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    visited[state] = true;
    for a in 0..actions {
        let (next, reward, terminal) = mdp.transition(state, a).clone();
        if terminal {
            out.push(reward.values().to_vec());
        } else if !visited[next] {
            for rest in path_returns(mdp, actions, next, gamma, visited) {
                out.push(reward.iter().zip(&rest).map(|(r, v)| r + gamma * v).collect());
            }
        }
    }
    visited[state] = false;
    out
}

fn pql_matches_enumeration(mdp: TabularMdp, gamma: f64, reference: &[f64], steps: usize) -> Result<(), String> {
    let spec = mdp.spec().clone();
    let start = mdp.start();
    let mut visited = vec![false; spec.state_count];
    let all = path_returns(&mdp, spec.action_count, start, gamma, &mut visited);
    let expected = brute_nondominated(&all);
    ensure!(expected.len() >= 3, "oracle front too small to be informative: {expected:?}");

    let config = PqlConfig {
        gamma,
        total_timesteps: steps,
        schedule: EpsilonSchedule::default(),
        set_eval: SetEvaluation::hypervolume(ov(reference)),
        eval_interval: steps,
        state_cap: DEFAULT_STATE_CAP,
    };
    let mut env = mdp;
    let run = pql::train(&mut env, &config, 42).unwrap();
    let mut got: Vec<Vec<f64>> = run.agent.front(start).unwrap().iter().map(|p| p.values().to_vec()).collect();
    got.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ensure!(got.len() == expected.len(), "got {got:?}, expected {expected:?}");
    for (g, e) in got.iter().zip(&expected) {
        for (x, y) in g.iter().zip(e) {
            ensure!((x - y).abs() < 1e-12, "got {got:?}, expected {expected:?}");
        }
    }
    Ok(())
}

fn step(next: usize, reward: &[f64], terminal: bool) -> (usize, ObjectiveVector, bool) {
    (next, ov(reward), terminal)
}

pub fn pql_front_equals_enumeration_on_branching_chain() -> Result<(), String> {
    // 0 -> {1, 2}; 1 -> {3, exit(2,-1)}; 2 -> {3, exit(1,0)}; 3 -> {exit(5,-3), exit(0,0)}
    let table = vec![
        step(1, &[0.0, -1.0], false),
        step(2, &[0.0, 0.0], false),
        step(3, &[0.0, -1.0], false),
        step(4, &[2.0, -1.0], true),
        step(3, &[1.0, -2.0], false),
        step(4, &[1.0, 0.0], true),
        step(4, &[5.0, -3.0], true),
        step(4, &[0.0, 0.0], true),
        step(4, &[0.0, 0.0], true),
        step(4, &[0.0, 0.0], true),
    ];
    let mdp = TabularMdp::new(5, 2, 0, table).unwrap();
    pql_matches_enumeration(mdp, 0.9, &[-10.0, -10.0], 20_000)
}

pub fn pql_front_equals_enumeration_on_three_objective_dag() -> Result<(), String> {
    // Ten states in layers; three actions each, rewards on the three shapes.
    let mut table = Vec::new();
    let layer = |s: usize| match s {
        0 => 0,
        1..=3 => 1,
        4..=6 => 2,
        7..=8 => 3,
        _ => 4,
    };
    for s in 0..10 {
        for a in 0..3 {
            let mut r = [0.0; 3];
            r[(s + a) % 3] = 1.0 + ((s * 7 + a * 3) % 4) as f64;
            let entry = match layer(s) {
                0 => step(1 + a, &r, false),
                1 => step(4 + (s + a) % 3, &r, false),
                2 => {
                    if a == 2 {
                        step(9, &r, true)
                    } else {
                        step(7 + (s + a) % 2, &r, false)
                    }
                }
                3 => step(9, &r, true),
                _ => step(9, &[0.0, 0.0, 0.0], true),
            };
            table.push(entry);
        }
    }
    let mdp = TabularMdp::new(10, 3, 0, table).unwrap();
    pql_matches_enumeration(mdp, 0.95, &[-1.0, -1.0, -1.0], 40_000)
}

pub fn pql_front_equals_enumeration_on_small_treasure_grid() -> Result<(), String> {
    // 4x4 grid, step cost on objective 2, treasures on the bottom row that
    // end the episode. Revisiting a cell only adds cost and delay, so
    // simple paths cover the front.
    let (rows, cols) = (4usize, 4usize);
    let treasure = |r: usize, c: usize| -> Option<f64> {
        match (r, c) {
            (1, 0) => Some(1.0),
            (3, 1) => Some(4.0),
            (2, 2) => Some(3.0),
            (3, 3) => Some(9.0),
            _ => None,
        }
    };
    let mut table = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            for a in 0..4 {
                let (nr, nc) = match a {
                    0 => (r.saturating_sub(1), c),
                    1 => ((r + 1).min(rows - 1), c),
                    2 => (r, c.saturating_sub(1)),
                    _ => (r, (c + 1).min(cols - 1)),
                };
                let entry = match treasure(nr, nc) {
                    _ if treasure(r, c).is_some() => step(r * cols + c, &[0.0, 0.0], true),
                    Some(v) => step(nr * cols + nc, &[v, -1.0], true),
                    None => step(nr * cols + nc, &[0.0, -1.0], false),
                };
                table.push(entry);
            }
        }
    }
    let mdp = TabularMdp::new(rows * cols, 4, 0, table).unwrap();
    pql_matches_enumeration(mdp, 0.9, &[0.0, -20.0], 60_000)
}

/// Scalar tabular Q-learning with the same random draws as the vector agent.
pub fn single_objective_moq_is_scalar_q_learning() -> Result<(), String> {
    let table = vec![
        step(1, &[0.0], false),
        step(2, &[1.0], false),
        step(2, &[-1.0], false),
        step(0, &[3.0], true),
        step(0, &[0.5], false),
        step(2, &[2.0], true),
    ];
    let mdp = TabularMdp::new(3, 2, 0, table.clone()).unwrap();
    let steps = 5_000;
    let schedule = EpsilonSchedule::new(1.0, 0.1, 0.5).unwrap();
    let config = MoqConfig {
        alpha: 0.1,
        gamma: 0.95,
        total_timesteps: steps,
        scalariser: ScalariserKind::Linear,
        weights: WeightVector::new([1.0]).unwrap(),
        tau: 0.0,
        schedule,
        eval_interval: 1000,
    };
    let mut env = mdp.clone();
    let mut eval_env = mdp;
    let stream = 3;
    let run = moq::train(&mut env, &mut eval_env, &config, 42, stream).unwrap();

    let mut rng = stream_rng(42, 2 * stream);
    let argmax = |row: &[f64], rng: &mut rand_chacha::ChaCha8Rng| -> usize {
        let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..row.len()).filter(|&a| row[a] == best).collect();
        if tied.len() == 1 {
            tied[0]
        } else {
            tied[rng.gen_range(0..tied.len())]
        }
    };
    let mut q = [[0.0f64; 2]; 3];
    let mut s = 0usize;
    for t in 0..steps {
        let eps = schedule.at(t, steps);
        let a = if rng.gen::<f64>() < eps {
            rng.gen_range(0..2)
        } else {
            argmax(&q[s], &mut rng)
        };
        let (next, r, done) = &table[s * 2 + a];
        let target = if *done {
            r[0]
        } else {
            let b = argmax(&q[*next], &mut rng);
            r[0] + 0.95 * q[*next][b]
        };
        q[s][a] += 0.1 * (target - q[s][a]);
        s = if *done { 0 } else { *next };
    }
    let flat: Vec<f64> = q.iter().flatten().copied().collect();
    ensure!(run.agent.table().as_slice() == flat.as_slice(), "Q-tables differ");
    Ok(())
}
